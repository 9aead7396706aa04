#include "bpre/spectral.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bpre {

namespace {

std::vector<std::vector<bool>> bool_mul(const std::vector<std::vector<bool>>& a,
                                        const std::vector<std::vector<bool>>& b) {
    const std::size_t d = a.size();
    std::vector<std::vector<bool>> c(d, std::vector<bool>(d, false));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k)
            if (a[i][k])
                for (std::size_t j = 0; j < d; ++j)
                    if (b[k][j]) c[i][j] = true;
    return c;
}

}  // namespace

int primitivity_witness(const Matrix& p) {
    const std::size_t d = p.rows();
    const int bound = static_cast<int>((d - 1) * (d - 1) + 1);  // Wielandt
    std::vector<std::vector<bool>> b(d, std::vector<bool>(d, false));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) b[i][j] = p(i, j) > 0.0;
    auto pw = b;
    for (int k = 1; k <= bound; ++k) {
        bool all = true;
        for (const auto& row : pw)
            for (bool v : row) all = all && v;
        if (all) return k;
        pw = bool_mul(pw, b);
    }
    return -1;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::critical: return "critical";
        case Regime::strongly_subcritical: return "strongly-subcritical";
        case Regime::intermediately_subcritical: return "intermediately-subcritical";
        case Regime::weakly_subcritical: return "weakly-subcritical";
        case Regime::supercritical: return "supercritical";
    }
    return "?";
}

Matrix transfer_matrix(const EnvironmentModel& model, double lambda) {
    const std::size_t d = model.size();
    Matrix m(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        const double w = std::exp(lambda * model.rho[j]);
        for (std::size_t i = 0; i < d; ++i) m(i, j) = model.P(i, j) * w;
    }
    return m;
}

SpectralDecomposition perron(const Matrix& m, double tol, int max_iter) {
    const std::size_t d = m.rows();
    if (d == 0 || m.cols() != d) throw std::invalid_argument("perron: matrix must be square");
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (m(i, j) < 0.0)
                throw std::invalid_argument("perron: negative entry at (" + std::to_string(i) +
                                            "," + std::to_string(j) + ")");
    if (primitivity_witness(m) < 0)
        throw std::invalid_argument("perron: matrix is not primitive");

    Vec v(d, 1.0 / static_cast<double>(d));
    Vec nu(d, 1.0 / static_cast<double>(d));
    double k = 0.0, res = 0.0, res_prev = -1.0;
    double factor = 0.0;  // running geometric estimate of res_t / res_{t-1}
    int factor_n = 0;

    int it = 0;
    for (; it < max_iter; ++it) {
        Vec w = apply(m, v);
        Vec l = apply_left(nu, m);
        k = dot(nu, w) / dot(nu, v);
        double rv = 0.0, rn = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            rv = std::max(rv, std::abs(w[i] - k * v[i]));
            rn = std::max(rn, std::abs(l[i] - k * nu[i]));
        }
        res = std::max(rv / (k * linf_norm(v)), rn / (k * linf_norm(nu)));
        if (res_prev > 0.0 && res > 0.0 && res < res_prev) {
            factor += std::log(res / res_prev);
            ++factor_n;
        }
        res_prev = res;
        const double sw = sum(w), sl = sum(l);
        for (std::size_t i = 0; i < d; ++i) {
            v[i] = w[i] / sw;
            nu[i] = l[i] / sl;
        }
        if (res <= tol) break;
    }
    if (res > tol)
        throw std::runtime_error("perron: no convergence after " + std::to_string(max_iter) +
                                 " iterations, residual " + std::to_string(res));

    SpectralDecomposition out;
    out.k = dot(nu, apply(m, v)) / dot(nu, v);
    const double sn = sum(nu);
    for (auto& x : nu) x /= sn;
    const double nv = dot(nu, v);
    for (auto& x : v) x /= nv;
    out.v = std::move(v);
    out.nu = std::move(nu);
    // final residuals with the refined eigenvalue
    {
        Vec w = apply(m, out.v);
        Vec l = apply_left(out.nu, m);
        double rv = 0.0, rn = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            rv = std::max(rv, std::abs(w[i] - out.k * out.v[i]));
            rn = std::max(rn, std::abs(l[i] - out.k * out.nu[i]));
        }
        out.residual = std::max(rv / (out.k * linf_norm(out.v)), rn / (out.k * linf_norm(out.nu)));
    }
    if (factor_n > 0) {
        const double f = std::exp(factor / factor_n);
        out.gap = std::min(1.0, std::max(1.0 - f, 1e-16));
    } else {
        out.gap = 1.0;  // converged immediately (rank-one or 1x1)
    }
    return out;
}

TiltedChain tilted_chain(const EnvironmentModel& model, double lambda) {
    const std::size_t d = model.size();
    const Matrix pl = transfer_matrix(model, lambda);
    const SpectralDecomposition sd = perron(pl);
    TiltedChain tc;
    tc.lambda = lambda;
    tc.rho = model.rho;
    tc.k = sd.k;
    tc.v = sd.v;
    tc.kernel = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            tc.kernel(i, j) = pl(i, j) * sd.v[j] / (sd.k * sd.v[i]);
    tc.stat.resize(d);
    for (std::size_t i = 0; i < d; ++i) tc.stat[i] = sd.nu[i] * sd.v[i];
    tc.dual = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            tc.dual(i, j) = tc.stat[j] * tc.kernel(j, i) / tc.stat[i];
    return tc;
}

double asymptotic_variance(const Matrix& kernel, const Vec& f) {
    const std::size_t d = kernel.rows();
    const Vec pi = stationary(kernel);
    const double mean = dot(pi, f);
    Vec fbar(d);
    for (std::size_t i = 0; i < d; ++i) fbar[i] = f[i] - mean;

    double var0 = 0.0;
    for (std::size_t i = 0; i < d; ++i) var0 += pi[i] * fbar[i] * fbar[i];
    if (var0 == 0.0) return 0.0;  // constant f

    // closed form through the fundamental matrix: solve (I - kernel + 1 pi) x = fbar
    Matrix a(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            a(i, j) = (i == j ? 1.0 : 0.0) - kernel(i, j) + pi[j];
    Vec x;
    try {
        x = solve(a, fbar);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string("asymptotic_variance: fundamental system: ") +
                                 e.what());
    }
    double cross = 0.0;
    for (std::size_t i = 0; i < d; ++i) cross += pi[i] * fbar[i] * (x[i] - fbar[i]);
    const double closed = var0 + 2.0 * cross;

    // autocovariance series sum_{n>=1} pi(fbar .* kernel^n fbar)
    Vec w = fbar;
    double series = 0.0;
    for (int n = 1; n <= 1000000; ++n) {
        w = apply(kernel, w);
        double t = 0.0;
        for (std::size_t i = 0; i < d; ++i) t += pi[i] * fbar[i] * w[i];
        series += t;
        if (std::abs(t) < 1e-14) break;
    }
    const double summed = var0 + 2.0 * series;
    if (std::abs(closed - summed) > 1e-10)
        throw std::runtime_error("asymptotic_variance: closed form and series disagree by " +
                                 std::to_string(std::abs(closed - summed)));
    return closed;
}

KDerivatives K_derivatives(const EnvironmentModel& model, double lambda) {
    const std::size_t d = model.size();
    const Matrix pl = transfer_matrix(model, lambda);
    const SpectralDecomposition sd = perron(pl);
    KDerivatives kd;
    kd.K = std::log(sd.k);
    kd.Kp = 0.0;
    for (std::size_t i = 0; i < d; ++i) kd.Kp += sd.nu[i] * sd.v[i] * model.rho[i];
    if (d == 1) {
        kd.Kpp = 0.0;  // deterministic walk
        return kd;
    }
    Matrix kernel(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            kernel(i, j) = pl(i, j) * sd.v[j] / (sd.k * sd.v[i]);
    kd.Kpp = asymptotic_variance(kernel, model.rho);
    return kd;
}

namespace {

double kprime_at(const EnvironmentModel& model, double lambda) {
    const Matrix pl = transfer_matrix(model, lambda);
    const SpectralDecomposition sd = perron(pl);
    double s = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) s += sd.nu[i] * sd.v[i] * model.rho[i];
    return s;
}

}  // namespace

double critical_point(const EnvironmentModel& model, double tol) {
    const double kp0 = kprime_at(model, 0.0);
    const double kp1 = kprime_at(model, 1.0);
    if (!(kp0 < 0.0 && kp1 > 0.0))
        throw std::invalid_argument("critical_point: requires K'(0) < 0 < K'(1) (got K'(0)=" +
                                    std::to_string(kp0) + ", K'(1)=" + std::to_string(kp1) + ")");
    double lo = 0.0, hi = 1.0, mid = 0.5;
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double kp = kprime_at(model, mid);
        if (std::abs(kp) <= tol) return mid;
        if (kp < 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-17) break;
    }
    const double kp = kprime_at(model, mid);
    if (std::abs(kp) > tol)
        throw std::runtime_error("critical_point: bisection stalled at |K'| = " +
                                 std::to_string(std::abs(kp)));
    return mid;
}

RegimeReport classify(const EnvironmentModel& model, double tol) {
    RegimeReport rep;
    rep.tol = tol;
    const KDerivatives kd0 = K_derivatives(model, 0.0);
    const KDerivatives kd1 = K_derivatives(model, 1.0);
    rep.Kp0 = kd0.Kp;
    rep.Kp1 = kd1.Kp;
    if (std::abs(kd0.Kp) <= tol) {
        rep.regime = Regime::critical;
        rep.k_rate = 1.0;
        rep.sigma2 = kd0.Kpp;
    } else if (kd0.Kp > tol) {
        rep.regime = Regime::supercritical;
        rep.k_rate = 1.0;
        rep.sigma2 = kd0.Kpp;
    } else if (kd1.Kp < -tol) {
        rep.regime = Regime::strongly_subcritical;
        rep.k_rate = std::exp(kd1.K);
        rep.sigma2 = kd1.Kpp;
    } else if (std::abs(kd1.Kp) <= tol) {
        rep.regime = Regime::intermediately_subcritical;
        rep.k_rate = std::exp(kd1.K);
        rep.sigma2 = kd1.Kpp;
    } else {
        rep.regime = Regime::weakly_subcritical;
        const double ls = critical_point(model);
        rep.lambda_star = ls;
        const KDerivatives kds = K_derivatives(model, ls);
        rep.k_rate = std::exp(kds.K);
        rep.sigma2 = kds.Kpp;
    }
    return rep;
}

}  // namespace bpre
