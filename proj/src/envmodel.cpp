#include "bpre/envmodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bpre/spectral.hpp"

namespace bpre {

namespace {

constexpr double kRowSumTol = 1e-12;

// Euclid on reals; returns 0 when the inputs are non-commensurable at tol
double real_gcd(double a, double b, double tol) {
    a = std::abs(a);
    b = std::abs(b);
    for (int it = 0; it < 200 && b > tol; ++it) {
        const double r = std::fmod(a, b);
        a = b;
        // fmod can land within rounding of b itself; snap that to 0
        b = (std::min(r, b - r) <= tol) ? 0.0 : r;
    }
    return (a > tol) ? a : 0.0;
}

// collects (rho-sum, length) of every simple cycle of length <= d
void enumerate_simple_cycles(const Matrix& p, const Vec& rho,
                             std::vector<std::pair<double, int>>& out) {
    const int d = static_cast<int>(p.rows());
    std::vector<int> path;
    std::vector<bool> on_path(d, false);
    // cycles are rooted at their smallest state to avoid duplicates
    auto dfs = [&](auto&& self, int root, int v, double s) -> void {
        path.push_back(v);
        on_path[v] = true;
        for (int w = 0; w < d; ++w) {
            if (p(v, w) <= 0.0) continue;
            if (w == root)
                out.emplace_back(s + rho[v], static_cast<int>(path.size()));
            else if (w > root && !on_path[w] && static_cast<int>(path.size()) < d)
                self(self, root, w, s + rho[v]);
        }
        on_path[v] = false;
        path.pop_back();
    };
    for (int root = 0; root < d; ++root) dfs(dfs, root, root, 0.0);
}

}  // namespace

EnvironmentModel EnvironmentModel::make(std::vector<std::string> states, Matrix P,
                                        std::vector<OffspringLaw> laws) {
    const std::size_t d = states.size();
    if (d == 0) throw std::invalid_argument("environment model: empty state list");
    if (P.rows() != d || P.cols() != d)
        throw std::invalid_argument("environment model: transition matrix must be " +
                                    std::to_string(d) + "x" + std::to_string(d));
    if (laws.size() != d)
        throw std::invalid_argument("environment model: need one offspring law per state");
    EnvironmentModel m;
    m.states = std::move(states);
    m.P = std::move(P);
    m.laws = std::move(laws);
    m.rho.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        m.rho[i] = m.laws[i].log_mean();
        if (!std::isfinite(m.rho[i]))
            throw std::invalid_argument("environment model: rho is not finite at state " +
                                        m.states[i]);
    }
    return m;
}

ValidationReport validate_model(const EnvironmentModel& model) {
    ValidationReport rep;
    const std::size_t d = model.size();

    rep.stochastic_ok = true;
    for (std::size_t i = 0; i < d && rep.stochastic_ok; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            if (model.P(i, j) < 0.0) {
                rep.stochastic_ok = false;
                rep.bad_row = static_cast<int>(i);
            }
            s += model.P(i, j);
        }
        if (std::abs(s - 1.0) > kRowSumTol) {
            rep.stochastic_ok = false;
            rep.bad_row = static_cast<int>(i);
        }
    }

    if (rep.stochastic_ok) {
        rep.k0 = primitivity_witness(model.P);
        rep.primitive_ok = rep.k0 > 0;
    }

    rep.moments_ok = true;
    for (std::size_t i = 0; i < d; ++i) {
        if (!(model.laws[i].mean() > 0.0) || !std::isfinite(model.laws[i].second_factorial_moment())) {
            rep.moments_ok = false;
            rep.bad_state = static_cast<int>(i);
            break;
        }
    }

    if (rep.stochastic_ok) rep.lattice = lattice_diagnostic(model);
    return rep;
}

void require_valid(const EnvironmentModel& model) {
    const ValidationReport rep = validate_model(model);
    if (!rep.stochastic_ok)
        throw std::invalid_argument("environment model: row " + std::to_string(rep.bad_row) +
                                    " of the transition matrix is not a probability vector");
    if (!rep.moments_ok)
        throw std::invalid_argument("environment model: offspring law at state " +
                                    model.states[rep.bad_state] +
                                    " violates the moment conditions (mean must be positive)");
    if (!rep.primitive_ok)
        throw std::invalid_argument(
            "environment model: transition matrix is not primitive; see validate_model");
}

Vec stationary(const Matrix& P) {
    const std::size_t d = P.rows();
    if (primitivity_witness(P) < 0)
        throw std::invalid_argument("stationary: matrix is not primitive; run validate_model");
    // solve nu (P - I) = 0 with the normalisation sum(nu) = 1: replace the
    // last column of (P - I)^T by ones
    Matrix a(d, d);
    Vec b(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) = P(j, i) - (i == j ? 1.0 : 0.0);
    for (std::size_t j = 0; j < d; ++j) a(d - 1, j) = 1.0;
    b[d - 1] = 1.0;
    Vec nu = solve(a, b);
    // one refinement step cleans up elimination rounding
    Vec r = apply_left(nu, P);
    double s = sum(r);
    for (auto& v : r) v /= s;
    const double residual = linf_diff(apply_left(r, P), r);
    if (residual > 1e-12)
        throw std::runtime_error("stationary: residual " + std::to_string(residual) +
                                 " exceeds 1e-12");
    for (double v : r)
        if (!(v > 0.0)) throw std::runtime_error("stationary: non-positive entry in nu");
    return r;
}

Matrix dual_kernel(const Matrix& P, const Vec& nu) {
    const std::size_t d = P.rows();
    const double residual = linf_diff(apply_left(nu, P), nu);
    if (residual > 1e-10)
        throw std::invalid_argument("dual_kernel: nu is not stationary for P (residual " +
                                    std::to_string(residual) + ")");
    Matrix dual(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) dual(i, j) = nu[j] * P(j, i) / nu[i];
    return dual;
}

LatticeDiagnostic lattice_diagnostic(const EnvironmentModel& model, double tol) {
    LatticeDiagnostic diag;
    std::vector<std::pair<double, int>> cycles;
    enumerate_simple_cycles(model.P, model.rho, cycles);
    diag.cycles_examined = cycles.size();

    double g = 0.0;
    bool any_nonzero = false;
    for (const auto& [s, len] : cycles) {
        if (std::abs(s) <= tol) continue;
        any_nonzero = true;
        g = (g == 0.0) ? std::abs(s) : real_gcd(g, s, tol);
        if (g == 0.0) break;  // non-commensurable pair found
    }

    if (!any_nonzero) {
        // every cycle sum vanishes: the walk is supported on {0} along cycles
        diag.is_suspect_lattice = !cycles.empty();
        diag.span_estimate = 0.0;
        diag.theta = 0.0;
        return diag;
    }
    if (g > 0.0) {
        diag.is_suspect_lattice = true;
        diag.span_estimate = g;
        diag.theta = g;  // residuals s_C - |C| g stay in gZ since all s_C do
    }
    return diag;
}

EnvironmentModel shift_means(const EnvironmentModel& model, double c) {
    std::vector<OffspringLaw> laws;
    laws.reserve(model.size());
    for (const auto& law : model.laws) laws.push_back(law.rescaled_mean(c));
    return EnvironmentModel::make(model.states, model.P, std::move(laws));
}

Calibration calibrate(const EnvironmentModel& model, CalibrationTarget target, double margin) {
    require_valid(model);
    const double kp0 = K_derivatives(model, 0.0).Kp;
    const double kp1 = K_derivatives(model, 1.0).Kp;
    double c = 0.0;
    switch (target) {
        case CalibrationTarget::critical:
            c = kp0;
            break;
        case CalibrationTarget::intermediate:
            c = kp1;
            break;
        case CalibrationTarget::strong:
            c = kp1 + margin;
            break;
        case CalibrationTarget::weak:
            if (kp1 - kp0 <= 1e-12)
                throw std::invalid_argument(
                    "calibrate: weak target infeasible, K'(0) = K'(1) (constant rho)");
            c = 0.5 * (kp0 + kp1);
            break;
    }
    return Calibration{shift_means(model, c), c};
}

}  // namespace bpre
