#include "bpre/asymptotics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bpre {

const char* factor_side_name(FactorSide s) {
    switch (s) {
        case FactorSide::rows_are_nu: return "rows-are-nu";
        case FactorSide::columns_are_v1: return "columns-are-v1";
        case FactorSide::free_rank1: return "free-rank1";
        case FactorSide::full_matrix: return "full-matrix";
    }
    return "?";
}

ScaledSequence scaled_sequence(const EstimateSeries& series, const RegimeReport& report,
                               const EnvironmentModel& model,
                               std::optional<RateOverride> override_rate) {
    if (series.intended_regime != report.regime)
        throw std::invalid_argument(
            std::string("scaled_sequence: estimates were produced for regime ") +
            regime_name(series.intended_regime) + " but the report classifies " +
            regime_name(report.regime));
    if (series.tables.size() < 4)
        throw std::invalid_argument("scaled_sequence: need >= 4 grid points, got " +
                                    std::to_string(series.tables.size()));

    RateOverride rate;
    if (override_rate) {
        rate = *override_rate;
    } else {
        switch (report.regime) {
            case Regime::critical:
                rate = {0.0, 0.5};
                break;
            case Regime::strongly_subcritical:
                rate = {std::log(report.k_rate), 0.0};
                break;
            case Regime::intermediately_subcritical:
                rate = {std::log(report.k_rate), 0.5};
                break;
            case Regime::weakly_subcritical: {
                if (!report.lambda_star)
                    throw std::invalid_argument("scaled_sequence: weak regime without lambda*");
                const double kp = K_derivatives(model, *report.lambda_star).Kp;
                if (std::abs(kp) > 1e-10)
                    throw std::invalid_argument(
                        "scaled_sequence: lambda* is not critical, |K'(lambda*)| = " +
                        std::to_string(std::abs(kp)));
                rate = {std::log(report.k_rate), 1.5};
                break;
            }
            case Regime::supercritical:
                throw std::invalid_argument(
                    "scaled_sequence: no survival rate applies in the supercritical regime");
        }
    }

    ScaledSequence out;
    out.regime = report.regime;
    out.d = series.tables.front().d;
    int prev_n = -1;
    for (const auto& table : series.tables) {
        if (table.n <= prev_n)
            throw std::invalid_argument("scaled_sequence: grid must be strictly increasing");
        prev_n = table.n;
        out.grid.push_back(table.n);
        const double n = static_cast<double>(table.n);
        // 1/r_n in log space; cancels the estimates' own log_scale exactly
        const double log_inv_rate = -n * rate.log_k + rate.n_power * std::log(n);
        Matrix a(out.d, out.d), se(out.d, out.d);
        for (std::size_t i = 0; i < out.d; ++i)
            for (std::size_t j = 0; j < out.d; ++j) {
                const auto& e = table.cell(i, j);
                const double f = std::exp(e.log_scale + log_inv_rate);
                a(i, j) = e.scaled_mean * f;
                se(i, j) = e.scaled_stderr * f;
            }
        out.a.push_back(std::move(a));
        out.se.push_back(std::move(se));
    }
    return out;
}

ConvergenceVerdict convergence_diagnostic(const ScaledSequence& seq, int window,
                                          double threshold) {
    const int G = static_cast<int>(seq.grid.size());
    if (window < 1 || window > G)
        throw std::invalid_argument("convergence_diagnostic: window must lie in [1, G]");
    ConvergenceVerdict verdict;
    verdict.converged = true;
    const Matrix& aG = seq.a.back();
    const Matrix& seG = seq.se.back();
    for (std::size_t i = 0; i < seq.d; ++i)
        for (std::size_t j = 0; j < seq.d; ++j) {
            const double denom = std::abs(aG(i, j)) + seG(i, j);
            for (int g = G - window; g < G; ++g) {
                const double drift = std::abs(seq.a[g](i, j) - aG(i, j)) / denom;
                verdict.drift = std::max(verdict.drift, drift);
            }
            if (seG(i, j) > threshold * std::abs(aG(i, j))) verdict.converged = false;
        }
    if (verdict.drift > threshold) verdict.converged = false;
    return verdict;
}

DriftCheck drift_within(const ScaledSequence& seq, int window, double rel_tol, double n_sigmas) {
    const int G = static_cast<int>(seq.grid.size());
    if (window < 1 || window > G)
        throw std::invalid_argument("drift_within: window must lie in [1, G]");
    DriftCheck check;
    check.max_excess_rel = -1e300;
    const Matrix& aG = seq.a.back();
    const Matrix& seG = seq.se.back();
    for (std::size_t i = 0; i < seq.d; ++i)
        for (std::size_t j = 0; j < seq.d; ++j)
            for (int g = G - window; g < G; ++g) {
                const double noise =
                    n_sigmas * std::hypot(seq.se[g](i, j), seG(i, j));
                const double excess =
                    (std::abs(seq.a[g](i, j) - aG(i, j)) - noise) / std::abs(aG(i, j));
                check.max_excess_rel = std::max(check.max_excess_rel, excess);
            }
    check.pass = check.max_excess_rel <= rel_tol;
    return check;
}

FactorizationVerdict factorization_check(const Matrix& limit, FactorSide side,
                                         const Vec& reference) {
    const std::size_t d = limit.rows();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < limit.cols(); ++j)
            if (!(limit(i, j) > 0.0))
                throw std::domain_error("factorization_check: limit grid must be positive");

    FactorizationVerdict verdict;
    verdict.side = side;
    const double norm = frobenius_norm(limit);

    auto residual_vs = [&](const Vec& row_factor, const Vec& col_factor) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < limit.cols(); ++j) {
                const double r = limit(i, j) - row_factor[i] * col_factor[j];
                s += r * r;
            }
        return std::sqrt(s) / norm;
    };

    switch (side) {
        case FactorSide::rows_are_nu: {
            if (reference.size() != limit.cols())
                throw std::invalid_argument("factorization_check: nu has the wrong size");
            Vec u(d, 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < limit.cols(); ++j)
                    u[i] += limit(i, j) / reference[j];
                u[i] /= static_cast<double>(limit.cols());
            }
            verdict.u = u;
            verdict.residual = residual_vs(u, reference);
            break;
        }
        case FactorSide::columns_are_v1: {
            if (reference.size() != d)
                throw std::invalid_argument("factorization_check: v_1 has the wrong size");
            Vec u(limit.cols(), 0.0);
            for (std::size_t j = 0; j < limit.cols(); ++j) {
                for (std::size_t i = 0; i < d; ++i) u[j] += limit(i, j) / reference[i];
                u[j] /= static_cast<double>(d);
            }
            verdict.u = u;
            verdict.residual = residual_vs(reference, u);
            break;
        }
        case FactorSide::free_rank1: {
            // alternating least squares onto the best rank-one factorisation
            Vec u(d, 0.0), w(limit.cols(), 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < limit.cols(); ++j) u[i] += limit(i, j);
            for (int it = 0; it < 500; ++it) {
                const double uu = dot(u, u);
                for (std::size_t j = 0; j < limit.cols(); ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < d; ++i) s += limit(i, j) * u[i];
                    w[j] = s / uu;
                }
                const double ww = dot(w, w);
                Vec u_next(d, 0.0);
                for (std::size_t i = 0; i < d; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < limit.cols(); ++j) s += limit(i, j) * w[j];
                    u_next[i] = s / ww;
                }
                const double change = linf_diff(u_next, u);
                u = std::move(u_next);
                if (change < 1e-14 * linf_norm(u)) break;
            }
            verdict.u = u;
            verdict.v = w;
            verdict.residual = residual_vs(u, w);
            break;
        }
        case FactorSide::full_matrix:
            verdict.u_full = limit;
            verdict.residual = 0.0;  // the prescribed form is the matrix itself
            break;
    }
    return verdict;
}

}  // namespace bpre
