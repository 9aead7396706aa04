// asymptotics.hpp — turns survival estimates on a generation grid into
// verdicts about the regime's rate and limit structure.
//
// Each regime prescribes a rate r_n for P_i(Z_n > 0, X_n = j):
//   critical       1 / sqrt(n)
//   strong         k(1)^n
//   intermediate   k(1)^n / sqrt(n)
//   weak           k(lambda*)^n / n^{3/2}
// The scaled sequence a_n(i,j) = estimate(i,j,n) / r_n should flatten to the
// limit matrix; drift over the tail of the grid measures convergence, and
// the limit matrix is checked against the prescribed rank-one structure
// (rows proportional to nu, columns proportional to v_1, a free rank-one
// fit, or a full matrix in the weak case).
//
// Rates come straight from the spectral data — k is never refit — and the
// division happens in log space so k^n cancels the estimates' log_scale
// exactly even where either factor alone would underflow.

#pragma once

#include <optional>
#include <vector>

#include "bpre/envmodel.hpp"
#include "bpre/simulate.hpp"
#include "bpre/spectral.hpp"

namespace bpre {

struct EstimateSeries {
    Regime intended_regime = Regime::critical;
    std::vector<EstimateTable> tables;  // strictly increasing n
};

struct ScaledSequence {
    Regime regime = Regime::critical;
    std::vector<int> grid;
    std::size_t d = 0;
    std::vector<Matrix> a;   // per grid point, (i,j) scaled value
    std::vector<Matrix> se;  // matching standard errors
};

// overrides the report's rate (negative controls); r_n = exp(n log_k) * n^{-n_power}
struct RateOverride {
    double log_k = 0.0;
    double n_power = 0.0;
};

ScaledSequence scaled_sequence(const EstimateSeries& series, const RegimeReport& report,
                               const EnvironmentModel& model,
                               std::optional<RateOverride> override_rate = std::nullopt);

struct ConvergenceVerdict {
    double drift = 0.0;
    bool converged = false;
};

// drift = max over entries and the last `window` grid points of
// |a_g - a_G| / (|a_G| + se_G); converged iff drift <= threshold and
// se_G / |a_G| <= threshold everywhere
ConvergenceVerdict convergence_diagnostic(const ScaledSequence& seq, int window,
                                          double threshold);

// acceptance-style drift: |a_g - a_G| <= rel_tol |a_G| + n_sigmas * combined se;
// max_excess_rel reports the worst (|a_g - a_G| - n_sigmas se) / |a_G|
struct DriftCheck {
    double max_excess_rel = 0.0;
    bool pass = false;
};

DriftCheck drift_within(const ScaledSequence& seq, int window, double rel_tol, double n_sigmas);

enum class FactorSide { rows_are_nu, columns_are_v1, free_rank1, full_matrix };

const char* factor_side_name(FactorSide s);

struct FactorizationVerdict {
    double residual = 0.0;  // relative Frobenius distance to the prescribed form
    FactorSide side = FactorSide::free_rank1;
    Vec u;          // extracted factor (meaning depends on side)
    Vec v;          // second factor for free_rank1
    Matrix u_full;  // the limit itself in the full-matrix case
};

FactorizationVerdict factorization_check(const Matrix& limit, FactorSide side,
                                         const Vec& reference);

}  // namespace bpre
