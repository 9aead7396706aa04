// pathfn.hpp — exact functionals of a fixed environment path.
//
// Given the environment X_1..X_n, the probability that the population is
// still alive at time n is
//     q_n(s) = 1 - f_{X_1} o ... o f_{X_n}(s)          (s = 0 for survival)
// and satisfies the inverse identity
//     q_n(s)^{-1} = e^{-S_n}/(1-s) + sum_{k=0}^{n-1} e^{-S_k} eta_{k+1,n}(s),
//     eta_{k,n}(s) = g_{X_k}(f_{k+1,n}(s)),
//     g_i(s) = 1/(1-f_i(s)) - 1/(f_i'(1)(1-s)) in [0, f_i''(1)/f_i'(1)^2].
// Both routes are implemented and must agree to 1e-10 relative; compositions
// are tracked in survival space (delta = 1 - s) so q keeps full relative
// precision even at ~1e-300.
//
// The dual recursion accumulates the same quantity along a time-reversed
// path with a pgf boundary at state j:
//     q*_m(j) = [ 1/(1-f_j(0)) + sum_{k=1}^m e^{-S*_k} eta*_k(j) ]^{-1}
//             = e^{S*_m} (1 - f_{X*_m} o ... o f_{X*_1} o f_j(0)),
// with S*_k = -(rho(X*_1)+...+rho(X*_k)).
//
// Two exact oracles for P_i(Z_n > 0, X_n = j):
//   enumerate_survival    full path enumeration (guarded by d^n <= 1e7)
//   dp_survival_bounds    exact joint law of (X_k, Z_k) with populations
//                         capped at M and an overflow bucket, giving
//                         lower <= exact <= upper entrywise

#pragma once

#include <optional>
#include <span>
#include <utility>

#include "bpre/envmodel.hpp"

namespace bpre {

struct EnvPath {
    int start = 0;
    std::vector<int> steps;  // X_1..X_n
    Vec partial_sums;        // S_0 = 0, S_k = sum_{l<=k} rho(X_l)
};

EnvPath make_path(const EnvironmentModel& model, int start, std::vector<int> steps);

// g_i at the point s = 1 - delta. Uses the defining formula for
// delta > 1e-6, a first-order expansion around the limit for
// delta in [1e-9, 1e-6] and the limit f''(1)/(2 f'(1)^2) below.
double g_from_delta(const OffspringLaw& law, double delta);
double g_eval(const OffspringLaw& law, double s);

struct QPair {
    double direct;     // backward pgf composition
    double recursive;  // inverse-sum recursion
};

// both routes for q_n(s) along X_1..X_n (path entries are state indices)
QPair q_along_path(const EnvironmentModel& model, std::span<const int> path, double s);

// direct route only (the estimators' inner loop)
double q_direct(const EnvironmentModel& model, std::span<const int> path, double s = 0.0);

struct DualQ {
    double value;   // the recursion
    double direct;  // e^{S*_m} (1 - f_{X*_m} o ... o f_{X*_1} o f_j(0))
};

DualQ q_dual_along_path(const EnvironmentModel& model, std::span<const int> dual_path,
                        int boundary_state);

// smallest k >= 1 with y + S_k <= 0, or nullopt when the walk survives the path
std::optional<int> exit_time(const EnvPath& path, double y);

enum class TableKind { exact_enum, dp_lower, dp_upper, mc };

struct SurvivalTable {
    int n = 0;
    Matrix values;  // (i,j) -> P_i(Z_n > 0, X_n = j)
    TableKind kind = TableKind::exact_enum;
};

SurvivalTable enumerate_survival(const EnvironmentModel& model, int n);

std::pair<SurvivalTable, SurvivalTable> dp_survival_bounds(const EnvironmentModel& model, int n,
                                                           int M);

}  // namespace bpre
