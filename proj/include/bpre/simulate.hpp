// simulate.hpp — seeded Monte Carlo estimators for survival probabilities
// and conditioned-walk statistics.
//
// Estimators for P_i(Z_n > 0, X_n = j):
//   population    simulate (X_k, Z_k) directly, indicator of survival
//   env-marginal  sample only the environment and average the exact
//                 conditional survival q_n per path (Rao-Blackwellised)
//   tilted        sample the environment from the normalised chain at tilt
//                 lambda and reweight:
//                   P_i(h) = k^n v(i) E~_i[ h e^{-lambda S_n} / v(X_n) ],
//                 which moves rare survival events into the typical range
//   dual          run the time-reversed tilted chain at lambda = 1 from the
//                 terminal state j and average the dual recursion:
//                   P_i(Z_{n+1}>0, X_{n+1}=j)
//                     = k(1)^{n+1} stat(j) v(i) e^{-rho(j)} / (stat(i) v(j))
//                       * E~*_j[ q*_n(j) ; X*_{n+1} = i ]
//
// Geometric factors are carried as an explicit log_scale so estimates remain
// representable when k^n underflows double; `mean` is exp(log_scale) *
// scaled_mean and downstream rate division cancels log_scale analytically.
//
// Reproducibility: work is split into a fixed number of chunks, each chunk
// draws from its own (master_seed, stream) and chunk results are combined by
// pairwise summation in a fixed tree, so results are bit-identical for a
// given (seed, chunk count) regardless of the worker count.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bpre/envmodel.hpp"
#include "bpre/pathfn.hpp"
#include "bpre/rng.hpp"
#include "bpre/spectral.hpp"

namespace bpre {

enum class EstimatorKind { population, env_marginal, tilted, dual };

const char* estimator_name(EstimatorKind k);

struct SurvivalEstimate {
    double mean = 0.0;    // exp(log_scale) * scaled_mean (0 on underflow)
    double stderr_ = 0.0; // exp(log_scale) * scaled_stderr
    std::uint64_t n_samples = 0;
    EstimatorKind estimator = EstimatorKind::env_marginal;
    double lambda = 0.0;
    double log_scale = 0.0;
    double scaled_mean = 0.0;
    double scaled_stderr = 0.0;
};

struct EstimateTable {
    int n = 0;
    std::size_t d = 0;
    std::vector<SurvivalEstimate> cells;  // row-major (start i, terminal j)
    EstimatorKind estimator = EstimatorKind::env_marginal;
    double lambda = 0.0;

    SurvivalEstimate& cell(std::size_t i, std::size_t j) { return cells[i * d + j]; }
    const SurvivalEstimate& cell(std::size_t i, std::size_t j) const { return cells[i * d + j]; }
};

struct McOptions {
    std::uint64_t seed = 1;
    int chunks = 128;   // stream partitioning; part of the reproducibility contract
    int workers = 1;    // execution only, never affects results
    std::uint64_t cap = 1000000;  // population cap; reaching it counts as survival
};

EnvPath sample_environment(const Matrix& kernel, const Vec& rho, int start, int n,
                           RngStream& rng);

struct BranchResult {
    std::optional<std::uint64_t> z;  // nullopt = population exceeded the cap
    int x_n = 0;
};

BranchResult sample_branching(const EnvironmentModel& model, int start, int n, RngStream& rng,
                              std::uint64_t cap);

EstimateTable estimate_population(const EnvironmentModel& model, int n, std::uint64_t N,
                                  const McOptions& opts);

EstimateTable estimate_qn_mc(const EnvironmentModel& model, int n, std::uint64_t N,
                             const McOptions& opts);

EstimateTable estimate_qn_tilted(const EnvironmentModel& model, double lambda, int n,
                                 std::uint64_t N, const McOptions& opts);

// column estimate of P_.(Z_{n+1} > 0, X_{n+1} = j), indexed by the start state
std::vector<SurvivalEstimate> estimate_dual(const EnvironmentModel& model, int j, int n,
                                            std::uint64_t N, const McOptions& opts);

struct ExitStats {
    double p_survive = 0.0;  // P(tau_y > n)
    double p_stderr = 0.0;
    double v_hat = 0.0;      // E[(y + S_n) 1{tau_y > n}], harmonic-function estimate
    double v_stderr = 0.0;
    std::uint64_t n_samples = 0;
};

// requires a centred walk: |stationary mean of rho under kernel| <= 1e-6
ExitStats exit_statistics(const Matrix& kernel, const Vec& rho, int start, double y, int n,
                          std::uint64_t N, const McOptions& opts);

// Kolmogorov-Smirnov distance between the law of (y+S_n)/(sigma sqrt(n))
// conditioned on tau_y > n (by rejection) and the Rayleigh law 1 - e^{-t^2/2}
double rayleigh_ks(const Matrix& kernel, const Vec& rho, double sigma, int start, double y,
                   int n, std::uint64_t N_accept, const McOptions& opts);

}  // namespace bpre
