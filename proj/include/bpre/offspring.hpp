// offspring.hpp — offspring distributions as probability generating functions.
//
// A law carries its pgf f(s), the factorial moments f'(1), f''(1), f'''(1),
// a pmf view for exact dynamic programming, and a sampler that draws from
// exactly the same law the pgf describes (no law/sampler mismatch).
//
// Three families:
//   geometric(r)             pmf (1-r) r^k,  f(s) = (1-r)/(1-rs),  mean r/(1-r)
//   poisson-truncated(m, K)  Poisson(m) with all mass beyond K folded into
//                            the atom at K, so moments stay exact for the law
//                            actually simulated
//   finite-pmf(p_0..p_K)     arbitrary finite support
//
// The survival map delta -> 1 - f(1 - delta) is provided in a cancellation-
// free form; iterating it composes pgfs while tracking the survival
// probability at full relative precision even when it is ~1e-300.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpre/rng.hpp"

namespace bpre {

enum class OffspringKind { geometric, poisson_truncated, finite_pmf };

class OffspringLaw {
public:
    static OffspringLaw geometric(double r);
    static OffspringLaw poisson_truncated(double mean, int cutoff);
    static OffspringLaw finite_pmf(std::vector<double> p);

    OffspringKind kind() const { return kind_; }

    double pgf(double s) const;           // f(s)
    double survival_map(double delta) const;  // 1 - f(1 - delta), stable for tiny delta

    double mean() const { return m1_; }                      // f'(1)
    double second_factorial_moment() const { return m2_; }   // f''(1)
    double third_factorial_moment() const { return m3_; }    // f'''(1)
    double log_mean() const { return log_mean_; }            // ln f'(1)

    // pmf on {0..m} plus the tail mass beyond m (exact for all families)
    std::vector<double> pmf_prefix(std::uint64_t m, double* tail) const;

    std::uint64_t sample(RngStream& rng) const;

    // exact mean rescaling within the family: new mean = mean * e^{-c};
    // finite-pmf has no canonical mean-preserving family and throws
    OffspringLaw rescaled_mean(double c) const;

    // raw parameters, for serialization
    double param_r() const { return r_; }
    double param_mean() const { return poisson_mean_; }
    int param_cutoff() const { return cutoff_; }
    const std::vector<double>& param_pmf() const { return pmf_; }

    std::string describe() const;

private:
    OffspringLaw() = default;
    void moments_from_pmf();

    OffspringKind kind_ = OffspringKind::geometric;
    double r_ = 0.0;            // geometric parameter
    double poisson_mean_ = 0.0; // untruncated Poisson mean
    int cutoff_ = 0;
    std::vector<double> pmf_;   // polynomial families
    std::vector<double> cdf_;   // sampler table for polynomial families
    double m1_ = 0.0, m2_ = 0.0, m3_ = 0.0;
    double log_mean_ = 0.0;
};

}  // namespace bpre
