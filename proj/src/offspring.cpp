#include "bpre/offspring.hpp"

#include <cmath>
#include <stdexcept>

namespace bpre {

namespace {
constexpr double kPmfSumTol = 1e-12;
}

OffspringLaw OffspringLaw::geometric(double r) {
    if (!(r > 0.0 && r < 1.0))
        throw std::invalid_argument("geometric offspring: r must lie in (0,1), got " + std::to_string(r));
    OffspringLaw law;
    law.kind_ = OffspringKind::geometric;
    law.r_ = r;
    law.m1_ = r / (1.0 - r);
    law.m2_ = 2.0 * r * r / ((1.0 - r) * (1.0 - r));
    law.m3_ = 6.0 * r * r * r / ((1.0 - r) * (1.0 - r) * (1.0 - r));
    law.log_mean_ = std::log(law.m1_);
    return law;
}

OffspringLaw OffspringLaw::poisson_truncated(double mean, int cutoff) {
    if (!(mean > 0.0)) throw std::invalid_argument("poisson offspring: mean must be positive");
    if (cutoff < 1) throw std::invalid_argument("poisson offspring: cutoff must be >= 1");
    OffspringLaw law;
    law.kind_ = OffspringKind::poisson_truncated;
    law.poisson_mean_ = mean;
    law.cutoff_ = cutoff;
    law.pmf_.resize(cutoff + 1);
    double p = std::exp(-mean);  // P(0)
    double acc = 0.0;
    for (int k = 0; k < cutoff; ++k) {
        law.pmf_[k] = p;
        acc += p;
        p *= mean / (k + 1);
    }
    law.pmf_[cutoff] = 1.0 - acc;  // tail mass folded into the top atom
    if (law.pmf_[cutoff] < -kPmfSumTol)
        throw std::invalid_argument("poisson offspring: negative folded tail (mean/cutoff mismatch)");
    if (law.pmf_[cutoff] < 0.0) law.pmf_[cutoff] = 0.0;
    law.moments_from_pmf();
    return law;
}

OffspringLaw OffspringLaw::finite_pmf(std::vector<double> p) {
    if (p.empty()) throw std::invalid_argument("finite-pmf offspring: empty pmf");
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] < 0.0)
            throw std::invalid_argument("finite-pmf offspring: negative mass at k=" + std::to_string(k));
        s += p[k];
    }
    if (std::abs(s - 1.0) > kPmfSumTol)
        throw std::invalid_argument("finite-pmf offspring: pmf sums to " + std::to_string(s) +
                                    ", expected 1 within 1e-12");
    for (double& v : p) v /= s;
    OffspringLaw law;
    law.kind_ = OffspringKind::finite_pmf;
    law.pmf_ = std::move(p);
    law.moments_from_pmf();
    return law;
}

void OffspringLaw::moments_from_pmf() {
    m1_ = m2_ = m3_ = 0.0;
    for (std::size_t k = 0; k < pmf_.size(); ++k) {
        const double kk = static_cast<double>(k);
        m1_ += kk * pmf_[k];
        m2_ += kk * (kk - 1.0) * pmf_[k];
        m3_ += kk * (kk - 1.0) * (kk - 2.0) * pmf_[k];
    }
    if (!(m1_ > 0.0))
        throw std::invalid_argument("offspring law: mean must be positive (law is identically zero)");
    log_mean_ = std::log(m1_);
    cdf_.resize(pmf_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < pmf_.size(); ++k) {
        acc += pmf_[k];
        cdf_[k] = acc;
    }
}

double OffspringLaw::pgf(double s) const {
    if (kind_ == OffspringKind::geometric) {
        if (s * r_ >= 1.0)
            throw std::domain_error("geometric pgf: s outside the domain of convergence");
        return (1.0 - r_) / (1.0 - r_ * s);
    }
    // Horner
    double v = 0.0;
    for (std::size_t k = pmf_.size(); k-- > 0;) v = v * s + pmf_[k];
    return v;
}

double OffspringLaw::survival_map(double delta) const {
    if (kind_ == OffspringKind::geometric) {
        // 1 - f(1-delta) = r*delta / (1 - r + r*delta), exact with no cancellation
        return r_ * delta / (1.0 - r_ + r_ * delta);
    }
    // 1 - f(1-delta) = sum_k p_k (1 - (1-delta)^k); each term via expm1/log1p
    if (delta <= 0.0) return 0.0;
    const double l = std::log1p(-delta);  // delta <= 1 always
    double v = 0.0;
    for (std::size_t k = 1; k < pmf_.size(); ++k) {
        if (pmf_[k] == 0.0) continue;
        v += pmf_[k] * (-std::expm1(static_cast<double>(k) * l));
    }
    return v;
}

std::vector<double> OffspringLaw::pmf_prefix(std::uint64_t m, double* tail) const {
    std::vector<double> p(m + 1, 0.0);
    if (kind_ == OffspringKind::geometric) {
        double v = 1.0 - r_;
        for (std::uint64_t k = 0; k <= m; ++k) {
            p[k] = v;
            v *= r_;
        }
        if (tail) *tail = std::pow(r_, static_cast<double>(m + 1));  // P(X > m)
        return p;
    }
    double t = 0.0;
    for (std::size_t k = 0; k < pmf_.size(); ++k) {
        if (k <= m)
            p[k] = pmf_[k];
        else
            t += pmf_[k];
    }
    if (tail) *tail = t;
    return p;
}

std::uint64_t OffspringLaw::sample(RngStream& rng) const {
    if (kind_ == OffspringKind::geometric) {
        const double u = 1.0 - rng.uniform01();  // u in (0,1]
        if (u == 1.0) return 0;
        return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log(r_)));
    }
    return static_cast<std::uint64_t>(rng.sample_cdf(cdf_));
}

OffspringLaw OffspringLaw::rescaled_mean(double c) const {
    const double target = m1_ * std::exp(-c);
    switch (kind_) {
        case OffspringKind::geometric:
            // mean m = r/(1-r)  =>  r = m/(1+m)
            return geometric(target / (1.0 + target));
        case OffspringKind::poisson_truncated: {
            // the folded tail makes the realised mean a nonlinear function of the
            // Poisson parameter; invert it by bisection to full double precision
            if (target >= static_cast<double>(cutoff_))
                throw std::invalid_argument("poisson offspring rescale: target mean exceeds cutoff");
            double lo = 0.0, hi = poisson_mean_;
            while (poisson_truncated(hi, cutoff_).mean() < target) hi *= 2.0;
            for (int it = 0; it < 200 && hi - lo > 1e-16 * (1.0 + hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= 0.0) break;
                if (poisson_truncated(mid, cutoff_).mean() < target)
                    lo = mid;
                else
                    hi = mid;
            }
            return poisson_truncated(0.5 * (lo + hi), cutoff_);
        }
        case OffspringKind::finite_pmf:
            throw std::invalid_argument(
                "finite-pmf offspring: mean rescaling unsupported (no canonical family)");
    }
    throw std::logic_error("unreachable offspring kind");
}

std::string OffspringLaw::describe() const {
    switch (kind_) {
        case OffspringKind::geometric:
            return "geometric(r=" + std::to_string(r_) + ")";
        case OffspringKind::poisson_truncated:
            return "poisson-truncated(mean=" + std::to_string(poisson_mean_) +
                   ", cutoff=" + std::to_string(cutoff_) + ")";
        case OffspringKind::finite_pmf:
            return "finite-pmf(K=" + std::to_string(pmf_.size() - 1) + ")";
    }
    return "?";
}

}  // namespace bpre
