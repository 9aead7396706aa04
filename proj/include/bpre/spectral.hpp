// spectral.hpp — transfer operator spectrum and regime classification.
//
// For a validated model the transfer matrix at tilt lambda is
//     P_lambda(i,j) = P(i,j) e^{lambda rho(j)},
// a primitive nonnegative matrix. Its Perron data (k(lambda), right vector
// v_lambda, left form nu_lambda) is computed by power iteration together
// with adjoint iteration, then k is refined with the bilinear quotient
// nu (P_lambda v) / (nu v) so the eigenvalue error is second order in the
// vector residuals. Normalisation: sum(nu) = 1 and nu(v) = 1, which pins
// k(0) = 1, v_0 = 1, nu_0 = stationary(P).
//
// The normalised chain ~P_lambda(i,j) = P_lambda(i,j) v(j) / (k v(i)) is a
// Markov kernel with invariant law stat = nu .* v; its time reversal is the
// dual kernel. The cumulant function K(lambda) = ln k(lambda) is strictly
// convex with
//     K'(lambda)  = stat(rho)
//     K''(lambda) = asymptotic variance of rho under the tilted chain,
// the latter evaluated both by the fundamental-matrix closed form and by the
// autocovariance series (the two must agree to 1e-10).
//
// `gap` reports one minus the observed geometric convergence factor of the
// iteration, which estimates |second eigenvalue| / k.

#pragma once

#include <optional>

#include "bpre/envmodel.hpp"
#include "bpre/linalg.hpp"

namespace bpre {

struct SpectralDecomposition {
    double lambda = 0.0;
    double k = 0.0;   // Perron root, > 0
    Vec v;            // positive right eigenvector, nu(v) = 1
    Vec nu;           // positive left form, sum(nu) = 1
    double gap = 1.0; // in (0,1]
    double residual = 0.0;
};

struct TiltedChain {
    double lambda = 0.0;
    Matrix kernel;  // ~P_lambda, row-stochastic
    Vec stat;       // nu .* v, invariant for kernel
    Matrix dual;    // time reversal of kernel w.r.t. stat
    Vec rho;
    double k = 1.0;  // Perron root at lambda (reweighting needs it)
    Vec v;           // right eigenvector at lambda
};

enum class Regime {
    critical,
    strongly_subcritical,
    intermediately_subcritical,
    weakly_subcritical,
    supercritical,
};

const char* regime_name(Regime r);

struct RegimeReport {
    double Kp0 = 0.0;  // K'(0)
    double Kp1 = 0.0;  // K'(1)
    Regime regime = Regime::critical;
    std::optional<double> lambda_star;  // present iff weakly subcritical
    double k_rate = 1.0;  // the k(.) value entering the regime's rate
    double sigma2 = 0.0;  // walk variance relevant to the regime
    double tol = 1e-9;
};

Matrix transfer_matrix(const EnvironmentModel& model, double lambda);

SpectralDecomposition perron(const Matrix& m, double tol = 1e-13, int max_iter = 200000);

TiltedChain tilted_chain(const EnvironmentModel& model, double lambda);

struct KDerivatives {
    double K;    // ln k(lambda)
    double Kp;   // K'(lambda)
    double Kpp;  // K''(lambda)
};

KDerivatives K_derivatives(const EnvironmentModel& model, double lambda);

// Asymptotic variance of sum f(X_k) under a primitive stochastic kernel:
// with fbar = f - pi(f),
//     sigma^2 = pi(fbar^2) + 2 pi(fbar .* (Z - I) fbar),
// Z = (I - kernel + 1 (x) pi)^{-1}. Also sums the autocovariance series
// until terms fall below 1e-14 and checks the two routes agree to 1e-10.
double asymptotic_variance(const Matrix& kernel, const Vec& f);

RegimeReport classify(const EnvironmentModel& model, double tol = 1e-9);

// unique root of K' in (0,1); requires K'(0) < 0 < K'(1)
double critical_point(const EnvironmentModel& model, double tol = 1e-12);

// shared with validation: smallest k with P^k > 0 entrywise, or -1
int primitivity_witness(const Matrix& p);

}  // namespace bpre
