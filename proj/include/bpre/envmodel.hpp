// envmodel.hpp — the environment chain and its offspring laws.
//
// An EnvironmentModel is a finite row-stochastic matrix P over labelled
// states plus one offspring law per state. The derived vector
// rho(i) = ln f_i'(1) drives everything downstream: the walk S_n, the
// transfer operator and the regime classification.
//
// Validation covers: row-stochasticity, primitivity (a power P^{k0} > 0
// entrywise, k0 bounded by Wielandt's (d-1)^2+1), positive offspring means,
// and an advisory lattice diagnostic over simple cycles.
//
// All values are immutable after construction and every operation is a pure
// function, so concurrent use needs no coordination.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bpre/linalg.hpp"
#include "bpre/offspring.hpp"

namespace bpre {

struct EnvironmentModel {
    std::vector<std::string> states;
    Matrix P;                        // d x d, row-stochastic
    std::vector<OffspringLaw> laws;  // one per state
    Vec rho;                         // rho(i) = ln f_i'(1), derived

    std::size_t size() const { return states.size(); }

    static EnvironmentModel make(std::vector<std::string> states, Matrix P,
                                 std::vector<OffspringLaw> laws);
};

struct LatticeDiagnostic {
    bool is_suspect_lattice = false;
    double span_estimate = 0.0;  // 0 = no lattice structure detected at tolerance
    double theta = 0.0;
    std::size_t cycles_examined = 0;
};

struct ValidationReport {
    bool stochastic_ok = false;
    int bad_row = -1;  // witness when stochastic_ok is false
    bool primitive_ok = false;
    int k0 = -1;       // witness exponent with P^{k0} > 0 entrywise
    bool moments_ok = false;
    int bad_state = -1;
    LatticeDiagnostic lattice;

    bool ok() const { return stochastic_ok && primitive_ok && moments_ok; }
};

ValidationReport validate_model(const EnvironmentModel& model);

// throws with the offending row/state named when a mandatory check fails
void require_valid(const EnvironmentModel& model);

// unique positive invariant probability of a primitive stochastic matrix,
// ||nu P - nu||_inf <= 1e-12
Vec stationary(const Matrix& P);

// time reversal P*(i,j) = nu(j) P(j,i) / nu(i)
Matrix dual_kernel(const Matrix& P, const Vec& nu);

// Advisory only. Enumerates simple cycles up to length d and reports a
// candidate span when all cycle rho-sums are commensurable at tolerance
// (the span is their common divisor; theta is reported as the generator).
// Commensurability of the sums is sufficient but not necessary for a
// genuine lattice structure, so this can miss shifted lattices; it never
// blocks computation.
LatticeDiagnostic lattice_diagnostic(const EnvironmentModel& model, double tol = 1e-9);

// uniform shift of the walk increments: rho'(i) = rho(i) - c for every i,
// realised by exact mean rescaling within each offspring family
EnvironmentModel shift_means(const EnvironmentModel& model, double c);

enum class CalibrationTarget { critical, intermediate, weak, strong };

struct Calibration {
    EnvironmentModel model;
    double c = 0.0;
};

// Chooses the shift c that lands the model in the requested regime:
//   critical       c = K'(0)              => K'_new(0) = 0
//   intermediate   c = K'(1)              => K'_new(1) = 0
//   strong(margin) c = K'(1) + margin     => K'_new(1) = -margin
//   weak           c = (K'(0) + K'(1))/2  => K'_new(0) < 0 < K'_new(1)
Calibration calibrate(const EnvironmentModel& model, CalibrationTarget target,
                      double margin = 0.0);

}  // namespace bpre
