#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace qncq {

using Complex = std::complex<double>;

/// A coherent superposition degenerated to numerical zero norm, or terms
/// whose amplitudes coincide within the merge tolerance.
struct DegenerateSuperposition : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A characteristic-function value exceeds the double range even after
/// exponent-shift stabilization.
struct OverflowGuard : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Photon subtraction requested on a (numerically) vacuum state.
struct VacuumSubtraction : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Polynomial order disagrees with 2 * highest Fock index; the two
/// tolerances select different effective supports.
struct InconsistentOrder : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sample points fall outside the beta range covered by the bound tables.
struct RangeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating input (density matrices, specs, files).
struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool is_finite(Complex z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

/// ln(n!) via lgamma; exact enough for ratio formulas up to large n.
inline double log_factorial(int n) { return std::lgamma(double(n) + 1.0); }

}  // namespace qncq
