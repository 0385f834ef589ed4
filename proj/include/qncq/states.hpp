#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

#include "qncq/types.hpp"

#include "json.hpp"

namespace qncq {

/// One term lambda * |alpha> of a coherent-state superposition.
struct CoherentTerm {
  Complex lambda;
  Complex alpha;
};

/// Overlap <a|b> = exp(-|a|^2/2 - |b|^2/2 + conj(a) b) of two coherent states.
Complex coherent_overlap(Complex a, Complex b);

/// Finite superposition |Psi> = sum_i lambda_i |alpha_i>.
///
/// The validating constructor rejects empty term lists, non-finite entries,
/// amplitudes that coincide within `merge_tol` (the Gram matrix would be
/// singular), and superpositions whose norm underflows to numerical zero.
class CoherentSuperposition {
 public:
  static constexpr double kMergeTol = 1e-8;

  explicit CoherentSuperposition(std::vector<CoherentTerm> terms,
                                 double merge_tol = kMergeTol);

  /// Wraps terms without any validation or norm check.  For callers that
  /// construct states known to be well-formed (e.g. optimizer output).
  static CoherentSuperposition unchecked(std::vector<CoherentTerm> terms,
                                         bool normalized = false);

  const std::vector<CoherentTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool normalized() const { return normalized_; }

  /// <Psi|Psi> from the Gram matrix of coherent overlaps.
  double norm_squared() const;

 private:
  CoherentSuperposition() = default;
  std::vector<CoherentTerm> terms_;
  bool normalized_ = false;
};

/// Rescales all lambda_i by 1/sqrt(<Psi|Psi>).  Throws
/// DegenerateSuperposition if the norm is numerically zero.
CoherentSuperposition normalize(const CoherentSuperposition& sup);

/// Gauge-fixes a superposition to lambda_1 = 1, alpha_1 = 0 by displacing
/// all amplitudes by -alpha_1 and absorbing the displacement phases into the
/// coefficients.  |Phi(beta)| of the normalized state is unchanged.
CoherentSuperposition canonicalize(const CoherentSuperposition& sup);

using FockStateVector = Eigen::VectorXcd;

/// Density matrix on a truncated Fock basis {|0>, ..., |dim-1>}.
class FockDensityMatrix {
 public:
  /// Validates Hermiticity, unit trace and positive semidefiniteness
  /// (eigenvalues >= -tol); throws InvalidInput otherwise.
  static FockDensityMatrix validated(Eigen::MatrixXcd entries,
                                     double tol = 1e-9);

  /// |psi><psi| / <psi|psi> for a Fock-coefficient vector.
  static FockDensityMatrix pure(const FockStateVector& psi);

  /// Wraps entries without validation (for exact algebraic constructions).
  static FockDensityMatrix unchecked(Eigen::MatrixXcd entries);

  int dim() const { return int(entries_.rows()); }
  const Eigen::MatrixXcd& entries() const { return entries_; }
  Complex operator()(int k, int l) const { return entries_(k, l); }

 private:
  explicit FockDensityMatrix(Eigen::MatrixXcd entries)
      : entries_(std::move(entries)) {}
  Eigen::MatrixXcd entries_;
};

/// Squeezed vacuum |xi> expanded over even Fock states up to `cutoff`.
/// The coefficient vector is deliberately not renormalized after truncation;
/// `truncation_weight` reports the discarded tail 1 - sum |c_n|^2.
struct SqueezedVacuumExpansion {
  FockStateVector coeffs;
  double truncation_weight;
};

SqueezedVacuumExpansion squeezed_vacuum_fock(Complex xi, int cutoff);

/// Parameter records for the named Gaussian-flavoured families.  mu and nu
/// below always refer to cosh|xi| and e^{i arg xi} sinh|xi|.
struct SqueezedVacuumSpec {
  Complex xi;
};

/// Superposition N (|0> + lambda |xi>), N^2 = 1 / (1 + 2 Re lambda / sqrt mu
/// + |lambda|^2).
struct SqPlusVacSpec {
  Complex xi;
  Complex lambda;
};

/// Mixture (|0><0| + |lambda|^2 |xi><xi|) / (1 + |lambda|^2).
struct SqVacMixtureSpec {
  Complex xi;
  double lambda_abs;
};

/// Zero-mean Gaussian state given by its extremal quadrature variances
/// (vacuum variance = 1) and the angle theta of the squeezed quadrature.
/// Requires v_sq > 0, v_asq >= v_sq and v_sq * v_asq >= 1 (Heisenberg).
struct GaussianVariancesSpec {
  double v_sq;
  double v_asq;
  double theta = 0.0;
};

GaussianVariancesSpec gaussian_from_variances(double v_sq, double v_asq,
                                              double theta = 0.0);

using StateSpec =
    std::variant<CoherentSuperposition, FockDensityMatrix, SqueezedVacuumSpec,
                 SqPlusVacSpec, SqVacMixtureSpec, GaussianVariancesSpec>;

/// Second moments <a>, <a^2>, <a^dag a> of a zero-mean-or-not state; enough
/// to evaluate any quadrature variance.
struct SecondMoments {
  Complex mean_a;
  Complex mean_a2;
  double mean_n;
};

SecondMoments analytic_moments(const StateSpec& spec);

/// Variance of x(phi) = e^{-i phi} a^dag + e^{i phi} a (vacuum -> 1).
double quadrature_variance(const StateSpec& spec, double phi);

/// Minimum of quadrature_variance over phi, in closed form.
double min_quadrature_variance(const StateSpec& spec);

/// 10 log10 of a variance relative to vacuum.
inline double variance_db(double v) { return 10.0 * std::log10(v); }

/// JSON (de)serialization.  Complex numbers are [re, im] pairs; Fock
/// matrices are flattened row-major lists of pairs together with "dim".
StateSpec state_spec_from_json(const nlohmann::json& j);
nlohmann::json state_spec_to_json(const StateSpec& spec);
StateSpec load_state_spec(const std::string& path);

}  // namespace qncq
