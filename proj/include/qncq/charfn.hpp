#pragma once

#include <Eigen/Dense>
#include <memory>

#include "qncq/states.hpp"
#include "qncq/types.hpp"

namespace qncq {

/// Normal-ordered characteristic functions Phi(beta) = <:D(beta):> =
/// <e^{beta a^dag} e^{-conj(beta) a}>.  For states supported on finitely many
/// Fock layers, Phi is a bivariate polynomial in (beta, conj(beta)).

/// Polynomial CF stored as a coefficient matrix:
///   Phi(beta) = sum_{k,l} coeff(k, l) beta^k conj(beta)^l,
/// with coeff(k, l) = (-1)^l <a^{dag k} a^l> / (k! l!).  Valid coefficient
/// matrices satisfy coeff(0,0) = 1 and the Hermiticity constraint
/// coeff(l, k) = (-1)^{k+l} conj(coeff(k, l)).
class PolynomialCF {
 public:
  /// Validates the two invariants above (tolerance relative to the largest
  /// coefficient) and symmetrizes exactly onto the Hermitian part.
  static PolynomialCF from_coeffs(Eigen::MatrixXcd coeffs, double tol = 1e-9);

  const Eigen::MatrixXcd& coeffs() const { return coeffs_; }
  int max_index() const { return int(coeffs_.rows()) - 1; }

  /// Largest k + l with |coeff| above trim_tol * max|coeff|; always even for
  /// coefficient matrices arising from density matrices.
  int order(double trim_tol = 1e-12) const;

 private:
  explicit PolynomialCF(Eigen::MatrixXcd coeffs) : coeffs_(std::move(coeffs)) {}
  Eigen::MatrixXcd coeffs_;
};

/// Coefficient matrix of a truncated Fock density matrix, built from the
/// normally ordered moments <a^{dag k} a^l> = sum_{n >= l} rho_{n, n-l+k}
/// sqrt(n! (n-l+k)!) / (n-l)!.
PolynomialCF polynomial_from_fock(const FockDensityMatrix& rho);

Complex eval_polynomial(const PolynomialCF& p, Complex beta);

/// CF of the elementary operator |k><l|:
///   Phi_{k,l}(beta) = sum_{n=0}^{min(k,l)} sqrt(k! l!) beta^{l-n}
///                     (-conj(beta))^{k-n} / ((l-n)! (k-n)! n!),
/// so that Phi_rho = sum_{k,l} rho_{k,l} Phi_{k,l}.  Phi_{m,m} is the
/// Laguerre polynomial L_m(|beta|^2).
Complex cf_fock_element(int k, int l, Complex beta);

/// CF of a coherent superposition as a ratio of Gram-type double sums; the
/// exponents are shifted by their maximum real part before exponentiation so
/// the ratio stays finite for large amplitudes.  The superposition need not
/// be normalized (the denominator is <Psi|Psi>).
Complex cf_coherent_superposition(const CoherentSuperposition& sup,
                                  Complex beta);

/// Evaluates any StateSpec's CF at one point.  Precomputes the per-family
/// representation once (polynomial coefficients for Fock input, mu/nu for
/// the squeezed families).
class CFEvaluator {
 public:
  explicit CFEvaluator(StateSpec spec);

  Complex operator()(Complex beta) const;
  const StateSpec& spec() const { return spec_; }

 private:
  StateSpec spec_;
  std::shared_ptr<const PolynomialCF> poly_;  // set for Fock input
};

/// max over phases of |Phi(beta_abs e^{i phi})|: 64-point scan on [0, pi)
/// (|Phi(-beta)| = |Phi(beta)| halves the period) plus golden-section
/// refinement around the best sample.
double max_abs_cf_over_phase(const CFEvaluator& f, double beta_abs);

/// Moment table <a^{dag k} a^l> for k, l <= kmax, recovered from derivatives
/// of the CF at the origin by iterated central differences (step h, one
/// Richardson extrapolation pass).  Intended for kmax <= 4.
Eigen::MatrixXcd moments_from_cf(const CFEvaluator& f, int kmax,
                                 double h = 1e-3);

}  // namespace qncq
