#pragma once

#include "qncq/charfn.hpp"
#include "qncq/states.hpp"
#include "qncq/types.hpp"

namespace qncq {

/// Exact nonclassicality degrees for finite-Fock states, plus photon
/// addition/subtraction in Fock space and on polynomial CFs.

enum class DncMethod { PolynomialOrder, SchmidtRank };

struct DncResult {
  int dnc;                // highest_fock + 1
  DncMethod method;
  int highest_fock;       // largest occupied Fock layer
  int poly_order;         // order of the polynomial CF (= 2 * highest_fock)
  double tolerance_used;
};

/// Largest m with |rho_{m,m}| > tol * max_diag; 0 for vacuum.  The tolerance
/// is relative to the largest diagonal entry.
int highest_fock_index(const FockDensityMatrix& rho, double tol = 1e-10);

/// Degree of nonclassicality of a state on finitely many Fock layers:
/// dnc = m + 1 where m is the highest occupied index, cross-checked against
/// the order 2m of the polynomial CF.  Throws InconsistentOrder when the two
/// tolerances select different supports.
DncResult dnc_finite(const FockDensityMatrix& rho, double tol = 1e-10,
                     double poly_zero_tol = 1e-12);

/// Schmidt rank of the two-mode state obtained by sending |psi> and vacuum
/// through a 50:50 beam splitter: coefficient matrix
/// C_{j, n-j} = psi_n 2^{-n/2} sqrt(binom(n, j)), rank counted as singular
/// values > tol * sigma_max.  Equals dnc of the input for pure states.
int beam_splitter_schmidt_rank(const FockStateVector& psi, double tol = 1e-10);

/// n-photon addition rho -> a^{dag n} rho a^n / tr(...); output dimension
/// grows by n.
FockDensityMatrix photon_add_fock(const FockDensityMatrix& rho, int n);

/// Photon subtraction rho -> a rho a^dag / tr(rho a^dag a); dimension
/// shrinks by one.  Throws VacuumSubtraction on (numerically) vacuum input.
FockDensityMatrix photon_subtract_fock(const FockDensityMatrix& rho);

/// n-photon addition acting on a polynomial CF.  One addition acts as the
/// normal-ordered operator 1 + D with
///   D = -|beta|^2 + beta d_beta + conj(beta) d_betabar - d_beta d_betabar,
/// i.e. coefficientwise
///   (D phi)_{k,l} = -phi_{k-1,l-1} + (k+l) phi_{k,l}
///                   - (k+1)(l+1) phi_{k+1,l+1};
/// n additions apply (1 + D)^n, which expands to the normal-ordered sum
/// sum_k n!^2 / (k!^2 (n-k)!) :D^k: of the closed-form presentation.  The
/// result is renormalized so that phi_{0,0} = 1; order grows by 2n.
PolynomialCF photon_add_cf(const PolynomialCF& p, int n);

}  // namespace qncq
