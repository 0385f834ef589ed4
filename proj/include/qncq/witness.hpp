#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qncq/bounds.hpp"
#include "qncq/charfn.hpp"
#include "qncq/states.hpp"
#include "qncq/types.hpp"

#include "json.hpp"

namespace qncq {

/// DNC lower-bound certification: a state whose CF modulus exceeds
/// chi_r(|beta|) anywhere cannot be written with r coherent terms, so its
/// DNC is larger than r.

struct CFSample {
  Complex beta;
  Complex phi;
  double sigma = 0.0;  // standard error of phi (0 for exact values)
};

/// CF values sampled on a finite set of phase-space points, e.g. from
/// homodyne data.  The validating constructor checks the two sanity
/// invariants: a beta = 0 sample exists and is consistent with
/// normalization (|phi - 1| <= max(3 sigma, 1e-9)), and Hermitian pairs
/// (+beta, -beta), when both present, satisfy phi(-beta) = conj(phi(beta))
/// within 3 combined sigmas.
class SampledCF {
 public:
  static SampledCF validated(std::vector<CFSample> points);
  static SampledCF unchecked(std::vector<CFSample> points);

  const std::vector<CFSample>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  SampledCF() = default;
  std::vector<CFSample> points_;
};

/// CSV with header `beta_re,beta_im,phi_re,phi_im,sigma`.
SampledCF load_sampled_cf_csv(const std::string& path);
void write_sampled_cf_csv(const SampledCF& data, const std::string& path);

/// Interpolates a bound table between grid nodes: monotone cubic
/// (Fritsch-Carlson) on log chi, evaluated as the upper envelope of the
/// cubic and the linear chord, plus a 1e-6 relative safety pad.  The
/// envelope can only overestimate chi_r, so interpolation never certifies
/// more than the grid data supports.
class BoundInterpolator {
 public:
  explicit BoundInterpolator(const BoundTable& table,
                             double safety_pad = 1e-6);

  int r() const { return r_; }
  double beta_min() const { return x_.front(); }
  double beta_max() const { return x_.back(); }
  bool covers(double beta_abs) const;
  double log_chi(double beta_abs) const;  // includes the pad
  double chi(double beta_abs) const;

 private:
  int r_ = 0;
  double pad_ = 0.0;
  std::vector<double> x_, y_, m_;  // nodes, log chi, node slopes
};

struct WitnessPoint {
  Complex beta;     // point (or phase-maximizing radius) of the violation
  int r;            // bound level exceeded
  double abs_phi;
  double bound;     // padded chi_r at |beta|
  double margin;    // abs_phi - bound
  double sigmas;    // margin / sigma; +infinity for exact (analytic) input
};

struct WitnessReport {
  /// Largest r whose bound is significantly exceeded; the state's DNC is
  /// certified to be at least certified_dnc_gt + 1.  0 means no
  /// nonclassicality was certified.
  int certified_dnc_gt = 0;
  std::vector<WitnessPoint> witness_points;  // best point per violated r
  std::vector<int> bounds_used;              // r values consulted
  std::vector<std::string> warnings;
};

nlohmann::json witness_report_to_json(const WitnessReport& report);

/// Certifies a DNC lower bound for an analytically known state: at every
/// grid node of every table, max_phi |Phi(beta e^{i phi})| is compared
/// against the padded bound; sigma is 0, so k_sigma only matters for
/// sampled data.  A chi_1 = 1 bound is implied even when no r = 1 table is
/// supplied (covering the union of the supplied ranges).
WitnessReport certify(const StateSpec& spec,
                      const std::vector<BoundTable>& tables,
                      double k_sigma = 0.0);

/// Certifies from sampled CF values: each sample is tested against the
/// interpolated bounds at its own |beta|; a violation must clear
/// k_sigma * sigma.  Samples outside the table range throw RangeMismatch
/// unless clip is set, in which case they are ignored with a warning.
WitnessReport certify(const SampledCF& data,
                      const std::vector<BoundTable>& tables,
                      double k_sigma = 5.0, bool clip = false);

/// Certified level of the vacuum/squeezed-vacuum mixture per mixing weight:
/// the staircase (lambda_abs, certified_dnc_gt) over the given grid.
/// Requires a table for r = 2 (r = 1 is implicit).
std::vector<std::pair<double, int>> mixture_threshold_scan(
    Complex xi, const std::vector<double>& lambda_grid,
    const std::vector<BoundTable>& tables);

struct BochnerResult {
  double min_eigenvalue;
  bool nonclassical;  // min_eigenvalue < -tolerance
};

/// Second Bochner condition at a finite point set: the matrix
/// [Phi(beta_i - beta_j)] is positive semidefinite for every classical
/// state, so a negative eigenvalue witnesses nonclassicality.
BochnerResult bochner_matrix_test(const StateSpec& spec,
                                  const std::vector<Complex>& betas,
                                  double tol = 1e-10);

/// The same test from sampled values: each required difference beta_i -
/// beta_j is looked up among the samples (or its negative, completed by
/// conjugation) within a 1e-9 matching radius; missing differences throw
/// RangeMismatch.
BochnerResult bochner_matrix_test(const SampledCF& data,
                                  const std::vector<Complex>& betas,
                                  double tol = 1e-10);

}  // namespace qncq
