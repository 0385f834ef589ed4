#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qncq/states.hpp"
#include "qncq/types.hpp"

namespace qncq {

/// Witness bound functions chi_r(beta) = sup over superpositions of r
/// coherent states of |Phi(beta)|, computed by multi-start gradient ascent
/// in the canonical gauge (lambda_1 = 1, alpha_1 = 0; 4(r-1) real
/// parameters).  Free parameters are packed per extra term:
///   theta[4j + 0..3] = (Re lambda, Im lambda, Re alpha, Im alpha)
/// for term j + 2, j = 0..r-2.

struct OptimizerConfig {
  int r = 2;
  int restarts = 0;     // <= 0 selects the default for r (capped at 4096)
  int max_iters = 5000;
  double grad_tol = 1e-8;   // convergence: gradient infinity norm below this
  double step_init = 0.1;   // initial Armijo step
  std::uint64_t seed = 1;
  std::vector<double> beta_grid;  // empty selects the default grid
  int threads = 0;                // <= 0: QNCQ_THREADS env var, else 1
  int continuation_restarts = 0;  // rows after the first; <= 0: restarts/8

  /// 2^{4(r-1)} starting points, capped at 4096.
  static int default_restarts(int r);
  int effective_restarts() const;
  int effective_continuation_restarts() const;
  int effective_threads() const;
  std::vector<double> effective_grid() const;
};

/// |beta| in [0, 5] with step 0.05.
std::vector<double> default_beta_grid();

struct ChiResult {
  double chi;
  double log_chi;
  CoherentSuperposition best_state;  // canonical gauge, not normalized
  bool converged;
  double grad_norm;
  int iterations;
};

/// Maximizes |Phi(beta)| over canonical r-term superpositions at real
/// positive beta (rotation covariance makes the phase irrelevant); returns
/// the best over all restarts.  Nonconvergence is reported via the flag,
/// never thrown.
ChiResult chi_r(double beta_abs, const OptimizerConfig& config);

/// Validation mode: the same optimization at beta = beta_abs e^{i phase};
/// the result must agree with chi_r(beta_abs) up to optimizer tolerance.
ChiResult chi_r_at_phase(double beta_abs, double phase,
                         const OptimizerConfig& config);

struct BoundRow {
  double beta_abs;
  double chi;
  double chi_normalized;  // chi * e^{-beta^2/2}
  std::optional<CoherentSuperposition> best_state;
  bool converged;
};

struct BoundTable {
  int r = 0;
  std::uint64_t seed = 0;
  std::vector<BoundRow> rows;

  bool all_converged() const;
  double beta_min() const;
  double beta_max() const;
};

/// chi_r on every grid point, ascending in |beta|.  The first optimized row
/// uses the full restart budget; later rows run continuation_restarts random
/// starts plus a warm start from the previous row's winner.  `warm` may hold
/// a lower-r table whose per-row winners (padded with a small extra term)
/// seed the corresponding rows here; this keeps chi nondecreasing in r
/// numerically.  Deterministic for fixed config (and warm table).
BoundTable build_bound_table(const OptimizerConfig& config,
                             const BoundTable* warm = nullptr);

struct PlateauValue {
  double value;       // large-|beta| limit of chi_r e^{-beta^2/2}
  bool closed_form;   // true for r <= 5 (tabulated), false for the eigenvalue route
};

/// Reference plateau per r: 0, 1/2, 1/sqrt(2), (1+sqrt(5))/4, sqrt(3)/2 for
/// r = 1..5.  For r > 5 the value is the maximum of
/// sum_k w_k w_{k+1} / sum_k w_k^2 over real weights, i.e. the top
/// eigenvalue of the r x r tridiagonal matrix with zero diagonal and 1/2
/// off-diagonals.
PlateauValue reference_plateau(int r);

struct VarianceResult {
  double v_min;
  CoherentSuperposition best_state;
  bool converged;
};

/// Minimizes the phase-minimal quadrature variance (vacuum = 1) over
/// canonical r-term superpositions with the same multi-start machinery.
VarianceResult min_variance_over_Sr(int r, const OptimizerConfig& config);

/// CSV with header `r,beta_abs,chi,chi_normalized`; floats are written with
/// 17 significant digits so reloading is bit-exact.
void write_bound_table_csv(const BoundTable& table, const std::string& path);
BoundTable load_bound_table_csv(const std::string& path);

/// Sidecar JSON carrying the achieving state per row.
void write_bound_table_states_json(const BoundTable& table,
                                   const std::string& path);

/// Finite-difference cross-check hooks: maximum componentwise deviation
/// between the analytic gradient and central differences (step h) at a
/// packed parameter point, relative to the gradient scale.
double chi_gradient_fd_error(int r, double beta_abs,
                             const std::vector<double>& params,
                             double h = 1e-6);
double variance_gradient_fd_error(int r, const std::vector<double>& params,
                                  double h = 1e-6);

}  // namespace qncq
