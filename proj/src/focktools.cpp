#include "qncq/focktools.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>

namespace qncq {

int highest_fock_index(const FockDensityMatrix& rho, double tol) {
  double max_diag = 0.0;
  for (int m = 0; m < rho.dim(); ++m)
    max_diag = std::max(max_diag, std::abs(rho(m, m)));
  if (max_diag == 0.0) return 0;
  for (int m = rho.dim() - 1; m > 0; --m)
    if (std::abs(rho(m, m)) > tol * max_diag) return m;
  return 0;
}

DncResult dnc_finite(const FockDensityMatrix& rho, double tol,
                     double poly_zero_tol) {
  int m = highest_fock_index(rho, tol);
  int order = polynomial_from_fock(rho).order(poly_zero_tol);
  if (order != 2 * m) {
    std::ostringstream msg;
    msg << "polynomial CF order " << order << " disagrees with 2*"
        << "highest Fock index " << m
        << "; the Fock and coefficient tolerances select different supports";
    throw InconsistentOrder(msg.str());
  }
  return DncResult{m + 1, DncMethod::PolynomialOrder, m, order, tol};
}

int beam_splitter_schmidt_rank(const FockStateVector& psi, double tol) {
  if (psi.size() == 0 || !(psi.squaredNorm() > 0.0))
    throw InvalidInput("state vector is empty or zero");
  const int d = int(psi.size());
  // |n, 0> -> 2^{-n/2} sum_j sqrt(binom(n, j)) |j, n - j| under the 50:50
  // beam splitter; the Schmidt rank is the rank of the coefficient matrix.
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(d, d);
  for (int n = 0; n < d; ++n) {
    for (int j = 0; j <= n; ++j) {
      double log_w = 0.5 * (log_factorial(n) - log_factorial(j) -
                            log_factorial(n - j)) -
                     0.5 * n * std::log(2.0);
      c(j, n - j) = psi[n] * std::exp(log_w);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(c);
  const auto& sv = svd.singularValues();
  double top = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * top) ++rank;
  return rank;
}

FockDensityMatrix photon_add_fock(const FockDensityMatrix& rho, int n) {
  if (n < 1) throw InvalidInput("photon addition count must be >= 1");
  const int d = rho.dim();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d + n, d + n);
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l < d; ++l) {
      double log_w = 0.5 * (log_factorial(k + n) - log_factorial(k) +
                            log_factorial(l + n) - log_factorial(l));
      out(k + n, l + n) = rho(k, l) * std::exp(log_w);
    }
  }
  double trace = out.trace().real();
  if (!(trace > 0.0) || !std::isfinite(trace))
    throw InvalidInput("photon addition produced a non-normalizable matrix");
  out /= trace;
  return FockDensityMatrix::unchecked(std::move(out));
}

FockDensityMatrix photon_subtract_fock(const FockDensityMatrix& rho) {
  const int d = rho.dim();
  double mean_n = 0.0;
  for (int m = 0; m < d; ++m) mean_n += m * rho(m, m).real();
  if (!(mean_n > 1e-14))
    throw VacuumSubtraction(
        "cannot subtract a photon from a (numerically) vacuum state");
  const int dd = std::max(d - 1, 1);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dd, dd);
  for (int k = 0; k + 1 < d; ++k)
    for (int l = 0; l + 1 < d; ++l)
      out(k, l) = std::sqrt(double(k + 1) * (l + 1)) * rho(k + 1, l + 1);
  out /= mean_n;
  return FockDensityMatrix::unchecked(std::move(out));
}

PolynomialCF photon_add_cf(const PolynomialCF& p, int n) {
  if (n < 1) throw InvalidInput("photon addition count must be >= 1");
  const int d0 = p.max_index() + 1;
  // Work on a matrix padded for the final support; one application of
  // (1 + D) raises the maximal index by one.
  Eigen::MatrixXcd cur = Eigen::MatrixXcd::Zero(d0 + n, d0 + n);
  cur.topLeftCorner(d0, d0) = p.coeffs();
  auto at = [](const Eigen::MatrixXcd& m, int k, int l) -> Complex {
    if (k < 0 || l < 0 || k >= m.rows() || l >= m.cols()) return 0.0;
    return m(k, l);
  };
  for (int step = 0; step < n; ++step) {
    Eigen::MatrixXcd next(cur.rows(), cur.cols());
    for (int k = 0; k < cur.rows(); ++k)
      for (int l = 0; l < cur.cols(); ++l)
        next(k, l) = at(cur, k, l) - at(cur, k - 1, l - 1) +
                     double(k + l) * at(cur, k, l) -
                     double(k + 1) * double(l + 1) * at(cur, k + 1, l + 1);
    cur = std::move(next);
  }
  double norm = cur(0, 0).real();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw InvalidInput("photon addition produced a non-normalizable CF");
  cur /= norm;
  return PolynomialCF::from_coeffs(std::move(cur));
}

}  // namespace qncq
