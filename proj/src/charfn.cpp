#include "qncq/charfn.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qncq {

namespace {

constexpr double kExpGuard = 700.0;  // exp() overflows just above 709

Complex pow_int(Complex z, int n) {
  Complex acc = 1.0;
  for (int i = 0; i < n; ++i) acc *= z;
  return acc;
}

double binom(int n, int k) {
  double acc = 1.0;
  for (int i = 1; i <= k; ++i) acc *= double(n - k + i) / double(i);
  return acc;
}

}  // namespace

PolynomialCF PolynomialCF::from_coeffs(Eigen::MatrixXcd coeffs, double tol) {
  if (coeffs.rows() == 0 || coeffs.rows() != coeffs.cols())
    throw InvalidInput("coefficient matrix must be square and nonempty");
  if (!coeffs.allFinite())
    throw InvalidInput("coefficient matrix has non-finite entries");
  double scale = std::max(1.0, coeffs.cwiseAbs().maxCoeff());
  if (std::abs(coeffs(0, 0) - Complex(1.0)) > tol * scale)
    throw InvalidInput("coefficient (0,0) must be 1 (CF normalization)");
  const int d = int(coeffs.rows());
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l <= k; ++l) {
      double sign = ((k + l) % 2 == 0) ? 1.0 : -1.0;
      Complex mirror = sign * std::conj(coeffs(k, l));
      if (std::abs(coeffs(l, k) - mirror) > tol * scale)
        throw InvalidInput("coefficient matrix violates CF Hermiticity");
      // Project exactly onto the Hermitian part so downstream algebra
      // preserves the constraint bit-for-bit.
      Complex avg = 0.5 * (coeffs(l, k) + mirror);
      coeffs(l, k) = avg;
      coeffs(k, l) = sign * std::conj(avg);
    }
  }
  coeffs /= coeffs(0, 0).real();
  return PolynomialCF(std::move(coeffs));
}

int PolynomialCF::order(double trim_tol) const {
  double threshold = trim_tol * coeffs_.cwiseAbs().maxCoeff();
  int best = 0;
  for (int k = 0; k < coeffs_.rows(); ++k)
    for (int l = 0; l < coeffs_.cols(); ++l)
      if (std::abs(coeffs_(k, l)) > threshold) best = std::max(best, k + l);
  return best;
}

PolynomialCF polynomial_from_fock(const FockDensityMatrix& rho) {
  const int d = rho.dim();
  // <a^{dag k} a^l> = sum_{n >= l} rho_{n, n-l+k} sqrt(n! (n-l+k)!) / (n-l)!
  Eigen::MatrixXcd coeffs = Eigen::MatrixXcd::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l < d; ++l) {
      Complex m = 0.0;
      for (int n = l; n < d; ++n) {
        int j = n - l + k;
        if (j >= d) break;
        m += rho(n, j) * std::exp(0.5 * (log_factorial(n) + log_factorial(j)) -
                                  log_factorial(n - l));
      }
      double sign = (l % 2 == 0) ? 1.0 : -1.0;
      coeffs(k, l) =
          sign * m * std::exp(-log_factorial(k) - log_factorial(l));
    }
  }
  // Trim trailing index layers that vanish in both rows and columns.
  double threshold = 1e-12 * std::max(1.0, coeffs.cwiseAbs().maxCoeff());
  int top = d - 1;
  while (top > 0 && coeffs.row(top).cwiseAbs().maxCoeff() <= threshold &&
         coeffs.col(top).cwiseAbs().maxCoeff() <= threshold)
    --top;
  Eigen::MatrixXcd trimmed = coeffs.topLeftCorner(top + 1, top + 1);
  return PolynomialCF::from_coeffs(std::move(trimmed));
}

Complex eval_polynomial(const PolynomialCF& p, Complex beta) {
  const auto& c = p.coeffs();
  const Complex bc = std::conj(beta);
  Complex acc = 0.0;
  for (int k = int(c.rows()) - 1; k >= 0; --k) {
    Complex row = 0.0;
    for (int l = int(c.cols()) - 1; l >= 0; --l) row = row * bc + c(k, l);
    acc = acc * beta + row;
  }
  return acc;
}

Complex cf_fock_element(int k, int l, Complex beta) {
  if (k < 0 || l < 0) throw InvalidInput("Fock indices must be nonnegative");
  const double lead = 0.5 * (log_factorial(k) + log_factorial(l));
  const Complex mbc = -std::conj(beta);
  Complex acc = 0.0;
  for (int n = 0; n <= std::min(k, l); ++n) {
    double ln = lead - log_factorial(l - n) - log_factorial(k - n) -
                log_factorial(n);
    acc += std::exp(ln) * pow_int(beta, l - n) * pow_int(mbc, k - n);
  }
  if (!is_finite(acc))
    throw OverflowGuard("Fock-element CF overflowed; |beta| too large");
  return acc;
}

Complex cf_coherent_superposition(const CoherentSuperposition& sup,
                                  Complex beta) {
  const auto& terms = sup.terms();
  const int r = int(terms.size());
  const Complex bc = std::conj(beta);
  // Numerator exponents g_{kl} = beta conj(a_k) - conj(beta) a_l
  //                             + conj(a_k) a_l - (|a_k|^2 + |a_l|^2)/2;
  // denominator exponents h_{kl} drop the beta terms.  Both sums are shifted
  // by their own maximal real exponent before exponentiation.
  double max_g = -std::numeric_limits<double>::infinity();
  double max_h = max_g;
  for (int k = 0; k < r; ++k) {
    for (int l = 0; l < r; ++l) {
      Complex ak = terms[k].alpha, al = terms[l].alpha;
      double base = (std::conj(ak) * al).real() -
                    0.5 * (std::norm(ak) + std::norm(al));
      max_h = std::max(max_h, base);
      max_g = std::max(
          max_g, base + (beta * std::conj(ak)).real() - (bc * al).real());
    }
  }
  Complex num = 0.0, den = 0.0;
  for (int k = 0; k < r; ++k) {
    for (int l = 0; l < r; ++l) {
      Complex w = std::conj(terms[k].lambda) * terms[l].lambda;
      Complex ak = terms[k].alpha, al = terms[l].alpha;
      Complex h = std::conj(ak) * al - 0.5 * (std::norm(ak) + std::norm(al));
      Complex g = h + beta * std::conj(ak) - bc * al;
      num += w * std::exp(g - max_g);
      den += w * std::exp(h - max_h);
    }
  }
  if (!(den.real() > 0.0))
    throw DegenerateSuperposition("superposition norm is numerically zero");
  double shift = max_g - max_h;
  Complex ratio = num / den.real();
  if (shift > kExpGuard ||
      shift + std::log(std::max(std::abs(ratio), 1e-300)) > kExpGuard)
    throw OverflowGuard("CF exceeds the floating range after stabilization");
  return ratio * std::exp(shift);
}

namespace {

// cosh|xi| and e^{i arg xi} sinh|xi|.
std::pair<double, Complex> squeeze_mu_nu(Complex xi) {
  double s = std::abs(xi);
  Complex phase = (s == 0.0) ? Complex(1.0) : xi / s;
  return {std::cosh(s), phase * std::sinh(s)};
}

double checked_exp_arg(double re) {
  if (re > kExpGuard)
    throw OverflowGuard("CF exceeds the floating range");
  return re;
}

// exp of a complex argument with an overflow guard on the real part.
Complex guarded_exp(Complex z) {
  checked_exp_arg(z.real());
  return std::exp(z);
}

Complex cf_squeezed(double mu, Complex nu, Complex beta) {
  double arg = 0.5 * std::norm(beta) -
               0.5 * std::norm(mu * beta + nu * std::conj(beta));
  return std::exp(checked_exp_arg(arg));
}

}  // namespace

CFEvaluator::CFEvaluator(StateSpec spec) : spec_(std::move(spec)) {
  if (const auto* rho = std::get_if<FockDensityMatrix>(&spec_))
    poly_ = std::make_shared<const PolynomialCF>(polynomial_from_fock(*rho));
}

Complex CFEvaluator::operator()(Complex beta) const {
  return std::visit(
      [&](const auto& s) -> Complex {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CoherentSuperposition>) {
          return cf_coherent_superposition(s, beta);
        } else if constexpr (std::is_same_v<T, FockDensityMatrix>) {
          return eval_polynomial(*poly_, beta);
        } else if constexpr (std::is_same_v<T, SqueezedVacuumSpec>) {
          auto [mu, nu] = squeeze_mu_nu(s.xi);
          return cf_squeezed(mu, nu, beta);
        } else if constexpr (std::is_same_v<T, SqPlusVacSpec>) {
          // N (|0> + lambda |xi>) has the four-term CF: vacuum, the two
          // interference terms <0|:D:|xi>, and the squeezed CF itself.
          auto [mu, nu] = squeeze_mu_nu(s.xi);
          double n2 = 1.0 / (1.0 + 2.0 * s.lambda.real() / std::sqrt(mu) +
                             std::norm(s.lambda));
          Complex bc = std::conj(beta);
          Complex cross = guarded_exp(-bc * bc * nu / (2.0 * mu)) / std::sqrt(mu);
          Complex phi = 1.0 + s.lambda * cross +
                        std::conj(s.lambda * cross) +
                        std::norm(s.lambda) * cf_squeezed(mu, nu, beta);
          return n2 * phi;
        } else if constexpr (std::is_same_v<T, SqVacMixtureSpec>) {
          auto [mu, nu] = squeeze_mu_nu(s.xi);
          double w = s.lambda_abs * s.lambda_abs;
          return (1.0 + w * cf_squeezed(mu, nu, beta)) / (1.0 + w);
        } else {
          static_assert(std::is_same_v<T, GaussianVariancesSpec>);
          Complex a2 = std::polar(1.0, -2.0 * s.theta) * (s.v_sq - s.v_asq) / 4.0;
          double nbar = (s.v_sq + s.v_asq - 2.0) / 4.0;
          Complex bc = std::conj(beta);
          Complex arg = 0.5 * beta * beta * std::conj(a2) +
                        0.5 * bc * bc * a2 - std::norm(beta) * nbar;
          return guarded_exp(arg);
        }
      },
      spec_);
}

double max_abs_cf_over_phase(const CFEvaluator& f, double beta_abs) {
  if (beta_abs == 0.0) return std::abs(f(Complex(0.0)));
  auto value = [&](double phi) {
    return std::abs(f(std::polar(beta_abs, phi)));
  };
  // |Phi(-beta)| = |Phi(beta)|, so phi has period pi.
  constexpr int kScan = 64;
  const double pi = std::acos(-1.0);
  int best = 0;
  double best_val = -1.0;
  for (int j = 0; j < kScan; ++j) {
    double v = value(j * pi / kScan);
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  // Golden-section refinement on the bracket around the best sample.
  double a = (best - 1) * pi / kScan;
  double b = (best + 1) * pi / kScan;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = value(x1), f2 = value(x2);
  for (int it = 0; it < 80 && (b - a) > 1e-12; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = value(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = value(x1);
    }
  }
  return std::max({best_val, f1, f2});
}

namespace {

// Iterated-central-difference estimate of d_x^a d_y^b Phi(0) on a cached
// lattice of CF values: vals(i + K, j + K) = Phi((i + j*I) * step).
Complex lattice_derivative(const Eigen::MatrixXcd& vals, int K, double step,
                           int a, int b) {
  Complex acc = 0.0;
  for (int s = 0; s <= a; ++s) {
    for (int t = 0; t <= b; ++t) {
      double w = binom(a, s) * binom(b, t) * (((s + t) % 2 == 0) ? 1.0 : -1.0);
      acc += w * vals((a - 2 * s) + K, (b - 2 * t) + K);
    }
  }
  return acc / std::pow(2.0 * step, a + b);
}

// Wirtinger combination  d_beta^k d_betabar^l
//   = 2^{-(k+l)} (d_x - i d_y)^k (d_x + i d_y)^l.
Complex wirtinger_derivative(const Eigen::MatrixXcd& vals, int K, double step,
                             int k, int l) {
  const Complex I(0.0, 1.0);
  Complex acc = 0.0;
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= l; ++j)
      acc += binom(k, i) * binom(l, j) * pow_int(-I, k - i) *
             pow_int(I, l - j) *
             lattice_derivative(vals, K, step, i + j, (k - i) + (l - j));
  return acc / std::pow(2.0, k + l);
}

}  // namespace

Eigen::MatrixXcd moments_from_cf(const CFEvaluator& f, int kmax, double h) {
  if (kmax < 0 || kmax > 4)
    throw InvalidInput("moments_from_cf supports kmax in 0..4");
  if (!(h > 0.0)) throw InvalidInput("finite-difference step must be positive");
  const int K = 2 * kmax;
  auto lattice = [&](double step) {
    Eigen::MatrixXcd vals(2 * K + 1, 2 * K + 1);
    for (int i = -K; i <= K; ++i)
      for (int j = -K; j <= K; ++j)
        vals(i + K, j + K) = f(Complex(i * step, j * step));
    return vals;
  };
  Eigen::MatrixXcd coarse = lattice(h), fine = lattice(h / 2);
  Eigen::MatrixXcd moments(kmax + 1, kmax + 1);
  for (int k = 0; k <= kmax; ++k) {
    for (int l = 0; l <= kmax; ++l) {
      Complex dc = wirtinger_derivative(coarse, K, h, k, l);
      Complex df = wirtinger_derivative(fine, K, h / 2, k, l);
      Complex richardson = (4.0 * df - dc) / 3.0;
      moments(k, l) = ((l % 2 == 0) ? 1.0 : -1.0) * richardson;
    }
  }
  return moments;
}

}  // namespace qncq
