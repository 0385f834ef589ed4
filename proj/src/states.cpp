#include "qncq/states.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qncq {

Complex coherent_overlap(Complex a, Complex b) {
  return std::exp(-0.5 * std::norm(a) - 0.5 * std::norm(b) +
                  std::conj(a) * b);
}

CoherentSuperposition::CoherentSuperposition(std::vector<CoherentTerm> terms,
                                             double merge_tol) {
  if (terms.empty())
    throw DegenerateSuperposition("superposition needs at least one term");
  for (const auto& t : terms) {
    if (!is_finite(t.lambda) || !is_finite(t.alpha))
      throw InvalidInput("superposition term is not finite");
    if (std::abs(t.lambda) == 0.0)
      throw InvalidInput("superposition term has zero coefficient");
  }
  for (std::size_t i = 0; i < terms.size(); ++i) {
    for (std::size_t j = i + 1; j < terms.size(); ++j) {
      if (std::abs(terms[i].alpha - terms[j].alpha) <= merge_tol) {
        std::ostringstream msg;
        msg << "coherent amplitudes " << i << " and " << j
            << " coincide within " << merge_tol
            << "; merge the terms before constructing";
        throw DegenerateSuperposition(msg.str());
      }
    }
  }
  terms_ = std::move(terms);
  double weight = 0.0;
  for (const auto& t : terms_) weight += std::norm(t.lambda);
  if (!(norm_squared() > 1e-24 * weight))
    throw DegenerateSuperposition("superposition norm is numerically zero");
}

CoherentSuperposition CoherentSuperposition::unchecked(
    std::vector<CoherentTerm> terms, bool normalized) {
  CoherentSuperposition s;
  s.terms_ = std::move(terms);
  s.normalized_ = normalized;
  return s;
}

double CoherentSuperposition::norm_squared() const {
  // <Psi|Psi> = sum_{k,l} conj(lambda_k) lambda_l <alpha_k|alpha_l>.
  Complex acc = 0.0;
  for (const auto& tk : terms_)
    for (const auto& tl : terms_)
      acc += std::conj(tk.lambda) * tl.lambda *
             coherent_overlap(tk.alpha, tl.alpha);
  return acc.real();
}

CoherentSuperposition normalize(const CoherentSuperposition& sup) {
  double n2 = sup.norm_squared();
  if (!(n2 > 0.0) || !std::isfinite(n2))
    throw DegenerateSuperposition("cannot normalize: norm is zero or invalid");
  double scale = 1.0 / std::sqrt(n2);
  std::vector<CoherentTerm> terms = sup.terms();
  for (auto& t : terms) t.lambda *= scale;
  return CoherentSuperposition::unchecked(std::move(terms), true);
}

CoherentSuperposition canonicalize(const CoherentSuperposition& sup) {
  const auto& in = sup.terms();
  if (in.empty())
    throw DegenerateSuperposition("cannot canonicalize an empty superposition");
  Complex l1 = in.front().lambda;
  Complex a1 = in.front().alpha;
  if (std::abs(l1) == 0.0)
    throw DegenerateSuperposition("first coefficient vanishes; reorder terms");
  std::vector<CoherentTerm> out;
  out.reserve(in.size());
  for (const auto& t : in) {
    // D(-a1)|alpha> = exp((conj(a1) alpha - a1 conj(alpha))/2) |alpha - a1>;
    // the phase goes into the coefficient, then everything is scaled by 1/l1.
    Complex phase =
        std::exp(0.5 * (std::conj(a1) * t.alpha - a1 * std::conj(t.alpha)));
    out.push_back({t.lambda / l1 * phase, t.alpha - a1});
  }
  out.front().alpha = 0.0;  // exact by construction
  out.front().lambda = 1.0;
  return CoherentSuperposition::unchecked(std::move(out), false);
}

FockDensityMatrix FockDensityMatrix::validated(Eigen::MatrixXcd entries,
                                               double tol) {
  if (entries.rows() == 0 || entries.rows() != entries.cols())
    throw InvalidInput("density matrix must be square and nonempty");
  if (!entries.allFinite())
    throw InvalidInput("density matrix has non-finite entries");
  double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  if ((entries - entries.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
    throw InvalidInput("density matrix is not Hermitian");
  if (std::abs(entries.trace() - Complex(1.0)) > std::max(tol, 1e-6))
    throw InvalidInput("density matrix trace differs from 1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(entries,
                                                     Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol * scale)
    throw InvalidInput("density matrix has a negative eigenvalue");
  return FockDensityMatrix(std::move(entries));
}

FockDensityMatrix FockDensityMatrix::pure(const FockStateVector& psi) {
  double n2 = psi.squaredNorm();
  if (psi.size() == 0 || !(n2 > 0.0))
    throw InvalidInput("pure-state vector is empty or has zero norm");
  Eigen::MatrixXcd rho = psi * psi.adjoint() / n2;
  return FockDensityMatrix(std::move(rho));
}

FockDensityMatrix FockDensityMatrix::unchecked(Eigen::MatrixXcd entries) {
  return FockDensityMatrix(std::move(entries));
}

SqueezedVacuumExpansion squeezed_vacuum_fock(Complex xi, int cutoff) {
  if (cutoff < 0) throw InvalidInput("cutoff must be nonnegative");
  double s = std::abs(xi);
  Complex t = (s == 0.0) ? Complex(0.0) : std::tanh(s) * (xi / s);
  FockStateVector c = FockStateVector::Zero(cutoff + 1);
  // c_{2n} = t^n sqrt((2n)!) / (2^n n! sqrt(cosh s)); stable ratio recurrence
  // c_{2n+2}/c_{2n} = t sqrt((2n+1)/(2n+2)).
  Complex cur = 1.0 / std::sqrt(std::cosh(s));
  double weight = 0.0;
  for (int n = 0; 2 * n <= cutoff; ++n) {
    c[2 * n] = cur;
    weight += std::norm(cur);
    cur *= t * std::sqrt((2.0 * n + 1.0) / (2.0 * n + 2.0));
  }
  return {std::move(c), 1.0 - weight};
}

GaussianVariancesSpec gaussian_from_variances(double v_sq, double v_asq,
                                              double theta) {
  if (!(v_sq > 0.0) || !std::isfinite(v_sq) || !std::isfinite(v_asq) ||
      !std::isfinite(theta))
    throw InvalidInput("variances must be finite and positive");
  if (v_asq < v_sq)
    throw InvalidInput("antisqueezed variance must be >= squeezed variance");
  if (v_sq * v_asq < 1.0 - 1e-12)
    throw InvalidInput("variance product violates the uncertainty bound");
  return GaussianVariancesSpec{v_sq, v_asq, theta};
}

namespace {

// cosh|xi| and e^{i arg xi} sinh|xi| of a squeezing parameter.
std::pair<double, Complex> squeeze_mu_nu(Complex xi) {
  double s = std::abs(xi);
  Complex phase = (s == 0.0) ? Complex(1.0) : xi / s;
  return {std::cosh(s), phase * std::sinh(s)};
}

SecondMoments moments_of_superposition(const CoherentSuperposition& sup) {
  Complex den = 0.0, ma = 0.0, ma2 = 0.0, mn = 0.0;
  for (const auto& tk : sup.terms()) {
    for (const auto& tl : sup.terms()) {
      Complex w = std::conj(tk.lambda) * tl.lambda *
                  coherent_overlap(tk.alpha, tl.alpha);
      den += w;
      ma += w * tl.alpha;
      ma2 += w * tl.alpha * tl.alpha;
      mn += w * std::conj(tk.alpha) * tl.alpha;
    }
  }
  if (!(den.real() > 0.0))
    throw DegenerateSuperposition("superposition norm is numerically zero");
  return {ma / den.real(), ma2 / den.real(), (mn / den.real()).real()};
}

SecondMoments moments_of_fock(const FockDensityMatrix& rho) {
  SecondMoments m{0.0, 0.0, 0.0};
  int d = rho.dim();
  for (int n = 0; n < d; ++n) {
    m.mean_n += n * rho(n, n).real();
    if (n >= 1) m.mean_a += std::sqrt(double(n)) * rho(n, n - 1);
    if (n >= 2) m.mean_a2 += std::sqrt(double(n) * (n - 1)) * rho(n, n - 2);
  }
  return m;
}

}  // namespace

SecondMoments analytic_moments(const StateSpec& spec) {
  return std::visit(
      [](const auto& s) -> SecondMoments {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CoherentSuperposition>) {
          return moments_of_superposition(s);
        } else if constexpr (std::is_same_v<T, FockDensityMatrix>) {
          return moments_of_fock(s);
        } else if constexpr (std::is_same_v<T, SqueezedVacuumSpec>) {
          auto [mu, nu] = squeeze_mu_nu(s.xi);
          return {0.0, -mu * nu, std::norm(nu)};
        } else if constexpr (std::is_same_v<T, SqPlusVacSpec>) {
          // N (|0> + lambda |xi>):  <0|xi> = 1/sqrt(mu) couples the branches.
          auto [mu, nu] = squeeze_mu_nu(s.xi);
          double n2 = 1.0 / (1.0 + 2.0 * s.lambda.real() / std::sqrt(mu) +
                             std::norm(s.lambda));
          Complex a2 = -n2 * nu *
                       (s.lambda / std::pow(mu, 1.5) + std::norm(s.lambda) * mu);
          return {0.0, a2, n2 * std::norm(s.lambda) * std::norm(nu)};
        } else if constexpr (std::is_same_v<T, SqVacMixtureSpec>) {
          auto [mu, nu] = squeeze_mu_nu(s.xi);
          double w = s.lambda_abs * s.lambda_abs / (1.0 + s.lambda_abs * s.lambda_abs);
          return {0.0, -w * mu * nu, w * std::norm(nu)};
        } else {
          static_assert(std::is_same_v<T, GaussianVariancesSpec>);
          Complex a2 = std::polar(1.0, -2.0 * s.theta) * (s.v_sq - s.v_asq) / 4.0;
          return {0.0, a2, (s.v_sq + s.v_asq - 2.0) / 4.0};
        }
      },
      spec);
}

double quadrature_variance(const StateSpec& spec, double phi) {
  SecondMoments m = analytic_moments(spec);
  Complex e1 = std::polar(1.0, phi);
  double mean_x = 2.0 * (e1 * m.mean_a).real();
  double mean_x2 = 1.0 + 2.0 * m.mean_n + 2.0 * (e1 * e1 * m.mean_a2).real();
  return mean_x2 - mean_x * mean_x;
}

double min_quadrature_variance(const StateSpec& spec) {
  // V(phi) = 1 + 2(<n> - |<a>|^2) + 2 Re[e^{2i phi}(<a^2> - <a>^2)];
  // the oscillating part attains -2|<a^2> - <a>^2|.
  SecondMoments m = analytic_moments(spec);
  return 1.0 + 2.0 * (m.mean_n - std::norm(m.mean_a)) -
         2.0 * std::abs(m.mean_a2 - m.mean_a * m.mean_a);
}

namespace {

Complex cplx_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw InvalidInput("complex values must be [re, im] pairs");
  return Complex(j[0].get<double>(), j[1].get<double>());
}

nlohmann::json cplx_to_json(Complex z) {
  return nlohmann::json::array({z.real(), z.imag()});
}

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end())
    throw InvalidInput(std::string("state spec is missing field '") + key + "'");
  return *it;
}

}  // namespace

StateSpec state_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw InvalidInput("state spec must be an object with a 'type' string");
  const std::string type = j["type"].get<std::string>();
  if (type == "coherent_superposition") {
    const auto& jt = require(j, "terms");
    if (!jt.is_array() || jt.empty())
      throw InvalidInput("'terms' must be a nonempty array");
    std::vector<CoherentTerm> terms;
    for (const auto& e : jt)
      terms.push_back({cplx_from_json(require(e, "lambda")),
                       cplx_from_json(require(e, "alpha"))});
    return CoherentSuperposition(std::move(terms));
  }
  if (type == "fock_matrix") {
    int dim = require(j, "dim").get<int>();
    const auto& je = require(j, "entries");
    if (dim <= 0 || !je.is_array() || int(je.size()) != dim * dim)
      throw InvalidInput("'entries' must hold dim*dim [re, im] pairs");
    Eigen::MatrixXcd rho(dim, dim);
    for (int k = 0; k < dim; ++k)
      for (int l = 0; l < dim; ++l)
        rho(k, l) = cplx_from_json(je[std::size_t(k) * dim + l]);
    return FockDensityMatrix::validated(std::move(rho));
  }
  if (type == "squeezed_vacuum")
    return SqueezedVacuumSpec{cplx_from_json(require(j, "xi"))};
  if (type == "sq_plus_vac")
    return SqPlusVacSpec{cplx_from_json(require(j, "xi")),
                         cplx_from_json(require(j, "lambda"))};
  if (type == "sq_vac_mixture") {
    double l = require(j, "lambda_abs").get<double>();
    if (!(l >= 0.0) || !std::isfinite(l))
      throw InvalidInput("'lambda_abs' must be finite and nonnegative");
    return SqVacMixtureSpec{cplx_from_json(require(j, "xi")), l};
  }
  if (type == "gaussian_variances") {
    return gaussian_from_variances(require(j, "v_sq").get<double>(),
                                   require(j, "v_asq").get<double>(),
                                   j.value("theta", 0.0));
  }
  throw InvalidInput("unknown state spec type '" + type + "'");
}

nlohmann::json state_spec_to_json(const StateSpec& spec) {
  nlohmann::json j;
  std::visit(
      [&j](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CoherentSuperposition>) {
          j["type"] = "coherent_superposition";
          auto arr = nlohmann::json::array();
          for (const auto& t : s.terms())
            arr.push_back({{"lambda", cplx_to_json(t.lambda)},
                           {"alpha", cplx_to_json(t.alpha)}});
          j["terms"] = std::move(arr);
        } else if constexpr (std::is_same_v<T, FockDensityMatrix>) {
          j["type"] = "fock_matrix";
          j["dim"] = s.dim();
          auto arr = nlohmann::json::array();
          for (int k = 0; k < s.dim(); ++k)
            for (int l = 0; l < s.dim(); ++l) arr.push_back(cplx_to_json(s(k, l)));
          j["entries"] = std::move(arr);
        } else if constexpr (std::is_same_v<T, SqueezedVacuumSpec>) {
          j["type"] = "squeezed_vacuum";
          j["xi"] = cplx_to_json(s.xi);
        } else if constexpr (std::is_same_v<T, SqPlusVacSpec>) {
          j["type"] = "sq_plus_vac";
          j["xi"] = cplx_to_json(s.xi);
          j["lambda"] = cplx_to_json(s.lambda);
        } else if constexpr (std::is_same_v<T, SqVacMixtureSpec>) {
          j["type"] = "sq_vac_mixture";
          j["xi"] = cplx_to_json(s.xi);
          j["lambda_abs"] = s.lambda_abs;
        } else {
          static_assert(std::is_same_v<T, GaussianVariancesSpec>);
          j["type"] = "gaussian_variances";
          j["v_sq"] = s.v_sq;
          j["v_asq"] = s.v_asq;
          j["theta"] = s.theta;
        }
      },
      spec);
  return j;
}

StateSpec load_state_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open state spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed JSON in " + path + ": " + e.what());
  }
  return state_spec_from_json(j);
}

}  // namespace qncq
