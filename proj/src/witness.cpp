#include "qncq/witness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace qncq {

namespace {

constexpr double kMatchRadius = 1e-9;

void check_finite_sample(const CFSample& s) {
  if (!is_finite(s.beta) || !is_finite(s.phi) || !std::isfinite(s.sigma) ||
      s.sigma < 0.0)
    throw InvalidInput("sampled CF contains non-finite or negative-sigma "
                       "entries");
}

}  // namespace

SampledCF SampledCF::validated(std::vector<CFSample> points) {
  if (points.empty()) throw InvalidInput("sampled CF is empty");
  for (const auto& s : points) check_finite_sample(s);
  const CFSample* origin = nullptr;
  for (const auto& s : points) {
    if (std::abs(s.beta) <= kMatchRadius) {
      origin = &s;
      break;
    }
  }
  if (origin == nullptr)
    throw InvalidInput("sampled CF lacks the beta = 0 normalization point");
  if (std::abs(origin->phi - 1.0) > std::max(3.0 * origin->sigma, 1e-9))
    throw InvalidInput("sampled CF is not normalized: |phi(0) - 1| exceeds "
                       "3 sigma");
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (std::abs(points[i].beta + points[j].beta) > kMatchRadius) continue;
      double combined = std::hypot(points[i].sigma, points[j].sigma);
      double allowed = std::max(3.0 * combined, 1e-9);
      if (std::abs(points[i].phi - std::conj(points[j].phi)) > allowed) {
        std::ostringstream msg;
        msg << "sampled CF violates Hermitian symmetry at beta = ("
            << points[i].beta.real() << ", " << points[i].beta.imag() << ")";
        throw InvalidInput(msg.str());
      }
    }
  }
  SampledCF out;
  out.points_ = std::move(points);
  return out;
}

SampledCF SampledCF::unchecked(std::vector<CFSample> points) {
  SampledCF out;
  out.points_ = std::move(points);
  return out;
}

SampledCF load_sampled_cf_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open sampled CF file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "beta_re,beta_im,phi_re,phi_im,sigma")
    throw InvalidInput("sampled CF file " + path +
                       " has an unexpected header");
  std::vector<CFSample> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double br, bi, pr, pi, sg;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &br, &bi, &pr, &pi,
                    &sg) != 5)
      throw InvalidInput("malformed sampled CF row in " + path + ": " + line);
    points.push_back({Complex(br, bi), Complex(pr, pi), sg});
  }
  return SampledCF::validated(std::move(points));
}

void write_sampled_cf_csv(const SampledCF& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open output file: " + path);
  out << "beta_re,beta_im,phi_re,phi_im,sigma\n";
  char buf[220];
  for (const auto& s : data.points()) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  s.beta.real(), s.beta.imag(), s.phi.real(), s.phi.imag(),
                  s.sigma);
    out << buf;
  }
  if (!out) throw InvalidInput("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Monotone cubic interpolation (Fritsch-Carlson slopes) on log chi.

BoundInterpolator::BoundInterpolator(const BoundTable& table,
                                     double safety_pad)
    : r_(table.r), pad_(safety_pad) {
  if (table.rows.empty())
    throw InvalidInput("cannot interpolate an empty bound table");
  for (const auto& row : table.rows) {
    if (!(row.chi > 0.0) || !std::isfinite(row.chi))
      throw InvalidInput("bound table has nonpositive chi values");
    x_.push_back(row.beta_abs);
    y_.push_back(std::log(row.chi));
  }
  if (!std::is_sorted(x_.begin(), x_.end()))
    throw InvalidInput("bound table rows are not sorted by beta");
  const std::size_t n = x_.size();
  m_.assign(n, 0.0);
  if (n == 1) return;
  std::vector<double> h(n - 1), d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    if (!(h[i] > 0.0))
      throw InvalidInput("bound table contains duplicate beta nodes");
    d[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  if (n == 2) {
    m_[0] = m_[1] = d[0];
  } else {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (d[i - 1] * d[i] <= 0.0) {
        m_[i] = 0.0;
      } else {
        double w1 = 2.0 * h[i] + h[i - 1];
        double w2 = h[i] + 2.0 * h[i - 1];
        m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
      }
    }
    auto endpoint = [](double h0, double h1, double d0, double d1) {
      double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (m * d0 <= 0.0) return 0.0;
      if (std::abs(m) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return m;
    };
    m_[0] = endpoint(h[0], h[1], d[0], d[1]);
    m_[n - 1] = endpoint(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
  }
}

bool BoundInterpolator::covers(double beta_abs) const {
  return beta_abs >= x_.front() - kMatchRadius &&
         beta_abs <= x_.back() + kMatchRadius;
}

double BoundInterpolator::log_chi(double beta_abs) const {
  double b = std::min(std::max(beta_abs, x_.front()), x_.back());
  if (x_.size() == 1) return y_[0] + pad_;
  auto it = std::upper_bound(x_.begin(), x_.end(), b);
  std::size_t i = std::min<std::size_t>(
      std::max<std::ptrdiff_t>(it - x_.begin() - 1, 0), x_.size() - 2);
  double h = x_[i + 1] - x_[i];
  double t = (b - x_[i]) / h;
  double t2 = t * t, t3 = t2 * t;
  double cubic = (2.0 * t3 - 3.0 * t2 + 1.0) * y_[i] +
                 (t3 - 2.0 * t2 + t) * h * m_[i] +
                 (-2.0 * t3 + 3.0 * t2) * y_[i + 1] +
                 (t3 - t2) * h * m_[i + 1];
  double chord = y_[i] + (y_[i + 1] - y_[i]) * t;
  return std::max(cubic, chord) + pad_;
}

double BoundInterpolator::chi(double beta_abs) const {
  return std::exp(log_chi(beta_abs));
}

// ---------------------------------------------------------------------------
// Certification.

namespace {

std::vector<BoundInterpolator> make_levels(
    const std::vector<BoundTable>& tables, std::vector<std::string>* warnings) {
  if (tables.empty()) throw InvalidInput("no bound tables supplied");
  std::vector<BoundInterpolator> levels;
  bool have_r1 = false;
  double hi = 0.0;
  for (const auto& t : tables) {
    levels.emplace_back(t);
    have_r1 = have_r1 || t.r == 1;
    hi = std::max(hi, levels.back().beta_max());
  }
  if (!have_r1 && hi > 0.0) {
    // chi_1 = 1 is exact; synthesize it over the union of supplied ranges.
    BoundTable one;
    one.r = 1;
    one.rows.push_back({0.0, 1.0, 1.0, std::nullopt, true});
    one.rows.push_back({hi, 1.0, std::exp(-0.5 * hi * hi), std::nullopt,
                        true});
    levels.emplace_back(one);
    if (warnings)
      warnings->push_back("no r = 1 table supplied; using the exact chi_1 = "
                          "1 bound");
  }
  std::sort(levels.begin(), levels.end(),
            [](const BoundInterpolator& a, const BoundInterpolator& b) {
              return a.r() < b.r();
            });
  return levels;
}

struct BestPoint {
  bool set = false;
  WitnessPoint point{};
  double rank = -std::numeric_limits<double>::infinity();
};

void offer(std::map<int, BestPoint>& best, const WitnessPoint& wp) {
  // exact data ranks by margin, sampled data by statistical significance
  double rank = std::isfinite(wp.sigmas) ? wp.sigmas : wp.margin;
  BestPoint& slot = best[wp.r];
  if (!slot.set || rank > slot.rank) {
    slot.set = true;
    slot.point = wp;
    slot.rank = rank;
  }
}

WitnessReport finish_report(const std::vector<BoundInterpolator>& levels,
                            std::map<int, BestPoint>& best,
                            std::vector<std::string> warnings) {
  WitnessReport report;
  report.warnings = std::move(warnings);
  for (const auto& lv : levels) report.bounds_used.push_back(lv.r());
  for (const auto& [r, bp] : best) {
    report.certified_dnc_gt = std::max(report.certified_dnc_gt, r);
    report.witness_points.push_back(bp.point);
  }
  return report;
}

}  // namespace

WitnessReport certify(const StateSpec& spec,
                      const std::vector<BoundTable>& tables, double k_sigma) {
  std::vector<std::string> warnings;
  std::vector<BoundInterpolator> levels = make_levels(tables, &warnings);
  CFEvaluator cf(spec);
  std::map<double, double> phase_max;  // |beta| -> max_phi |Phi|
  std::map<int, BestPoint> best;
  (void)k_sigma;  // sigma is identically 0 for analytic specs
  // Test each level over the union of table nodes it covers; at the nodes
  // the padded interpolant touches the computed bound values.
  std::vector<double> nodes;
  for (const auto& t : tables)
    for (const auto& row : t.rows) nodes.push_back(row.beta_abs);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  for (double b : nodes) {
    auto it = phase_max.find(b);
    if (it == phase_max.end())
      it = phase_max.emplace(b, max_abs_cf_over_phase(cf, b)).first;
    double abs_phi = it->second;
    for (const auto& lv : levels) {
      if (!lv.covers(b)) continue;
      double bound = lv.chi(b);
      double margin = abs_phi - bound;
      if (margin > 0.0)
        offer(best, {Complex(b, 0.0), lv.r(), abs_phi, bound, margin,
                     std::numeric_limits<double>::infinity()});
    }
  }
  return finish_report(levels, best, std::move(warnings));
}

WitnessReport certify(const SampledCF& data,
                      const std::vector<BoundTable>& tables, double k_sigma,
                      bool clip) {
  std::vector<std::string> warnings;
  std::vector<BoundInterpolator> levels = make_levels(tables, &warnings);
  std::map<int, BestPoint> best;
  std::size_t out_of_range = 0;
  for (const auto& s : data.points()) {
    double b = std::abs(s.beta);
    bool covered = false;
    for (const auto& lv : levels) {
      if (!lv.covers(b)) continue;
      covered = true;
      double bound = lv.chi(b);
      double margin = std::abs(s.phi) - bound;
      if (margin > k_sigma * s.sigma && margin > 0.0) {
        double sigmas = s.sigma > 0.0
                            ? margin / s.sigma
                            : std::numeric_limits<double>::infinity();
        offer(best, {s.beta, lv.r(), std::abs(s.phi), bound, margin, sigmas});
      }
    }
    if (!covered) {
      if (!clip) {
        std::ostringstream msg;
        msg << "sample at |beta| = " << b
            << " lies outside the bound tables (max |beta| = "
            << levels.back().beta_max() << "); pass clip to ignore";
        throw RangeMismatch(msg.str());
      }
      ++out_of_range;
    }
  }
  if (out_of_range > 0) {
    std::ostringstream msg;
    msg << out_of_range << " sample(s) outside the bound range were ignored";
    warnings.push_back(msg.str());
  }
  return finish_report(levels, best, std::move(warnings));
}

nlohmann::json witness_report_to_json(const WitnessReport& report) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& wp : report.witness_points) {
    nlohmann::json jp{{"beta", {wp.beta.real(), wp.beta.imag()}},
                      {"r", wp.r},
                      {"abs_phi", wp.abs_phi},
                      {"bound", wp.bound},
                      {"margin", wp.margin}};
    if (std::isfinite(wp.sigmas))
      jp["sigmas"] = wp.sigmas;
    else
      jp["sigmas"] = nullptr;
    points.push_back(std::move(jp));
  }
  return nlohmann::json{{"certified_dnc_gt", report.certified_dnc_gt},
                        {"witness_points", std::move(points)},
                        {"bounds_used", report.bounds_used},
                        {"warnings", report.warnings}};
}

std::vector<std::pair<double, int>> mixture_threshold_scan(
    Complex xi, const std::vector<double>& lambda_grid,
    const std::vector<BoundTable>& tables) {
  bool have_r2 = false;
  for (const auto& t : tables) have_r2 = have_r2 || t.r == 2;
  if (!have_r2)
    throw InvalidInput("mixture scan needs a bound table for r = 2");
  std::vector<std::pair<double, int>> staircase;
  staircase.reserve(lambda_grid.size());
  for (double lam : lambda_grid) {
    if (!(lam >= 0.0) || !std::isfinite(lam))
      throw InvalidInput("mixture scan weights must be finite and "
                         "nonnegative");
    StateSpec spec = SqVacMixtureSpec{xi, lam};
    staircase.emplace_back(lam, certify(spec, tables).certified_dnc_gt);
  }
  return staircase;
}

namespace {

BochnerResult bochner_from_matrix(Eigen::MatrixXcd m, double tol) {
  Eigen::MatrixXcd herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm,
                                                     Eigen::EigenvaluesOnly);
  double min_eig = es.eigenvalues().minCoeff();
  return {min_eig, min_eig < -tol};
}

}  // namespace

BochnerResult bochner_matrix_test(const StateSpec& spec,
                                  const std::vector<Complex>& betas,
                                  double tol) {
  const int n = int(betas.size());
  if (n < 2) throw InvalidInput("Bochner matrix test needs >= 2 points");
  CFEvaluator cf(spec);
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cf(betas[i] - betas[j]);
  return bochner_from_matrix(std::move(m), tol);
}

BochnerResult bochner_matrix_test(const SampledCF& data,
                                  const std::vector<Complex>& betas,
                                  double tol) {
  const int n = int(betas.size());
  if (n < 2) throw InvalidInput("Bochner matrix test needs >= 2 points");
  auto lookup = [&data](Complex d) -> Complex {
    for (const auto& s : data.points())
      if (std::abs(s.beta - d) <= kMatchRadius) return s.phi;
    for (const auto& s : data.points())  // Hermitian completion
      if (std::abs(s.beta + d) <= kMatchRadius) return std::conj(s.phi);
    std::ostringstream msg;
    msg << "no sample at difference (" << d.real() << ", " << d.imag()
        << ") or its negative";
    throw RangeMismatch(msg.str());
  };
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = lookup(betas[i] - betas[j]);
  return bochner_from_matrix(std::move(m), tol);
}

}  // namespace qncq
