#include "qncq/bounds.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace qncq {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Deterministic random streams.  SplitMix64 is used directly as the
// generator (and for stream derivation) so that identical seeds give
// identical starts on every platform and standard library.

struct SplitMix {
  std::uint64_t state;
  bool has_spare = false;
  double spare = 0.0;

  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
  double normal() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * kPi * uniform();
    spare = rad * std::sin(ang);
    has_spare = true;
    return rad * std::cos(ang);
  }
};

std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b) {
  SplitMix m{a ^ (0x9E3779B97F4A7C15ull + b + (a << 6) + (a >> 2))};
  return m.next();
}

// ---------------------------------------------------------------------------
// Objective 1: L(theta) = ln|Phi(beta)| for the canonical superposition, as
// ln|num| - ln den of the Gram-type double sums.  Each sum is shifted by its
// maximal real exponent; the shifts cancel in the gradient ratios.

struct ChiObjective {
  int r;
  Complex beta;
  double offset;  // -|beta|^2/2 recenters the value near 0, keeping the
                  // objective's floating-point resolution below grad_tol
  mutable std::vector<Complex> lam, alp;  // r
  mutable std::vector<Complex> en, ed;    // r*r shifted exponentials
  mutable std::vector<Complex> cn, cd;    // r*r with the lambda weights

  ChiObjective(int r_, Complex beta_)
      : r(r_), beta(beta_), offset(-0.5 * std::norm(beta_)), lam(r_), alp(r_),
        en(std::size_t(r_) * r_), ed(std::size_t(r_) * r_),
        cn(std::size_t(r_) * r_), cd(std::size_t(r_) * r_) {}

  int dim() const { return 4 * (r - 1); }

  void unpack(const double* th) const {
    lam[0] = 1.0;
    alp[0] = 0.0;
    for (int j = 0; j + 1 < r; ++j) {
      lam[j + 1] = Complex(th[4 * j], th[4 * j + 1]);
      alp[j + 1] = Complex(th[4 * j + 2], th[4 * j + 3]);
    }
  }

  double operator()(const double* th, double* grad) const {
    unpack(th);
    const Complex bc = std::conj(beta);
    double max_g = kNegInf, max_h = kNegInf;
    for (int k = 0; k < r; ++k) {
      for (int l = 0; l < r; ++l) {
        double base = (std::conj(alp[k]) * alp[l]).real() -
                      0.5 * (std::norm(alp[k]) + std::norm(alp[l]));
        max_h = std::max(max_h, base);
        max_g = std::max(max_g, base + (beta * std::conj(alp[k])).real() -
                                    (bc * alp[l]).real());
      }
    }
    Complex num = 0.0, den = 0.0;
    for (int k = 0; k < r; ++k) {
      for (int l = 0; l < r; ++l) {
        Complex w = std::conj(lam[k]) * lam[l];
        Complex h = std::conj(alp[k]) * alp[l] -
                    0.5 * (std::norm(alp[k]) + std::norm(alp[l]));
        Complex g = h + beta * std::conj(alp[k]) - bc * alp[l];
        Complex eg = std::exp(g - max_g), eh = std::exp(h - max_h);
        std::size_t id = std::size_t(k) * r + l;
        en[id] = eg;
        ed[id] = eh;
        cn[id] = w * eg;
        cd[id] = w * eh;
        num += cn[id];
        den += cd[id];
      }
    }
    double abs_num = std::abs(num);
    double abs_den = den.real();
    if (!(abs_den > 0.0)) return kNegInf;
    double value = (abs_num > 0.0 ? std::log(abs_num) : kNegInf) + max_g -
                   std::log(abs_den) - max_h + offset;
    if (grad == nullptr) return value;
    if (!(abs_num > 0.0)) {
      std::fill(grad, grad + dim(), 0.0);
      return value;
    }
    const Complex I(0.0, 1.0);
    for (int i = 1; i < r; ++i) {
      // lambda block: dS/d(Re l_i) and dS/d(Im l_i) from row/column sums.
      Complex row_n = 0.0, col_n = 0.0, row_d = 0.0, col_d = 0.0;
      for (int l = 0; l < r; ++l) {
        row_n += lam[l] * en[std::size_t(i) * r + l];
        row_d += lam[l] * ed[std::size_t(i) * r + l];
      }
      for (int k = 0; k < r; ++k) {
        col_n += std::conj(lam[k]) * en[std::size_t(k) * r + i];
        col_d += std::conj(lam[k]) * ed[std::size_t(k) * r + i];
      }
      // alpha block via Wirtinger derivatives of the exponents:
      //   dg/d(a_i)    = [l=i](-conj(beta) + conj(a_k) - conj(a_i)/2)
      //                + [k=i](-conj(a_i)/2)
      //   dg/d(conj a_i) = [k=i](beta + a_l - a_i/2) + [l=i](-a_i/2)
      Complex da_n = 0.0, dab_n = 0.0, da_d = 0.0, dab_d = 0.0;
      for (int k = 0; k < r; ++k) {
        std::size_t id = std::size_t(k) * r + i;
        Complex fa_n = -bc + std::conj(alp[k]) - 0.5 * std::conj(alp[i]);
        Complex fa_d = std::conj(alp[k]) - 0.5 * std::conj(alp[i]);
        da_n += cn[id] * fa_n;
        da_d += cd[id] * fa_d;
        dab_n += cn[id] * (-0.5 * alp[i]);
        dab_d += cd[id] * (-0.5 * alp[i]);
      }
      for (int l = 0; l < r; ++l) {
        std::size_t id = std::size_t(i) * r + l;
        da_n += cn[id] * (-0.5 * std::conj(alp[i]));
        da_d += cd[id] * (-0.5 * std::conj(alp[i]));
        Complex fb_n = beta + alp[l] - 0.5 * alp[i];
        Complex fb_d = alp[l] - 0.5 * alp[i];
        dab_n += cn[id] * fb_n;
        dab_d += cd[id] * fb_d;
      }
      auto dlog = [&](Complex dnum, Complex dden) {
        return (std::conj(num) * dnum).real() / (abs_num * abs_num) -
               (std::conj(den) * dden).real() / (abs_den * abs_den);
      };
      int j = 4 * (i - 1);
      grad[j + 0] = dlog(row_n + col_n, row_d + col_d);
      grad[j + 1] = dlog(I * (col_n - row_n), I * (col_d - row_d));
      grad[j + 2] = dlog(da_n + dab_n, da_d + dab_d);
      grad[j + 3] = dlog(I * (da_n - dab_n), I * (da_d - dab_d));
    }
    return value;
  }
};

// ---------------------------------------------------------------------------
// Objective 2: -V(theta), the negated phase-minimal quadrature variance
//   V = 1 + 2(<n> - |p|^2) - 2|q - p^2|,  p = <a>, q = <a^2>.
// The Gram exponents have nonpositive real part, so no shift is needed.

enum class Weight { One, Al, Al2, AkAl };

struct VarianceObjective {
  int r;
  mutable std::vector<Complex> lam, alp;
  mutable std::vector<Complex> e, c;  // r*r

  explicit VarianceObjective(int r_)
      : r(r_), lam(r_), alp(r_), e(std::size_t(r_) * r_),
        c(std::size_t(r_) * r_) {}

  int dim() const { return 4 * (r - 1); }

  void unpack(const double* th) const {
    lam[0] = 1.0;
    alp[0] = 0.0;
    for (int j = 0; j + 1 < r; ++j) {
      lam[j + 1] = Complex(th[4 * j], th[4 * j + 1]);
      alp[j + 1] = Complex(th[4 * j + 2], th[4 * j + 3]);
    }
  }

  Complex weight(Weight w, int k, int l) const {
    switch (w) {
      case Weight::One: return 1.0;
      case Weight::Al: return alp[l];
      case Weight::Al2: return alp[l] * alp[l];
      case Weight::AkAl: return std::conj(alp[k]) * alp[l];
    }
    return 0.0;
  }

  // (du, dv, dx, dy) sensitivities of T = sum conj(l_k) l_l e_{kl} W_{kl}
  // with respect to the real parameters of free term i.
  struct Partials {
    Complex du, dv, dx, dy;
  };

  Partials partials(Weight w, int i) const {
    const Complex I(0.0, 1.0);
    Complex row = 0.0, col = 0.0;  // lambda derivatives
    Complex da = 0.0, dab = 0.0;   // Wirtinger alpha derivatives
    for (int l = 0; l < r; ++l) {
      std::size_t id = std::size_t(i) * r + l;
      Complex wil = weight(w, i, l);
      row += lam[l] * e[id] * wil;
      da += c[id] * wil * (-0.5 * std::conj(alp[i]));
      dab += c[id] * wil * (alp[l] - 0.5 * alp[i]);
      if (w == Weight::AkAl) dab += c[id] * alp[l];  // d(conj a_k a_l)/d conj a_i
    }
    for (int k = 0; k < r; ++k) {
      std::size_t id = std::size_t(k) * r + i;
      Complex wki = weight(w, k, i);
      col += std::conj(lam[k]) * e[id] * wki;
      da += c[id] * wki * (std::conj(alp[k]) - 0.5 * std::conj(alp[i]));
      dab += c[id] * wki * (-0.5 * alp[i]);
      switch (w) {  // d W_{ki} / d a_i
        case Weight::One: break;
        case Weight::Al: da += c[id]; break;
        case Weight::Al2: da += c[id] * 2.0 * alp[i]; break;
        case Weight::AkAl: da += c[id] * std::conj(alp[k]); break;
      }
    }
    return {row + col, I * (col - row), da + dab, I * (da - dab)};
  }

  double operator()(const double* th, double* grad) const {
    unpack(th);
    Complex D = 0.0, P = 0.0, Q = 0.0, R2 = 0.0;
    for (int k = 0; k < r; ++k) {
      for (int l = 0; l < r; ++l) {
        std::size_t id = std::size_t(k) * r + l;
        Complex h = std::conj(alp[k]) * alp[l] -
                    0.5 * (std::norm(alp[k]) + std::norm(alp[l]));
        e[id] = std::exp(h);
        c[id] = std::conj(lam[k]) * lam[l] * e[id];
        D += c[id];
        P += c[id] * alp[l];
        Q += c[id] * alp[l] * alp[l];
        R2 += c[id] * std::conj(alp[k]) * alp[l];
      }
    }
    double d = D.real();
    if (!(d > 1e-300)) return kNegInf;
    Complex p = P / d, q = Q / d;
    double nbar = R2.real() / d;
    Complex w2 = q - p * p;
    double abs_w2 = std::abs(w2);
    double v = 1.0 + 2.0 * (nbar - std::norm(p)) - 2.0 * abs_w2;
    if (grad == nullptr) return -v;
    for (int i = 1; i < r; ++i) {
      Partials pd = partials(Weight::One, i);
      Partials pp = partials(Weight::Al, i);
      Partials pq = partials(Weight::Al2, i);
      Partials pr = partials(Weight::AkAl, i);
      const Complex* dD = &pd.du;
      const Complex* dP = &pp.du;
      const Complex* dQ = &pq.du;
      const Complex* dR = &pr.du;
      for (int comp = 0; comp < 4; ++comp) {
        double dd = dD[comp].real();  // D stays real along real parameters
        Complex dp = (dP[comp] - p * dd) / d;
        Complex dq = (dQ[comp] - q * dd) / d;
        double dn = (dR[comp].real() - nbar * dd) / d;
        Complex dw2 = dq - 2.0 * p * dp;
        double dabs_w2 =
            abs_w2 > 1e-300 ? (std::conj(w2) * dw2).real() / abs_w2 : 0.0;
        double dv = 2.0 * (dn - 2.0 * (std::conj(p) * dp).real()) -
                    2.0 * dabs_w2;
        grad[4 * (i - 1) + comp] = -dv;
      }
    }
    return -v;
  }
};

// ---------------------------------------------------------------------------
// Armijo backtracking ascent with a step memory (the accepted step seeds the
// next iteration, allowing growth toward the curvature-optimal step).

struct AscentOutcome {
  std::vector<double> theta;
  double value = kNegInf;
  double grad_inf = std::numeric_limits<double>::infinity();
  int iters = 0;
  bool converged = false;
};

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

template <class Obj>
AscentOutcome ascend(const Obj& obj, std::vector<double> theta, int max_iters,
                     double grad_tol, double step_init) {
  const int n = obj.dim();
  std::vector<double> grad(n), trial(n);
  double value = obj(theta.data(), grad.data());
  double ginf = inf_norm(grad);
  double step = step_init;
  int it = 0;
  bool stalled = false;
  int floor_hits = 0;
  const int gd_iters = std::min(max_iters, 150);
  for (; it < gd_iters && ginf >= grad_tol; ++it) {
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;
    double t = std::min(std::max(2.0 * step, step_init), 4.0);
    bool accepted = false;
    double fb_t = 0.0, fb_v = value;  // best sub-Armijo strict improvement
    for (int half = 0; half < 60; ++half) {
      for (int j = 0; j < n; ++j) trial[j] = theta[j] + t * grad[j];
      double vt = obj(trial.data(), nullptr);
      if (std::isfinite(vt)) {
        if (vt >= value + 1e-4 * t * g2) {
          theta.swap(trial);
          value = vt;
          step = t;
          accepted = true;
          break;
        }
        if (vt > fb_v) {
          fb_v = vt;
          fb_t = t;
        }
      }
      t *= 0.5;
    }
    if (!accepted && fb_t > 0.0) {
      // Armijo is unreachable once predicted gains drop below the value's
      // representable resolution; take the best strict improvement instead.
      for (int j = 0; j < n; ++j) trial[j] = theta[j] + fb_t * grad[j];
      theta.swap(trial);
      step = fb_t;
      accepted = true;
      floor_hits = (fb_v - value <= 1e-13 * std::max(1.0, std::abs(fb_v)))
                       ? floor_hits + 1
                       : 0;
      value = fb_v;
      if (floor_hits >= 3) {
        stalled = true;
      }
    } else if (accepted) {
      floor_hits = 0;
    }
    if (!accepted || stalled) {
      stalled = true;
      break;
    }
    value = obj(theta.data(), grad.data());
    ginf = inf_norm(grad);
  }

  // Damped-Newton polish: plain ascent converges linearly and stalls on the
  // ill-conditioned valley around the optimum, so finish with Newton steps
  // on a central-difference Hessian of the analytic gradient (n <= 16).
  if (std::isfinite(value)) {
    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd g(n), d(n);
    std::vector<double> gp(n), gm(n);
    double sigma = 1e-8;
    int value_stalls = 0;
    for (int np = 0; np < 120 && it < max_iters && ginf >= grad_tol; ++np) {
      ++it;
      const double value_before = value;
      for (int j = 0; j < n; ++j) {
        double saved = theta[j];
        double h = 1e-6 * (1.0 + std::abs(saved));
        theta[j] = saved + h;
        obj(theta.data(), gp.data());
        theta[j] = saved - h;
        obj(theta.data(), gm.data());
        theta[j] = saved;
        for (int i = 0; i < n; ++i)
          hess(i, j) = (gp[i] - gm[i]) / (2.0 * h);
      }
      hess = 0.5 * (hess + hess.transpose()).eval();
      for (int i = 0; i < n; ++i) g(i) = grad[i];
      double scale = std::max(hess.cwiseAbs().maxCoeff(), 1.0);
      // Eigen-mode solve of (-H) d = g with per-mode curvature flooring:
      // gauge orbits of the objective make -H singular, so flat or negative
      // modes fall back to a bounded gradient step while curved modes get
      // the exact Newton step.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-hess);
      if (es.info() != Eigen::Success) {
        stalled = true;
        break;
      }
      Eigen::VectorXd gm_modes = es.eigenvectors().transpose() * g;
      bool improved = false;
      for (int attempt = 0; attempt < 24; ++attempt) {
        // gradient-proportional regularization: flat modes take bounded
        // steps ~g/|g| while every mode with real curvature goes quadratic
        // as |g| -> 0
        double floor = std::max(sigma * scale, g.norm());
        Eigen::VectorXd step_modes(n);
        for (int i = 0; i < n; ++i)
          step_modes(i) = gm_modes(i) /
                          std::max(es.eigenvalues()(i), floor);
        d = es.eigenvectors() * step_modes;
        double dmax = d.cwiseAbs().maxCoeff();
        if (dmax > 2.0) d *= 2.0 / dmax;
        if (d.allFinite() && d.dot(g) >= 0.0) {
          for (int j = 0; j < n; ++j) trial[j] = theta[j] + d(j);
          double vt = obj(trial.data(), nullptr);
          if (std::isfinite(vt) && vt >= value) {
            theta.swap(trial);
            value = vt;
            improved = true;
            sigma = std::max(sigma * 0.25, 1e-9);
            break;
          }
        }
        sigma *= 10.0;
      }
      if (!improved) {
        stalled = true;
        break;
      }
      value = obj(theta.data(), grad.data());
      ginf = inf_norm(grad);
      if (value - value_before <= 1e-14 * std::max(1.0, std::abs(value))) {
        if (++value_stalls >= 5) {
          stalled = true;
          break;
        }
      } else {
        value_stalls = 0;
      }
    }
  }

  // A stall at the floating-point resolution of the objective with an
  // already-small gradient counts as converged.
  bool ok = ginf < grad_tol || (stalled && ginf < 1e3 * grad_tol);
  return {std::move(theta), value, ginf, it, ok};
}

// ---------------------------------------------------------------------------
// Multi-start driver shared by chi_r rows and the variance minimization.

std::vector<double> random_chi_start(int r, double beta_abs, SplitMix& rng) {
  // Weights: complex Gaussian scaled to unit mean modulus, random sign;
  // amplitudes: uniform in the disk |alpha| <= 2 beta + 1.
  const double mean_mod = std::sqrt(kPi) / 2.0;
  const double radius = 2.0 * beta_abs + 1.0;
  std::vector<double> th(4 * (r - 1));
  for (int j = 0; j + 1 < r; ++j) {
    double sign = (rng.next() & 1u) ? 1.0 : -1.0;
    Complex l = sign / mean_mod *
                Complex(rng.normal() * std::sqrt(0.5),
                        rng.normal() * std::sqrt(0.5));
    double rad = radius * std::sqrt(rng.uniform());
    double ang = 2.0 * kPi * rng.uniform();
    th[4 * j + 0] = l.real();
    th[4 * j + 1] = l.imag();
    th[4 * j + 2] = rad * std::cos(ang);
    th[4 * j + 3] = rad * std::sin(ang);
  }
  return th;
}

template <class Obj, class StartFn>
AscentOutcome optimize_multistart(const Obj& obj, int restarts,
                                  std::uint64_t stream_base,
                                  const StartFn& make_start,
                                  const std::vector<std::vector<double>>& extra,
                                  const OptimizerConfig& cfg) {
  const int ntasks = restarts + int(extra.size());
  std::vector<AscentOutcome> results(ntasks);
  auto run_task = [&](int j) {
    std::vector<double> start;
    if (j < restarts) {
      SplitMix rng{derive_stream(stream_base, std::uint64_t(j))};
      start = make_start(rng);
    } else {
      start = extra[std::size_t(j) - restarts];
    }
    results[j] = ascend(Obj(obj), std::move(start), cfg.max_iters,
                        cfg.grad_tol, cfg.step_init);
  };
  int workers = std::min(cfg.effective_threads(), ntasks);
  if (workers <= 1) {
    for (int j = 0; j < ntasks; ++j) run_task(j);
  } else {
    std::atomic<int> next{0};
    auto loop = [&] {
      for (;;) {
        int j = next.fetch_add(1);
        if (j >= ntasks) break;
        run_task(j);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  // Highest value wins; among numerical ties prefer a converged result
  // (ties are common at the optimum, where many restarts coincide).
  int best = 0;
  for (int j = 1; j < ntasks; ++j)
    if (results[j].value > results[best].value) best = j;
  double cutoff =
      results[best].value - 1e-10 * std::max(1.0, std::abs(results[best].value));
  if (!results[best].converged) {
    for (int j = 0; j < ntasks; ++j) {
      if (results[j].converged && results[j].value >= cutoff) {
        best = j;
        break;
      }
    }
  }
  if (!results[best].converged) {
    // one fresh polish run from the winner (resets the trust parameter)
    AscentOutcome again = ascend(Obj(obj), results[best].theta, cfg.max_iters,
                                 cfg.grad_tol, cfg.step_init);
    if (again.value >= results[best].value || again.converged)
      return again;
  }
  return std::move(results[best]);
}

CoherentSuperposition state_from_theta(int r, const std::vector<double>& th) {
  std::vector<CoherentTerm> terms;
  terms.reserve(std::size_t(r));
  terms.push_back({1.0, 0.0});
  for (int j = 0; j + 1 < r; ++j)
    terms.push_back({Complex(th[4 * j], th[4 * j + 1]),
                     Complex(th[4 * j + 2], th[4 * j + 3])});
  return CoherentSuperposition::unchecked(std::move(terms), false);
}

ChiResult trivial_chi_result(double value) {
  std::vector<CoherentTerm> terms{{1.0, 0.0}};
  return ChiResult{value, std::log(value),
                   CoherentSuperposition::unchecked(std::move(terms), true),
                   true, 0.0, 0};
}

ChiResult chi_from_outcome(int r, AscentOutcome out, double beta_abs) {
  double log_chi = out.value + 0.5 * beta_abs * beta_abs;
  if (log_chi > 700.0)
    throw OverflowGuard("chi exceeds the floating range; reduce |beta|");
  return ChiResult{std::exp(log_chi), log_chi, state_from_theta(r, out.theta),
                   out.converged, out.grad_inf, out.iters};
}

ChiResult chi_r_at(Complex beta, const OptimizerConfig& cfg,
                   std::uint64_t row_id,
                   const std::vector<std::vector<double>>& extra,
                   int restarts, AscentOutcome* raw = nullptr) {
  if (cfg.r < 1) throw InvalidInput("r must be >= 1");
  if (cfg.r == 1 || std::abs(beta) == 0.0) return trivial_chi_result(1.0);
  ChiObjective obj(cfg.r, beta);
  double beta_abs = std::abs(beta);
  auto make_start = [&](SplitMix& rng) {
    return random_chi_start(cfg.r, beta_abs, rng);
  };
  AscentOutcome out = optimize_multistart(
      obj, restarts, derive_stream(cfg.seed, row_id), make_start, extra, cfg);
  if (raw) *raw = out;
  return chi_from_outcome(cfg.r, std::move(out), beta_abs);
}

}  // namespace

int OptimizerConfig::default_restarts(int r) {
  if (r <= 1) return 1;
  int shift = 4 * (r - 1);
  if (shift >= 12) return 4096;  // 2^{4(r-1)} capped
  return 1 << shift;
}

int OptimizerConfig::effective_restarts() const {
  return restarts > 0 ? restarts : default_restarts(r);
}

int OptimizerConfig::effective_continuation_restarts() const {
  if (continuation_restarts > 0)
    return std::min(continuation_restarts, effective_restarts());
  return std::max(effective_restarts() / 8, 8);
}

int OptimizerConfig::effective_threads() const {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("QNCQ_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1 && v <= 1024) return int(v);
  }
  return 1;
}

std::vector<double> OptimizerConfig::effective_grid() const {
  return beta_grid.empty() ? default_beta_grid() : beta_grid;
}

std::vector<double> default_beta_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(0.05 * i);
  return grid;
}

ChiResult chi_r(double beta_abs, const OptimizerConfig& config) {
  if (!(beta_abs >= 0.0))
    throw InvalidInput("beta_abs must be nonnegative");
  return chi_r_at(Complex(beta_abs, 0.0), config, 0, {},
                  config.effective_restarts());
}

ChiResult chi_r_at_phase(double beta_abs, double phase,
                         const OptimizerConfig& config) {
  if (!(beta_abs >= 0.0))
    throw InvalidInput("beta_abs must be nonnegative");
  return chi_r_at(std::polar(beta_abs, phase), config, 0, {},
                  config.effective_restarts());
}

bool BoundTable::all_converged() const {
  for (const auto& row : rows)
    if (!row.converged) return false;
  return true;
}

double BoundTable::beta_min() const {
  return rows.empty() ? 0.0 : rows.front().beta_abs;
}

double BoundTable::beta_max() const {
  return rows.empty() ? 0.0 : rows.back().beta_abs;
}

namespace {

// Warm start for the row at beta from a lower-r winner: reuse its canonical
// terms and append nearly-silent extra terms continuing the amplitude
// lattice.
std::vector<double> embed_warm_start(const CoherentSuperposition& state,
                                     int r, double beta) {
  const auto& terms = state.terms();
  std::vector<double> th(std::size_t(4) * (r - 1), 0.0);
  Complex far = 0.0;
  for (const auto& t : terms)
    if (std::abs(t.alpha) > std::abs(far)) far = t.alpha;
  double spacing = std::max(beta, 0.25);
  Complex dir = std::abs(far) > 0.0 ? far / std::abs(far) : Complex(1.0, 0.0);
  for (int j = 0; j + 1 < r; ++j) {
    if (std::size_t(j + 1) < terms.size()) {
      th[4 * j + 0] = terms[j + 1].lambda.real();
      th[4 * j + 1] = terms[j + 1].lambda.imag();
      th[4 * j + 2] = terms[j + 1].alpha.real();
      th[4 * j + 3] = terms[j + 1].alpha.imag();
    } else {
      // continue the amplitude lattice outward with a nearly-silent term
      int extra = j + 2 - int(terms.size());
      Complex a = far + spacing * double(extra) * dir;
      th[4 * j + 0] = 1e-3;
      th[4 * j + 2] = a.real();
      th[4 * j + 3] = a.imag();
    }
  }
  return th;
}

}  // namespace

BoundTable build_bound_table(const OptimizerConfig& config,
                             const BoundTable* warm) {
  std::vector<double> grid = config.effective_grid();
  if (grid.empty()) throw InvalidInput("beta grid is empty");
  for (double b : grid)
    if (!(b >= 0.0) || !std::isfinite(b))
      throw InvalidInput("beta grid entries must be finite and nonnegative");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  BoundTable table;
  table.r = config.r;
  table.seed = config.seed;
  table.rows.reserve(grid.size());

  std::vector<double> prev_theta;
  bool first_optimized_row = true;
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    double b = grid[idx];
    if (b == 0.0 || config.r == 1) {
      ChiResult res = trivial_chi_result(1.0);
      table.rows.push_back({b, 1.0, std::exp(-0.5 * b * b),
                            std::move(res.best_state), true});
      continue;
    }
    std::vector<std::vector<double>> extra;
    if (!prev_theta.empty()) extra.push_back(prev_theta);
    if (warm != nullptr && warm->r >= 1 && warm->r < config.r) {
      for (const auto& row : warm->rows) {
        if (std::abs(row.beta_abs - b) < 1e-12 && row.best_state) {
          extra.push_back(embed_warm_start(*row.best_state, config.r, b));
          break;
        }
      }
    }
    int restarts = first_optimized_row
                       ? config.effective_restarts()
                       : config.effective_continuation_restarts();
    AscentOutcome raw;
    ChiResult res =
        chi_r_at(Complex(b, 0.0), config, std::uint64_t(idx), extra, restarts,
                 &raw);
    first_optimized_row = false;
    prev_theta = raw.theta;
    table.rows.push_back({b, res.chi, std::exp(res.log_chi - 0.5 * b * b),
                          std::move(res.best_state), res.converged});
  }
  return table;
}

PlateauValue reference_plateau(int r) {
  if (r < 1) throw InvalidInput("r must be >= 1");
  switch (r) {
    case 1: return {0.0, true};
    case 2: return {0.5, true};
    case 3: return {1.0 / std::sqrt(2.0), true};
    case 4: return {(1.0 + std::sqrt(5.0)) / 4.0, true};
    case 5: return {std::sqrt(3.0) / 2.0, true};
    default: break;
  }
  // max of sum w_k w_{k+1} / sum w_k^2: top eigenvalue of the tridiagonal
  // matrix with zero diagonal and 1/2 off-diagonals.
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i + 1 < r; ++i) t(i, i + 1) = t(i + 1, i) = 0.5;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().maxCoeff(), false};
}

VarianceResult min_variance_over_Sr(int r, const OptimizerConfig& config) {
  if (r < 1) throw InvalidInput("r must be >= 1");
  if (r == 1) {
    std::vector<CoherentTerm> terms{{1.0, 0.0}};
    return {1.0, CoherentSuperposition::unchecked(std::move(terms), true),
            true};
  }
  OptimizerConfig cfg = config;
  cfg.r = r;
  VarianceObjective obj(r);
  auto make_start = [&](SplitMix& rng) {
    return random_chi_start(r, 1.0, rng);  // disk radius 3 covers the optima
  };
  AscentOutcome out = optimize_multistart(
      obj, cfg.effective_restarts(), derive_stream(cfg.seed, 0x5eedull),
      make_start, {}, cfg);
  return {-out.value, state_from_theta(r, out.theta), out.converged};
}

void write_bound_table_csv(const BoundTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open output file: " + path);
  out << "r,beta_abs,chi,chi_normalized\n";
  char line[160];
  for (const auto& row : table.rows) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", table.r,
                  row.beta_abs, row.chi, row.chi_normalized);
    out << line;
  }
  if (!out) throw InvalidInput("failed writing " + path);
}

BoundTable load_bound_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open bound table: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "r,beta_abs,chi,chi_normalized")
    throw InvalidInput("bound table " + path + " has an unexpected header");
  BoundTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int r = 0;
    double beta = 0.0, chi = 0.0, norm = 0.0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &r, &beta, &chi, &norm) !=
        4)
      throw InvalidInput("malformed bound table row in " + path + ": " + line);
    if (table.rows.empty()) table.r = r;
    if (r != table.r)
      throw InvalidInput("bound table " + path + " mixes r values");
    if (!(beta >= 0.0) || !(chi > 0.0) || !(norm > 0.0))
      throw InvalidInput("bound table " + path + " has out-of-range values");
    table.rows.push_back({beta, chi, norm, std::nullopt, true});
  }
  if (table.rows.empty())
    throw InvalidInput("bound table " + path + " has no rows");
  std::sort(table.rows.begin(), table.rows.end(),
            [](const BoundRow& a, const BoundRow& b) {
              return a.beta_abs < b.beta_abs;
            });
  return table;
}

void write_bound_table_states_json(const BoundTable& table,
                                   const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json jr{{"beta_abs", row.beta_abs},
                      {"chi", row.chi},
                      {"chi_normalized", row.chi_normalized},
                      {"converged", row.converged}};
    if (row.best_state) {
      auto terms = nlohmann::json::array();
      for (const auto& t : row.best_state->terms())
        terms.push_back({{"lambda", {t.lambda.real(), t.lambda.imag()}},
                         {"alpha", {t.alpha.real(), t.alpha.imag()}}});
      jr["state_terms"] = std::move(terms);
    }
    rows.push_back(std::move(jr));
  }
  nlohmann::json j{{"r", table.r}, {"seed", table.seed}, {"rows", rows}};
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open output file: " + path);
  out << j.dump(2) << "\n";
}

namespace {

template <class Obj>
double gradient_fd_error(const Obj& obj, std::vector<double> params,
                         double h) {
  const int n = obj.dim();
  if (int(params.size()) != n)
    throw InvalidInput("parameter vector has the wrong length");
  std::vector<double> analytic(n);
  obj(params.data(), analytic.data());
  double scale = 0.0, worst = 0.0;
  std::vector<double> fd(n);
  for (int j = 0; j < n; ++j) {
    double saved = params[j];
    params[j] = saved + h;
    double up = obj(params.data(), nullptr);
    params[j] = saved - h;
    double down = obj(params.data(), nullptr);
    params[j] = saved;
    fd[j] = (up - down) / (2.0 * h);
    scale = std::max(scale, std::abs(fd[j]));
  }
  for (int j = 0; j < n; ++j)
    worst = std::max(worst, std::abs(analytic[j] - fd[j]));
  return worst / std::max(scale, 1e-6);
}

}  // namespace

double chi_gradient_fd_error(int r, double beta_abs,
                             const std::vector<double>& params, double h) {
  if (r < 2) throw InvalidInput("gradient check needs r >= 2");
  return gradient_fd_error(ChiObjective(r, Complex(beta_abs, 0.0)), params, h);
}

double variance_gradient_fd_error(int r, const std::vector<double>& params,
                                  double h) {
  if (r < 2) throw InvalidInput("gradient check needs r >= 2");
  return gradient_fd_error(VarianceObjective(r), params, h);
}

}  // namespace qncq
