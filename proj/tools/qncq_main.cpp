// qncq: witness bounds, characteristic functions and DNC certification for
// single-mode bosonic states.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qncq/bounds.hpp"
#include "qncq/charfn.hpp"
#include "qncq/focktools.hpp"
#include "qncq/states.hpp"
#include "qncq/types.hpp"
#include "qncq/version.hpp"
#include "qncq/witness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOptimizer = 2;
constexpr int kExitInput = 3;
constexpr int kExitRange = 4;

// ---------------------------------------------------------------------------
// Output-directory lock: refuses concurrent writes into one directory.

class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".qncq.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
      throw qncq::InvalidInput("cannot create output directory: " +
                               dir.string());
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw qncq::InvalidInput(
          "output directory is locked by another run (remove " +
          path_.string() + " if stale)");
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Run manifests.

std::string fnv1a64_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw qncq::InvalidInput("cannot open input file: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= std::uint8_t(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char out[19];
  std::snprintf(out, sizeof(out), "%016llx", (unsigned long long)h);
  return out;
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& outdir, const std::string& command,
                    json config, std::uint64_t seed,
                    const std::vector<std::string>& inputs) {
  json digests = json::object();
  for (const auto& p : inputs) digests[p] = fnv1a64_hex(p);
  json manifest{{"command", command},
                {"config", std::move(config)},
                {"seed", seed},
                {"version", qncq::kVersion},
                {"input_digests", std::move(digests)},
                {"timestamp", utc_timestamp()}};
  std::ofstream out(outdir / (command + "_manifest.json"));
  out << manifest.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Shared flag plumbing.

std::vector<int> parse_r_list(const std::string& text) {
  std::vector<int> rs;
  auto push = [&rs](const std::string& tok) {
    auto dots = tok.find("..");
    if (dots != std::string::npos) {
      int lo = std::stoi(tok.substr(0, dots));
      int hi = std::stoi(tok.substr(dots + 2));
      if (lo < 1 || hi < lo)
        throw qncq::InvalidInput("bad r range: " + tok);
      for (int r = lo; r <= hi; ++r) rs.push_back(r);
    } else {
      rs.push_back(std::stoi(tok));
    }
  };
  std::stringstream ss(text);
  std::string tok;
  try {
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) push(tok);
    }
  } catch (const std::exception&) {
    throw qncq::InvalidInput("cannot parse r list: " + text);
  }
  if (rs.empty()) throw qncq::InvalidInput("empty r list");
  for (int r : rs)
    if (r < 1) throw qncq::InvalidInput("r must be >= 1");
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  return rs;
}

std::vector<double> make_grid(double beta_max, double step) {
  if (!(beta_max >= 0.0) || !std::isfinite(beta_max))
    throw qncq::InvalidInput("beta-max must be finite and nonnegative");
  if (!(step > 0.0)) throw qncq::InvalidInput("step must be positive");
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    double b = i * step;
    if (b > beta_max + 1e-12) break;
    grid.push_back(std::min(b, beta_max));
  }
  if (grid.empty() || grid.back() < beta_max - 1e-12)
    grid.push_back(beta_max);
  return grid;
}

int parse_restarts(const std::string& text, int r) {
  if (text == "auto") {
    long long want = 1ll << std::min(4 * (r - 1), 62);
    int capped = qncq::OptimizerConfig::default_restarts(r);
    if (want > capped)
      std::cerr << "warning: restarts for r = " << r << " capped at "
                << capped << " (2^{4(r-1)} = " << want << ")\n";
    return capped;
  }
  int v = 0;
  try {
    v = std::stoi(text);
  } catch (const std::exception&) {
    throw qncq::InvalidInput("--restarts must be an integer or 'auto'");
  }
  if (v < 1) throw qncq::InvalidInput("--restarts must be >= 1");
  return v;
}

qncq::StateSpec load_spec_checked(const std::string& path) {
  return qncq::load_state_spec(path);
}

qncq::FockDensityMatrix load_fock_matrix(const std::string& path) {
  qncq::StateSpec spec = load_spec_checked(path);
  if (auto* rho = std::get_if<qncq::FockDensityMatrix>(&spec)) return *rho;
  throw qncq::InvalidInput("input file " + path +
                           " is not a Fock density matrix spec");
}

std::vector<qncq::BoundTable> load_tables_dir(const std::string& dir) {
  std::vector<qncq::BoundTable> tables;
  if (!fs::is_directory(dir))
    throw qncq::InvalidInput("bound table directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("chi_r", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files)
    tables.push_back(qncq::load_bound_table_csv(f.string()));
  if (tables.empty())
    throw qncq::InvalidInput("no chi_r*.csv tables found in " + dir);
  return tables;
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsArgs {
  std::string r_list = "2..5";
  double beta_max = 5.0;
  double step = 0.05;
  std::string restarts = "auto";
  std::uint64_t seed = 1;
  int max_iters = 5000;
  std::string out = "qncq_out";
  bool normalized = false;
  bool allow_nonconverged = false;
};

int cmd_bounds(const BoundsArgs& args) {
  std::vector<int> rs = parse_r_list(args.r_list);
  std::vector<double> grid = make_grid(args.beta_max, args.step);
  fs::path outdir(args.out);
  DirLock lock(outdir);

  bool any_nonconverged = false;
  std::optional<qncq::BoundTable> warm;
  for (int r : rs) {
    qncq::OptimizerConfig cfg;
    cfg.r = r;
    cfg.restarts = parse_restarts(args.restarts, r);
    cfg.seed = args.seed;
    cfg.max_iters = args.max_iters;
    cfg.beta_grid = grid;
    qncq::BoundTable table =
        qncq::build_bound_table(cfg, warm ? &*warm : nullptr);

    std::string stem = "chi_r" + std::to_string(r);
    qncq::write_bound_table_csv(table, (outdir / (stem + ".csv")).string());
    qncq::write_bound_table_states_json(
        table, (outdir / (stem + "_states.json")).string());
    if (args.normalized) {
      std::ofstream fig(outdir / ("fig1_r" + std::to_string(r) + ".csv"));
      fig << "beta_abs,chi_normalized\n";
      char line[80];
      for (const auto& row : table.rows) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g\n", row.beta_abs,
                      row.chi_normalized);
        fig << line;
      }
    }
    if (!table.all_converged()) {
      any_nonconverged = true;
      std::cerr << "warning: nonconverged rows in r = " << r << " table\n";
    }
    std::cout << "chi_" << r << ": " << table.rows.size()
              << " rows, plateau value "
              << table.rows.back().chi_normalized << "\n";
    warm = std::move(table);
  }

  json config{{"r", args.r_list},          {"beta_max", args.beta_max},
              {"step", args.step},         {"restarts", args.restarts},
              {"max_iters", args.max_iters},
              {"normalized", args.normalized},
              {"allow_nonconverged", args.allow_nonconverged},
              {"out", args.out}};
  write_manifest(outdir, "bounds", std::move(config), args.seed, {});

  if (any_nonconverged && !args.allow_nonconverged) {
    std::cerr << "error: optimizer reported nonconverged rows (rerun with "
                 "--allow-nonconverged to accept)\n";
    return kExitOptimizer;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dnc

int cmd_dnc(const std::string& input, double tol, const std::string& out) {
  qncq::FockDensityMatrix rho = load_fock_matrix(input);
  qncq::DncResult res = qncq::dnc_finite(rho, tol);
  std::cout << "DNC = " << res.dnc << "\n";
  std::cout << "highest Fock index: " << res.highest_fock << "\n";
  std::cout << "polynomial order: " << res.poly_order << "\n";

  // Schmidt-rank cross-check for (numerically) pure inputs.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.entries());
  int dim = rho.dim();
  double top = es.eigenvalues()(dim - 1);
  if (top > 1.0 - 1e-9) {
    qncq::FockStateVector psi = es.eigenvectors().col(dim - 1);
    int rank = qncq::beam_splitter_schmidt_rank(psi, tol);
    std::cout << "Schmidt rank (pure-state cross-check): " << rank << "\n";
  }

  if (!out.empty()) {
    fs::path outdir(out);
    DirLock lock(outdir);
    json config{{"input", input}, {"tol", tol}};
    write_manifest(outdir, "dnc", std::move(config), 0, {input});
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// cf

int cmd_cf(const std::string& input, double beta_max, double step,
           const std::string& out) {
  qncq::StateSpec spec = load_spec_checked(input);
  qncq::CFEvaluator cf(spec);
  std::vector<double> grid = make_grid(beta_max, step);

  fs::path outdir(out);
  DirLock lock(outdir);
  std::ofstream csv(outdir / "cf_grid.csv");
  csv << "beta_abs,max_abs_phi,abs_phi_real_axis,abs_phi_imag_axis\n";
  char line[160];
  for (double b : grid) {
    double mx = qncq::max_abs_cf_over_phase(cf, b);
    double re_axis = std::abs(cf(qncq::Complex(b, 0.0)));
    double im_axis = std::abs(cf(qncq::Complex(0.0, b)));
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n", b, mx,
                  re_axis, im_axis);
    csv << line;
  }
  json config{{"input", input}, {"beta_max", beta_max}, {"step", step},
              {"out", out}};
  write_manifest(outdir, "cf", std::move(config), 0, {input});
  std::cout << "cf grid with " << grid.size() << " rows written to "
            << (outdir / "cf_grid.csv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// witness

struct WitnessArgs {
  std::string input;    // state spec JSON
  std::string samples;  // sampled CF CSV
  std::string tables;
  std::string out = "qncq_out";
  double k_sigma = -1.0;  // <0: default per input kind
  bool clip = false;
  std::string scan_lambda;  // "a:b:step" switches to the mixture scan
};

std::vector<double> parse_scan(const std::string& text) {
  double a = 0, b = 0, s = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &a, &b, &s) != 3 || s <= 0 ||
      b < a)
    throw qncq::InvalidInput("--scan-lambda expects start:stop:step");
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    double v = a + i * s;
    if (v > b + 1e-12) break;
    grid.push_back(v);
  }
  return grid;
}

int cmd_witness(const WitnessArgs& args) {
  if (args.input.empty() == args.samples.empty())
    throw qncq::InvalidInput(
        "witness needs exactly one of --input (state spec) or --samples "
        "(CF samples)");
  std::vector<qncq::BoundTable> tables = load_tables_dir(args.tables);
  fs::path outdir(args.out);
  DirLock lock(outdir);

  if (!args.scan_lambda.empty()) {
    if (args.input.empty())
      throw qncq::InvalidInput("--scan-lambda needs --input with a "
                               "sq_vac_mixture or sq_plus_vac spec");
    qncq::StateSpec spec = load_spec_checked(args.input);
    qncq::Complex xi;
    if (auto* mix = std::get_if<qncq::SqVacMixtureSpec>(&spec))
      xi = mix->xi;
    else if (auto* sup = std::get_if<qncq::SqPlusVacSpec>(&spec))
      xi = sup->xi;
    else
      throw qncq::InvalidInput(
          "--scan-lambda needs a sq_vac_mixture or sq_plus_vac input spec");
    auto staircase = qncq::mixture_threshold_scan(
        xi, parse_scan(args.scan_lambda), tables);
    std::ofstream csv(outdir / "mixture_scan.csv");
    csv << "lambda_abs,certified_dnc_gt\n";
    char line[64];
    int best = 0;
    std::optional<double> first_ge3;
    for (const auto& [lam, gt] : staircase) {
      std::snprintf(line, sizeof(line), "%.17g,%d\n", lam, gt);
      csv << line;
      best = std::max(best, gt);
      if (gt >= 2 && !first_ge3) first_ge3 = lam;
    }
    if (first_ge3)
      std::cout << "certified DNC >= 3 from |lambda| = " << *first_ge3
                << "\n";
    else
      std::cout << "no DNC >= 3 certification on the scanned range\n";
    json config{{"input", args.input},
                {"tables", args.tables},
                {"scan_lambda", args.scan_lambda},
                {"out", args.out}};
    write_manifest(outdir, "witness", std::move(config), 0, {args.input});
    return kExitOk;
  }

  qncq::WitnessReport report;
  json config{{"tables", args.tables}, {"clip", args.clip},
              {"out", args.out}};
  std::vector<std::string> inputs;
  if (!args.input.empty()) {
    double k = args.k_sigma < 0 ? 0.0 : args.k_sigma;
    report = qncq::certify(load_spec_checked(args.input), tables, k);
    config["input"] = args.input;
    config["k_sigma"] = k;
    inputs.push_back(args.input);
  } else {
    double k = args.k_sigma < 0 ? 5.0 : args.k_sigma;
    qncq::SampledCF data = qncq::load_sampled_cf_csv(args.samples);
    report = qncq::certify(data, tables, k, args.clip);
    config["samples"] = args.samples;
    config["k_sigma"] = k;
    inputs.push_back(args.samples);
  }
  for (const auto& w : report.warnings)
    std::cerr << "warning: " << w << "\n";
  std::ofstream jout(outdir / "witness_report.json");
  jout << qncq::witness_report_to_json(report).dump(2) << "\n";
  if (report.certified_dnc_gt >= 1)
    std::cout << "certified DNC >= " << report.certified_dnc_gt + 1 << "\n";
  else
    std::cout << "no nonclassicality certified\n";
  write_manifest(outdir, "witness", std::move(config), 0, inputs);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// photon

int cmd_photon(const std::string& input, int add, int subtract,
               const std::string& out) {
  if ((add > 0) == (subtract > 0))
    throw qncq::InvalidInput("photon needs exactly one of --add or "
                             "--subtract");
  qncq::FockDensityMatrix rho = load_fock_matrix(input);
  int before = qncq::dnc_finite(rho).dnc;
  qncq::FockDensityMatrix after_rho =
      add > 0 ? qncq::photon_add_fock(rho, add)
              : [&rho, subtract]() {
                  qncq::FockDensityMatrix cur = rho;
                  for (int i = 0; i < subtract; ++i)
                    cur = qncq::photon_subtract_fock(cur);
                  return cur;
                }();
  int after = qncq::dnc_finite(after_rho).dnc;

  fs::path outdir(out);
  DirLock lock(outdir);
  std::ofstream jout(outdir / "photon_out.json");
  jout << qncq::state_spec_to_json(qncq::StateSpec(after_rho)).dump(2)
       << "\n";
  std::cout << "DNC " << before << " -> " << after << "\n";
  json config{{"input", input},
              {"add", add},
              {"subtract", subtract},
              {"out", out}};
  write_manifest(outdir, "photon", std::move(config), 0, {input});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonclassicality quantification via normal-ordered "
               "characteristic functions"};
  app.set_version_flag("--version", qncq::kVersion);
  app.require_subcommand(1);

  BoundsArgs bounds;
  auto* sb = app.add_subcommand(
      "bounds", "Compute chi_r bound tables over a |beta| grid");
  sb->add_option("--r", bounds.r_list,
                 "r values: '3', '2,4' or '2..5' (default 2..5)");
  sb->add_option("--beta-max", bounds.beta_max, "grid upper end");
  sb->add_option("--step", bounds.step, "grid spacing");
  sb->add_option("--restarts", bounds.restarts,
                 "restart count or 'auto' (2^{4(r-1)}, capped at 4096)");
  sb->add_option("--seed", bounds.seed, "RNG seed");
  sb->add_option("--max-iters", bounds.max_iters, "per-start iteration cap");
  sb->add_option("--out", bounds.out, "output directory");
  sb->add_flag("--normalized", bounds.normalized,
               "also write chi e^{-beta^2/2} per r");
  sb->add_flag("--allow-nonconverged", bounds.allow_nonconverged,
               "exit 0 even if some rows did not converge");

  std::string dnc_input, dnc_out;
  double dnc_tol = 1e-10;
  auto* sd = app.add_subcommand(
      "dnc", "Degree of nonclassicality of a Fock density matrix");
  sd->add_option("--input", dnc_input, "density matrix JSON")->required();
  sd->add_option("--tol", dnc_tol, "support / rank tolerance");
  sd->add_option("--out", dnc_out, "optional manifest directory");

  std::string cf_input, cf_out = "qncq_out";
  double cf_beta_max = 5.0, cf_step = 0.05;
  auto* sc = app.add_subcommand(
      "cf", "Evaluate |Phi| on a radial grid (phase max and both axes)");
  sc->add_option("--input", cf_input, "state spec JSON")->required();
  sc->add_option("--beta-max", cf_beta_max, "grid upper end");
  sc->add_option("--step", cf_step, "grid spacing");
  sc->add_option("--out", cf_out, "output directory");

  WitnessArgs wit;
  auto* sw = app.add_subcommand(
      "witness", "Certify a DNC lower bound against chi_r tables");
  sw->add_option("--input", wit.input, "state spec JSON");
  sw->add_option("--samples", wit.samples, "sampled CF CSV");
  sw->add_option("--tables", wit.tables, "directory with chi_r*.csv")
      ->required();
  sw->add_option("--out", wit.out, "output directory");
  sw->add_option("--k-sigma", wit.k_sigma,
                 "significance threshold (default 5 for samples, 0 for "
                 "specs)");
  sw->add_flag("--clip", wit.clip,
               "ignore samples outside the table range instead of failing");
  sw->add_option("--scan-lambda", wit.scan_lambda,
                 "mixture scan 'start:stop:step' over the mixing weight");

  std::string ph_input, ph_out = "qncq_out";
  int ph_add = 0, ph_subtract = 0;
  auto* sp = app.add_subcommand(
      "photon", "Photon-add or -subtract a Fock matrix and report the DNC");
  sp->add_option("--input", ph_input, "density matrix JSON")->required();
  sp->add_option("--add", ph_add, "number of photons to add");
  sp->add_option("--subtract", ph_subtract,
                 "number of photons to subtract");
  sp->add_option("--out", ph_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (sb->parsed()) return cmd_bounds(bounds);
    if (sd->parsed()) return cmd_dnc(dnc_input, dnc_tol, dnc_out);
    if (sc->parsed()) return cmd_cf(cf_input, cf_beta_max, cf_step, cf_out);
    if (sw->parsed()) return cmd_witness(wit);
    if (sp->parsed()) return cmd_photon(ph_input, ph_add, ph_subtract, ph_out);
  } catch (const qncq::RangeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRange;
  } catch (const qncq::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const qncq::VacuumSubtraction& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const qncq::InconsistentOrder& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const qncq::OverflowGuard& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const qncq::DegenerateSuperposition& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
