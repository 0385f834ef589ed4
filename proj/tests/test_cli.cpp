#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

const char* cli_path() {
  if (const char* p = std::getenv("QNCQ_CLI_PATH")) return p;
#ifdef QNCQ_CLI_PATH
  return QNCQ_CLI_PATH;  // baked in by the build
#else
  REQUIRE_MESSAGE(false, "QNCQ_CLI_PATH must point at the binary");
  return "";
#endif
}

RunResult run_cli(const std::string& args) {
  std::string cmd = std::string(cli_path()) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::fgets(buf.data(), int(buf.size()), pipe) != nullptr)
    out += buf.data();
  int status = pclose(pipe);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, out};
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("qncq_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string fock_projector_json(int n) {
  nlohmann::json entries = nlohmann::json::array();
  for (int k = 0; k <= n; ++k)
    for (int l = 0; l <= n; ++l)
      entries.push_back({(k == n && l == n) ? 1.0 : 0.0, 0.0});
  nlohmann::json j{
      {"type", "fock_matrix"}, {"dim", n + 1}, {"entries", entries}};
  return j.dump();
}

// Shared small bound-table directory (r = 2 and 3 on a coarse grid), built
// once for the witness-facing tests.
const fs::path& shared_tables_dir() {
  static const fs::path dir = [] {
    fs::path d = fresh_dir("tables");
    RunResult r = run_cli("bounds --r 2,3 --beta-max 5 --step 0.05 --seed 1 "
                          "--out " +
                          d.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("version_and_help") {
  CHECK(run_cli("--version").exit_code == 0);
  auto help = run_cli("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.output.find("bounds") != std::string::npos);
  CHECK(help.output.find("witness") != std::string::npos);
}

TEST_CASE("bounds_writes_schemad_csv_and_manifest") {
  fs::path dir = fresh_dir("bounds_small");
  auto r = run_cli("bounds --r 2 --beta-max 1 --step 0.5 --seed 7 "
                   "--restarts 16 --normalized --out " +
                   dir.string());
  CHECK(r.exit_code == 0);

  std::string csv = read_file(dir / "chi_r2.csv");
  CHECK(csv.rfind("r,beta_abs,chi,chi_normalized\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows

  CHECK(fs::exists(dir / "chi_r2_states.json"));
  std::string fig = read_file(dir / "fig1_r2.csv");
  CHECK(fig.rfind("beta_abs,chi_normalized\n", 0) == 0);

  auto manifest =
      nlohmann::json::parse(read_file(dir / "bounds_manifest.json"));
  CHECK(manifest["command"] == "bounds");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest.contains("version"));
  CHECK(manifest.contains("timestamp"));
  CHECK(manifest["config"]["step"] == 0.5);

  // The lockfile is released after the run.
  CHECK_FALSE(fs::exists(dir / ".qncq.lock"));
}

TEST_CASE("bounds_zero_beta_max_gives_single_trivial_row") {
  fs::path dir = fresh_dir("bounds_zero");
  auto r = run_cli("bounds --r 2 --beta-max 0 --step 0.05 --out " +
                   dir.string());
  CHECK(r.exit_code == 0);
  std::string csv = read_file(dir / "chi_r2.csv");
  std::istringstream lines(csv);
  std::string header, row, extra;
  std::getline(lines, header);
  REQUIRE(std::getline(lines, row));
  CHECK_FALSE(std::getline(lines, extra));
  CHECK(row.rfind("2,0,1,", 0) == 0);  // chi = 1 at the origin
}

TEST_CASE("bounds_identical_seeds_reproduce_files_bitwise") {
  fs::path a = fresh_dir("bounds_rep_a");
  fs::path b = fresh_dir("bounds_rep_b");
  std::string flags = "bounds --r 2 --beta-max 1.5 --step 0.25 --seed 42 "
                      "--restarts 16 --out ";
  CHECK(run_cli(flags + a.string()).exit_code == 0);
  CHECK(run_cli(flags + b.string()).exit_code == 0);
  CHECK(read_file(a / "chi_r2.csv") == read_file(b / "chi_r2.csv"));
  CHECK(read_file(a / "chi_r2_states.json") ==
        read_file(b / "chi_r2_states.json"));
}

TEST_CASE("bounds_nonconvergence_exit_code_and_override") {
  fs::path dir = fresh_dir("bounds_noncvg");
  std::string flags = "bounds --r 2 --beta-max 4 --step 4 --seed 1 "
                      "--restarts 4 --max-iters 1 --out ";
  auto strict = run_cli(flags + dir.string());
  CHECK(strict.exit_code == 2);
  CHECK(strict.output.find("nonconverged") != std::string::npos);

  fs::path dir2 = fresh_dir("bounds_noncvg_ok");
  auto lax = run_cli(flags + dir2.string() + " --allow-nonconverged");
  CHECK(lax.exit_code == 0);
}

TEST_CASE("bounds_rejects_bad_flags") {
  fs::path dir = fresh_dir("bounds_bad");
  CHECK(run_cli("bounds --r 0 --out " + dir.string()).exit_code == 3);
  CHECK(run_cli("bounds --r 2 --step -1 --out " + dir.string()).exit_code ==
        3);
  CHECK(run_cli("bounds --r nonsense --out " + dir.string()).exit_code == 3);
}

TEST_CASE("bounds_locked_directory_is_an_input_error") {
  fs::path dir = fresh_dir("bounds_locked");
  write_file(dir / ".qncq.lock", "held\n");
  auto r = run_cli("bounds --r 2 --beta-max 0 --out " + dir.string());
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("lock") != std::string::npos);
}

TEST_CASE("dnc_reports_fock_projector") {
  fs::path dir = fresh_dir("dnc");
  write_file(dir / "two.json", fock_projector_json(2));
  auto r = run_cli("dnc --input " + (dir / "two.json").string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("DNC = 3") != std::string::npos);
  CHECK(r.output.find("highest Fock index: 2") != std::string::npos);
  CHECK(r.output.find("polynomial order: 4") != std::string::npos);
  // Pure input: the independent Schmidt oracle is printed too.
  CHECK(r.output.find("Schmidt rank") != std::string::npos);
  CHECK(r.output.find("cross-check): 3") != std::string::npos);
}

TEST_CASE("dnc_rejects_invalid_density_matrix") {
  fs::path dir = fresh_dir("dnc_bad");
  nlohmann::json j{{"type", "fock_matrix"},
                   {"dim", 2},
                   {"entries", {{0.9, 0.0}, {0, 0}, {0, 0}, {0.9, 0.0}}}};
  write_file(dir / "bad.json", j.dump());
  CHECK(run_cli("dnc --input " + (dir / "bad.json").string()).exit_code ==
        3);
  CHECK(run_cli("dnc --input /nonexistent.json").exit_code == 3);
}

TEST_CASE("cf_of_vacuum_is_constant_one") {
  fs::path dir = fresh_dir("cf_vac");
  write_file(dir / "vac.json", fock_projector_json(0));
  auto r = run_cli("cf --input " + (dir / "vac.json").string() +
                   " --beta-max 2 --step 0.5 --out " + dir.string());
  CHECK(r.exit_code == 0);
  std::string csv = read_file(dir / "cf_grid.csv");
  CHECK(csv.rfind("beta_abs,max_abs_phi,abs_phi_real_axis,abs_phi_imag_axis"
                  "\n",
                  0) == 0);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    double b, mx, re, im;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &b, &mx, &re,
                        &im) == 4);
    CHECK(std::abs(mx - 1.0) < 1e-12);
    CHECK(std::abs(re - 1.0) < 1e-12);
    CHECK(std::abs(im - 1.0) < 1e-12);
  }
  CHECK(rows == 5);
}

TEST_CASE("cf_superposition_dips_below_classical_ceiling") {
  fs::path dir = fresh_dir("cf_dip");
  nlohmann::json spec{{"type", "sq_plus_vac"},
                      {"xi", {-0.562, 0.0}},
                      {"lambda", {-1.4, 0.0}}};
  write_file(dir / "spec.json", spec.dump());
  auto r = run_cli("cf --input " + (dir / "spec.json").string() +
                   " --beta-max 3 --step 0.1 --out " + dir.string());
  CHECK(r.exit_code == 0);
  std::istringstream lines(read_file(dir / "cf_grid.csv"));
  std::string line;
  std::getline(lines, line);
  // The dip below the classical ceiling happens along the anti-squeezed
  // (imaginary) axis; the phase maximum grows monotonically past it.
  bool dips = false, grows = false;
  while (std::getline(lines, line)) {
    double b, mx, re, im;
    std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &b, &mx, &re, &im);
    if (b > 0.0 && im < 0.7) dips = true;
    if (mx > 10.0) grows = true;
  }
  CHECK(dips);
  CHECK(grows);
}

TEST_CASE("witness_certifies_gaussian_experiment_model") {
  fs::path dir = fresh_dir("witness_gauss");
  nlohmann::json spec{{"type", "gaussian_variances"},
                      {"v_sq", std::pow(10.0, -0.413)},
                      {"v_asq", std::pow(10.0, 0.611)},
                      {"theta", 0.0}};
  write_file(dir / "spec.json", spec.dump());
  auto r = run_cli("witness --input " + (dir / "spec.json").string() +
                   " --tables " + shared_tables_dir().string() + " --out " +
                   dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("certified DNC >= 3") != std::string::npos);
  auto report =
      nlohmann::json::parse(read_file(dir / "witness_report.json"));
  CHECK(report["certified_dnc_gt"] == 2);
}

TEST_CASE("witness_reports_classical_input_as_uncertified") {
  fs::path dir = fresh_dir("witness_coh");
  nlohmann::json spec{
      {"type", "coherent_superposition"},
      {"terms", {{{"lambda", {1.0, 0.0}}, {"alpha", {0.6, -0.2}}}}}};
  write_file(dir / "spec.json", spec.dump());
  auto r = run_cli("witness --input " + (dir / "spec.json").string() +
                   " --tables " + shared_tables_dir().string() + " --out " +
                   dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("no nonclassicality certified") != std::string::npos);
}

TEST_CASE("witness_sampled_range_mismatch_maps_to_exit_four") {
  fs::path dir = fresh_dir("witness_range");
  write_file(dir / "samples.csv",
             "beta_re,beta_im,phi_re,phi_im,sigma\n"
             "0,0,1,0,0.001\n"
             "9,0,0.5,0,0.001\n");
  std::string base = "witness --samples " + (dir / "samples.csv").string() +
                     " --tables " + shared_tables_dir().string() +
                     " --out " + dir.string();
  CHECK(run_cli(base).exit_code == 4);
  auto clipped = run_cli(base + " --clip");
  CHECK(clipped.exit_code == 0);
  CHECK(clipped.output.find("warning") != std::string::npos);
}

TEST_CASE("witness_scan_writes_staircase") {
  fs::path dir = fresh_dir("witness_scan");
  nlohmann::json spec{
      {"type", "sq_vac_mixture"}, {"xi", {-0.562, 0.0}}, {"lambda_abs", 1.0}};
  write_file(dir / "spec.json", spec.dump());
  auto r = run_cli("witness --input " + (dir / "spec.json").string() +
                   " --tables " + shared_tables_dir().string() +
                   " --scan-lambda 0:4:0.5 --out " + dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("certified DNC >= 3 from |lambda| =") !=
        std::string::npos);
  std::string csv = read_file(dir / "mixture_scan.csv");
  CHECK(csv.rfind("lambda_abs,certified_dnc_gt\n", 0) == 0);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  int last_gt = 0;
  bool monotone = true;
  while (std::getline(lines, line)) {
    double lam;
    int gt;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%d", &lam, &gt) == 2);
    if (rows == 0) CHECK(gt == 0);  // lambda = 0 is vacuum
    if (gt < last_gt) monotone = false;
    last_gt = gt;
    ++rows;
  }
  CHECK(rows == 9);
  CHECK(last_gt == 2);  // lambda = 4 certifies DNC >= 3
  CHECK(monotone);
}

TEST_CASE("photon_add_and_subtract_round_trip") {
  fs::path dir = fresh_dir("photon");
  write_file(dir / "vac.json", fock_projector_json(0));
  auto add = run_cli("photon --input " + (dir / "vac.json").string() +
                     " --add 1 --out " + dir.string());
  CHECK(add.exit_code == 0);
  CHECK(add.output.find("DNC 1 -> 2") != std::string::npos);

  auto out = nlohmann::json::parse(read_file(dir / "photon_out.json"));
  CHECK(out["type"] == "fock_matrix");
  CHECK(out["dim"] == 2);

  fs::path dir2 = fresh_dir("photon_sub");
  write_file(dir2 / "two.json", fock_projector_json(2));
  auto sub = run_cli("photon --input " + (dir2 / "two.json").string() +
                     " --subtract 1 --out " + dir2.string());
  CHECK(sub.exit_code == 0);
  CHECK(sub.output.find("DNC 3 -> 2") != std::string::npos);
}

TEST_CASE("photon_subtracting_vacuum_is_an_input_error") {
  fs::path dir = fresh_dir("photon_vac");
  write_file(dir / "vac.json", fock_projector_json(0));
  auto r = run_cli("photon --input " + (dir / "vac.json").string() +
                   " --subtract 1 --out " + dir.string());
  CHECK(r.exit_code == 3);

  auto both = run_cli("photon --input " + (dir / "vac.json").string() +
                      " --add 1 --subtract 1 --out " + dir.string());
  CHECK(both.exit_code == 3);
}

}  // TEST_SUITE
