#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "common.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Sets section.key in INI text, adding the key or section when missing.
std::string with(std::string text, const std::string& section, const std::string& key, const std::string& value) {
  const std::string header = "[" + section + "]\n";
  auto at = text.find(header);
  if (at == std::string::npos) return text + header + key + " = " + value + "\n";
  at += header.size();
  const auto stop = std::min(text.find("\n[", at), text.size());
  for (auto line = at; line < stop;) {
    const auto eol = text.find('\n', line);
    if (text.compare(line, key.size() + 1, key + " ") == 0) return text.replace(line, eol - line, key + " = " + value);
    line = eol + 1;
  }
  return text.insert(at, key + " = " + value + "\n");
}

struct Override {
  std::string section, key, value;
};

struct Sandbox {
  fs::path dir;
  explicit Sandbox(const std::string& name) : dir(fs::temp_directory_path() / ("csflow_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  fs::path config(const std::vector<Override>& extra = {}, const std::string& name = "run.ini") const {
    std::string text = testing::default_ini();
    const std::vector<Override> base = {{"grid", "table_points", "41"},    {"grid", "phi_points", "33"},
                                        {"grid", "k_points", "33"},        {"solver", "psi_amplitude", "0.005"},
                                        {"solver", "a_bound", "0.45"},     {"solver", "sigma_floor", "0.02"},
                                        {"run", "threads", "4"}};
    for (const auto& o : base) text = with(text, o.section, o.key, o.value);
    for (const auto& o : extra) text = with(text, o.section, o.key, o.value);
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
  }

  int run(std::vector<std::string> args) const {
    args.insert(args.begin(), "csflow");
    return csflow::cli::run(args);
  }
};

}  // namespace

TEST_CASE("cli: tabulate writes a deterministic table") {
  Sandbox sb("tabulate");
  const auto cfg = sb.config();
  const auto out = sb.dir / "a";
  REQUIRE(sb.run({"tabulate", cfg.string(), "-o", out.string()}) == 0);
  const std::string first = slurp(out / "flow_table.csv");
  CHECK(first.rfind("m2,G,sigma,A2\n", 0) == 0);
  CHECK(fs::is_directory(out / "kernels"));
  CHECK(!fs::is_empty(out / "kernels"));
  REQUIRE(sb.run({"tabulate", cfg.string(), "-o", out.string(), "--no-cache", "-j", "1"}) == 0);
  CHECK(slurp(out / "flow_table.csv") == first);
}

TEST_CASE("cli: configuration errors exit 2") {
  Sandbox sb("errors");
  CHECK(sb.run({"tabulate", (sb.dir / "missing.ini").string(), "-o", (sb.dir / "x").string()}) == 2);
  const auto bad = sb.config({{"grid", "phi_points", "4"}}, "bad.ini");
  CHECK(sb.run({"solve", bad.string(), "-o", (sb.dir / "x").string()}) == 2);
  const auto cfg = sb.config();
  CHECK(sb.run({"solve", cfg.string(), "-o", (sb.dir / "x").string(), "-m", "gauss"}) == 2);
  CHECK(sb.run({"verify", cfg.string(), "-o", (sb.dir / "x").string(), "-s", "nope"}) == 2);
}

TEST_CASE("cli: vanishing flow function solves immediately") {
  Sandbox sb("zero");
  const auto cfg = sb.config({{"state", "amplitude", "0"}});
  for (const std::string m : {"nash-moser", "newton", "march"}) {
    const auto out = sb.dir / m;
    CHECK(sb.run({"solve", cfg.string(), "-o", out.string(), "-m", m}) == 0);
    std::ifstream is(out / "residuals.csv");
    std::string line;
    int rows = -1;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 1);
  }
}

TEST_CASE("cli: solve, report and JSON schema") {
  Sandbox sb("solve");
  const auto cfg = sb.config({{"solver", "snapshots", "0, 1"}});
  const auto out = sb.dir / "nm";
  REQUIRE(sb.run({"solve", cfg.string(), "-o", out.string()}) == 0);
  for (const char* f : {"solution.csv", "residuals.csv", "report.json", "flow_table.csv", "solve.log.jsonl",
                        "snapshot_00.csv", "snapshot_01.csv"}) {
    CHECK(fs::is_regular_file(out / f));
  }
  CHECK(slurp(out / "residuals.csv").rfind("t,res0,res2\n", 0) == 0);
  CHECK(slurp(out / "solution.csv").rfind("phi,k,value\n", 0) == 0);

  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(report["schema"] == "v1");
  const std::vector<std::string> keys = {"schema", "command", "config_hash", "method", "outcome", "converged",
                                         "message", "iterations", "t_final", "residual", "a_bound", "u4_max",
                                         "u4_exceeded_at", "seminorms", "lift", "window", "grid", "flow_table",
                                         "snapshots"};
  std::vector<std::string> got;
  for (auto it = report.begin(); it != report.end(); ++it) got.push_back(it.key());
  std::sort(got.begin(), got.end());
  auto want = keys;
  std::sort(want.begin(), want.end());
  CHECK(got == want);
  CHECK(report["residual"]["final"].get<double>() <= report["residual"]["tol"].get<double>());
  CHECK(report["seminorms"].size() == 5);

  // log lines carry the config hash
  std::ifstream log(out / "solve.log.jsonl");
  for (std::string line; std::getline(log, line);) {
    CHECK(nlohmann::json::parse(line)["config_hash"] == report["config_hash"]);
  }

  REQUIRE(sb.run({"report", out.string()}) == 0);
  const std::string summary = slurp(out / "summary.txt");
  CHECK(summary.find("iterations") != std::string::npos);
  CHECK(summary.find("seminorms") != std::string::npos);
  for (const char* f : {"g_curve.dat", "sigma_curve.dat", "residual_decay.dat", "solution_slices.dat"}) {
    CHECK(fs::is_regular_file(out / f));
  }
  const std::string slices = slurp(out / "solution_slices.dat");
  REQUIRE(sb.run({"report", out.string()}) == 0);
  CHECK(slurp(out / "summary.txt") == summary);
  CHECK(slurp(out / "solution_slices.dat") == slices);

  // same config and seed: byte-identical artifacts
  const auto again = sb.dir / "nm2";
  REQUIRE(sb.run({"solve", cfg.string(), "-o", again.string(), "-j", "2"}) == 0);
  for (const char* f : {"solution.csv", "residuals.csv", "report.json", "flow_table.csv", "solve.log.jsonl"}) {
    CHECK(slurp(again / f) == slurp(out / f));
  }
}

TEST_CASE("cli: exit codes for window exit and stall") {
  Sandbox sb("exits");
  sb.config({{"state", "amplitude", "-0.25"}}, "neg.ini");
  CHECK(sb.run({"solve", (sb.dir / "neg.ini").string(), "-o", (sb.dir / "neg").string()}) == 4);

  const auto budget = sb.config({{"solver", "t_max", "0.05"}}, "budget.ini");
  CHECK(sb.run({"solve", budget.string(), "-o", (sb.dir / "b").string()}) == 5);
}

TEST_CASE("cli: report on an empty directory") {
  Sandbox sb("report");
  CHECK(sb.run({"report", sb.dir.string()}) == 2);
}

TEST_CASE("cli: verify sabotage fails with exit 6") {
  Sandbox sb("verify");
  const auto cfg = sb.config();
  const auto out = sb.dir / "v";
  CHECK(sb.run({"verify", cfg.string(), "-o", out.string(), "-s", "linsolve", "--inject-negative-sigma"}) == 6);
  const auto doc = nlohmann::json::parse(slurp(out / "verify.json"));
  CHECK(doc["schema"] == "v1");
  CHECK(doc["passed"] == false);
  CHECK(doc["injected_negative_sigma"] == true);
  REQUIRE(doc["suites"].size() == 1);
  CHECK(doc["suites"][0]["name"] == "linsolve");
  CHECK(doc["suites"][0]["checks"][0]["passed"] == false);
}

TEST_CASE("cli: verify flowfn passes on a small valid config") {
  Sandbox sb("verify_ok");
  const auto cfg = sb.config();
  const auto out = sb.dir / "v";
  CHECK(sb.run({"verify", cfg.string(), "-o", out.string(), "-s", "flowfn"}) == 0);
  const auto doc = nlohmann::json::parse(slurp(out / "verify.json"));
  CHECK(doc["passed"] == true);
  for (const auto& c : doc["suites"][0]["checks"]) CHECK(c.contains("fitted"));
}
