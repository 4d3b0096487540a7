#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csflow/propagators.hpp"
#include "csflow/verify.hpp"

namespace csflow::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kSchema = "v1";

struct Common {
  std::string config;
  std::string out = "out";
  long threads = -1;
  long long seed = -1;
};

long long env_int(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return -1;
  char* end = nullptr;
  const long long x = std::strtoll(v, &end, 10);
  if (*end != '\0' || x < 0) throw ConfigError(std::string(name) + " must be a non-negative integer, got '" + v + "'");
  return x;
}

RunSetup load(const Common& c) {
  if (!fs::is_regular_file(c.config)) throw ConfigError("config file not found: " + c.config);
  const Config cfg = Config::from_file(c.config);
  long threads = c.threads;
  if (threads <= 0) threads = static_cast<long>(env_int("CSFLOW_THREADS"));
  long long seed = c.seed;
  if (seed < 0) seed = env_int("CSFLOW_SEED");
  return resolve_setup(cfg, threads, seed);
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// JSON-lines run log; no wall-clock so reruns produce the same file.
class RunLog {
 public:
  RunLog(const fs::path& path, const std::string& command, const std::string& hash) : os_(path), hash_(hash) {
    if (!os_) throw NumericError("cannot write '" + path.string() + "'");
    event("start", {{"command", command}});
  }
  void event(const std::string& name, json fields = json::object()) {
    json line;
    line["event"] = name;
    line["config_hash"] = hash_;
    for (auto it = fields.begin(); it != fields.end(); ++it) line[it.key()] = it.value();
    os_ << line.dump() << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
  std::string hash_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw NumericError("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

json window_json(const SigmaWindowReport& w) {
  return {{"c", w.c},
          {"eps_log", w.eps_log},
          {"half_width", w.half_width},
          {"sigma_min", finite_or_null(w.sigma_min)},
          {"sigma_at_zero", finite_or_null(w.sigma_at_zero)},
          {"log_slope_max", finite_or_null(w.log_slope_max)},
          {"passed", w.passed},
          {"remedy", w.remedy}};
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(key + ": not a number: '" + item + "'");
    }
  }
  return out;
}

FlowTable build_table(const RunSetup& s, RunLog& log) {
  const Background bg(s.background);
  FlowTable table = tabulate(bg, s.table);
  log.event("table", {{"points", table.size()},
                      {"m2_max", s.table.m2_max},
                      {"G0", table.g_at(0.0)},
                      {"sigma0", table.sigma_at(0.0)},
                      {"A2_0", table.a2_at(0.0)}});
  return table;
}

// ---------------------------------------------------------------- tabulate

int cmd_tabulate(const Common& c, bool cache) {
  const Stopwatch clock;
  const RunSetup s = load(c);
  fs::create_directories(c.out);
  RunLog log(fs::path(c.out) / "tabulate.log.jsonl", "tabulate", s.hash());
  const FlowTable table = build_table(s, log);
  write_flow_table_csv(fs::path(c.out) / "flow_table.csv", table);

  if (cache) {
    const Background bg(s.background);
    const auto m2s = parse_list(s.config.get_string("cache.m2", "0"), "cache.m2");
    const fs::path dir = fs::path(c.out) / "kernels";
    fs::create_directories(dir);
    int written = 0;
    for (double m2 : m2s) {
      if (std::abs(m2) > s.background.m2_max) throw ConfigError("cache.m2 value outside [-m2_max, m2_max]");
      for (std::size_t slot = 0; slot < bg.mode_count(); ++slot) {
        const auto k = interacting_retarded_volterra(bg, slot, m2);
        write_matrix_binary(kernel_cache_path(dir, s.hash(), bg.mode(slot).index, m2), k.g);
        ++written;
      }
    }
    log.event("kernel_cache", {{"kernels", written}});
  }

  // Window summary for the configured boundary data.
  try {
    const FlowProblem problem = make_problem(s.grid, s.psi, table, s.side);
    const double hw = window_half_width(problem, s.solver.a_bound);
    const auto w = check_sigma_window(table, s.solver.sigma_floor, s.solver.eps_log, hw);
    log.event("sigma_window", window_json(w));
    std::printf("sigma window: c=%.6g eps_log=%.6g A=%.6g (half-width %.6g): sigma_min=%.6g max|dlog sigma|=%.6g -> %s\n",
                w.c, w.eps_log, s.solver.a_bound, hw, w.sigma_min, w.log_slope_max, w.passed ? "pass" : "fail");
    if (!w.passed) std::printf("  remedy: %s\n", w.remedy.c_str());
  } catch (const RangeError& e) {
    log.event("sigma_window", {{"error", e.what()}});
    std::printf("sigma window: %s\n", e.what());
  }
  log.event("done", {{"exit", 0}});
  std::printf("tabulate: %zu points -> %s (%.2f s)\n", table.size(), (fs::path(c.out) / "flow_table.csv").c_str(),
              clock.seconds());
  return ok;
}

// ---------------------------------------------------------------- solve

int cmd_solve(const Common& c, const std::string& method_name) {
  const Stopwatch clock;
  const SolveMethod method = parse_method(method_name);
  const RunSetup s = load(c);
  fs::create_directories(c.out);
  const fs::path out(c.out);
  RunLog log(out / "solve.log.jsonl", "solve", s.hash());
  const FlowTable table = build_table(s, log);
  write_flow_table_csv(out / "flow_table.csv", table);

  FlowProblem problem;
  try {
    problem = make_problem(s.grid, s.psi, table, s.side);
  } catch (const RangeError& e) {
    log.event("done", {{"exit", int(window_exit)}, {"message", e.what()}});
    std::fprintf(stderr, "window exit: %s\n  remedy: reduce solver.psi_amplitude or widen grid.m2_max\n", e.what());
    return window_exit;
  }
  log.event("problem", {{"lift_norm2", problem.lift.norm2}, {"lift_norm3", problem.lift.norm3}});

  const SolveReport rep = solve(method, problem, table, s.solver);

  {
    std::FILE* f = std::fopen((out / "residuals.csv").c_str(), "w");
    if (!f) throw NumericError("cannot write residuals.csv");
    std::fprintf(f, "t,res0,res2\n");
    for (const auto& h : rep.history) std::fprintf(f, "%.17g,%.17g,%.17g\n", h.t, h.res0, h.res2);
    std::fclose(f);
  }
  const bool have_solution = rep.total.values.size() == static_cast<Eigen::Index>(s.grid.n_phi) * s.grid.n_k;
  if (have_solution) write_field_csv(out / "solution.csv", rep.total);
  json snaps = json::array();
  for (std::size_t i = 0; i < rep.snapshots.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%02zu.csv", i);
    write_field_csv(out / name, rep.snapshots[i].second);
    snaps.push_back({{"t", rep.snapshots[i].first}, {"file", name}});
  }

  json seminorm_list = json::array();
  if (rep.u.values.size() > 0) {
    for (double v : seminorms(rep.u, 4)) seminorm_list.push_back(finite_or_null(v));
  }
  json report;
  report["schema"] = kSchema;
  report["command"] = "solve";
  report["config_hash"] = s.hash();
  report["method"] = to_string(rep.method);
  report["outcome"] = to_string(rep.outcome);
  report["converged"] = rep.converged();
  report["message"] = rep.message;
  report["iterations"] = rep.iterations;
  report["t_final"] = rep.t_final;
  report["residual"] = {{"initial", finite_or_null(rep.res0_initial)},
                        {"final", finite_or_null(rep.res0_final)},
                        {"final_norm2", finite_or_null(rep.res2_final)},
                        {"tol", method == SolveMethod::march ? s.solver.march_tol : s.solver.tol}};
  report["a_bound"] = s.solver.a_bound;
  report["u4_max"] = finite_or_null(rep.u4_max);
  report["u4_exceeded_at"] = rep.u4_exceeded_at < 0.0 ? json(nullptr) : json(rep.u4_exceeded_at);
  report["seminorms"] = seminorm_list;
  report["lift"] = {{"norm2", problem.lift.norm2}, {"norm3", problem.lift.norm3}};
  report["window"] = window_json(rep.window);
  report["window"]["half_width"] = rep.window_half_width;
  report["grid"] = {{"phi_min", s.grid.phi_min}, {"phi_max", s.grid.phi_max}, {"phi_points", s.grid.n_phi},
                    {"k_min", s.grid.k_min},     {"k_max", s.grid.k_max},     {"k_points", s.grid.n_k}};
  report["flow_table"] = {{"m2_max", s.table.m2_max},
                          {"points", s.table.points},
                          {"G0", table.g_at(0.0)},
                          {"sigma0", table.sigma_at(0.0)},
                          {"A2_0", table.a2_at(0.0)}};
  report["snapshots"] = snaps;
  write_json(out / "report.json", report);

  int code = ok;
  switch (rep.outcome) {
    case SolveOutcome::converged: code = ok; break;
    case SolveOutcome::window_exit: code = window_exit; break;
    case SolveOutcome::stalled:
    case SolveOutcome::not_converged: code = stalled; break;
  }
  log.event("done", {{"exit", code}, {"outcome", to_string(rep.outcome)}, {"iterations", rep.iterations},
                     {"res0_final", finite_or_null(rep.res0_final)}});

  std::printf("solve[%s]: %s after %d iterations, res0 %.3e -> %.3e, max ||u||_4 = %.4g (A = %.4g) (%.2f s)\n",
              to_string(rep.method), to_string(rep.outcome), rep.iterations, rep.res0_initial, rep.res0_final,
              rep.u4_max, s.solver.a_bound, clock.seconds());
  if (code == window_exit) {
    std::fprintf(stderr, "window exit: %s\n", rep.message.c_str());
    const std::string remedy = rep.window.remedy.empty()
                                   ? "reduce solver.psi_amplitude, raise solver.a_bound, or shorten the k interval"
                                   : rep.window.remedy;
    if (rep.message.find(remedy) == std::string::npos) std::fprintf(stderr, "  remedy: %s\n", remedy.c_str());
  } else if (code == stalled) {
    std::fprintf(stderr, "no convergence: %s\n", rep.message.c_str());
  }
  return code;
}

// ---------------------------------------------------------------- verify

json suite_json(const SuiteResult& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    json fitted = json::object();
    for (const auto& [k, v] : c.fitted) fitted[k] = finite_or_null(v);
    checks.push_back({{"name", c.name},
                      {"value", finite_or_null(c.value)},
                      {"threshold", finite_or_null(c.threshold)},
                      {"relation", c.relation},
                      {"passed", c.passed},
                      {"fitted", fitted},
                      {"note", c.note}});
  }
  return {{"name", r.name}, {"passed", r.passed()}, {"checks", checks}};
}

int cmd_verify(const Common& c, const std::string& suite, bool inject_negative_sigma) {
  static const std::vector<std::string> known = {"propagators", "flowfn", "graded", "linsolve"};
  if (suite != "all" && std::find(known.begin(), known.end(), suite) == known.end()) {
    throw ConfigError("unknown suite '" + suite + "' (propagators|flowfn|graded|linsolve|all)");
  }
  const Stopwatch clock;
  const RunSetup s = load(c);
  fs::create_directories(c.out);
  const fs::path out(c.out);
  RunLog log(out / "verify.log.jsonl", "verify", s.hash());
  auto wanted = [&](const std::string& name) { return suite == "all" || suite == name; };

  std::vector<SuiteResult> results;
  if (wanted("propagators")) results.push_back(propagators_suite(s));
  if (wanted("flowfn") || wanted("graded") || wanted("linsolve")) {
    const FlowTable table = build_table(s, log);
    if (wanted("flowfn")) results.push_back(flowfn_suite(s, table));
    if (wanted("graded") || wanted("linsolve")) {
      const FlowProblem problem = make_problem(s.grid, s.psi, table, s.side);
      if (wanted("graded")) results.push_back(graded_suite(s, table, problem));
      if (wanted("linsolve")) results.push_back(linsolve_suite(s, table, problem, inject_negative_sigma));
    }
  }

  bool all = true;
  json suites = json::array();
  for (const auto& r : results) {
    all = all && r.passed();
    suites.push_back(suite_json(r));
    log.event("suite", {{"name", r.name}, {"passed", r.passed()}});
    std::printf("suite %s: %s\n", r.name.c_str(), r.passed() ? "passed" : "FAILED");
    for (const auto& ch : r.checks) {
      std::printf("    %-4s %-28s value=%-12.5g threshold=%-10.4g %s\n", ch.passed ? "ok" : "FAIL", ch.name.c_str(),
                  ch.value, ch.threshold, ch.note.c_str());
    }
  }
  json doc;
  doc["schema"] = kSchema;
  doc["command"] = "verify";
  doc["config_hash"] = s.hash();
  doc["seed"] = s.seed;
  doc["suite"] = suite;
  doc["injected_negative_sigma"] = inject_negative_sigma;
  doc["passed"] = all;
  doc["suites"] = suites;
  write_json(out / "verify.json", doc);
  const int code = all ? ok : verify_failed;
  log.event("done", {{"exit", code}});
  std::printf("verify: %s (%.1f s)\n", all ? "all checks passed" : "FAILED", clock.seconds());
  return code;
}

// ---------------------------------------------------------------- report

std::vector<std::vector<double>> read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.c_str();
    while (*p) {
      char* end = nullptr;
      row.push_back(std::strtod(p, &end));
      if (end == p) throw ConfigError("malformed CSV row in " + path.string());
      p = *end == ',' ? end + 1 : end;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

class DatFile {
 public:
  explicit DatFile(const fs::path& path) : f_(std::fopen(path.c_str(), "w")) {
    if (!f_) throw NumericError("cannot write '" + path.string() + "'");
  }
  ~DatFile() { std::fclose(f_); }
  DatFile(const DatFile&) = delete;
  DatFile& operator=(const DatFile&) = delete;
  std::FILE* get() { return f_; }

 private:
  std::FILE* f_;
};

int cmd_report(const std::string& dir) {
  const fs::path d(dir);
  const bool has_table = fs::is_regular_file(d / "flow_table.csv");
  const bool has_res = fs::is_regular_file(d / "residuals.csv");
  const bool has_sol = fs::is_regular_file(d / "solution.csv");
  const bool has_report = fs::is_regular_file(d / "report.json");
  const bool has_verify = fs::is_regular_file(d / "verify.json");
  if (!(has_table || has_res || has_sol || has_report || has_verify)) {
    throw ConfigError("no csflow artifacts in '" + dir + "'");
  }
  std::ostringstream summary;
  summary << "csflow report\n";

  if (has_table) {
    const auto rows = read_csv(d / "flow_table.csv");
    DatFile g(d / "g_curve.dat"), s(d / "sigma_curve.dat");
    std::fprintf(g.get(), "# m2 G\n");
    std::fprintf(s.get(), "# m2 sigma A2\n");
    for (const auto& r : rows) {
      if (r.size() < 4) throw ConfigError("flow_table.csv: expected 4 columns");
      std::fprintf(g.get(), "%.17g %.17g\n", r[0], r[1]);
      std::fprintf(s.get(), "%.17g %.17g %.17g\n", r[0], r[2], r[3]);
    }
    if (!rows.empty()) {
      summary << "flow table: " << rows.size() << " points on [" << rows.front()[0] << ", " << rows.back()[0] << "]\n";
    }
  }
  if (has_res) {
    const auto rows = read_csv(d / "residuals.csv");
    DatFile r(d / "residual_decay.dat");
    std::fprintf(r.get(), "# t res0 res2\n");
    for (const auto& row : rows) {
      if (row.size() < 3) throw ConfigError("residuals.csv: expected 3 columns");
      std::fprintf(r.get(), "%.17g %.17g %.17g\n", row[0], row[1], row[2]);
    }
  }
  if (has_sol) {
    const auto rows = read_csv(d / "solution.csv");
    // Rows are ordered k-major: group by k.
    std::map<double, std::vector<std::pair<double, double>>> by_k;
    for (const auto& row : rows) {
      if (row.size() < 3) throw ConfigError("solution.csv: expected 3 columns");
      by_k[row[1]].emplace_back(row[0], row[2]);
    }
    DatFile surf(d / "solution_surface.dat"), slices(d / "solution_slices.dat");
    std::fprintf(surf.get(), "# phi k u\n");
    for (const auto& [k, pts] : by_k) {
      for (const auto& [phi, u] : pts) std::fprintf(surf.get(), "%.17g %.17g %.17g\n", phi, k, u);
      std::fprintf(surf.get(), "\n");
    }
    std::vector<double> ks;
    for (const auto& kv : by_k) ks.push_back(kv.first);
    if (!ks.empty()) {
      const std::size_t n = ks.size() - 1;
      for (std::size_t q : {std::size_t{0}, n / 4, n / 2, 3 * n / 4, n}) {
        std::fprintf(slices.get(), "# k = %.17g\n", ks[q]);
        for (const auto& [phi, u] : by_k[ks[q]]) std::fprintf(slices.get(), "%.17g %.17g\n", phi, u);
        std::fprintf(slices.get(), "\n\n");
      }
    }
  }
  if (has_report) {
    std::ifstream is(d / "report.json");
    const json r = json::parse(is);
    summary << "solve: method " << r.value("method", "?") << ", outcome " << r.value("outcome", "?") << ", "
            << r.value("iterations", 0) << " iterations\n";
    const auto& res = r["residual"];
    auto num = [](const json& j) {
      char buf[64];
      if (j.is_number()) std::snprintf(buf, sizeof buf, "%.6e", j.get<double>());
      else std::snprintf(buf, sizeof buf, "n/a");
      return std::string(buf);
    };
    summary << "  residual sup: initial " << num(res["initial"]) << ", final " << num(res["final"]) << " (tol "
            << num(res["tol"]) << ")\n";
    summary << "  residual l2 (final): " << num(res["final_norm2"]) << "\n";
    summary << "  final seminorms |u|_n:";
    int n = 0;
    for (const auto& v : r["seminorms"]) summary << " n" << n++ << "=" << num(v);
    summary << "\n  max ||u||_4 = " << num(r["u4_max"]) << " (A = " << num(r["a_bound"]) << ")\n";
    const auto& w = r["window"];
    summary << "  sigma window: c=" << num(w["c"]) << " eps_log=" << num(w["eps_log"]) << " half-width="
            << num(w["half_width"]) << " -> " << (w.value("passed", false) ? "pass" : "fail") << "\n";
  }
  if (has_verify) {
    std::ifstream is(d / "verify.json");
    const json v = json::parse(is);
    summary << "verify: " << (v.value("passed", false) ? "all passed" : "FAILED") << "\n";
    for (const auto& s : v["suites"]) {
      int pass = 0, total = 0;
      for (const auto& c : s["checks"]) {
        ++total;
        if (c.value("passed", false)) ++pass;
      }
      summary << "  " << s.value("name", "?") << ": " << pass << "/" << total << " checks\n";
      for (const auto& c : s["checks"]) {
        if (!c.value("passed", false)) summary << "    failed: " << c.value("name", "?") << "\n";
      }
    }
  }
  {
    std::ofstream os(d / "summary.txt");
    if (!os) throw NumericError("cannot write summary.txt");
    os << summary.str();
  }
  std::cout << summary.str();
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"csflow: Lorentzian Callan-Symanzik flow solver and verifier", "csflow"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", common.config, "INI configuration file")->required();
    sub->add_option("-o,--out", common.out, "output directory")->capture_default_str();
    sub->add_option("-j,--threads", common.threads, "worker threads (overrides CSFLOW_THREADS)");
    sub->add_option("--seed", common.seed, "sampling seed (overrides CSFLOW_SEED)");
  };

  auto* tab = app.add_subcommand("tabulate", "tabulate G, sigma, A2 and cache propagator kernels");
  add_common(tab);
  bool no_cache = false;
  tab->add_flag("--no-cache", no_cache, "skip the kernel cache");

  auto* sol = app.add_subcommand("solve", "solve the flow problem");
  add_common(sol);
  std::string method = "nash-moser";
  sol->add_option("-m,--method", method, "nash-moser | newton | march")->capture_default_str();

  auto* ver = app.add_subcommand("verify", "run invariant suites");
  add_common(ver);
  std::string suite = "all";
  bool inject = false;
  ver->add_option("-s,--suite", suite, "propagators | flowfn | graded | linsolve | all")->capture_default_str();
  ver->add_flag("--inject-negative-sigma", inject, "sabotage: negate the linsolve conductivity");

  auto* rep = app.add_subcommand("report", "render plot data and a summary from an output directory");
  std::string report_dir;
  rep->add_option("dir", report_dir, "output directory of a previous run")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (tab->parsed()) return cmd_tabulate(common, !no_cache);
    if (sol->parsed()) return cmd_solve(common, method);
    if (ver->parsed()) return cmd_verify(common, suite, inject);
    if (rep->parsed()) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return config_error;
  } catch (const WindowError& e) {
    std::fprintf(stderr, "window exit: %s\n", e.what());
    return window_exit;
  } catch (const RangeError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return numeric_error;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return numeric_error;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: malformed JSON artifact: %s\n", e.what());
    return config_error;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return config_error;
  }
  return usage;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace csflow::cli
