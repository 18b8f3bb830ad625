// besov: experiment driver.
//
//   besov approx-rate    [--config cfg.json] [--seed-base N] [--out prefix] [--threads T] [--assert]
//   besov estimate-rate  ...
//   besov compile-verify ...
//   besov spline-check   [--out prefix] [--assert]
//
// Exit codes: 0 success, 2 validation error, 3 threshold failure under --assert,
// 130 interrupted (partial results and a resume marker are written).

#include <atomic>
#include <csignal>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "besov/bench.hpp"
#include "besov/bspline.hpp"
#include "besov/compiler.hpp"

using namespace besov;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_sigint(int) { g_stop = true; }

struct Args {
  std::string config;
  std::string out;
  long long seed_base = 0;
  int threads = 0;
  bool check = false;
};

// Built-in configurations: the acceptance settings of each experiment.
ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.space = {1.0, 1.0, 1.0, 2.0, 1, 3, false};
  c.target.max_level = 24;
  c.target.dense_max_level = 12;
  for (std::uint64_t s = 0; s < 20; ++s) c.seeds.push_back(1000 + s);
  switch (kind) {
    case ExperimentKind::approx_rate:
      c.grid = {16, 32, 64, 128, 256, 512, 1024};
      c.methods = {"adaptive", "linear"};
      break;
    case ExperimentKind::estimate_rate:
      c.grid = {256, 512, 1024, 2048, 4096, 8192, 16384};
      c.seeds.resize(10);
      c.target.radius = 8.0;
      c.target.max_level = 14;
      c.target.dense_max_level = 8;
      c.target.seed = 77;
      c.methods = {"adaptive", "krr_gaussian", "krr_spline"};
      break;
    case ExperimentKind::compile_verify:
      c.space.m = 2;
      c.grid = {8, 16, 32, 64};
      c.seeds.resize(3);
      c.methods = {"compiled"};
      break;
  }
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

double slope_of(const json& fit) {
  return fit.is_object() && fit.contains("slope") ? fit["slope"].get<double>() : std::nan("");
}

// Acceptance thresholds per experiment kind; returns failure messages.
std::vector<std::string> check_thresholds(const ExperimentConfig& cfg, const ExperimentResult& r) {
  std::vector<std::string> fails;
  const auto& m = r.summary["methods"];
  const auto need = [&](bool ok, const std::string& what) {
    if (!ok) fails.push_back(what);
  };
  const auto median = [&](const std::string& method) {
    return m.contains(method) && m[method]["median_seed_slope"].is_number()
               ? m[method]["median_seed_slope"].get<double>()
               : std::nan("");
  };
  switch (cfg.kind) {
    case ExperimentKind::approx_rate:
      if (!cfg.space.mixed) {
        const double a = median("adaptive"), l = median("linear");
        need(a >= -1.15 && a <= -0.85, "adaptive slope outside [-1.15, -0.85]");
        need(l >= -0.65 && l <= -0.35, "linear slope outside [-0.65, -0.35]");
        need(a - l <= -0.3, "adaptive minus linear slope above -0.3");
      } else {
        const double s = median("sparse_grid"), f = median("full_grid");
        need(s <= -1.4, "sparse-grid slope above -1.4");
        need(f >= -0.9, "full-grid slope below -0.9");
      }
      break;
    case ExperimentKind::estimate_rate: {
      const double a = m.contains("adaptive") ? slope_of(m["adaptive"]["fit_of_mean"]) : std::nan("");
      need(a >= -0.81 && a <= -0.52, "adaptive slope outside [-0.81, -0.52]");
      if (r.summary.contains("krr_best")) {
        const double k = slope_of(r.summary["krr_best"]["fit_of_mean"]);
        need(k >= -0.58, "KRR slope below -0.58");
        need(a <= k - 0.08, "adaptive slope not 0.08 below KRR");
      }
      break;
    }
    case ExperimentKind::compile_verify:
      for (const auto& row : r.rows) need(row.error <= row.fit_residual, "compiled error above its bound");
      break;
  }
  return fails;
}

int run_kind(ExperimentKind kind, const Args& args) {
  ExperimentConfig cfg = default_config(kind);
  if (!args.config.empty()) cfg = ExperimentConfig::from_json(json::parse(read_file(args.config)));
  if (cfg.kind != kind) throw std::invalid_argument("config kind does not match the subcommand");
  if (args.seed_base != 0)
    for (auto& s : cfg.seeds) s += static_cast<std::uint64_t>(args.seed_base);
  if (args.threads > 0) cfg.threads = args.threads;
  if (!args.out.empty()) cfg.output = args.out;
  cfg.validate();

  RunControl control;
  control.stop = &g_stop;
  const std::string marker = cfg.output.empty() ? "" : cfg.output + ".resume";
  if (!marker.empty() && std::filesystem::exists(marker)) {
    const json m = json::parse(read_file(marker));
    if (m.value("config_hash", "") == cfg.hash() && std::filesystem::exists(cfg.output + ".csv")) {
      control.resume_rows = rows_from_csv(read_file(cfg.output + ".csv"));
      std::cerr << "resuming: " << control.resume_rows.size() << " rows reused\n";
    }
  }
  std::signal(SIGINT, on_sigint);
  const ExperimentResult r = run_experiment(cfg, control);
  std::signal(SIGINT, SIG_DFL);

  json summary = r.summary;
  summary["config"] = cfg.to_json();
  const std::string csv = rows_to_csv(r.rows);
  if (cfg.output.empty()) {
    std::cout << csv;
    std::cerr << summary.dump(2) << "\n";
  } else {
    write_file(cfg.output + ".csv", csv);
    write_file(cfg.output + ".json", summary.dump(2) + "\n");
    if (r.interrupted) {
      write_file(marker, json{{"config_hash", cfg.hash()}, {"completed_seeds", r.completed_seeds}}.dump() + "\n");
    } else if (std::filesystem::exists(marker)) {
      std::filesystem::remove(marker);
    }
  }
  if (r.interrupted) {
    std::cerr << "interrupted after " << r.completed_seeds.size() << " of " << cfg.seeds.size() << " seeds\n";
    return 130;
  }
  if (args.check) {
    const auto fails = check_thresholds(cfg, r);
    for (const auto& f : fails) std::cerr << "FAIL: " << f << "\n";
    if (!fails.empty()) return 3;
  }
  return 0;
}

int spline_check(const Args& args) {
  json report;
  bool ok = true;
  json pou = json::array();
  for (int m = 1; m <= 6; ++m) {
    double worst = 0.0;
    for (int i = 0; i <= 10000; ++i) {
      const double x = i / 10000.0;
      double sum = 0.0;
      for (int j = -m; j <= 0; ++j) sum += eval_cardinal(m, x - j);
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    ok = ok && worst <= 1e-10;
    pou.push_back({{"m", m}, {"max_error", worst}});
  }
  report["partition_of_unity"] = pou;
  json units = json::array();
  for (auto [d, m] : {std::pair{1, 1}, std::pair{1, 2}, std::pair{2, 2}}) {
    const double eps = 1e-2;
    const auto unit = build_bspline_unit(d, m, eps);
    const auto cert = certify_unit(unit.net, d, m, eps);
    const bool fits = unit.size.within(unit.bound);
    ok = ok && cert.passed && fits;
    units.push_back(certificate_to_json(cert, unit.constants, unit.bound));
    units.back()["d"] = d;
    units.back()["m"] = m;
    units.back()["size"] = size_report_to_json(unit.size);
    units.back()["size_within_bound"] = fits;
  }
  report["units"] = units;
  report["passed"] = ok;
  if (args.out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_file(args.out + ".json", report.dump(2) + "\n");
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Besov-space approximation and estimation experiments"};
  app.require_subcommand(1);
  Args args;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "experiment configuration (JSON, schema 1)");
    sub->add_option("--seed-base", args.seed_base, "offset added to every seed");
    sub->add_option("--out", args.out, "output prefix for <out>.csv and <out>.json");
    sub->add_option("--threads", args.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--assert", args.check, "exit 3 when acceptance thresholds fail");
  };
  auto* approx = app.add_subcommand("approx-rate", "approximation error against N");
  auto* estimate = app.add_subcommand("estimate-rate", "estimation risk against n");
  auto* compile = app.add_subcommand("compile-verify", "compile expansions and check the error bound");
  auto* spline = app.add_subcommand("spline-check", "B-spline identities and unit certificates");
  for (auto* sub : {approx, estimate, compile}) add_common(sub);
  spline->add_option("--out", args.out, "output prefix for <out>.json");
  spline->add_flag("--assert", args.check, "exit 3 on failure (the default outcome as well)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*approx) return run_kind(ExperimentKind::approx_rate, args);
    if (*estimate) return run_kind(ExperimentKind::estimate_rate, args);
    if (*compile) return run_kind(ExperimentKind::compile_verify, args);
    return spline_check(args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
