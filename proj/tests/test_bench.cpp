#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>

#include "besov/bench.hpp"
#include "besov/rng.hpp"

using namespace besov;

namespace {

ExperimentConfig small_approx() {
  ExperimentConfig c;
  c.kind = ExperimentKind::approx_rate;
  c.space = {1.0, 1.0, 1.0, 2.0, 1, 3, false};
  c.grid = {16, 32, 64, 128};
  c.seeds = {1, 2, 3};
  c.target.max_level = 12;
  c.target.dense_max_level = 8;
  c.methods = {"adaptive", "linear"};
  c.timing = false;
  return c;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("fit_rate examples") {
  const auto a = fit_rate({{2, 0.5}, {4, 0.25}, {8, 0.125}});
  CHECK(a.slope == -1.0);
  CHECK(a.r_squared == 1.0);
  CHECK(a.intercept == 0.0);
  const auto b = fit_rate({{3, 5}, {12, 7}});
  CHECK(b.slope == doctest::Approx((std::log2(7.0) - std::log2(5.0)) / 2.0).epsilon(1e-14));
  CHECK(b.r_squared == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(fit_rate({{1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate({{1, 1}, {2, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate({{2, 1}, {2, 3}}), std::invalid_argument);
}

TEST_CASE("fit_rate is scale invariant") {
  std::vector<std::pair<double, double>> pts{{2, 0.7}, {5, 0.3}, {9, 0.31}, {40, 0.02}};
  const double base = fit_rate(pts).slope;
  for (double c : {8.0, 0.125, 1024.0}) {
    auto scaled = pts;
    for (auto& p : scaled) p.second *= c;
    CHECK(fit_rate(scaled).slope == base);
  }
  auto scaled = pts;
  for (auto& p : scaled) p.second *= 3.0;
  CHECK(fit_rate(scaled).slope == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("fit_rate recovers a noisy power law") {
  // Slope standard error with 1% noise over 20 octaves is about 3e-4.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<std::pair<double, double>> pts;
    for (int i = 1; i <= 20; ++i) {
      const double x = std::ldexp(1.0, i);
      pts.push_back({x, std::pow(x, -0.7) * (1.0 + 0.01 * rng.normal())});
    }
    CHECK(std::abs(fit_rate(pts).slope + 0.7) <= 0.05);
  }
}

TEST_CASE("experiment cardinality, order and determinism") {
  const auto cfg = small_approx();
  const auto a = run_experiment(cfg);
  REQUIRE(a.rows.size() == 24);
  CHECK_FALSE(a.interrupted);
  std::size_t i = 0;
  for (auto seed : cfg.seeds)
    for (auto N : cfg.grid)
      for (const auto& method : cfg.methods) {
        CHECK(a.rows[i].seed == seed);
        CHECK(a.rows[i].n_or_N == N);
        CHECK(a.rows[i].method == method);
        CHECK(a.rows[i].wall_ms == 0.0);
        CHECK(a.rows[i].error > 0.0);
        ++i;
      }
  const auto b = run_experiment(cfg);
  CHECK(rows_to_csv(a.rows) == rows_to_csv(b.rows));
  CHECK(a.summary.dump() == b.summary.dump());
  auto threaded = cfg;
  threaded.threads = 3;
  CHECK(rows_to_csv(run_experiment(threaded).rows) == rows_to_csv(a.rows));
  CHECK(a.summary["config_hash"] == cfg.hash());
  CHECK(a.summary["methods"]["adaptive"]["reference_exponent"] == -1.0);
  CHECK(a.summary["methods"]["linear"]["reference_exponent"] == -0.5);
}

TEST_CASE("csv schema") {
  const auto cfg = small_approx();
  const auto rows = run_experiment(cfg).rows;
  const std::string text = rows_to_csv(rows);
  CHECK(text.rfind("kind,method,n_or_N,seed,error,fit_residual,wall_ms\n", 0) == 0);
  const auto back = rows_from_csv(text);
  REQUIRE(back.size() == rows.size());
  const std::set<long long> grid(cfg.grid.begin(), cfg.grid.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].error == rows[i].error);
    CHECK(back[i].seed == rows[i].seed);
    CHECK(grid.count(back[i].n_or_N) == 1);
  }
  CHECK(rows_to_csv(back) == text);
  CHECK_THROWS_AS(rows_from_csv("a,b\n"), std::invalid_argument);
  CHECK_THROWS_AS(rows_from_csv("kind,method,n_or_N,seed,error,fit_residual,wall_ms\nx,y,z\n"),
                  std::invalid_argument);
}

TEST_CASE("config json, hash and validation") {
  auto cfg = small_approx();
  cfg.target.seed = 77;
  const auto back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.hash() == cfg.hash());
  auto other = cfg;
  other.output = "elsewhere";
  other.threads = 4;
  CHECK(other.hash() == cfg.hash());
  other.seeds = {1, 2, 4};
  CHECK(other.hash() != cfg.hash());

  auto bad = cfg;
  bad.grid = {16, 16};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.methods = {"sparse_grid"};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.target.name = "nope";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  auto doc = cfg.to_json();
  doc["schema"] = 2;
  CHECK_THROWS_AS(ExperimentConfig::from_json(doc), std::invalid_argument);
  doc = cfg.to_json();
  doc["mystery"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(doc), std::invalid_argument);
  doc = cfg.to_json();
  doc.erase("grid");
  CHECK_THROWS_AS(ExperimentConfig::from_json(doc), std::invalid_argument);
}

TEST_CASE("interrupt and resume") {
  const auto cfg = small_approx();
  const auto full = run_experiment(cfg);
  std::atomic<bool> stop{true};
  RunControl halted;
  halted.stop = &stop;
  const auto none = run_experiment(cfg, halted);
  CHECK(none.interrupted);
  CHECK(none.rows.empty());
  RunControl resume;
  resume.resume_rows.assign(full.rows.begin(), full.rows.begin() + 8);  // seed 1 complete
  resume.resume_rows.push_back(full.rows[8]);                            // seed 2 partial
  const auto again = run_experiment(cfg, resume);
  CHECK_FALSE(again.interrupted);
  CHECK(rows_to_csv(again.rows) == rows_to_csv(full.rows));
}

TEST_CASE("corpus entries match their claims") {
  const SpaceParams mixed{1.0, 2.0, 2.0, 2.0, 2, 2, true};
  TargetSpec spec;
  spec.max_level = 4;
  spec.radius = 1.5;
  for (const auto& name : corpus_names()) {
    CAPTURE(name);
    spec.name = name;
    const auto c = make_corpus(spec, mixed, 9);
    CHECK(c.radius == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(sequence_norm(*c.expansion, mixed, NormMode::mixed) == doctest::Approx(1.5).epsilon(1e-9));
    CHECK_FALSE(c.certification.empty());
    const std::vector<double> x{0.3, 0.8};
    CHECK(c.f(x) == doctest::Approx(eval_expansion(*c.expansion, x)).epsilon(1e-12));
  }
  // Structural oracles: additive separability and product separability.
  Rng rng(4);
  spec.name = "additive";
  const auto add = make_corpus(spec, mixed, 3);
  spec.name = "tensor-prod";
  const auto prod = make_corpus(spec, mixed, 3);
  for (int t = 0; t < 50; ++t) {
    const double a = rng.uniform(), b = rng.uniform(), u = rng.uniform(), v = rng.uniform();
    const std::vector<double> ab{a, b}, uv{u, v}, av{a, v}, ub{u, b};
    CHECK(add.f(ab) + add.f(uv) == doctest::Approx(add.f(av) + add.f(ub)).epsilon(1e-10));
    CHECK(prod.f(ab) * prod.f(uv) == doctest::Approx(prod.f(av) * prod.f(ub)).epsilon(1e-10));
  }
  spec.name = "tensor-prod";
  CHECK_THROWS_AS(make_corpus(spec, {1.0, 2.0, 2.0, 2.0, 2, 2, false}, 1), std::invalid_argument);
  spec.name = "nope";
  CHECK_THROWS_AS(make_corpus(spec, mixed, 1), std::invalid_argument);
}

TEST_CASE("estimation and compile experiments") {
  ExperimentConfig e;
  e.kind = ExperimentKind::estimate_rate;
  e.space = {1.0, 1.0, 1.0, 2.0, 1, 3, false};
  e.grid = {64, 128};
  e.seeds = {5};
  e.target.max_level = 10;
  e.target.dense_max_level = 6;
  e.target.seed = 77;
  e.methods = {"adaptive", "krr_gaussian", "krr_spline"};
  e.timing = false;
  const auto r = run_experiment(e);
  CHECK(r.rows.size() == 6);
  for (const auto& row : r.rows) CHECK(row.error > 0.0);
  CHECK(r.summary.contains("krr_best"));

  ExperimentConfig c;
  c.kind = ExperimentKind::compile_verify;
  c.space = {1.0, 1.0, 1.0, 2.0, 1, 2, false};
  c.grid = {8, 16};
  c.seeds = {1};
  c.target.max_level = 10;
  c.target.dense_max_level = 5;
  c.methods = {"compiled"};
  const auto cv = run_experiment(c);
  REQUIRE(cv.rows.size() == 2);
  for (const auto& row : cv.rows) CHECK(row.error <= row.fit_residual);
}

}  // TEST_SUITE
