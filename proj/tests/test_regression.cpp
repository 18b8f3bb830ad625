#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "besov/regression.hpp"
#include "besov/rng.hpp"

using namespace besov;

namespace {

Function smooth_target() {
  return [](std::span<const double> x) { return std::sin(6.0 * x[0]) + 0.3 * x[0]; };
}

Dataset random_design(int n, std::uint64_t seed, double sigma = 0.2) {
  return generate_data(smooth_target(), {n, sigma, 1.0, seed, 1});
}

double spline_kernel_oracle(double a, double b) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  return 1.0 + a * b + lo * lo * (3.0 * hi - lo) / 6.0;
}

// Dense KRR prediction for an explicit kernel, independent of the library.
template <class K>
std::vector<double> dense_krr(const Dataset& d, double lambda, const std::vector<double>& probes, K kern) {
  const int n = static_cast<int>(d.size());
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = kern(d.x[i], d.x[j]);
  G.diagonal().array() += lambda;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(d.y.data(), n);
  const Eigen::VectorXd c = G.ldlt().solve(y);
  std::vector<double> out;
  for (double x : probes) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += c(i) * kern(x, d.x[i]);
    out.push_back(acc);
  }
  return out;
}

}  // namespace

TEST_SUITE("regression") {

TEST_CASE("data generation") {
  const auto f0 = smooth_target();
  const auto clean = generate_data(f0, {200, 0.0, 1.0, 4, 1});
  for (std::size_t i = 0; i < clean.size(); ++i) REQUIRE(clean.y[i] == f0(clean.point(i)));
  const auto a = generate_data(f0, {300, 0.5, 1.0, 9, 2});
  const auto b = generate_data(f0, {300, 0.5, 1.0, 9, 2});
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  const auto big = generate_data(f0, {100000, 1.0, 1.0, 5, 1});
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < big.size(); ++i) {
    const double r = big.y[i] - f0(big.point(i));
    mean += r;
    sq += r * r;
  }
  mean /= big.size();
  const double var = sq / big.size() - mean * mean;
  CHECK(var >= 0.98);
  CHECK(var <= 1.02);
  CHECK_THROWS(generate_data(f0, {0, 0.1, 1.0, 1, 1}));
  CHECK_THROWS(generate_data(f0, {10, -0.1, 1.0, 1, 1}));
  CHECK_THROWS(generate_data(f0, {10, 0.1, 0.5, 1, 1}));
}

TEST_CASE("dataset csv round trip") {
  const auto a = generate_data(smooth_target(), {50, 0.3, 1.0, 2, 2});
  const std::string text = dataset_to_csv(a);
  CHECK(text.rfind("x_1,x_2,y\n", 0) == 0);
  const auto b = dataset_from_csv(text);
  CHECK(b.d == 2);
  CHECK(b.x == a.x);
  CHECK(b.y == a.y);
}

TEST_CASE("dictionary fit recovers functions in its span") {
  SpaceParams p{1.0, 1.0, 1.0, 2.0, 1, 3, false};
  Expansion e(3, 1);
  Rng rng(12);
  for (int k = 0; k <= 2; ++k)
    for (int j = -3; j < (1 << k); ++j) e.set({{k}, {j}}, rng.uniform() - 0.5);
  const Function f = [&](std::span<const double> x) { return e(x); };
  const long long N = 40;
  const auto budget = nterm_budget(p, N);
  REQUIRE(budget.K >= 2);
  const auto data = generate_data(f, {3 * N, 0.0, 1.0, 3, 1});
  const auto rep = fit_adaptive_dictionary(data, p, N, 50.0);
  CHECK(rep.residual <= 1e-8);
  CHECK(rep.dictionary_size <= N);
  CHECK(rep.jitter > 0.0);
}

TEST_CASE("clipping bound") {
  SpaceParams p{1.0, 1.0, 1.0, 2.0, 1, 3, false};
  const Function wild = [](std::span<const double> x) { return 25.0 * std::sin(40.0 * x[0]); };
  const auto data = generate_data(wild, {400, 3.0, 2.0, 6, 1});
  const auto rep = fit_adaptive_dictionary(data, p, 60, 2.0);
  CHECK(rep.clipped);
  for (int i = 0; i <= 20000; ++i) {
    const std::vector<double> x{-0.1 + 1.2 * i / 20000.0};
    REQUIRE(std::abs(rep.estimate(x)) <= 2.0);
  }
}

TEST_CASE("nested dictionaries never raise the training residual") {
  const auto data = random_design(500, 21, 0.3);
  std::vector<DyadicIndex> dict;
  double prev = kInf;
  for (int k = 0; k <= 5; ++k) {
    for (int j = -2; j < (1 << k); ++j) dict.push_back({{k}, {j}});
    const auto rep = fit_dictionary(data, 2, dict, 100.0);
    CHECK(rep.residual <= prev + 1e-12);
    prev = rep.residual;
  }
}

TEST_CASE("krr interpolates one point at lambda 0") {
  Dataset one;
  one.d = 1;
  one.x = {0.37};
  one.y = {1.25};
  for (Kernel k : {Kernel::gaussian, Kernel::spline}) {
    const auto rep = fit_krr(one, k, 0.0);
    CHECK(rep.estimate(std::vector<double>{0.37}) == doctest::Approx(1.25).epsilon(1e-12));
  }
  Dataset dup;
  dup.d = 1;
  dup.x = {0.2, 0.2};
  dup.y = {1.0, 2.0};
  CHECK_THROWS(fit_krr(dup, Kernel::spline, 0.0));
  CHECK_THROWS(fit_krr(dup, Kernel::gaussian, 0.0));
}

TEST_CASE("krr agrees with a dense oracle") {
  const auto data = random_design(150, 5);
  std::vector<double> probes;
  for (int i = 0; i <= 50; ++i) probes.push_back(i / 50.0);
  for (double lambda : {1e-3, 0.1, 10.0}) {
    const auto want = dense_krr(data, lambda, probes, spline_kernel_oracle);
    const auto rep = fit_krr(data, Kernel::spline, lambda);
    for (std::size_t i = 0; i < probes.size(); ++i)
      REQUIRE(rep.estimate(std::vector<double>{probes[i]}) == doctest::Approx(want[i]).epsilon(1e-7));
  }
  const double h = 0.1;
  const auto gk = [h](double a, double b) { return std::exp(-(a - b) * (a - b) / (2 * h * h)); };
  const auto want = dense_krr(data, 0.05, probes, gk);
  KrrOptions o;
  o.bandwidth = h;
  const auto rep = fit_krr(data, Kernel::gaussian, 0.05, o);
  for (std::size_t i = 0; i < probes.size(); ++i)
    REQUIRE(rep.estimate(std::vector<double>{probes[i]}) == doctest::Approx(want[i]).epsilon(1e-8));
}

TEST_CASE("krr is linear in the responses") {
  for (int n : {120, 700}) {  // 700 exercises the Nystrom path
    auto y1 = random_design(n, 8);
    auto y2 = y1;
    Rng rng(3);
    for (double& v : y2.y) v = rng.normal();
    auto sum = y1;
    for (std::size_t i = 0; i < sum.size(); ++i) sum.y[i] = y1.y[i] + y2.y[i];
    for (Kernel k : {Kernel::gaussian, Kernel::spline}) {
      const auto a = fit_krr(y1, k, 0.5), b = fit_krr(y2, k, 0.5), c = fit_krr(sum, k, 0.5);
      for (int i = 0; i <= 100; ++i) {
        const std::vector<double> x{i / 100.0};
        REQUIRE(std::abs(c.estimate(x) - a.estimate(x) - b.estimate(x)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("krr cross-validation is deterministic and picks from the grid") {
  const auto data = random_design(300, 13);
  KrrCvOptions o;
  o.lambdas = {0.01, 0.1, 1.0, 10.0};
  for (Kernel k : {Kernel::gaussian, Kernel::spline}) {
    const auto a = fit_krr_cv(data, k, o), b = fit_krr_cv(data, k, o);
    CHECK(a.lambda == b.lambda);
    CHECK(std::find(o.lambdas.begin(), o.lambdas.end(), a.lambda) != o.lambdas.end());
    CHECK(a.estimate(std::vector<double>{0.4}) == b.estimate(std::vector<double>{0.4}));
  }
}

TEST_CASE("empirical risk") {
  const auto f0 = smooth_target();
  CHECK(empirical_l2_risk(f0, f0, 1).risk <= 1e-14);
  const Function shifted = [&](std::span<const double> x) { return f0(x) + 0.3; };
  CHECK(std::abs(empirical_l2_risk(shifted, f0, 1).risk - 0.09) <= 1e-8);
  const Function other = [](std::span<const double> x) { return std::cos(3.0 * x[0] * x[1]); };
  const Function f2 = [](std::span<const double> x) { return x[0] * x[1]; };
  const auto r12 = empirical_l2_risk(other, f2, 2), r21 = empirical_l2_risk(f2, other, 2);
  CHECK(r12.risk >= 0.0);
  CHECK(r12.risk == r21.risk);
  // Independent Monte Carlo oracle with 10^6 samples.
  Rng rng(99);
  double mean = 0.0, sq = 0.0;
  const int M = 1000000;
  for (int t = 0; t < M; ++t) {
    const std::vector<double> x{rng.uniform(), rng.uniform()};
    const double e = other(x) - f2(x);
    mean += e * e;
    sq += e * e * e * e;
  }
  mean /= M;
  const double se = std::sqrt((sq / M - mean * mean) / M);
  CHECK(std::abs(r12.risk - mean) <= 3.0 * se);
  const auto mc = empirical_l2_risk(other, f2, 3);
  CHECK(mc.method == "monte_carlo");
  CHECK(mc.std_error > 0.0);
}

TEST_CASE("covering number bound") {
  CHECK(covering_number_bound(2, 3, 10, 1.0, 0.1) == doctest::Approx(40.0 * std::log(80.0)).epsilon(1e-12));
  CHECK(covering_number_bound(2, 3, 10, 1.0, 1.0) == doctest::Approx(40.0 * std::log(8.0)).epsilon(1e-12));
  CHECK(covering_number_bound(2, 3, 20, 1.0, 0.1) == 2.0 * covering_number_bound(2, 3, 10, 1.0, 0.1));
  for (long long L : {1, 2, 5, 9})
    for (double B : {0.5, 1.0, 7.0})
      CHECK(covering_number_bound_sharp(L, 17, 100, B, 0.01) <=
            covering_number_bound(L, 17, 100, B, 0.01) * (1 + 1e-12));
  CHECK_THROWS(covering_number_bound(2, 3, 10, 1.0, 0.0));
}

TEST_CASE("risk bound") {
  const double n = 1000, F = 2, eps = 0.5, delta = 0.01;
  const auto r = risk_bound(0.0, 0.0, n, F, eps, delta);
  CHECK(r.bracket == doctest::Approx(F * F * -std::log(delta) / (n * eps) + delta * F * F).epsilon(1e-12));
  CHECK(r.bound == doctest::Approx(2.25 * r.bracket).epsilon(1e-12));
  // Isolate the covering term: difference against a zero-cover baseline.
  const double t1 = risk_bound(0, 50, 1000, F, eps, delta).bracket - risk_bound(0, 0, 1000, F, eps, delta).bracket;
  const double t10 = risk_bound(0, 50, 10000, F, eps, delta).bracket - risk_bound(0, 0, 10000, F, eps, delta).bracket;
  CHECK(t10 == doctest::Approx(t1 / 10.0).epsilon(1e-12));
  // Order-level sweep at s = d = 1, n = 2^12: approx N^{-2}, cover N.
  const long long nn = 4096;
  double best = kInf;
  int best_n = 0;
  for (int N = 1; N <= 512; ++N) {
    const double v = risk_bound(std::pow(N, -2.0), N, nn, 1.0, 1.0, 1.0 / nn).bracket;
    if (v < best) best = v, best_n = N;
  }
  CHECK(best_n >= 8);
  CHECK(best_n <= 32);
  const double ref = std::pow(static_cast<double>(nn), -2.0 / 3.0);
  CHECK(best / ref <= 4.0);
  CHECK(best / ref >= 0.25);
}

TEST_CASE("rate references") {
  RateParams b{RateFamily::besov, 1.0, 1.0, 1.0, 2.0, 1};
  CHECK(rate_reference(b, 4096).value == doctest::Approx(0.00390625).epsilon(1e-12));
  RateParams lin{RateFamily::linear_lower, 1.0, 1.0, 1.0, 2.0, 1};
  CHECK(lin.v() == 1.0);
  CHECK(rate_reference(lin, 4096).value == doctest::Approx(0.015625).epsilon(1e-12));
  RateParams ms{RateFamily::mixed_second, 1.5, 2.0, 1.0, 2.0, 3};
  CHECK(ms.u() == 0.0);
  CHECK(rate_reference(ms, 1e6).exponent ==
        doctest::Approx(-3.0 / (3.0 + 1.0 + std::numbers::log2e)).epsilon(1e-12));
  RateParams mx{RateFamily::mixed, 1.0, 1.0, 4.0, 2.0, 3};
  CHECK(mx.u() == doctest::Approx(0.25));
  const auto v = rate_reference(mx, 1000.0);
  CHECK(v.log_power == doctest::Approx(2.0 * 2.0 * 1.25 / 3.0));
  CHECK(v.value == doctest::Approx(std::pow(1000.0, -2.0 / 3.0) * std::pow(std::log(1000.0), v.log_power)));
  RateParams al{RateFamily::approx_linear, 1.0, 1.0, 1.0, 2.0, 1};
  CHECK(rate_reference(al, 64).exponent == doctest::Approx(-0.5));
  lin.d = 2;
  CHECK_THROWS(rate_reference(lin, 100));
  RateParams bad{RateFamily::mixed_second, 0.5, 1.0, 100.0, 2.0, 2};
  CHECK_THROWS(rate_reference(bad, 100));
  CHECK(rate_family_from_name("linear_lower") == RateFamily::linear_lower);
}

}  // TEST_SUITE
