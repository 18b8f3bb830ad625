#include <doctest.h>

#include <cmath>
#include <vector>

#include "besov/approx.hpp"
#include "besov/compiler.hpp"
#include "besov/rng.hpp"

using namespace besov;

TEST_SUITE("compiler") {

TEST_CASE("clip is exact") {
  const auto net = build_clip(1.0);
  CHECK(net.evaluate_scalar(std::vector<double>{-0.5}) == 0.0);
  CHECK(net.evaluate_scalar(std::vector<double>{0.4}) == 0.4);
  CHECK(net.evaluate_scalar(std::vector<double>{2.0}) == 1.0);
  const auto n3 = build_clip(3.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = -5.0 + 10.0 * i / 9999.0;
    REQUIRE(n3.evaluate_scalar(std::vector<double>{x}) == std::min(3.0, std::max(x, 0.0)));
  }
  CHECK_THROWS_AS(build_clip(0.0), std::invalid_argument);
}

TEST_CASE("square gadget error window") {
  for (int s = 1; s <= 6; ++s) {
    const auto net = build_square(s);
    const double bound = std::ldexp(1.0, -2 * s - 2);
    CHECK(net.evaluate_scalar(std::vector<double>{0.0}) == 0.0);
    for (int i = 0; i <= 2000; ++i) {
      const double t = i / 2000.0;
      const double err = net.evaluate_scalar(std::vector<double>{t}) - t * t;
      REQUIRE(err >= -1e-12);
      REQUIRE(err <= bound + 1e-12);
    }
  }
}

TEST_CASE("mult examples and verification grid") {
  const auto m2 = build_mult(2, 0.01);
  CHECK(m2.evaluate_scalar(std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(std::abs(m2.evaluate_scalar(std::vector<double>{0.3, 0.5}) - 0.15) <= 0.01);
  CHECK(std::abs(m2.evaluate_scalar(std::vector<double>{1.0, 1.0}) - 1.0) <= 0.01);
  for (int D : {2, 3}) {
    for (double eps : {1e-1, 1e-2, 1e-4}) {
      const auto net = build_mult(D, eps);
      CHECK(net.evaluate_scalar(std::vector<double>(D, 0.0)) == 0.0);
      CHECK(net.size_report().L <= mult_depth_bound(D, eps));
      std::vector<int> idx(D, 0);
      std::vector<double> x(D);
      double worst = 0.0;
      while (true) {
        double prod = 1.0;
        for (int i = 0; i < D; ++i) prod *= x[i] = idx[i] / 40.0;
        worst = std::max(worst, std::abs(net.evaluate_scalar(x) - prod));
        int p = D - 1;
        while (p >= 0 && ++idx[p] == 41) idx[p--] = 0;
        if (p < 0) break;
      }
      CHECK(worst <= eps);
    }
  }
  // D > 3 with random probes; a zero input kills the product exactly.
  const auto m5 = build_mult(5, 1e-3);
  Rng rng(3);
  std::vector<double> x(5);
  for (int t = 0; t < 20000; ++t) {
    double prod = 1.0;
    for (double& v : x) prod *= v = rng.uniform();
    REQUIRE(std::abs(m5.evaluate_scalar(x) - prod) <= 1e-3);
    x[rng.below(5)] = 0.0;
    REQUIRE(m5.evaluate_scalar(x) == 0.0);
  }
  CHECK_THROWS(build_mult(1, 0.1));
  CHECK_THROWS(build_mult(2, 1e-13));
  CHECK_THROWS(build_mult(2, 1.0));
}

TEST_CASE("unit size bounds by substitution") {
  const auto b12 = unit_size_bound(1, 2, 0.1);
  CHECK(b12.W == 50);
  CHECK(b12.B == doctest::Approx(18.0));
  CHECK(unit_size_bound(2, 2, 0.1).W == 6 * 2 * 2 * 4 + 4);
  // (d, m) = (1, 1): ⌈log₂ 1⌉ = 0 collapses the depth term.
  CHECK(unit_size_bound(1, 1, 0.01).L == 3);
  const double c = 1.0 / (1.0 + 2.0 * 2.0 * std::exp(1.0) * std::pow(2.0 * std::exp(1.0), 2) /
                                    std::sqrt(2.0));
  CHECK(compiler_constant(2, 2) == doctest::Approx(c).epsilon(1e-14));
  const double inner = std::log2(9.0 / (0.1 * c)) + 5.0;
  const long long L0 = 3 + 2 * static_cast<long long>(std::ceil(inner));
  CHECK(unit_size_bound(2, 2, 0.1).L == L0);
  CHECK(unit_size_bound(2, 2, 0.1).S == doctest::Approx(static_cast<double>(L0) * 100 * 100));
}

TEST_CASE("bspline unit meets error and size bounds") {
  for (auto [d, m] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {1, 3}, {2, 2}}) {
    for (double eps : {1e-1, 1e-2}) {
      CAPTURE(d);
      CAPTURE(m);
      CAPTURE(eps);
      const auto unit = build_bspline_unit(d, m, eps);
      CHECK(unit.size.within(unit.bound));
      const auto cert = certify_unit(unit.net, d, m, eps);
      CHECK(cert.passed);
      CHECK(cert.max_error <= eps);
      CHECK(cert.method == "grid");
    }
  }
  const auto u11 = build_bspline_unit(1, 1, 0.1);
  CHECK(u11.net.evaluate_scalar(std::vector<double>{-0.5}) == 0.0);
}

TEST_CASE("unit vanishes outside its support") {
  Rng rng(11);
  for (auto [d, m] : std::vector<std::pair<int, int>>{{1, 2}, {2, 2}, {3, 1}}) {
    const auto unit = build_bspline_unit(d, m, 0.01);
    std::vector<double> x(d);
    for (int t = 0; t < 5000; ++t) {
      for (double& v : x) v = -3.0 + (m + 7.0) * rng.uniform();
      bool outside = false;
      for (double v : x) outside = outside || v <= 0.0 || v >= m + 1.0;
      if (outside) REQUIRE(unit.net.evaluate_scalar(x) == 0.0);
    }
  }
}

TEST_CASE("depth is monotone in eps") {
  for (auto [d, m] : std::vector<std::pair<int, int>>{{1, 2}, {2, 2}, {1, 3}}) {
    long long prev = 0;
    for (double eps : {0.3, 0.1, 0.03, 0.01, 1e-3, 1e-4, 1e-6}) {
      const long long L = build_bspline_unit(d, m, eps).size.L;
      CHECK(L >= prev);
      prev = L;
    }
  }
}

TEST_CASE("compile_expansion examples") {
  const Expansion empty(1, 1);
  const auto z = compile_expansion(empty, 0.01);
  CHECK(z.evaluate_scalar(std::vector<double>{0.3}) == 0.0);

  Expansion one(1, 1);
  one.set({{0}, {0}}, 1.0);
  const auto f1 = compile_expansion(one, 0.01);
  for (int i = 0; i <= 1000; ++i) {
    const double x = -1.0 + 4.0 * i / 1000.0;
    REQUIRE(std::abs(f1.evaluate_scalar(std::vector<double>{x}) - eval_cardinal(1, x)) <= 0.01);
  }

  Expansion two(1, 1);
  two.set({{0}, {0}}, 2.0);
  two.set({{0}, {1}}, -1.0);
  const auto f2 = compile_expansion(two, 0.01);
  for (int i = 0; i <= 1000; ++i) {
    const double x = -1.0 + 5.0 * i / 1000.0;
    const double ref = 2.0 * eval_cardinal(1, x) - eval_cardinal(1, x - 1.0);
    REQUIRE(std::abs(f2.evaluate_scalar(std::vector<double>{x}) - ref) <= 0.03);
  }
}

TEST_CASE("compiled random expansion: error bound and exterior zeros") {
  SpaceParams params{1.2, 2.0, 2.0, 2.0, 2, 2, false};
  const Expansion e = sample_besov_function(params, 1.0, 2, 5);
  const double eps = 1e-3;
  const auto net = compile_expansion(e, eps);
  double l1 = 0.0;
  e.for_each([&](const auto&, const auto&, double a) { l1 += std::abs(a); });
  Rng rng(8);
  std::vector<double> x(2);
  for (int t = 0; t < 3000; ++t) {
    for (double& v : x) v = -0.5 + 2.0 * rng.uniform();
    const double got = net.evaluate_scalar(x);
    REQUIRE(std::abs(got - e(x)) <= eps * l1 + 1e-12);
    // Exterior of every dilated support: exact zero.
    bool inside_any = false;
    e.for_each([&](const auto& k, const auto& j, double) {
      bool in = true;
      for (int i = 0; i < 2; ++i) {
        const double lo = std::ldexp(j[i], -k[i]), hi = std::ldexp(j[i] + 3.0, -k[i]);
        in = in && x[i] > lo && x[i] < hi;
      }
      inside_any = inside_any || in;
    });
    if (!inside_any) REQUIRE(got == 0.0);
  }
}

TEST_CASE("architecture budget examples") {
  SpaceParams iso{1.0, 2.0, 2.0, 2.0, 1, 2, false};
  const auto b = architecture_budget(iso, 16);
  CHECK(b.eps_unit == doctest::Approx(1.0 / (16.0 * std::log(16.0))).epsilon(1e-12));
  CHECK(b.eps_unit == doctest::Approx(0.02254).epsilon(1e-3));
  CHECK(b.W == 16 * 50);
  CHECK(b.S == doctest::Approx(network_sparsity(b.L, 50, 16)));
  CHECK(network_sparsity(5, 50, 10) == 100010.0);

  SpaceParams mixed{1.0, 1.0, 1.0, 2.0, 2, 2, true};
  CHECK(mixed_kstar(mixed, 4) == 12);
  SpaceParams mixed0{1.0, 2.0, 2.0, 2.0, 2, 2, true};
  CHECK(mixed_kstar(mixed0, 4) == 4);
  CHECK(mixed_unit_count(mixed0, 3) == doctest::Approx(3.0 * 8.0 * dkd(3, 2)));
  const auto bm = architecture_budget(mixed, 100000);
  CHECK(mixed_unit_count(mixed, bm.K) <= 100000.0);
  CHECK(mixed_unit_count(mixed, bm.K + 1) > 100000.0);
  CHECK(bm.K_star == mixed_kstar(mixed, bm.K));
  CHECK_THROWS_AS(architecture_budget(mixed, 2), std::invalid_argument);
}

TEST_CASE("certificate json") {
  const auto unit = build_bspline_unit(1, 2, 0.1);
  const auto cert = certify_unit(unit.net, 1, 2, 0.1);
  const auto j = certificate_to_json(cert, unit.constants, unit.bound);
  CHECK(j.at("method") == "grid");
  CHECK(j.at("grid") == 201);
  CHECK(j.contains("c_dm"));
  CHECK(j.at("budget").at("W") == 50);
}

}  // TEST_SUITE
