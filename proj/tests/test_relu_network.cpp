#include <doctest.h>

#include <cmath>
#include <vector>

#include "besov/relu_network.hpp"
#include "besov/rng.hpp"

using namespace besov;

namespace {

SparseNetwork clip_gadget() {
  return SparseNetwork({AffineLayer(1, 2, {{0, 0, 1.0}, {1, 0, 1.0}}, {0.0, -1.0}),
                        AffineLayer(2, 1, {{0, 0, 1.0}, {0, 1, -1.0}}, {0.0})});
}

// Random sparse network with signed outputs.
SparseNetwork random_net(Rng& rng, int in, int hidden, int out, int depth) {
  std::vector<AffineLayer> layers;
  int prev = in;
  for (int l = 0; l < depth; ++l) {
    const int next = l + 1 == depth ? out : hidden;
    std::vector<Triplet> w;
    for (int r = 0; r < next; ++r)
      for (int c = 0; c < prev; ++c)
        if (rng.uniform() < 0.6) w.push_back({r, c, rng.normal()});
    std::vector<double> b(next);
    for (double& v : b) v = 0.3 * rng.normal();
    layers.emplace_back(prev, next, std::move(w), std::move(b));
    prev = next;
  }
  return SparseNetwork(std::move(layers));
}

std::vector<double> random_point(Rng& rng, int n) {
  std::vector<double> x(n);
  for (double& v : x) v = 4.0 * rng.uniform() - 2.0;
  return x;
}

}  // namespace

TEST_SUITE("relu_network") {
  TEST_CASE("evaluate examples") {
    const SparseNetwork id = identity_network(2);
    const std::vector<double> x{1.0, -2.0};
    CHECK(id.evaluate(x) == x);
    const SparseNetwork id2({AffineLayer::identity(1), AffineLayer::identity(1)});
    CHECK(id2.evaluate(std::vector<double>{-3.0})[0] == 0.0);
    CHECK(clip_gadget().evaluate(std::vector<double>{0.4})[0] == doctest::Approx(0.4));
    CHECK_THROWS_AS(id.evaluate(std::vector<double>{1.0}), std::invalid_argument);
  }

  TEST_CASE("non-finite intermediates are reported") {
    const SparseNetwork big({AffineLayer(1, 1, {{0, 0, 1e300}}, {0.0}),
                             AffineLayer(1, 1, {{0, 0, 1e300}}, {0.0})});
    CHECK_THROWS_AS(big.evaluate(std::vector<double>{1.0}), std::domain_error);
  }

  TEST_CASE("layer validation") {
    CHECK_THROWS(AffineLayer(1, 1, {{0, 1, 1.0}}, {0.0}));
    CHECK_THROWS(AffineLayer(1, 1, {{0, 0, 1.0}, {0, 0, 2.0}}, {0.0}));
    CHECK_THROWS(AffineLayer(1, 1, {{0, 0, NAN}}, {0.0}));
    CHECK_THROWS(AffineLayer(1, 2, {}, {0.0}));
    CHECK_THROWS(SparseNetwork({AffineLayer::identity(2), AffineLayer::identity(3)}));
  }

  TEST_CASE("size report examples") {
    const SparseNetwork dense({AffineLayer(2, 2, {{0, 0, 1}, {0, 1, 1}, {1, 0, 1}, {1, 1, 1}}, {0, 0})});
    const SizeReport r = dense.size_report();
    CHECK(r.L == 1);
    CHECK(r.W == 2);
    CHECK(r.S == 4);
    CHECK(r.B == 1.0);

    // Clip gadget: 2 + 1 (the bias −1) + 2 nonzeros.
    const SizeReport c = clip_gadget().size_report();
    CHECK(c.L == 2);
    CHECK(c.W == 2);
    CHECK(c.S == 5);
    CHECK(c.B == 1.0);

    const SizeReport s = scale_output(dense, 10.0).size_report();
    CHECK(s.B == 10.0);
    CHECK(s.S == 4);
    CHECK(r.within(SizeReport{1, 2, 4, 1.0}));
    CHECK_FALSE(r.within(SizeReport{1, 1, 4, 1.0}));
  }

  TEST_CASE("serial combine") {
    Rng rng(4);
    const SparseNetwork f = random_net(rng, 3, 5, 2, 3);
    const SparseNetwork fid = combine_serial(f, identity_network(2));
    for (int t = 0; t < 100; ++t) {
      const auto x = random_point(rng, 3);
      const auto a = f.evaluate(x);
      const auto b = fid.evaluate(x);
      CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-14));
      CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-14));
    }
    const SparseNetwork cc = combine_serial(clip_gadget(), clip_gadget(), Junction::nonnegative);
    for (int i = 0; i <= 300; ++i) {
      const std::vector<double> x{-1.0 + 3.0 * i / 300.0};
      CHECK(cc.evaluate(x)[0] == clip_gadget().evaluate(x)[0]);
    }
    const SizeReport rc = cc.size_report();
    CHECK(rc.L == 4);
    CHECK(rc.S <= 10);
    CHECK_THROWS(combine_serial(f, identity_network(3)));
  }

  TEST_CASE("serial associativity") {
    Rng rng(8);
    const SparseNetwork a = random_net(rng, 2, 4, 3, 2);
    const SparseNetwork b = random_net(rng, 3, 4, 3, 2);
    const SparseNetwork c = random_net(rng, 3, 4, 1, 2);
    const SparseNetwork left = combine_serial(combine_serial(a, b), c);
    const SparseNetwork right = combine_serial(a, combine_serial(b, c));
    for (int t = 0; t < 100; ++t) {
      const auto x = random_point(rng, 2);
      CHECK(left.evaluate(x)[0] == right.evaluate(x)[0]);
      const double direct = c.evaluate(b.evaluate(a.evaluate(x)))[0];
      CHECK(left.evaluate(x)[0] == doctest::Approx(direct).epsilon(1e-12));
    }
  }

  TEST_CASE("merge_affine composes without activation") {
    Rng rng(15);
    const SparseNetwork a = random_net(rng, 2, 4, 3, 2);
    const SparseNetwork b = random_net(rng, 3, 4, 1, 2);
    const SparseNetwork m = merge_affine(a, b);
    CHECK(m.depth() == 3);
    for (int t = 0; t < 100; ++t) {
      const auto x = random_point(rng, 2);
      const auto mid = a.evaluate(x);
      // b applied to the raw (un-rectified) output of a.
      const double expect = b.evaluate(mid)[0];
      CHECK(m.evaluate(x)[0] == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("parallel combine with padding") {
    Rng rng(6);
    const SparseNetwork f = random_net(rng, 2, 4, 1, 4);
    const SparseNetwork g = random_net(rng, 3, 5, 2, 2);
    const SparseNetwork h = combine_parallel(f, g);
    CHECK(h.depth() == 4);
    CHECK(h.input_dim() == 5);
    CHECK(h.output_dim() == 3);
    for (int t = 0; t < 100; ++t) {
      const auto xf = random_point(rng, 2);
      const auto xg = random_point(rng, 3);
      std::vector<double> x(xf);
      x.insert(x.end(), xg.begin(), xg.end());
      const auto out = h.evaluate(x);
      CHECK(out[0] == f.evaluate(xf)[0]);
      const auto og = g.evaluate(xg);
      CHECK(out[1] == og[0]);
      CHECK(out[2] == og[1]);
    }
    const SizeReport rh = h.size_report();
    const SizeReport rf = f.size_report(), rg = g.size_report();
    // Padding g by two layers: sign split of its last layer plus two
    // identity blocks of width 2·2.
    CHECK(rh.S <= rf.S + rg.S + rg.S + 4 + 4);
  }

  TEST_CASE("share_inputs and pad_to_depth") {
    Rng rng(2);
    const SparseNetwork f = random_net(rng, 2, 3, 1, 2);
    const SparseNetwork g = random_net(rng, 2, 3, 1, 3);
    const SparseNetwork shared = share_inputs(combine_parallel(f, g), 2);
    for (int t = 0; t < 50; ++t) {
      const auto x = random_point(rng, 2);
      const auto out = shared.evaluate(x);
      CHECK(out[0] == doctest::Approx(f.evaluate(x)[0]).epsilon(1e-14));
      CHECK(out[1] == doctest::Approx(g.evaluate(x)[0]).epsilon(1e-14));
    }
    const SparseNetwork p = pad_to_depth(clip_gadget(), 5, true);
    CHECK(p.depth() == 5);
    CHECK(p.evaluate(std::vector<double>{0.7})[0] == doctest::Approx(0.7));
  }

  TEST_CASE("Lipschitz bound on random probes") {
    Rng rng(12);
    for (int trial = 0; trial < 5; ++trial) {
      const SparseNetwork f = random_net(rng, 3, 4, 2, 3);
      const double bound = std::pow(f.max_row_sum(), f.depth());
      for (int t = 0; t < 100; ++t) {
        const auto x = random_point(rng, 3);
        auto y = x;
        for (double& v : y) v += 0.01 * rng.normal();
        double dx = 0.0, df = 0.0;
        for (int i = 0; i < 3; ++i) dx = std::max(dx, std::abs(x[i] - y[i]));
        const auto fx = f.evaluate(x), fy = f.evaluate(y);
        for (int i = 0; i < 2; ++i) df = std::max(df, std::abs(fx[i] - fy[i]));
        CHECK(df <= bound * dx * (1 + 1e-12) + 1e-15);
      }
    }
  }

  TEST_CASE("JSON round trip is bit exact") {
    Rng rng(30);
    const SparseNetwork f = random_net(rng, 3, 6, 2, 4);
    const SparseNetwork g = network_from_json(nlohmann::json::parse(network_to_json(f).dump()));
    for (int t = 0; t < 100; ++t) {
      const auto x = random_point(rng, 3);
      CHECK(f.evaluate(x) == g.evaluate(x));
    }
  }
}
