#include "besov/compiler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "besov/approx.hpp"
#include "besov/rng.hpp"

namespace besov {

namespace {

constexpr double kMinEps = 1e-12;

int ceil_log2(int v) {
  int out = 0;
  while ((1 << out) < v) ++out;
  return out;
}

double binom(int n, int k) {
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

void check_eps(double eps, const char* who) {
  if (!(eps >= kMinEps) || !(eps < 1.0)) {
    throw std::invalid_argument(std::string(who) + ": eps must lie in [1e-12, 1)");
  }
}

SparseNetwork single(AffineLayer layer) { return SparseNetwork({std::move(layer)}); }

// Tent-iteration layers shared by any number of interleaved branches.
// State columns are component-major: [A_0..A_{n-1}, a_0.., b_0..].
AffineLayer sawtooth_update(int branches, int s) {
  const int n = branches;
  const double scale = std::ldexp(1.0, -2 * s);
  std::vector<Triplet> w;
  std::vector<double> bias(3 * n, 0.0);
  for (int i = 0; i < n; ++i) {
    w.push_back({i, i, 1.0});
    w.push_back({i, n + i, -2.0 * scale});
    w.push_back({i, 2 * n + i, 4.0 * scale});
    w.push_back({n + i, n + i, 2.0});
    w.push_back({n + i, 2 * n + i, -4.0});
    w.push_back({2 * n + i, n + i, 2.0});
    w.push_back({2 * n + i, 2 * n + i, -4.0});
    bias[2 * n + i] = -0.5;
  }
  return AffineLayer(3 * n, 3 * n, std::move(w), std::move(bias));
}

// Final update: returns Σ_i sign_i·A_i' where A' = A − g_S/4^S.
AffineLayer sawtooth_final(const std::vector<double>& signs, int s) {
  const int n = static_cast<int>(signs.size());
  const double scale = std::ldexp(1.0, -2 * s);
  std::vector<Triplet> w;
  for (int i = 0; i < n; ++i) {
    w.push_back({0, i, signs[i]});
    w.push_back({0, n + i, -2.0 * scale * signs[i]});
    w.push_back({0, 2 * n + i, 4.0 * scale * signs[i]});
  }
  return AffineLayer(3 * n, 1, std::move(w), {0.0});
}

// x ↦ 1 − η(1 − x): with a preceding η this is min(max(x, 0), 1).
std::vector<AffineLayer> clip01_tail() {
  return {AffineLayer(1, 1, {{0, 0, -1.0}}, {1.0}), AffineLayer(1, 1, {{0, 0, -1.0}}, {1.0})};
}

// 1 → n copies.
SparseNetwork duplicate(int n) {
  std::vector<Triplet> w;
  for (int i = 0; i < n; ++i) w.push_back({i, 0, 1.0});
  return single(AffineLayer(1, n, std::move(w), std::vector<double>(n, 0.0)));
}

// η(1 − η(x − 1) − η(1 − x)) = 𝒩_1(x), exactly.
SparseNetwork hat_unit() {
  return SparseNetwork({AffineLayer(1, 2, {{0, 0, 1.0}, {1, 0, -1.0}}, {-1.0, 1.0}),
                        AffineLayer(2, 1, {{0, 0, -1.0}, {0, 1, -1.0}}, {1.0}),
                        AffineLayer::identity(1)});
}

// 𝒩_m on ℝ for m ≥ 2, accurate to eps, exactly 0 outside [0, m+1], values
// in [0, 1].
SparseNetwork coordinate_unit(int m, double eps, int* square_depth) {
  const double c = 1.0 / (m + 1);
  double factorial = 1.0;
  for (int i = 2; i <= m; ++i) factorial *= i;
  std::vector<double> coef(m + 1);
  double coef_l1 = 0.0;
  for (int j = 0; j <= m; ++j) {
    coef[j] = ((j % 2 == 0) ? 1.0 : -1.0) * binom(m + 1, j) * std::pow(m + 1.0, m) / factorial;
    coef_l1 += std::abs(coef[j]);
  }
  // |f − 𝒩_m| ≤ Σ|coef|·err_pow and the constant correction doubles it.
  const double eps_pow = eps / (2.0 * coef_l1);
  if (eps_pow < kMinEps) throw std::invalid_argument("build_bspline_unit: eps too small");
  *square_depth = mult_square_depth(m, eps_pow);

  // a_j = η(x − j); v_j = η(M_j − a_j), ρ = η(1 − a_0).
  std::vector<Triplet> w1, w2;
  std::vector<double> b1(m + 1), b2(m + 2);
  for (int j = 0; j <= m; ++j) {
    w1.push_back({j, 0, 1.0});
    b1[j] = -j;
    w2.push_back({j, j, -1.0});
    b2[j] = m + 1 - j;
  }
  w2.push_back({m + 1, 0, -1.0});
  b2[m + 1] = 1.0;
  const SparseNetwork front({AffineLayer(1, m + 1, std::move(w1), std::move(b1)),
                             AffineLayer(m + 1, m + 2, std::move(w2), std::move(b2))});

  // t_j = c·M_j − c·v_j = φ_{(0,M_j)}(x − j)/(m+1); r = 1 − ρ = min(η(x), 1).
  std::vector<Triplet> w3;
  std::vector<double> b3(m + 2);
  for (int j = 0; j <= m; ++j) {
    w3.push_back({j, j, -c});
    b3[j] = c * (m + 1 - j);
  }
  w3.push_back({m + 1, m + 1, -1.0});
  b3[m + 1] = 1.0;
  const SparseNetwork affine3 = single(AffineLayer(m + 2, m + 2, std::move(w3), std::move(b3)));

  const SparseNetwork power = merge_affine(duplicate(m), build_mult(m, eps_pow));
  std::vector<SparseNetwork> blocks(m + 1, power);
  blocks.push_back(identity_network(1));
  const SparseNetwork powers = combine_parallel(blocks, true);
  const SparseNetwork body = combine_serial(front, merge_affine(affine3, powers), Junction::nonnegative);

  auto with_correction = [&](double r_weight) {
    std::vector<Triplet> w;
    for (int j = 0; j <= m; ++j) w.push_back({0, j, coef[j]});
    w.push_back({0, m + 1, r_weight});
    return merge_affine(body, single(AffineLayer(m + 2, 1, std::move(w), {0.0})));
  };
  // The saturated value for x ≥ m+1 is a constant δ' (≈ 0). r is the last
  // column of the summing row, so the partial sum before it equals δ' bit for
  // bit and subtracting δ'·1 cancels exactly.
  const double probe = m + 2.0;
  const double delta = with_correction(0.0).evaluate_scalar(std::span<const double>(&probe, 1));
  const SparseNetwork pre = with_correction(-delta);
  std::vector<AffineLayer> tail = clip01_tail();
  return combine_serial(pre, SparseNetwork(std::move(tail)), Junction::nonnegative);
}

}  // namespace

double compiler_constant(int d, int m) {
  const double e = std::numbers::e;
  return 1.0 / (1.0 + 2.0 * d * e * std::pow(2.0 * e, m) / std::sqrt(static_cast<double>(m)));
}

SizeReport unit_size_bound(int d, int m, double eps) {
  if (d < 1 || m < 1) throw std::invalid_argument("unit_size_bound: need d >= 1, m >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("unit_size_bound: eps must be positive");
  const int dm = std::max(d, m);
  const double inner =
      dm * std::log2(3.0) - std::log2(eps) - std::log2(compiler_constant(d, m)) + 5.0;
  SizeReport r;
  r.L = 3 + 2 * static_cast<int>(std::ceil(inner)) * ceil_log2(dm);
  r.W = 6 * d * m * (m + 2) + 2 * d;
  r.S = static_cast<long long>(r.L) * r.W * r.W;
  r.B = 2.0 * std::pow(m + 1.0, m);
  return r;
}

int mult_depth_bound(int D, double eps) {
  return static_cast<int>(std::ceil(D * std::log2(3.0) - std::log2(eps) + 5.0)) * ceil_log2(D);
}

SparseNetwork build_clip(double M) {
  if (!(M > 0.0) || !std::isfinite(M)) throw std::invalid_argument("build_clip: M must be > 0");
  return SparseNetwork({AffineLayer(1, 2, {{0, 0, 1.0}, {1, 0, 1.0}}, {0.0, -M}),
                        AffineLayer(2, 1, {{0, 0, 1.0}, {0, 1, -1.0}}, {0.0})});
}

SparseNetwork build_square(int depth) {
  if (depth < 0) throw std::invalid_argument("build_square: depth must be >= 0");
  if (depth == 0) return identity_network(1);
  std::vector<AffineLayer> layers;
  layers.emplace_back(1, 3, std::vector<Triplet>{{0, 0, 1.0}, {1, 0, 1.0}, {2, 0, 1.0}},
                      std::vector<double>{0.0, 0.0, -0.5});
  for (int s = 1; s < depth; ++s) layers.push_back(sawtooth_update(1, s));
  layers.push_back(sawtooth_final({1.0}, depth));
  return SparseNetwork(std::move(layers));
}

SparseNetwork build_pair_product(int depth) {
  if (depth < 1) throw std::invalid_argument("build_pair_product: depth must be >= 1");
  std::vector<AffineLayer> layers;
  // σ = x + y, p = x − y, q = y − x
  layers.emplace_back(2, 3,
                      std::vector<Triplet>{{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, -1.0},
                                           {2, 0, -1.0}, {2, 1, 1.0}},
                      std::vector<double>(3, 0.0));
  // Squaring inputs (x+y)/2 = σ/2 and |x−y|/2 = (η(p) + η(q))/2, interleaved
  // as [A_s, A_d, a_s, a_d, b_s, b_d] so that equal branches cancel exactly.
  std::vector<Triplet> w;
  for (int comp = 0; comp < 3; ++comp) {
    w.push_back({2 * comp, 0, 0.5});
    w.push_back({2 * comp + 1, 1, 0.5});
    w.push_back({2 * comp + 1, 2, 0.5});
  }
  layers.emplace_back(3, 6, std::move(w), std::vector<double>{0.0, 0.0, 0.0, 0.0, -0.5, -0.5});
  for (int s = 1; s < depth; ++s) layers.push_back(sawtooth_update(2, s));
  layers.push_back(sawtooth_final({1.0, -1.0}, depth));
  for (auto& l : clip01_tail()) layers.push_back(std::move(l));
  return SparseNetwork(std::move(layers));
}

int mult_square_depth(int D, double eps) {
  if (D < 2) throw std::invalid_argument("build_mult: D must be >= 2");
  check_eps(eps, "build_mult");
  int s = 1;
  while ((D - 1) * std::ldexp(1.0, -2 * s - 2) > eps) ++s;
  return s;
}

SparseNetwork build_mult(int D, double eps) {
  const int depth = mult_square_depth(D, eps);
  const SparseNetwork pair = build_pair_product(depth);
  SparseNetwork out;
  bool first = true;
  for (int width = D; width > 1; width = (width + 1) / 2) {
    std::vector<SparseNetwork> blocks(width / 2, pair);
    if (width % 2 == 1) blocks.push_back(identity_network(1));
    SparseNetwork level = combine_parallel(blocks, true);
    out = first ? std::move(level) : combine_serial(out, level, Junction::nonnegative);
    first = false;
  }
  return out;
}

UnitResult build_bspline_unit(int d, int m, double eps) {
  if (d < 1) throw std::invalid_argument("build_bspline_unit: d must be >= 1");
  if (m < 1 || m > 12) throw std::invalid_argument("build_bspline_unit: m must lie in [1, 12]");
  check_eps(eps, "build_bspline_unit");
  UnitResult out;
  out.constants.c_dm = compiler_constant(d, m);
  out.constants.eps_unit = eps;
  const double eps_coord = d == 1 ? eps : eps / (2.0 * d);
  int depth = 0;
  const SparseNetwork g = m == 1 ? hat_unit() : coordinate_unit(m, eps_coord, &depth);
  if (d == 1) {
    out.net = g;
  } else {
    const double eps_prod = eps / 2.0;
    depth = std::max(depth, mult_square_depth(d, eps_prod));
    out.net = combine_serial(combine_parallel(std::vector<SparseNetwork>(d, g), true),
                             build_mult(d, eps_prod), Junction::nonnegative);
  }
  out.constants.square_depth = depth;
  out.size = out.net.size_report();
  out.bound = unit_size_bound(d, m, eps);
  return out;
}

Certificate certify_unit(const SparseNetwork& net, int d, int m, double eps) {
  Certificate cert;
  cert.eps = eps;
  const DyadicIndex origin{std::vector<int>(d, 0), std::vector<int>(d, 0)};
  const double lo = -1.0, hi = m + 2.0;
  std::vector<double> x(d);
  auto probe = [&] {
    const double err = std::abs(net.evaluate_scalar(x) - eval_tensor(origin, m, x));
    cert.max_error = std::max(cert.max_error, err);
    ++cert.points;
  };
  if (d <= 2) {
    cert.method = "grid";
    cert.grid = 201;
    std::vector<int> idx(d, 0);
    while (true) {
      for (int i = 0; i < d; ++i) x[i] = lo + (hi - lo) * idx[i] / (cert.grid - 1);
      probe();
      int pos = d - 1;
      while (pos >= 0 && ++idx[pos] == cert.grid) idx[pos--] = 0;
      if (pos < 0) break;
    }
  } else {
    cert.method = "monte_carlo";
    Rng rng(0x5eed, static_cast<std::uint64_t>(d * 100 + m));
    for (int t = 0; t < 100000; ++t) {
      for (double& v : x) v = lo + (hi - lo) * rng.uniform();
      probe();
    }
  }
  cert.passed = cert.max_error <= eps;
  return cert;
}

SparseNetwork compile_expansion(const Expansion& e, double eps_unit) {
  const int d = e.dim();
  if (e.empty()) return zero_network(d);
  const SparseNetwork base = build_bspline_unit(d, e.order(), eps_unit).net;
  const AffineLayer& first = base.layers().front();
  const auto first_w = first.triplets();

  std::vector<SparseNetwork> units;
  std::vector<Triplet> sum_w;
  units.reserve(e.size());
  e.for_each([&](const Expansion::Level& k, const std::vector<int>& j, double a) {
    // Fold x ↦ 2^k x − j into the first layer; every row reads one coordinate.
    std::vector<Triplet> w = first_w;
    std::vector<double> b = first.bias();
    for (Triplet& t : w) {
      b[t.row] += t.value * -static_cast<double>(j[t.col]);
      t.value = std::ldexp(t.value, k[t.col]);
    }
    std::vector<AffineLayer> layers(base.layers());
    layers.front() = AffineLayer(first.in_dim(), first.out_dim(), std::move(w), std::move(b));
    sum_w.push_back({0, static_cast<int>(units.size()), a});
    units.emplace_back(std::move(layers));
  });
  const int n = static_cast<int>(units.size());
  const SparseNetwork stack = share_inputs(combine_parallel(units, true), d);
  return combine_serial(stack, single(AffineLayer(n, 1, std::move(sum_w), {0.0})),
                        Junction::nonnegative);
}

nlohmann::json certificate_to_json(const Certificate& c, const CompilerConstants& k,
                                   const SizeReport& budget) {
  return {{"eps_unit", k.eps_unit},
          {"grid", c.grid},
          {"points", c.points},
          {"method", c.method},
          {"max_error", c.max_error},
          {"passed", c.passed},
          {"c_dm", k.c_dm},
          {"square_depth", k.square_depth},
          {"budget", size_report_to_json(budget)}};
}

int mixed_kstar(const SpaceParams& params, int K) {
  const double dl = params.delta();
  return static_cast<int>(std::ceil(K * (1.0 + 2.0 * dl / (params.s - dl)) - 1e-12));
}

double mixed_unit_count(const SpaceParams& params, int K) {
  const double nu = params.nu();
  const double tail = is_inf(nu) ? 1.0 : 1.0 / (1.0 - std::exp2(-nu));
  return (2.0 + tail) * std::ldexp(1.0, K) * dkd(mixed_kstar(params, K), params.d);
}

double network_sparsity(long long L, long long W0, long long N) {
  return static_cast<double>(L - 1) * static_cast<double>(W0) * static_cast<double>(W0) *
             static_cast<double>(N) +
         static_cast<double>(N);
}

ArchitectureBudget architecture_budget(const SpaceParams& params, long long N) {
  params.validate();
  const int d = params.d, m = params.m;
  ArchitectureBudget out;
  out.N = N;
  out.W0 = 6 * d * m * (m + 2) + 2 * d;
  const double inv_nu = params.inv_nu();
  const double ip = reciprocal(params.p);
  if (!params.mixed) {
    if (N < 2) throw std::invalid_argument("architecture_budget: N must be >= 2");
    const double gap = positive_part(d * ip - params.s);
    const double exponent = -params.s / d - (inv_nu + 1.0 / d) * gap;
    out.eps_unit = std::pow(static_cast<double>(N), exponent) / std::log(static_cast<double>(N));
    out.L = unit_size_bound(d, m, out.eps_unit).L;
    out.B = std::pow(static_cast<double>(N), (inv_nu + 1.0 / d) * std::max(1.0, gap));
  } else {
    int K = 0;
    while (mixed_unit_count(params, K + 1) <= static_cast<double>(N)) {
      ++K;
      if (K > 60) break;
    }
    if (K < 1) throw std::invalid_argument("architecture_budget: N below the K = 1 unit count");
    out.K = K;
    out.K_star = mixed_kstar(params, K);
    const double gap = positive_part(ip - params.s);
    const double rate = params.s + gap + 1.0;
    const double log_term = std::log(std::pow(std::numbers::e * (m + 1), d) * (1.0 + out.K_star));
    out.eps_unit = std::exp(-out.K_star * rate - log_term);
    const int dm = std::max(d, m);
    const double inner = dm * std::log2(3.0) - std::log2(compiler_constant(d, m)) + 5.0 +
                         rate * out.K_star + log_term;
    out.L = 3 + 2 * static_cast<long long>(std::ceil(inner)) * ceil_log2(dm);
    out.B = std::pow(static_cast<double>(N), (inv_nu + 1.0) * std::max(1.0, gap));
  }
  out.W = N * out.W0;
  out.S = network_sparsity(out.L, out.W0, N);
  return out;
}

}  // namespace besov
