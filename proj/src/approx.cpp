#include "besov/approx.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "besov/rng.hpp"

namespace besov {

namespace {

double binom(int n, int k) {
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

double ipow(double base, int e) {
  double out = 1.0;
  for (int i = 0; i < e; ++i) out *= base;
  return out;
}

int max_component(const Expansion::Level& k) { return *std::max_element(k.begin(), k.end()); }

int grade(const Expansion::Level& k) { return std::accumulate(k.begin(), k.end(), 0); }

bool is_isotropic(const Expansion::Level& k) {
  return std::all_of(k.begin(), k.end(), [&](int v) { return v == k.front(); });
}

// Σ_{k=0}^{K} (2^k + m)^d
long long full_level_terms(int K, int m, int d) {
  long long total = 0;
  for (int k = 0; k <= K; ++k) total += static_cast<long long>(ipow(active_shift_count(k, m), d));
  return total;
}

std::uint64_t level_stream(const Expansion::Level& k) {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (int v : k) h = Rng::mix(h ^ static_cast<std::uint64_t>(v + 1));
  return h;
}

// Gauss–Legendre nodes and weights on [0, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0, p1 = x;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = 0.5 * (1.0 - x);
    weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

struct Accumulator {
  double r;
  double acc = 0.0;
  void add(double value, double weight) {
    const double a = std::abs(value);
    if (is_inf(r)) {
      acc = std::max(acc, a);
    } else if (r == 2.0) {
      acc += weight * a * a;
    } else {
      acc += weight * std::pow(a, r);
    }
  }
  double result() const { return is_inf(r) ? acc : std::pow(acc, 1.0 / r); }
};

}  // namespace

double dkd(int K, int d) {
  if (K < 1 || d < 1) throw std::invalid_argument("dkd: need K >= 1 and d >= 1");
  if (d == 1) return 1.0;
  return std::pow(1.0 + (d - 1.0) / K, K) * std::pow(1.0 + static_cast<double>(K) / (d - 1), d - 1);
}

long long active_shift_count(int k, int m) { return (1LL << k) + m; }

long long active_level_size(const Expansion::Level& k, int m) {
  long long out = 1;
  for (int v : k) out *= active_shift_count(v, m);
  return out;
}

AdaptiveBudget nterm_budget(const SpaceParams& params, long long N) {
  params.validate();
  if (params.mixed) throw std::invalid_argument("nterm_budget: isotropic parameters expected");
  const int d = params.d, m = params.m;
  AdaptiveBudget b;
  b.N = N;
  b.delta = params.delta();
  b.nu = params.nu();
  const bool tail = b.delta > 0.0;
  const long long full_cap = tail ? N / 2 : N;
  if (full_level_terms(0, m, d) > full_cap) {
    throw std::invalid_argument("nterm_budget: N = " + std::to_string(N) +
                                " cannot hold the level-0 block");
  }
  int K = 0;
  while (K < 40 && full_level_terms(K + 1, m, d) <= full_cap) ++K;
  b.K = K;
  b.full_terms = full_level_terms(K, m, d);
  b.C1 = std::max(K - 0.5, 0.0) * d / std::log(static_cast<double>(std::max<long long>(N, 2)));
  b.K_star = K;
  if (!tail) return b;

  const double Nd = static_cast<double>(N);
  const long long room = N - b.full_terms;
  auto kstar = [&](double lambda) {
    return std::max(K, static_cast<int>(std::ceil(std::log(lambda * Nd) / b.nu)) + K + 1);
  };
  auto tail_sum = [&](double lambda, std::map<int, long long>* out) {
    long long total = 0;
    const int ks = kstar(lambda);
    for (int k = K + 1; k <= ks; ++k) {
      const long long nk =
          static_cast<long long>(std::ceil(lambda * Nd * std::exp2(-b.nu * (k - K))));
      total += nk;
      if (out) (*out)[k] = nk;
      if (total > room) break;
    }
    return total;
  };
  double lo = 0.0, hi = 1.0;
  while (tail_sum(hi, nullptr) <= room && hi < 1e6) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tail_sum(mid, nullptr) <= room) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  b.lambda = lo;
  if (lo > 0.0) {
    b.K_star = kstar(lo);
    b.tail_terms = tail_sum(lo, &b.n_k);
  }
  return b;
}

AdaptiveBudget sparse_grid_budget(const SpaceParams& params, int K) {
  params.validate();
  if (K < 0) throw std::invalid_argument("sparse_grid_budget: K must be >= 0");
  AdaptiveBudget b;
  b.mixed = true;
  b.K = K;
  b.delta = params.delta();
  b.nu = params.nu();
  const int d = params.d;
  for (const auto& k : sparse_grid_index_set(K, d)) b.full_terms += active_level_size(k, params.m);
  b.K_star = K;
  if (b.delta > 0.0 && K >= 1) {
    b.K_star = static_cast<int>(std::ceil(K * (1.0 + 2.0 * b.delta / (params.s - b.delta)) - 1e-12));
    for (int g = K + 1; g <= b.K_star; ++g) {
      const long long nk = static_cast<long long>(std::ceil(std::exp2(K - b.nu * (g - K)) - 1e-12));
      b.n_k[g] = nk;
      b.tail_terms += nk * static_cast<long long>(std::llround(binom(g + d - 1, d - 1)));
    }
  }
  b.N = b.total();
  return b;
}

void validate_budget(const AdaptiveBudget& b) {
  for (const auto& [k, n] : b.n_k) {
    if (n < 1) throw std::invalid_argument("budget: n_k must be >= 1");
    if (k <= b.K || k > b.K_star) throw std::invalid_argument("budget: n_k outside the tail band");
  }
  if (!b.mixed && b.total() > b.N) {
    throw std::invalid_argument("budget: full levels plus tail exceed N");
  }
}

nlohmann::json budget_to_json(const AdaptiveBudget& b) {
  nlohmann::json nk = nlohmann::json::object();
  for (const auto& [k, n] : b.n_k) nk[std::to_string(k)] = n;
  return {{"mode", b.mixed ? "mixed" : "isotropic"},
          {"N", b.N},
          {"K", b.K},
          {"K_star", b.K_star},
          {"C1", b.C1},
          {"lambda", b.lambda},
          {"nu", is_inf(b.nu) ? nlohmann::json("inf") : nlohmann::json(b.nu)},
          {"delta", b.delta},
          {"full_terms", b.full_terms},
          {"tail_terms", b.tail_terms},
          {"n_k", nk}};
}

Expansion sample_besov_function(const SpaceParams& params, double radius, int max_level,
                                std::uint64_t seed, const SampleOptions& options) {
  params.validate();
  if (max_level < 0) throw std::invalid_argument("sample_besov_function: max_level must be >= 0");
  if (!(radius > 0.0)) throw std::invalid_argument("sample_besov_function: radius must be > 0");
  const int d = params.d, m = params.m;
  const double p = params.p;
  std::vector<Expansion::Level> levels;
  if (params.mixed) {
    levels = sparse_grid_index_set(max_level, d);
  } else {
    for (int k = 0; k <= max_level; ++k) levels.emplace_back(d, k);
  }
  std::map<int, int> grade_count;
  for (const auto& k : levels) ++grade_count[grade(k)];

  auto lp_normalize = [&](std::vector<double>& v) {
    double acc = 0.0;
    for (double a : v) acc = is_inf(p) ? std::max(acc, std::abs(a)) : acc + std::pow(std::abs(a), p);
    const double norm = is_inf(p) ? acc : std::pow(acc, 1.0 / p);
    if (norm > 0.0)
      for (double& a : v) a /= norm;
  };

  Expansion out(m, d);
  for (const auto& k : levels) {
    const long long n = active_level_size(k, m);
    Rng rng(seed, level_stream(k));
    const int size_level = params.mixed ? grade(k) : k.front();
    const bool dense =
        options.dense_max_level < 0 || size_level <= options.dense_max_level;
    const double share = dense ? std::clamp(options.spike_share, 0.0, 1.0) : 1.0;
    if (share < 1.0 && n > 50'000'000) {
      throw std::invalid_argument("sample_besov_function: dense level too large");
    }

    // Spike-only levels stay sparse so very fine levels cost nothing.
    std::map<long long, double> coef;
    if (share < 1.0) {
      std::vector<double> g(static_cast<std::size_t>(n));
      for (double& v : g) v = rng.normal();
      lp_normalize(g);
      for (long long i = 0; i < n; ++i) coef[i] = (1.0 - share) * g[static_cast<std::size_t>(i)];
    }
    if (share > 0.0 && options.spikes_per_level > 0) {
      std::map<long long, double> spikes;
      for (int t = 0; t < options.spikes_per_level; ++t) {
        const auto pos = static_cast<long long>(rng.below(static_cast<std::uint64_t>(n)));
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        spikes[pos] += sign * (0.5 + rng.uniform());
      }
      std::vector<double> vals;
      for (const auto& [pos, v] : spikes) vals.push_back(v);
      lp_normalize(vals);
      std::size_t i = 0;
      for (const auto& [pos, v] : spikes) coef[pos] += share * vals[i++];
    }
    {
      std::vector<double> vals;
      for (const auto& [pos, v] : coef) vals.push_back(v);
      lp_normalize(vals);
      std::size_t i = 0;
      for (auto& [pos, v] : coef) v = vals[i++];
    }

    const double weight_exp = params.mixed ? grade(k) * (params.s - reciprocal(p))
                                           : k.front() * (params.s - d * reciprocal(p));
    double target = std::exp2(-weight_exp);
    if (params.mixed && options.grade_normalized && !is_inf(params.q)) {
      target /= std::pow(grade_count[grade(k)], 1.0 / params.q);
    }

    std::vector<int> j(d);
    for (const auto& [lin, a] : coef) {
      if (a == 0.0) continue;
      long long rest = lin;
      for (int i = d - 1; i >= 0; --i) {
        const long long ext = active_shift_count(k[i], m);
        j[i] = static_cast<int>(rest % ext) - m;
        rest /= ext;
      }
      out.set({k, j}, a * target);
    }
  }
  const double norm = sequence_norm(out, params, params.mode());
  if (!(norm > 0.0)) throw std::runtime_error("sample_besov_function: degenerate sample");
  return out.scaled(radius / norm);
}

Expansion quasi_interpolate(const Function& f, int k, const SpaceParams& params) {
  const int d = params.d, m = params.m;
  if (k < 0 || k > 20) throw std::invalid_argument("quasi_interpolate: level out of range");
  const int nb = static_cast<int>(active_shift_count(k, m));
  const int ns = std::max(4 << k, 2 * nb);
  if (std::pow(static_cast<double>(ns), d) > 2e7) {
    throw std::invalid_argument("quasi_interpolate: sample grid too large");
  }
  Eigen::MatrixXd A(ns, nb);
  for (int i = 0; i < ns; ++i) {
    const double x = (i + 0.5) / ns;
    for (int c = 0; c < nb; ++c) A(i, c) = eval_cardinal(m, std::ldexp(x, k) - (c - m));
  }
  const Eigen::MatrixXd G = A.transpose() * A;
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("quasi_interpolate: singular normal equations");
  }
  const Eigen::MatrixXd P = llt.solve(A.transpose());  // nb × ns

  // Sample f on the tensor grid, then apply P along each axis in turn.
  long long total = 1;
  for (int i = 0; i < d; ++i) total *= ns;
  std::vector<double> data(static_cast<std::size_t>(total));
  std::vector<double> x(d);
  for (long long lin = 0; lin < total; ++lin) {
    long long rest = lin;
    for (int i = d - 1; i >= 0; --i) {
      x[i] = ((rest % ns) + 0.5) / ns;
      rest /= ns;
    }
    data[static_cast<std::size_t>(lin)] = f(x);
  }
  std::vector<int> shape(d, ns);
  for (int axis = 0; axis < d; ++axis) {
    long long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[i];
    for (int i = axis + 1; i < d; ++i) inner *= shape[i];
    std::vector<double> next(static_cast<std::size_t>(outer * nb * inner), 0.0);
    for (long long o = 0; o < outer; ++o)
      for (int r = 0; r < nb; ++r)
        for (int c = 0; c < ns; ++c) {
          const double w = P(r, c);
          if (w == 0.0) continue;
          const double* src = &data[static_cast<std::size_t>((o * ns + c) * inner)];
          double* dst = &next[static_cast<std::size_t>((o * nb + r) * inner)];
          for (long long t = 0; t < inner; ++t) dst[t] += w * src[t];
        }
    data.swap(next);
    shape[axis] = nb;
  }
  Expansion out(m, d);
  const Expansion::Level level(d, k);
  std::vector<int> j(d);
  for (std::size_t lin = 0; lin < data.size(); ++lin) {
    long long rest = static_cast<long long>(lin);
    for (int i = d - 1; i >= 0; --i) {
      j[i] = static_cast<int>(rest % nb) - m;
      rest /= nb;
    }
    out.set({level, j}, data[lin]);
  }
  return out;
}

Expansion refine_level(const Expansion& block, int k) {
  const int m = block.order(), d = block.dim();
  std::vector<double> mask(m + 2);
  for (int i = 0; i <= m + 1; ++i) mask[i] = std::ldexp(binom(m + 1, i), -m);
  const int upper = (1 << (k + 1)) - 1;
  Expansion out(m, d);
  const Expansion::Level next(d, k + 1);
  std::map<std::vector<int>, double> acc;
  block.for_each([&](const Expansion::Level& lv, const std::vector<int>& j, double a) {
    if (!is_isotropic(lv) || lv.front() != k) {
      throw std::invalid_argument("refine_level: block must sit on level k");
    }
    std::vector<int> digit(d, 0), jj(d);
    while (true) {
      double w = a;
      bool inside = true;
      for (int i = 0; i < d; ++i) {
        jj[i] = 2 * j[i] + digit[i];
        w *= mask[digit[i]];
        inside = inside && jj[i] >= -m && jj[i] <= upper;
      }
      if (inside) acc[jj] += w;
      int pos = d - 1;
      while (pos >= 0 && ++digit[pos] == m + 2) digit[pos--] = 0;
      if (pos < 0) break;
    }
  });
  for (const auto& [j, a] : acc) out.set({next, j}, a);
  return out;
}

Expansion multilevel_decomposition(const Function& f, int max_level, const SpaceParams& params) {
  Expansion out(params.m, params.d);
  Expansion prev = quasi_interpolate(f, 0, params);
  prev.for_each([&](const auto& k, const auto& j, double a) { out.set({k, j}, a); });
  for (int k = 1; k <= max_level; ++k) {
    const Expansion cur = quasi_interpolate(f, k, params);
    const Expansion detail = difference(cur, refine_level(prev, k - 1));
    detail.for_each([&](const auto& lv, const auto& j, double a) { out.set({lv, j}, a); });
    prev = cur;
  }
  return out;
}

Expansion truncate_levels(const Expansion& e, int K) {
  Expansion out(e.order(), e.dim());
  e.for_each([&](const auto& k, const auto& j, double a) {
    if (max_component(k) <= K) out.set({k, j}, a);
  });
  return out;
}

Expansion truncate_grade(const Expansion& e, int K) {
  Expansion out(e.order(), e.dim());
  e.for_each([&](const auto& k, const auto& j, double a) {
    if (grade(k) <= K) out.set({k, j}, a);
  });
  return out;
}

int linear_level_for_budget(long long N, int m, int d) {
  int K = -1;
  while (K < 40 && full_level_terms(K + 1, m, d) <= N) ++K;
  return K;
}

std::vector<std::vector<int>> select_largest(const Expansion::Block& block, long long n) {
  std::vector<std::pair<double, const std::vector<int>*>> items;
  items.reserve(block.size());
  for (const auto& [j, a] : block) items.emplace_back(std::abs(a), &j);
  // Block iteration is already ascending in j, so a stable sort on magnitude
  // breaks ties lexicographically.
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  const std::size_t keep = static_cast<std::size_t>(std::clamp<long long>(n, 0, items.size()));
  std::vector<std::vector<int>> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(*items[i].second);
  return out;
}

Selection adaptive_nterm(const Expansion& e, const AdaptiveBudget& budget) {
  if (budget.mixed) throw std::invalid_argument("adaptive_nterm: isotropic budget expected");
  validate_budget(budget);
  Selection sel{Expansion(e.order(), e.dim()), false, 0};
  int top = -1;
  for (const auto& [k, block] : e.levels()) {
    if (!is_isotropic(k)) throw std::invalid_argument("adaptive_nterm: isotropic levels expected");
    const int lv = k.front();
    top = std::max(top, lv);
    if (lv <= budget.K) {
      for (const auto& [j, a] : block) sel.approx.set({k, j}, a);
    } else if (lv <= budget.K_star) {
      const auto it = budget.n_k.find(lv);
      const long long n = it == budget.n_k.end() ? 0 : it->second;
      for (const auto& j : select_largest(block, n)) {
        sel.approx.set({k, j}, block.at(j));
        ++sel.tail_terms;
      }
    }
  }
  sel.truncated = top < budget.K_star;
  if (static_cast<long long>(sel.approx.size()) > budget.N) {
    throw std::logic_error("adaptive_nterm: selection exceeds the term budget");
  }
  return sel;
}

std::vector<Expansion::Level> sparse_grid_index_set(int K, int d) {
  if (K < 0 || d < 1) throw std::invalid_argument("sparse_grid_index_set: need K >= 0, d >= 1");
  std::vector<Expansion::Level> out;
  for (int g = 0; g <= K; ++g) {
    // Compositions of g into d parts, largest first component first.
    std::vector<int> k(d, 0);
    k[0] = g;
    while (true) {
      out.push_back(k);
      // Predecessor in lexicographic order among compositions of g.
      int pos = d - 2;
      while (pos >= 0 && k[pos] == 0) --pos;
      if (pos < 0) break;
      --k[pos];
      int rest = 0;
      for (int i = pos + 1; i < d; ++i) rest += k[i];
      ++rest;
      std::fill(k.begin() + pos + 1, k.end(), 0);
      k[pos + 1] = rest;
    }
  }
  return out;
}

long long hierarchical_level_dimension(const Expansion::Level& k, int m) {
  long long out = 1;
  for (int ki : k) out *= ki == 0 ? m + 1 : 1LL << (ki - 1);
  return out;
}

long long sparse_grid_dimension(int K, int d, int m) {
  long long out = 0;
  for (const auto& k : sparse_grid_index_set(K, d)) out += hierarchical_level_dimension(k, m);
  return out;
}

long long full_grid_dimension(int K, int d, int m) {
  return static_cast<long long>(ipow(static_cast<double>(active_shift_count(K, m)), d));
}

Selection adaptive_sparse_grid(const Expansion& e, int K, const SpaceParams& params) {
  const AdaptiveBudget budget = sparse_grid_budget(params, K);
  Selection sel{Expansion(e.order(), e.dim()), false, 0};
  long long allowance = 0;
  int top = -1;
  for (const auto& [k, block] : e.levels()) {
    const int g = grade(k);
    top = std::max(top, g);
    if (g <= K) {
      for (const auto& [j, a] : block) sel.approx.set({k, j}, a);
    } else if (g <= budget.K_star) {
      const long long n = budget.n_k.at(g);
      allowance += n;
      for (const auto& j : select_largest(block, n)) {
        sel.approx.set({k, j}, block.at(j));
        ++sel.tail_terms;
      }
    }
  }
  sel.truncated = top < budget.K_star;
  if (sel.tail_terms > allowance) {
    throw std::logic_error("adaptive_sparse_grid: band exceeds its allowance");
  }
  return sel;
}

Expansion difference(const Expansion& a, const Expansion& b) {
  if (a.order() != b.order() || a.dim() != b.dim()) {
    throw std::invalid_argument("difference: expansions differ in order or dimension");
  }
  Expansion out = a;
  b.for_each([&](const auto& k, const auto& j, double v) { out.add({k, j}, -v); });
  return out;
}

double lr_norm(const Expansion& e, double r, const LrOptions& options) {
  if (!(r > 0.0)) throw std::invalid_argument("lr_norm: r must be positive");
  const int d = e.dim(), m = e.order();
  if (e.empty()) return 0.0;
  const ExpansionEvaluator ev(e);
  Accumulator acc{r};
  std::vector<double> x(d);

  if (d == 1) {
    int base = 0;
    while ((1 << base) < options.grid_1d) ++base;
    std::map<int, std::vector<int>> fine;  // level > base → sorted shifts
    for (const auto& [k, block] : e.levels()) {
      if (k.front() <= base) continue;
      auto& v = fine[k.front()];
      for (const auto& [j, a] : block) v.push_back(j.front());
    }
    std::vector<double> nodes, weights;
    gauss_legendre(r == 2.0 ? m + 1 : m + 4, nodes, weights);
    auto needs_split = [&](int l, long long i) {
      for (auto it = fine.upper_bound(l); it != fine.end(); ++it) {
        const long long scale = 1LL << (it->first - l);
        const long long lo = i * scale - m - 1, hi = (i + 1) * scale;
        const auto& js = it->second;
        const auto pos = std::upper_bound(js.begin(), js.end(), lo);
        if (pos != js.end() && *pos < hi) return true;
      }
      return false;
    };
    std::function<void(int, long long)> integrate = [&](int l, long long i) {
      if (l < 40 && needs_split(l, i)) {
        integrate(l + 1, 2 * i);
        integrate(l + 1, 2 * i + 1);
        return;
      }
      const double h = std::ldexp(1.0, -l);
      const double a = i * h;
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        x[0] = a + h * nodes[q];
        acc.add(ev(x), h * weights[q]);
      }
      if (is_inf(r)) {
        x[0] = a;
        acc.add(ev(x), 0.0);
        x[0] = a + h;
        acc.add(ev(x), 0.0);
      }
    };
    for (long long i = 0; i < (1LL << base); ++i) integrate(base, i);
    return acc.result();
  }
  if (d == 2) {
    const int n = options.grid_2d;
    const double w = 1.0 / (static_cast<double>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        x[0] = (a + 0.5) / n;
        x[1] = (b + 0.5) / n;
        acc.add(ev(x), w);
      }
    return acc.result();
  }
  Rng rng(options.seed);
  const double w = 1.0 / static_cast<double>(options.mc_samples);
  for (long long t = 0; t < options.mc_samples; ++t) {
    for (double& v : x) v = rng.uniform();
    acc.add(ev(x), w);
  }
  return acc.result();
}

std::vector<double> truncation_errors(
    const Expansion& e, const std::vector<std::function<bool(const Expansion::Level&)>>& keep,
    double r, const LrOptions& options) {
  const ExpansionEvaluator ev(e);
  const std::size_t nl = ev.level_count();
  std::vector<std::vector<char>> dropped(keep.size(), std::vector<char>(nl, 0));
  for (std::size_t q = 0; q < keep.size(); ++q)
    for (std::size_t i = 0; i < nl; ++i) dropped[q][i] = keep[q](ev.level(i)) ? 0 : 1;
  std::vector<Accumulator> acc(keep.size(), Accumulator{r});
  std::vector<double> values(nl), x(e.dim());
  Rng rng(options.seed);
  const double w = 1.0 / static_cast<double>(options.mc_samples);
  for (long long t = 0; t < options.mc_samples; ++t) {
    for (double& v : x) v = rng.uniform();
    ev.level_values(x, values);
    for (std::size_t q = 0; q < keep.size(); ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < nl; ++i)
        if (dropped[q][i]) s += values[i];
      acc[q].add(s, w);
    }
  }
  std::vector<double> out;
  for (const auto& a : acc) out.push_back(a.result());
  return out;
}

}  // namespace besov
