#include "besov/bspline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace besov {

namespace {

long double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0L;
  long double out = 1.0L;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_dim(std::size_t got, int want, const char* what) {
  if (static_cast<int>(got) != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
  }
}

}  // namespace

CardinalBSpline::CardinalBSpline(int order) : order_(order) {
  if (order < 0) throw std::invalid_argument("CardinalBSpline: order must be >= 0");
  if (order > kMaxOrder) {
    throw std::invalid_argument("CardinalBSpline: order exceeds binomial overflow guard (24)");
  }
  const int m = order;
  long double factorial = 1.0L;
  for (int i = 2; i <= m; ++i) factorial *= i;

  pieces_.assign(m + 1, std::vector<double>(m + 1, 0.0));
  for (int i = 0; i <= m; ++i) {
    // On [i, i+1) only the truncated powers with j ≤ i are active:
    // (x − j)^m = (t + i − j)^m with t = x − i.
    for (int c = 0; c <= m; ++c) {
      long double acc = 0.0L;
      for (int j = 0; j <= i; ++j) {
        const long double sign = (j % 2 == 0) ? 1.0L : -1.0L;
        acc += sign * binomial(m + 1, j) * std::pow(static_cast<long double>(i - j), m - c);
      }
      pieces_[i][c] = static_cast<double>(binomial(m, c) * acc / factorial);
    }
  }
}

double CardinalBSpline::operator()(double x) const {
  const double end = order_ + 1;
  if (!(x >= 0.0) || !(x < end)) return 0.0;
  // Symmetric about (m+1)/2; evaluating on the left half keeps Horner on the
  // small-coefficient pieces.
  if (order_ >= 1 && x > 0.5 * end) x = end - x;
  const int i = std::min(static_cast<int>(std::floor(x)), order_);
  const double t = x - i;
  const auto& c = pieces_[i];
  double acc = c[order_];
  for (int deg = order_ - 1; deg >= 0; --deg) acc = acc * t + c[deg];
  return acc < 0.0 ? 0.0 : acc;
}

const CardinalBSpline& cardinal_bspline(int m) {
  if (m < 0 || m > CardinalBSpline::kMaxOrder) {
    throw std::invalid_argument("cardinal_bspline: order must be in [0, 24], got " +
                                std::to_string(m));
  }
  static const std::array<CardinalBSpline, CardinalBSpline::kMaxOrder + 1> table = [] {
    return [&]<std::size_t... I>(std::index_sequence<I...>) {
      return std::array<CardinalBSpline, sizeof...(I)>{CardinalBSpline(static_cast<int>(I))...};
    }(std::make_index_sequence<CardinalBSpline::kMaxOrder + 1>{});
  }();
  return table[m];
}

double eval_cardinal(int m, double x) { return cardinal_bspline(m)(x); }

int DyadicIndex::level_sum() const {
  int total = 0;
  for (int v : k) total += v;
  return total;
}

bool DyadicIndex::isotropic() const {
  return std::all_of(k.begin(), k.end(), [&](int v) { return v == k.front(); });
}

void validate_index(const DyadicIndex& index, int m) {
  if (index.k.size() != index.j.size()) {
    throw std::invalid_argument("DyadicIndex: levels and shifts differ in dimension");
  }
  if (index.k.empty()) throw std::invalid_argument("DyadicIndex: empty index");
  for (std::size_t i = 0; i < index.k.size(); ++i) {
    if (index.k[i] < 0 || index.k[i] > 40) {
      throw std::invalid_argument("DyadicIndex: level out of range");
    }
    const long long upper = 1LL << index.k[i];
    if (index.j[i] < -m || index.j[i] > upper) {
      throw std::invalid_argument("DyadicIndex: shift " + std::to_string(index.j[i]) +
                                  " outside {-m, ..., 2^k}");
    }
  }
}

double eval_tensor(const DyadicIndex& index, int m, std::span<const double> x) {
  require_dim(x.size(), index.dim(), "eval_tensor");
  if (index.k.size() != index.j.size()) {
    throw std::invalid_argument("eval_tensor: levels and shifts differ in dimension");
  }
  const auto& spline = cardinal_bspline(m);
  double out = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = spline(std::ldexp(x[i], index.k[i]) - index.j[i]);
    if (v == 0.0) return 0.0;
    out *= v;
  }
  return out;
}

Expansion::Expansion(int order, int dim) : order_(order), dim_(dim) {
  if (order < 0 || order > CardinalBSpline::kMaxOrder) {
    throw std::invalid_argument("Expansion: spline order out of range");
  }
  if (dim < 1) throw std::invalid_argument("Expansion: dimension must be >= 1");
}

void Expansion::set(const DyadicIndex& index, double coefficient) {
  require_dim(index.k.size(), dim_, "Expansion::set");
  validate_index(index, order_);
  if (!std::isfinite(coefficient)) throw std::invalid_argument("Expansion: non-finite coefficient");
  auto lvl = levels_.find(index.k);
  if (coefficient == 0.0) {
    if (lvl == levels_.end()) return;
    if (lvl->second.erase(index.j) > 0) --size_;
    if (lvl->second.empty()) levels_.erase(lvl);
    return;
  }
  if (lvl == levels_.end()) lvl = levels_.emplace(index.k, Block{}).first;
  auto [it, inserted] = lvl->second.insert_or_assign(index.j, coefficient);
  (void)it;
  if (inserted) ++size_;
}

void Expansion::add(const DyadicIndex& index, double coefficient) {
  set(index, this->coefficient(index) + coefficient);
}

double Expansion::coefficient(const DyadicIndex& index) const {
  const auto lvl = levels_.find(index.k);
  if (lvl == levels_.end()) return 0.0;
  const auto it = lvl->second.find(index.j);
  return it == lvl->second.end() ? 0.0 : it->second;
}

bool Expansion::contains(const DyadicIndex& index) const {
  const auto lvl = levels_.find(index.k);
  return lvl != levels_.end() && lvl->second.count(index.j) > 0;
}

Expansion Expansion::scaled(double factor) const {
  Expansion out(order_, dim_);
  if (factor == 0.0) return out;
  out.levels_ = levels_;
  out.size_ = size_;
  for (auto& [k, block] : out.levels_)
    for (auto& [j, a] : block) a *= factor;
  return out;
}

double Expansion::operator()(std::span<const double> x) const {
  require_dim(x.size(), dim_, "eval_expansion");
  double acc = 0.0;
  for_each([&](const Level& k, const std::vector<int>& j, double a) {
    acc += a * eval_tensor(DyadicIndex{k, j}, order_, x);
  });
  return acc;
}

double eval_expansion(const Expansion& e, std::span<const double> x) { return e(x); }

std::map<Expansion::Level, double> block_norms(const Expansion& e, double p) {
  std::map<Expansion::Level, double> out;
  for (const auto& [k, block] : e.levels()) {
    double acc = 0.0;
    for (const auto& [j, a] : block) {
      if (!std::isfinite(a)) throw std::invalid_argument("block_norms: non-finite coefficient");
      if (is_inf(p)) {
        acc = std::max(acc, std::abs(a));
      } else {
        acc += std::pow(std::abs(a), p);
      }
    }
    out[k] = is_inf(p) ? acc : std::pow(acc, 1.0 / p);
  }
  return out;
}

double sequence_norm(const Expansion& e, const SpaceParams& params, NormMode mode) {
  const double inv_p = reciprocal(params.p);
  double acc = 0.0;
  for (const auto& [k, block_norm] : block_norms(e, params.p)) {
    double exponent = 0.0;
    if (mode == NormMode::isotropic) {
      if (!std::all_of(k.begin(), k.end(), [&](int v) { return v == k.front(); })) {
        throw std::invalid_argument("sequence_norm: isotropic mode needs equal level components");
      }
      exponent = k.front() * (params.s - e.dim() * inv_p);
    } else {
      int l1 = 0;
      for (int v : k) l1 += v;
      exponent = l1 * (params.s - inv_p);
    }
    const double weighted = std::exp2(exponent) * block_norm;
    if (is_inf(params.q)) {
      acc = std::max(acc, weighted);
    } else {
      acc += std::pow(weighted, params.q);
    }
  }
  return is_inf(params.q) ? acc : std::pow(acc, 1.0 / params.q);
}

ExpansionEvaluator::ExpansionEvaluator(const Expansion& e) : order_(e.order()), dim_(e.dim()) {
  if (dim_ > 16) throw std::invalid_argument("ExpansionEvaluator: dimension above 16");
  for (const auto& [k, block] : e.levels()) {
    LevelData lv;
    lv.k = k;
    lv.lo.assign(dim_, 0);
    std::vector<int> hi(dim_, 0);
    bool first = true;
    for (const auto& [j, a] : block) {
      for (int i = 0; i < dim_; ++i) {
        if (first || j[i] < lv.lo[i]) lv.lo[i] = j[i];
        if (first || j[i] > hi[i]) hi[i] = j[i];
      }
      first = false;
    }
    long long box = 1;
    lv.extent.resize(dim_);
    for (int i = 0; i < dim_; ++i) {
      lv.extent[i] = hi[i] - lv.lo[i] + 1;
      box *= lv.extent[i];
    }
    lv.is_dense = box <= 4 * static_cast<long long>(block.size()) + 4096;
    if (lv.is_dense) lv.dense.assign(static_cast<std::size_t>(box), 0.0);
    for (const auto& [j, a] : block) {
      long long lin = 0;
      for (int i = 0; i < dim_; ++i) lin = lin * lv.extent[i] + (j[i] - lv.lo[i]);
      if (lv.is_dense) {
        lv.dense[static_cast<std::size_t>(lin)] = a;
      } else {
        lv.sparse.emplace(lin, a);
      }
    }
    for (int v : k) max_level_ = std::max(max_level_, v);
    levels_.push_back(std::move(lv));
  }
}

void ExpansionEvaluator::fill_table(std::span<const double> x, Table& table) const {
  const auto& spline = cardinal_bspline(order_);
  const int width = order_ + 1;
  const int levels = max_level_ + 1;
  table.start.resize(static_cast<std::size_t>(dim_) * levels);
  table.vals.resize(static_cast<std::size_t>(dim_) * levels * width);
  for (int i = 0; i < dim_; ++i) {
    for (int kk = 0; kk < levels; ++kk) {
      const double t = std::ldexp(x[i], kk);
      const double top = std::floor(t);
      const std::size_t slot = static_cast<std::size_t>(i) * levels + kk;
      if (!(std::abs(top) < 1e9)) {
        table.start[slot] = std::numeric_limits<int>::min() / 2;
        std::fill_n(table.vals.begin() + slot * width, width, 0.0);
        continue;
      }
      const int start = static_cast<int>(top) - order_;
      table.start[slot] = start;
      for (int c = 0; c < width; ++c) table.vals[slot * width + c] = spline(t - (start + c));
    }
  }
}

double ExpansionEvaluator::level_value(const LevelData& lv, const Table& table) const {
  const int width = order_ + 1;
  const int levels = max_level_ + 1;
  constexpr int kMaxDim = 16;
  std::array<const double*, kMaxDim> vals{};
  std::array<int, kMaxDim> offset{};
  std::array<int, kMaxDim> c_lo{}, c_hi{};
  for (int i = 0; i < dim_; ++i) {
    const std::size_t slot = static_cast<std::size_t>(i) * levels + lv.k[i];
    vals[i] = &table.vals[slot * width];
    offset[i] = table.start[slot] - lv.lo[i];
    // Candidates c with 0 ≤ offset + c < extent.
    c_lo[i] = std::max(0, -offset[i]);
    c_hi[i] = std::min(width, lv.extent[i] - offset[i]);
    if (c_lo[i] >= c_hi[i]) return 0.0;
  }
  std::array<int, kMaxDim> digit{};
  for (int i = 0; i < dim_; ++i) digit[i] = c_lo[i];
  double total = 0.0;
  while (true) {
    double prod = 1.0;
    long long lin = 0;
    for (int i = 0; i < dim_; ++i) {
      prod *= vals[i][digit[i]];
      lin = lin * lv.extent[i] + (offset[i] + digit[i]);
    }
    if (prod != 0.0) {
      if (lv.is_dense) {
        total += prod * lv.dense[static_cast<std::size_t>(lin)];
      } else if (auto it = lv.sparse.find(lin); it != lv.sparse.end()) {
        total += prod * it->second;
      }
    }
    int pos = dim_ - 1;
    while (pos >= 0 && ++digit[pos] == c_hi[pos]) {
      digit[pos] = c_lo[pos];
      --pos;
    }
    if (pos < 0) break;
  }
  return total;
}

double ExpansionEvaluator::operator()(std::span<const double> x) const {
  require_dim(x.size(), dim_, "ExpansionEvaluator");
  if (levels_.empty()) return 0.0;
  thread_local Table table;
  fill_table(x, table);
  double acc = 0.0;
  for (const auto& lv : levels_) acc += level_value(lv, table);
  return acc;
}

void ExpansionEvaluator::level_values(std::span<const double> x, std::span<double> out) const {
  require_dim(x.size(), dim_, "ExpansionEvaluator");
  if (out.size() != levels_.size()) throw std::invalid_argument("level_values: output size");
  if (levels_.empty()) return;
  thread_local Table table;
  fill_table(x, table);
  for (std::size_t i = 0; i < levels_.size(); ++i) out[i] = level_value(levels_[i], table);
}

nlohmann::json expansion_to_json(const Expansion& e) {
  nlohmann::json terms = nlohmann::json::array();
  e.for_each([&](const Expansion::Level& k, const std::vector<int>& j, double a) {
    terms.push_back({{"k", k}, {"j", j}, {"a", format_double(a)}});
  });
  return {{"m", e.order()}, {"d", e.dim()}, {"terms", std::move(terms)}};
}

Expansion expansion_from_json(const nlohmann::json& doc) {
  Expansion out(doc.at("m").get<int>(), doc.at("d").get<int>());
  for (const auto& term : doc.at("terms")) {
    DyadicIndex index{term.at("k").get<std::vector<int>>(), term.at("j").get<std::vector<int>>()};
    const auto& a = term.at("a");
    const double value = a.is_string() ? std::stod(a.get<std::string>()) : a.get<double>();
    if (out.contains(index)) throw std::invalid_argument("expansion JSON: duplicate index");
    out.set(index, value);
  }
  return out;
}

}  // namespace besov
