#pragma once

// Cardinal B-splines, dyadic tensor-product bases and finite expansions.
//
// 𝒩_m is the (m+1)-fold convolution of the indicator of [0, 1). It is
// supported on [0, m+1] and M_{k,j}(x) = ∏_i 𝒩_m(2^{k_i} x_i − j_i) is the
// dyadic tensor basis function at level vector k and shift vector j.

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "besov/space_params.hpp"

namespace besov {

/// Piecewise-polynomial cardinal B-spline of order m (degree m).
///
/// The pieces are expanded once from the truncated-power closed form
/// (1/m!) Σ_j (−1)^j C(m+1, j) (x − j)_+^m; `pieces()[i][c]` is the
/// coefficient of (x − i)^c on [i, i+1).
class CardinalBSpline {
 public:
  static constexpr int kMaxOrder = 24;

  explicit CardinalBSpline(int order);

  int order() const { return order_; }
  double operator()(double x) const;
  const std::vector<std::vector<double>>& pieces() const { return pieces_; }

 private:
  int order_;
  std::vector<std::vector<double>> pieces_;
};

/// Shared immutable instance for order m; throws std::invalid_argument for
/// m < 0 or m > CardinalBSpline::kMaxOrder.
const CardinalBSpline& cardinal_bspline(int m);

/// 𝒩_m(x).
double eval_cardinal(int m, double x);

/// Level vector k and shift vector j addressing one tensor basis function.
struct DyadicIndex {
  std::vector<int> k;
  std::vector<int> j;

  int dim() const { return static_cast<int>(k.size()); }

  /// ‖k‖₁
  int level_sum() const;
  /// True when every k_i is equal (an isotropic level).
  bool isotropic() const;

  auto operator<=>(const DyadicIndex&) const = default;
  bool operator==(const DyadicIndex&) const = default;
};

/// Throws std::invalid_argument unless dim(k) = dim(j), k_i ≥ 0 and
/// j_i ∈ {−m, …, 2^{k_i}}.
void validate_index(const DyadicIndex& index, int m);

/// M_{k,j}(x) = ∏_i 𝒩_m(2^{k_i} x_i − j_i).
double eval_tensor(const DyadicIndex& index, int m, std::span<const double> x);

/// Finite coefficient map {DyadicIndex → α}, grouped by level.
///
/// Terms iterate in lexicographic (k, j) order. Setting a coefficient to zero
/// removes the term.
class Expansion {
 public:
  using Level = std::vector<int>;
  using Block = std::map<std::vector<int>, double>;

  Expansion(int order, int dim);

  int order() const { return order_; }
  int dim() const { return dim_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  void set(const DyadicIndex& index, double coefficient);
  void add(const DyadicIndex& index, double coefficient);
  double coefficient(const DyadicIndex& index) const;
  bool contains(const DyadicIndex& index) const;

  const std::map<Level, Block>& levels() const { return levels_; }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [k, block] : levels_)
      for (const auto& [j, a] : block) fn(k, j, a);
  }

  Expansion scaled(double factor) const;

  /// Σ α_{k,j} M_{k,j}(x).
  double operator()(std::span<const double> x) const;

 private:
  int order_;
  int dim_;
  std::size_t size_ = 0;
  std::map<Level, Block> levels_;
};

double eval_expansion(const Expansion& e, std::span<const double> x);

/// Coefficient-sequence quasi-norm.
///
/// isotropic: { Σ_k [2^{k(s−d/p)} (Σ_j |α_{k,j}|^p)^{1/p}]^q }^{1/q}
/// mixed:     same with weight 2^{(s−1/p)‖k‖₁} over multi-levels k.
/// p or q = ∞ switch to the sup form. Throws on non-finite coefficients and,
/// in isotropic mode, on levels whose components differ.
double sequence_norm(const Expansion& e, const SpaceParams& params, NormMode mode);

/// Unweighted ℓ_p norm of each level block.
std::map<Expansion::Level, double> block_norms(const Expansion& e, double p);

/// Fast point evaluation of a fixed expansion. Each level is stored as a
/// dense box of coefficients when compact enough, otherwise hashed.
class ExpansionEvaluator {
 public:
  explicit ExpansionEvaluator(const Expansion& e);

  int dim() const { return dim_; }
  std::size_t level_count() const { return levels_.size(); }
  const Expansion::Level& level(std::size_t i) const { return levels_[i].k; }

  double operator()(std::span<const double> x) const;

  /// Writes the contribution of each level (in `level(i)` order) to `out`.
  void level_values(std::span<const double> x, std::span<double> out) const;

 private:
  struct LevelData {
    Expansion::Level k;
    std::vector<int> lo;
    std::vector<int> extent;
    std::vector<double> dense;
    std::unordered_map<long long, double> sparse;
    bool is_dense = true;
  };
  // Per coordinate and level: first candidate shift and the m+1 spline values.
  struct Table {
    std::vector<int> start;
    std::vector<double> vals;
  };
  void fill_table(std::span<const double> x, Table& table) const;
  double level_value(const LevelData& lv, const Table& table) const;

  int order_;
  int dim_;
  int max_level_ = 0;
  std::vector<LevelData> levels_;
};

nlohmann::json expansion_to_json(const Expansion& e);
Expansion expansion_from_json(const nlohmann::json& doc);

}  // namespace besov
