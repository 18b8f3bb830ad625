#pragma once

// Synthetic Besov / mixed-Besov targets, quasi-interpolation, adaptive N-term
// selection, sparse grids and L^r error measurement.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "besov/bspline.hpp"
#include "besov/space_params.hpp"

namespace besov {

/// D_{K,d} = (1 + (d−1)/K)^K (1 + K/(d−1))^{d−1}; 1 for d = 1.
/// Throws for K < 1 or d < 1.
double dkd(int K, int d);

/// Shifts j ∈ {−m, …, 2^k − 1} whose support meets (0, 1): 2^k + m of them.
long long active_shift_count(int k, int m);

/// Π_i (2^{k_i} + m)
long long active_level_size(const Expansion::Level& k, int m);

struct AdaptiveBudget {
  bool mixed = false;
  long long N = 0;
  int K = 0;
  int K_star = 0;
  double nu = 0.0;
  double delta = 0.0;
  double C1 = 0.0;
  double lambda = 0.0;
  /// Isotropic: level k → n_k. Mixed: grade ‖k‖₁ → n_k for each multi-level
  /// of that grade.
  std::map<int, long long> n_k;
  long long full_terms = 0;  ///< terms in the fully kept levels
  long long tail_terms = 0;  ///< Σ of the tail allowances

  long long total() const { return full_terms + tail_terms; }
};

/// Isotropic N-term budget: K is the largest level whose full levels fit in
/// N/2 (all of N when δ = 0, where the tail is empty), C1 is reported so that
/// K = ⌈C1·ln N/d⌉, and λ is the largest value with
/// Σ_{k≤K}(2^k+m)^d + Σ_{K<k≤K*} ⌈λN·2^{−ν(k−K)}⌉ ≤ N,
/// K* = ⌈ln(λN)/ν⌉ + K + 1. Throws when N cannot hold level 0.
AdaptiveBudget nterm_budget(const SpaceParams& params, long long N);

/// Mixed budget for base grade K: n_k = ⌈2^{K − ν(‖k‖₁ − K)}⌉ on the band
/// K < ‖k‖₁ ≤ K* with K* = ⌈K(1 + 2δ/(s − δ))⌉.
AdaptiveBudget sparse_grid_budget(const SpaceParams& params, int K);

/// Throws std::invalid_argument unless the budget meets its defining
/// constraint (Σ ≤ N in the isotropic case).
void validate_budget(const AdaptiveBudget& budget);

nlohmann::json budget_to_json(const AdaptiveBudget& budget);

struct SampleOptions {
  /// Share of each block's ℓ_p mass placed on a few isolated spikes.
  double spike_share = 0.5;
  int spikes_per_level = 1;
  /// Levels above this carry spikes only (−1: no limit).
  int dense_max_level = -1;
  /// Mixed mode: split each grade's weight evenly over its multi-levels.
  bool grade_normalized = false;
};

/// Random expansion on levels 0..max_level (isotropic) or ‖k‖₁ ≤ max_level
/// (mixed) with equal weighted block norms, rescaled so that its sequence
/// norm equals `radius`. Deterministic in the seed.
Expansion sample_besov_function(const SpaceParams& params, double radius, int max_level,
                                std::uint64_t seed, const SampleOptions& options = {});

using Function = std::function<double(std::span<const double>)>;

/// Discrete least-squares projection of f onto the isotropic level-k spline
/// space, using max(4·2^k, 2(2^k + m)) midpoint samples per axis.
Expansion quasi_interpolate(const Function& f, int k, const SpaceParams& params);

/// Re-expresses one isotropic level-k block at level k+1 through
/// 𝒩_m(x) = 2^{−m} Σ_i C(m+1, i) 𝒩_m(2x − i); shifts that miss (0, 1) are
/// dropped.
Expansion refine_level(const Expansion& block, int k);

/// Σ_k p_k with p_k = P_k f − P_{k−1} f expressed on level k, k ≤ max_level.
Expansion multilevel_decomposition(const Function& f, int max_level, const SpaceParams& params);

/// Keeps all levels with max_i k_i ≤ K.
Expansion truncate_levels(const Expansion& e, int K);

/// Keeps all multi-levels with ‖k‖₁ ≤ K.
Expansion truncate_grade(const Expansion& e, int K);

/// Largest K with Σ_{k≤K} (2^k+m)^d ≤ N (−1 if none).
int linear_level_for_budget(long long N, int m, int d);

/// Indices of the n largest |α| in a block, ties broken by ascending shift.
std::vector<std::vector<int>> select_largest(const Expansion::Block& block, long long n);

struct Selection {
  Expansion approx;
  bool truncated = false;  ///< input had no levels beyond K* to draw from
  long long tail_terms = 0;
};

/// Full copy of levels k ≤ K, the n_k largest terms of levels K < k ≤ K*.
Selection adaptive_nterm(const Expansion& e, const AdaptiveBudget& budget);

/// {k ∈ ℕ^d : ‖k‖₁ ≤ K}, graded by ‖k‖₁ and, within a grade, in decreasing
/// lexicographic order.
std::vector<Expansion::Level> sparse_grid_index_set(int K, int d);

/// Number of new functions level k adds to the span of coarser levels:
/// Π_i w(k_i) with w(0) = m + 1 and w(k) = 2^{k−1}.
long long hierarchical_level_dimension(const Expansion::Level& k, int m);

/// dim span{M_{k,j} : ‖k‖₁ ≤ K}, the sum of hierarchical level dimensions.
long long sparse_grid_dimension(int K, int d, int m);

/// dim span{M_{k,j} : max_i k_i ≤ K} = (2^K + m)^d.
long long full_grid_dimension(int K, int d, int m);

/// Full retention for ‖k‖₁ ≤ K, greedy n_k terms per multi-level on the band
/// K < ‖k‖₁ ≤ K*, nothing beyond.
Selection adaptive_sparse_grid(const Expansion& e, int K, const SpaceParams& params);

/// a − b
Expansion difference(const Expansion& a, const Expansion& b);

struct LrOptions {
  std::uint64_t seed = 0x1a2b3c;
  long long mc_samples = 200000;
  int grid_1d = 1 << 14;
  int grid_2d = 512;
};

/// ‖e‖_{L^r([0,1]^d)}. d = 1: composite Gauss–Legendre on dyadic cells refined
/// down to the finest level present (exact for r = 2). d = 2: midpoint rule.
/// d ≥ 3: Monte Carlo. r = ∞ takes the max over the nodes.
double lr_norm(const Expansion& e, double r, const LrOptions& options = {});

/// Monte Carlo L^r norms of Σ_{levels not kept} p_k for several keep-rules in
/// one pass over the sample points.
std::vector<double> truncation_errors(
    const Expansion& e, const std::vector<std::function<bool(const Expansion::Level&)>>& keep,
    double r, const LrOptions& options = {});

}  // namespace besov
