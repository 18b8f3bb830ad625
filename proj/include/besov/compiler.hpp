#pragma once

// ReLU gadgets (clipping, squaring, multiplication), the approximate tensor
// B-spline unit and compilation of whole expansions into one network.

#include <string>

#include <json.hpp>

#include "besov/bspline.hpp"
#include "besov/relu_network.hpp"
#include "besov/space_params.hpp"

namespace besov {

/// c_{(d,m)} = 1 / (1 + 2·d·e·(2e)^m / √m)
double compiler_constant(int d, int m);

struct CompilerConstants {
  double c_dm = 0.0;
  double eps_unit = 0.0;
  int square_depth = 0;  ///< sawtooth iterations in the pairwise products
};

/// Lemma-level size bounds for one unit at accuracy eps:
/// L_0 = 3 + 2⌈log₂(3^{d∨m}/(ε c_{(d,m)})) + 5⌉·⌈log₂(d∨m)⌉,
/// W_0 = 6dm(m+2) + 2d, S_0 = L_0·W_0², B_0 = 2(m+1)^m.
SizeReport unit_size_bound(int d, int m, double eps);

/// Depth bound ⌈log₂(3^D/ε) + 5⌉·⌈log₂ D⌉ for the product of D inputs.
int mult_depth_bound(int D, double eps);

/// φ_{(0,M)}(x) = η(x) − η(x − M); exact. Throws for M ≤ 0.
SparseNetwork build_clip(double M);

/// Sawtooth approximation of t ↦ t² on [0, 1] with `depth` tent iterations:
/// error in [0, 2^{−2·depth−2}], exact at 0. depth + 1 layers, width 3.
SparseNetwork build_square(int depth);

/// Approximate product of two inputs in [0, 1] via polarization. Output is
/// clipped to [0, 1], vanishes exactly when either input is exactly 0 and is
/// within 2^{−2·depth−2} of xy.
SparseNetwork build_pair_product(int depth);

/// Sawtooth depth used by build_mult(D, eps).
int mult_square_depth(int D, double eps);

/// Balanced binary tree of pair products: |output − ∏x_i| ≤ eps on [0,1]^D,
/// output in [0, 1], exactly 0 when any input is exactly 0.
/// Throws for D < 2, eps ∉ [1e-12, 1).
SparseNetwork build_mult(int D, double eps);

struct UnitResult {
  SparseNetwork net;
  SizeReport size;
  SizeReport bound;  ///< (L_0, W_0, S_0, B_0)
  CompilerConstants constants;
};

/// Approximates M^d_{0,0} = ∏ 𝒩_m(x_i) to sup error eps on ℝ^d; the network
/// vanishes exactly outside [0, m+1]^d. Throws for d < 1, m < 1,
/// m > 12 or eps ∉ [1e-12, 1).
UnitResult build_bspline_unit(int d, int m, double eps);

/// Result of a sup-norm check against a reference function.
struct Certificate {
  double eps = 0.0;
  double max_error = 0.0;
  std::string method;  ///< "grid" or "monte_carlo"
  long long points = 0;
  int grid = 0;        ///< points per axis for the grid method
  bool passed = false;
};

/// Grid sup (201^d on [−1, m+2]^d, d ≤ 2) or 10^5 uniform probes (d ≥ 3)
/// of |M^d_{0,0} − net|.
Certificate certify_unit(const SparseNetwork& net, int d, int m, double eps);

/// f̌ = Σ α_{k,j} M̌(2^k x − j). Every unit is accurate to eps_unit, so
/// |f̌ − f| ≤ eps_unit·Σ|α| pointwise. Empty expansions give the zero network.
SparseNetwork compile_expansion(const Expansion& e, double eps_unit);

nlohmann::json certificate_to_json(const Certificate& c, const CompilerConstants& k,
                                   const SizeReport& budget);

struct ArchitectureBudget {
  long long L = 0;
  long long W = 0;
  double S = 0.0;  ///< may exceed 2^63 for large N
  double B = 0.0;  ///< order-level, constant taken as 1
  double eps_unit = 0.0;
  long long N = 0;
  int K = 0;       ///< mixed mode only
  int K_star = 0;  ///< mixed mode only
  int W0 = 0;
};

/// K* = ⌈K(1 + 2δ/(s − δ))⌉ (δ = 0 gives K* = K).
int mixed_kstar(const SpaceParams& params, int K);

/// (2 + (1 − 2^{−ν})^{−1})·2^K·D_{K*,d}; with δ = 0 the middle factor is 1.
double mixed_unit_count(const SpaceParams& params, int K);

/// S = (L − 1)·W_0²·N + N
double network_sparsity(long long L, long long W0, long long N);

/// Isotropic: ε = N^{−s/d − (1/ν + 1/d)(d/p − s)_+}/ln N, depth from the unit
/// formula at that ε, W = N·W_0, S = (L−1)W_0²N + N,
/// B ~ N^{(1/ν + 1/d)(1 ∨ (d/p − s)_+)}.
/// Mixed: K is the largest K ≥ 1 whose unit count fits in N, K* and ε follow.
/// Throws std::invalid_argument on invalid parameters or N too small.
ArchitectureBudget architecture_budget(const SpaceParams& params, long long N);

}  // namespace besov
