#pragma once

// Sparse feed-forward ReLU networks: layers are affine maps, η(z) = max(z, 0)
// is applied between consecutive layers and never after the last one.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace besov {

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// y = W x + b with W stored row-compressed, columns ascending within a row.
class AffineLayer {
 public:
  AffineLayer() = default;

  /// Throws std::invalid_argument on out-of-range or duplicate cells and
  /// non-finite values. Explicit zeros are dropped.
  AffineLayer(int in_dim, int out_dim, std::vector<Triplet> weights, std::vector<double> bias);

  /// Dense identity of size n with zero bias.
  static AffineLayer identity(int n);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  const std::vector<double>& bias() const { return bias_; }
  std::vector<Triplet> triplets() const;
  std::size_t nonzero_weights() const { return val_.size(); }

  /// Row r occupies [row_ptr()[r], row_ptr()[r+1]) of cols()/values().
  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return col_; }
  const std::vector<double>& values() const { return val_; }

  /// out = W in + b; summation per row starts at the bias and adds terms in
  /// ascending column order.
  void apply(std::span<const double> in, std::span<double> out) const;

 private:
  int in_dim_ = 0;
  int out_dim_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_;
  std::vector<double> val_;
  std::vector<double> bias_;
};

/// (L, W, S, B) of a concrete network.
struct SizeReport {
  int L = 0;        ///< number of affine layers
  int W = 0;        ///< max over all layer input/output dimensions
  long long S = 0;  ///< nonzero weights plus nonzero biases
  double B = 0.0;   ///< max absolute parameter

  /// Componentwise ≤.
  bool within(const SizeReport& target) const {
    return L <= target.L && W <= target.W && S <= target.S && B <= target.B;
  }
};

class SparseNetwork {
 public:
  SparseNetwork() = default;
  /// Throws std::invalid_argument when adjacent dimensions do not chain or
  /// the layer list is empty.
  explicit SparseNetwork(std::vector<AffineLayer> layers);

  const std::vector<AffineLayer>& layers() const { return layers_; }
  int depth() const { return static_cast<int>(layers_.size()); }
  int input_dim() const { return layers_.front().in_dim(); }
  int output_dim() const { return layers_.back().out_dim(); }

  /// Forward pass. Throws std::invalid_argument on dimension mismatch and
  /// std::domain_error when an intermediate value is not finite.
  std::vector<double> evaluate(std::span<const double> x) const;

  /// First output; same semantics as evaluate.
  double evaluate_scalar(std::span<const double> x) const;

  SizeReport size_report() const;

  /// max_ℓ max_r Σ_c |W^(ℓ)_{r,c}|
  double max_row_sum() const;

 private:
  void forward(std::span<const double> x, std::vector<double>& a, std::vector<double>& b) const;
  std::vector<AffineLayer> layers_;
};

/// How the output of the first network enters the ReLU of a serial junction.
enum class Junction {
  /// Plain η between the networks; exact when the first network's outputs
  /// are nonnegative. L = La + Lb, S ≤ Sa + Sb.
  nonnegative,
  /// Outputs are split as z = η(z) − η(−z); exact for every input at the
  /// cost of doubling the junction width.
  signed_pair,
};

/// b ∘ a with a ReLU junction between the last layer of a and the first of b.
SparseNetwork combine_serial(const SparseNetwork& a, const SparseNetwork& b,
                             Junction junction = Junction::signed_pair);

/// b ∘ a with the last affine layer of a and the first of b multiplied into
/// one layer (no activation in between). L = La + Lb − 1.
SparseNetwork merge_affine(const SparseNetwork& a, const SparseNetwork& b);

/// Block-diagonal stack: inputs and outputs concatenated. The shallower
/// network is padded with identity layers: signed pairs in general, plain
/// ReLU identities when `nonnegative_outputs` promises that padding only
/// carries nonnegative values.
SparseNetwork combine_parallel(const SparseNetwork& a, const SparseNetwork& b,
                               bool nonnegative_outputs = false);

/// Stack of several networks in parallel (left to right).
SparseNetwork combine_parallel(const std::vector<SparseNetwork>& nets,
                               bool nonnegative_outputs = false);

/// Extends a network to `depth` layers without changing its function.
SparseNetwork pad_to_depth(const SparseNetwork& net, int depth, bool nonnegative_outputs = false);

/// Re-indexes the first layer so that column c reads input c mod `shared_dim`;
/// used to feed one x ∈ ℝ^d to a parallel stack of d-input networks.
SparseNetwork share_inputs(const SparseNetwork& net, int shared_dim);

/// Multiplies the last layer (weights and bias) by `factor`.
SparseNetwork scale_output(const SparseNetwork& net, double factor);

/// Single-layer networks.
SparseNetwork identity_network(int n);
SparseNetwork zero_network(int in_dim, int out_dim = 1);

nlohmann::json network_to_json(const SparseNetwork& net);
SparseNetwork network_from_json(const nlohmann::json& doc);

nlohmann::json size_report_to_json(const SizeReport& r);

}  // namespace besov
