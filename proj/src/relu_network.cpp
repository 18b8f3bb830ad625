#include "besov/relu_network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace besov {

AffineLayer::AffineLayer(int in_dim, int out_dim, std::vector<Triplet> weights,
                         std::vector<double> bias)
    : in_dim_(in_dim), out_dim_(out_dim), bias_(std::move(bias)) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("AffineLayer: empty dimension");
  if (static_cast<int>(bias_.size()) != out_dim) {
    throw std::invalid_argument("AffineLayer: bias length differs from out_dim");
  }
  for (double b : bias_)
    if (!std::isfinite(b)) throw std::invalid_argument("AffineLayer: non-finite bias");
  std::sort(weights.begin(), weights.end(), [](const Triplet& x, const Triplet& y) {
    return x.row != y.row ? x.row < y.row : x.col < y.col;
  });
  row_ptr_.assign(out_dim + 1, 0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const Triplet& t = weights[i];
    if (t.row < 0 || t.row >= out_dim || t.col < 0 || t.col >= in_dim) {
      throw std::invalid_argument("AffineLayer: triplet outside the matrix");
    }
    if (!std::isfinite(t.value)) throw std::invalid_argument("AffineLayer: non-finite weight");
    if (i > 0 && weights[i - 1].row == t.row && weights[i - 1].col == t.col) {
      throw std::invalid_argument("AffineLayer: duplicate triplet");
    }
    if (t.value == 0.0) continue;
    col_.push_back(t.col);
    val_.push_back(t.value);
    ++row_ptr_[t.row + 1];
  }
  for (int r = 0; r < out_dim; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

AffineLayer AffineLayer::identity(int n) {
  std::vector<Triplet> w;
  w.reserve(n);
  for (int i = 0; i < n; ++i) w.push_back({i, i, 1.0});
  return AffineLayer(n, n, std::move(w), std::vector<double>(n, 0.0));
}

std::vector<Triplet> AffineLayer::triplets() const {
  std::vector<Triplet> out;
  out.reserve(val_.size());
  for (int r = 0; r < out_dim_; ++r)
    for (int i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) out.push_back({r, col_[i], val_[i]});
  return out;
}

void AffineLayer::apply(std::span<const double> in, std::span<double> out) const {
  for (int r = 0; r < out_dim_; ++r) {
    double acc = bias_[r];
    for (int i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) acc += val_[i] * in[col_[i]];
    out[r] = acc;
  }
}

SparseNetwork::SparseNetwork(std::vector<AffineLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("SparseNetwork: no layers");
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (layers_[l - 1].out_dim() != layers_[l].in_dim()) {
      throw std::invalid_argument("SparseNetwork: layer " + std::to_string(l) +
                                  " input dimension does not chain");
    }
  }
}

void SparseNetwork::forward(std::span<const double> x, std::vector<double>& a,
                            std::vector<double>& b) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw std::invalid_argument("evaluate: input has dimension " + std::to_string(x.size()) +
                                ", network expects " + std::to_string(input_dim()));
  }
  a.assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    b.resize(layer.out_dim());
    layer.apply(a, b);
    const bool last = l + 1 == layers_.size();
    for (double& v : b) {
      if (!std::isfinite(v)) {
        throw std::domain_error("evaluate: non-finite value after layer " + std::to_string(l));
      }
      if (!last && v < 0.0) v = 0.0;
    }
    std::swap(a, b);
  }
}

std::vector<double> SparseNetwork::evaluate(std::span<const double> x) const {
  std::vector<double> a, b;
  forward(x, a, b);
  return a;
}

double SparseNetwork::evaluate_scalar(std::span<const double> x) const {
  thread_local std::vector<double> a, b;
  forward(x, a, b);
  return a.front();
}

SizeReport SparseNetwork::size_report() const {
  SizeReport r;
  r.L = depth();
  for (const auto& layer : layers_) {
    r.W = std::max({r.W, layer.in_dim(), layer.out_dim()});
    r.S += static_cast<long long>(layer.nonzero_weights());
    for (double v : layer.values()) r.B = std::max(r.B, std::abs(v));
    for (double v : layer.bias()) {
      if (v != 0.0) ++r.S;
      r.B = std::max(r.B, std::abs(v));
    }
  }
  return r;
}

double SparseNetwork::max_row_sum() const {
  double out = 0.0;
  for (const auto& layer : layers_) {
    const auto& rp = layer.row_ptr();
    for (int r = 0; r < layer.out_dim(); ++r) {
      double s = 0.0;
      for (int i = rp[r]; i < rp[r + 1]; ++i) s += std::abs(layer.values()[i]);
      out = std::max(out, s);
    }
  }
  return out;
}

namespace {

// [W; −W], [b; −b]: both halves pass η, and z = η(z) − η(−z).
AffineLayer split_signs(const AffineLayer& layer) {
  std::vector<Triplet> w;
  const int n = layer.out_dim();
  for (const Triplet& t : layer.triplets()) {
    w.push_back(t);
    w.push_back({t.row + n, t.col, -t.value});
  }
  std::vector<double> b(layer.bias());
  for (int i = 0; i < n; ++i) b.push_back(-layer.bias()[i]);
  return AffineLayer(layer.in_dim(), 2 * n, std::move(w), std::move(b));
}

// Reads the (pos, neg) pair produced by split_signs: columns c and c+n with
// opposite signs.
AffineLayer join_signs(const AffineLayer& layer) {
  std::vector<Triplet> w;
  const int n = layer.in_dim();
  for (const Triplet& t : layer.triplets()) {
    w.push_back(t);
    w.push_back({t.row, t.col + n, -t.value});
  }
  return AffineLayer(2 * n, layer.out_dim(), std::move(w), layer.bias());
}

// Sparse product of two layers applied back to back without activation:
// x ↦ Wb (Wa x + ba) + bb.
AffineLayer compose(const AffineLayer& first, const AffineLayer& second) {
  if (first.out_dim() != second.in_dim()) {
    throw std::invalid_argument("merge_affine: output and input dimensions differ");
  }
  std::vector<std::map<int, double>> rows_a(first.out_dim());
  for (const Triplet& t : first.triplets()) rows_a[t.row][t.col] = t.value;
  std::vector<Triplet> w;
  std::vector<double> b(second.bias());
  const auto& rp = second.row_ptr();
  for (int r = 0; r < second.out_dim(); ++r) {
    std::map<int, double> acc;
    for (int i = rp[r]; i < rp[r + 1]; ++i) {
      const int mid = second.cols()[i];
      const double v = second.values()[i];
      for (const auto& [c, u] : rows_a[mid]) acc[c] += v * u;
      b[r] += v * first.bias()[mid];
    }
    for (const auto& [c, v] : acc) w.push_back({r, c, v});
  }
  return AffineLayer(first.in_dim(), second.out_dim(), std::move(w), std::move(b));
}

AffineLayer block_diag(const AffineLayer& a, const AffineLayer& b) {
  std::vector<Triplet> w = a.triplets();
  for (const Triplet& t : b.triplets()) w.push_back({t.row + a.out_dim(), t.col + a.in_dim(), t.value});
  std::vector<double> bias(a.bias());
  bias.insert(bias.end(), b.bias().begin(), b.bias().end());
  return AffineLayer(a.in_dim() + b.in_dim(), a.out_dim() + b.out_dim(), std::move(w),
                     std::move(bias));
}

}  // namespace

SparseNetwork combine_serial(const SparseNetwork& a, const SparseNetwork& b, Junction junction) {
  if (a.output_dim() != b.input_dim()) {
    throw std::invalid_argument("combine_serial: output dimension " +
                                std::to_string(a.output_dim()) + " does not match input " +
                                std::to_string(b.input_dim()));
  }
  std::vector<AffineLayer> layers(a.layers());
  if (junction == Junction::signed_pair) {
    layers.back() = split_signs(layers.back());
    layers.push_back(join_signs(b.layers().front()));
  } else {
    layers.push_back(b.layers().front());
  }
  layers.insert(layers.end(), b.layers().begin() + 1, b.layers().end());
  return SparseNetwork(std::move(layers));
}

SparseNetwork merge_affine(const SparseNetwork& a, const SparseNetwork& b) {
  std::vector<AffineLayer> layers(a.layers().begin(), a.layers().end() - 1);
  layers.push_back(compose(a.layers().back(), b.layers().front()));
  layers.insert(layers.end(), b.layers().begin() + 1, b.layers().end());
  return SparseNetwork(std::move(layers));
}

SparseNetwork pad_to_depth(const SparseNetwork& net, int depth, bool nonnegative_outputs) {
  const int extra = depth - net.depth();
  if (extra < 0) throw std::invalid_argument("pad_to_depth: network already deeper");
  if (extra == 0) return net;
  const int n = net.output_dim();
  std::vector<AffineLayer> layers(net.layers());
  if (nonnegative_outputs) {
    for (int i = 0; i < extra; ++i) layers.push_back(AffineLayer::identity(n));
  } else {
    layers.back() = split_signs(layers.back());
    for (int i = 1; i < extra; ++i) layers.push_back(AffineLayer::identity(2 * n));
    layers.push_back(join_signs(AffineLayer::identity(n)));
  }
  return SparseNetwork(std::move(layers));
}

SparseNetwork combine_parallel(const SparseNetwork& a, const SparseNetwork& b,
                               bool nonnegative_outputs) {
  const int depth = std::max(a.depth(), b.depth());
  const SparseNetwork pa = pad_to_depth(a, depth, nonnegative_outputs);
  const SparseNetwork pb = pad_to_depth(b, depth, nonnegative_outputs);
  std::vector<AffineLayer> layers;
  for (int l = 0; l < depth; ++l) layers.push_back(block_diag(pa.layers()[l], pb.layers()[l]));
  return SparseNetwork(std::move(layers));
}

SparseNetwork combine_parallel(const std::vector<SparseNetwork>& nets, bool nonnegative_outputs) {
  if (nets.empty()) throw std::invalid_argument("combine_parallel: no networks");
  int depth = 0;
  for (const auto& n : nets) depth = std::max(depth, n.depth());
  std::vector<SparseNetwork> padded;
  padded.reserve(nets.size());
  for (const auto& n : nets) padded.push_back(pad_to_depth(n, depth, nonnegative_outputs));
  std::vector<AffineLayer> layers;
  for (int l = 0; l < depth; ++l) {
    int in = 0, out = 0;
    std::vector<Triplet> w;
    std::vector<double> bias;
    for (const auto& n : padded) {
      const AffineLayer& layer = n.layers()[l];
      for (const Triplet& t : layer.triplets()) w.push_back({t.row + out, t.col + in, t.value});
      bias.insert(bias.end(), layer.bias().begin(), layer.bias().end());
      in += layer.in_dim();
      out += layer.out_dim();
    }
    layers.emplace_back(in, out, std::move(w), std::move(bias));
  }
  return SparseNetwork(std::move(layers));
}

SparseNetwork share_inputs(const SparseNetwork& net, int shared_dim) {
  if (shared_dim < 1 || net.input_dim() % shared_dim != 0) {
    throw std::invalid_argument("share_inputs: input dimension is not a multiple of shared_dim");
  }
  std::vector<AffineLayer> layers(net.layers());
  const AffineLayer& first = layers.front();
  std::map<std::pair<int, int>, double> cells;
  for (const Triplet& t : first.triplets()) cells[{t.row, t.col % shared_dim}] += t.value;
  std::vector<Triplet> w;
  for (const auto& [rc, v] : cells) w.push_back({rc.first, rc.second, v});
  layers.front() = AffineLayer(shared_dim, first.out_dim(), std::move(w), first.bias());
  return SparseNetwork(std::move(layers));
}

SparseNetwork scale_output(const SparseNetwork& net, double factor) {
  std::vector<AffineLayer> layers(net.layers());
  const AffineLayer& last = layers.back();
  std::vector<Triplet> w = last.triplets();
  for (auto& t : w) t.value *= factor;
  std::vector<double> b(last.bias());
  for (double& v : b) v *= factor;
  layers.back() = AffineLayer(last.in_dim(), last.out_dim(), std::move(w), std::move(b));
  return SparseNetwork(std::move(layers));
}

SparseNetwork identity_network(int n) { return SparseNetwork({AffineLayer::identity(n)}); }

SparseNetwork zero_network(int in_dim, int out_dim) {
  return SparseNetwork({AffineLayer(in_dim, out_dim, {}, std::vector<double>(out_dim, 0.0))});
}

nlohmann::json network_to_json(const SparseNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    nlohmann::json w = nlohmann::json::array();
    for (const Triplet& t : layer.triplets()) w.push_back({t.row, t.col, t.value});
    layers.push_back({{"in", layer.in_dim()}, {"out", layer.out_dim()}, {"w", w}, {"b", layer.bias()}});
  }
  return {{"layers", layers}};
}

SparseNetwork network_from_json(const nlohmann::json& doc) {
  std::vector<AffineLayer> layers;
  for (const auto& l : doc.at("layers")) {
    std::vector<Triplet> w;
    for (const auto& t : l.at("w")) {
      w.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>()});
    }
    layers.emplace_back(l.at("in").get<int>(), l.at("out").get<int>(), std::move(w),
                        l.at("b").get<std::vector<double>>());
  }
  return SparseNetwork(std::move(layers));
}

nlohmann::json size_report_to_json(const SizeReport& r) {
  return {{"L", r.L}, {"W", r.W}, {"S", r.S}, {"B", r.B}};
}

}  // namespace besov
