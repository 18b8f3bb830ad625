#include "besov/regression.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "besov/rng.hpp"

namespace besov {

namespace {

constexpr double kJitter = 1e-10;

// Calls fn(j, value) for every level-k shift whose spline is nonzero at x.
template <class Fn>
void local_terms(std::span<const double> x, const Expansion::Level& k, int m, Fn&& fn) {
  const int d = static_cast<int>(k.size());
  int start[16];
  double vals[16][32];
  for (int i = 0; i < d; ++i) {
    const double t = std::ldexp(x[i], k[i]);
    const int cell = static_cast<int>(std::floor(t));
    start[i] = cell - m;
    for (int r = 0; r <= m; ++r) vals[i][r] = eval_cardinal(m, t - (start[i] + r));
  }
  std::vector<int> j(d);
  int digit[16] = {0};
  while (true) {
    double v = 1.0;
    for (int i = 0; i < d; ++i) {
      j[i] = start[i] + digit[i];
      v *= vals[i][digit[i]];
    }
    if (v != 0.0) fn(j, v);
    int pos = d - 1;
    while (pos >= 0 && ++digit[pos] == m + 1) digit[pos--] = 0;
    if (pos < 0) break;
  }
}

bool inside_active_range(const std::vector<int>& j, const Expansion::Level& k, int m) {
  for (std::size_t i = 0; i < j.size(); ++i)
    if (j[i] < -m || j[i] > (1 << k[i]) - 1) return false;
  return true;
}

std::vector<DyadicIndex> full_level(const Expansion::Level& k, int m) {
  std::vector<DyadicIndex> out;
  const int d = static_cast<int>(k.size());
  std::vector<int> j(d);
  for (int i = 0; i < d; ++i) j[i] = -m;
  while (true) {
    out.push_back({k, j});
    int pos = d - 1;
    while (pos >= 0 && ++j[pos] > (1 << k[pos]) - 1) j[pos--] = -m;
    if (pos < 0) break;
  }
  return out;
}

Function clipped_function(std::shared_ptr<const ExpansionEvaluator> ev, double F) {
  return [ev, F](std::span<const double> x) { return std::clamp((*ev)(x), -F, F); };
}

// Least squares of `target` on the columns of `dict` with relative jitter.
// Returns the coefficients in dictionary order.
Eigen::VectorXd dense_ls(const Dataset& data, int m, const std::vector<DyadicIndex>& dict,
                         const std::vector<double>& target, double* jitter_out) {
  const auto p = static_cast<Eigen::Index>(dict.size());
  std::map<Expansion::Level, std::map<std::vector<int>, Eigen::Index>> col;
  for (Eigen::Index c = 0; c < p; ++c) col[dict[c].k][dict[c].j] = c;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  std::vector<std::pair<Eigen::Index, double>> nz;
  for (std::size_t i = 0; i < data.size(); ++i) {
    nz.clear();
    const auto x = data.point(i);
    for (const auto& [k, cols] : col) {
      local_terms(x, k, m, [&](const std::vector<int>& j, double v) {
        const auto it = cols.find(j);
        if (it != cols.end()) nz.emplace_back(it->second, v);
      });
    }
    for (const auto& [a, va] : nz) {
      b(a) += va * target[i];
      for (const auto& [c, vc] : nz) G(a, c) += va * vc;
    }
  }
  const double mean_diag = p > 0 ? G.diagonal().mean() : 0.0;
  const double tau = kJitter * (mean_diag > 0.0 ? mean_diag : 1.0);
  G.diagonal().array() += tau;
  if (jitter_out) *jitter_out = tau;
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw std::runtime_error("least squares: Cholesky failed");
  return llt.solve(b);
}

// Pilot least squares of `target` on every level-k term touched by the data.
Expansion::Block level_pilot(const Dataset& data, int m, const Expansion::Level& k,
                             const std::vector<double>& target) {
  std::map<std::vector<int>, int> col;
  std::vector<std::vector<std::pair<int, double>>> rows(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    local_terms(data.point(i), k, m, [&](const std::vector<int>& j, double v) {
      if (!inside_active_range(j, k, m)) return;
      auto [it, fresh] = col.try_emplace(j, static_cast<int>(col.size()));
      rows[i].emplace_back(it->second, v);
    });
  }
  const int p = static_cast<int>(col.size());
  Expansion::Block out;
  if (p == 0) return out;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  double trace = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (const auto& [a, va] : rows[i]) {
      b(a) += va * target[i];
      trace += va * va;
      for (const auto& [c, vc] : rows[i]) trip.emplace_back(a, c, va * vc);
    }
  const double tau = kJitter * trace / p;
  for (int c = 0; c < p; ++c) trip.emplace_back(c, c, tau);
  Eigen::SparseMatrix<double> G(p, p);
  G.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(G);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pilot fit: factorization failed");
  const Eigen::VectorXd a = solver.solve(b);
  for (const auto& [j, c] : col) out[j] = a(c);
  return out;
}

double training_mse(const Dataset& data, const Function& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data.y[i] - f(data.point(i));
    acc += r * r;
  }
  return data.size() ? acc / static_cast<double>(data.size()) : 0.0;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

// ---- cubic-spline kernel via a state-space smoother -------------------------

// Posterior mean of the prior f(x) = a + bx + ∫₀^x (x−t)dW(t), a, b ~ N(0, 1),
// observed with noise variance λ; stored as (f, f') at sorted nodes.
struct SplineFit {
  std::vector<double> node, f, df;

  double operator()(double x) const {
    if (x <= node.front()) return f.front() + df.front() * (x - node.front());
    if (x >= node.back()) return f.back() + df.back() * (x - node.back());
    const auto i = static_cast<std::size_t>(
        std::upper_bound(node.begin(), node.end(), x) - node.begin() - 1);
    const double h = node[i + 1] - node[i];
    const double t = (x - node[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f[i] + (t3 - 2 * t2 + t) * h * df[i] +
           (-2 * t3 + 3 * t2) * f[i + 1] + (t3 - t2) * h * df[i + 1];
  }
};

SplineFit spline_smoother(const std::vector<double>& xs, const std::vector<double>& ys,
                          double lambda) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  struct Node {
    double x, ysum = 0.0;
    int count = 0;
  };
  std::vector<Node> nodes;
  nodes.push_back({std::min(0.0, xs.empty() ? 0.0 : xs[order.front()])});
  for (auto i : order) {
    if (xs[i] != nodes.back().x) nodes.push_back({xs[i]});
    nodes.back().ysum += ys[i];
    ++nodes.back().count;
  }
  if (nodes.back().x < 1.0) nodes.push_back({1.0});

  using V2 = Eigen::Vector2d;
  using M2 = Eigen::Matrix2d;
  const std::size_t n = nodes.size();
  std::vector<V2> mf(n), mp(n);
  std::vector<M2> Pf(n), Pp(n);
  V2 m = V2::Zero();
  M2 P = M2::Identity();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double h = nodes[i].x - nodes[i - 1].x;
      M2 A;
      A << 1.0, h, 0.0, 1.0;
      M2 Q;
      Q << h * h * h / 3.0, h * h / 2.0, h * h / 2.0, h;
      m = A * m;
      P = A * P * A.transpose() + Q;
    }
    mp[i] = m;
    Pp[i] = P;
    if (nodes[i].count > 0) {
      const double R = lambda / nodes[i].count;
      const double ybar = nodes[i].ysum / nodes[i].count;
      const double S = P(0, 0) + R;
      const V2 K = P.col(0) / S;
      m += K * (ybar - m(0));
      P -= K * P.row(0);
      P = 0.5 * (P + P.transpose());
    }
    mf[i] = m;
    Pf[i] = P;
  }
  SplineFit out;
  out.node.resize(n);
  out.f.resize(n);
  out.df.resize(n);
  V2 ms = mf[n - 1];
  for (std::size_t i = n; i-- > 0;) {
    if (i + 1 < n) {
      const double h = nodes[i + 1].x - nodes[i].x;
      M2 A;
      A << 1.0, h, 0.0, 1.0;
      const M2 G = Pf[i] * A.transpose() * Pp[i + 1].inverse();
      ms = mf[i] + G * (ms - mp[i + 1]);
    }
    out.node[i] = nodes[i].x;
    out.f[i] = ms(0);
    out.df[i] = ms(1);
  }
  return out;
}


// ---- Gaussian kernel ---------------------------------------------------------

struct GaussianModel {
  int d = 1;
  double h = 0.05;
  std::vector<double> centers;  // row-major, sorted by the first coordinate when d = 1
  std::vector<double> beta;

  double operator()(std::span<const double> x) const {
    const std::size_t nc = beta.size();
    const double inv = 1.0 / (2.0 * h * h);
    double acc = 0.0;
    if (d == 1) {
      const double reach = 9.0 * h;
      auto lo = std::lower_bound(centers.begin(), centers.end(), x[0] - reach) - centers.begin();
      for (auto c = static_cast<std::size_t>(lo); c < nc && centers[c] <= x[0] + reach; ++c) {
        const double t = x[0] - centers[c];
        acc += beta[c] * std::exp(-t * t * inv);
      }
      return acc;
    }
    for (std::size_t c = 0; c < nc; ++c)
      acc += beta[c] * std::exp(-sq_dist(x, {centers.data() + c * d, static_cast<std::size_t>(d)}) * inv);
    return acc;
  }
};

Eigen::MatrixXd gaussian_cross(const Dataset& data, const std::vector<std::size_t>& rows,
                               const std::vector<double>& centers, int d, double h) {
  const std::size_t nc = centers.size() / d;
  Eigen::MatrixXd K(rows.size(), nc);
  const double inv = 1.0 / (2.0 * h * h);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto x = data.point(rows[r]);
    for (std::size_t c = 0; c < nc; ++c)
      K(r, c) = std::exp(-sq_dist(x, {centers.data() + c * d, static_cast<std::size_t>(d)}) * inv);
  }
  return K;
}

// PᵀP from a symmetric rank update.
Eigen::MatrixXd gram(const Eigen::MatrixXd& P) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P.cols(), P.cols());
  G.selfadjointView<Eigen::Lower>().rankUpdate(P.transpose());
  return G.selfadjointView<Eigen::Lower>();
}

std::vector<double> pick_landmarks(const Dataset& data, int count, std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < idx.size() && i < static_cast<std::size_t>(count); ++i) {
    const auto j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min<std::size_t>(idx.size(), count));
  if (data.d == 1) {
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return data.x[a] < data.x[b]; });
  }
  std::vector<double> out;
  for (auto i : idx)
    for (double v : data.point(i)) out.push_back(v);
  return out;
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> r(data.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// Exact Gaussian KRR on the given rows: centers are the rows themselves.
GaussianModel gaussian_exact(const Dataset& data, const std::vector<std::size_t>& rows, double lambda,
                             double h) {
  GaussianModel model;
  model.d = data.d;
  model.h = h;
  std::vector<std::size_t> sorted = rows;
  if (data.d == 1) {
    std::sort(sorted.begin(), sorted.end(), [&](auto a, auto b) { return data.x[a] < data.x[b]; });
  }
  for (auto i : sorted)
    for (double v : data.point(i)) model.centers.push_back(v);
  Eigen::MatrixXd K = gaussian_cross(data, sorted, model.centers, data.d, h);
  K.diagonal().array() += lambda;
  Eigen::VectorXd y(sorted.size());
  for (std::size_t r = 0; r < sorted.size(); ++r) y(r) = data.y[sorted[r]];
  Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  const auto D = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || (lambda == 0.0 && !ldlt.isPositive()) ||
      D.minCoeff() <= 1e-14 * D.maxCoeff()) {
    throw std::runtime_error("fit_krr: singular Gram matrix");
  }
  const Eigen::VectorXd beta = ldlt.solve(y);
  if (!beta.allFinite()) throw std::runtime_error("fit_krr: singular Gram matrix");
  model.beta.assign(beta.data(), beta.data() + beta.size());
  return model;
}

// Nyström system pieces for a fixed landmark set.
struct NystromSystem {
  Eigen::MatrixXd G;    // ΦᵀΦ
  Eigen::VectorXd b;    // Φᵀy
  Eigen::MatrixXd Kzz;  // landmark Gram
};

double nystrom_jitter(const NystromSystem& sys) {
  return kJitter * std::max(sys.G.diagonal().mean(), 1e-300);
}

GaussianModel nystrom_solve(const NystromSystem& sys, const std::vector<double>& centers, int d,
                            double h, double lambda) {
  Eigen::MatrixXd A = sys.G + lambda * sys.Kzz;
  A.diagonal().array() += nystrom_jitter(sys);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const Eigen::VectorXd beta = ldlt.solve(sys.b);
  GaussianModel model;
  model.d = d;
  model.h = h;
  model.centers = centers;
  model.beta.assign(beta.data(), beta.data() + beta.size());
  return model;
}

// Solves (G + τI + λ·Kzz)β = b for many λ from one factorization:
// G + τI = LLᵀ and L⁻¹KzzL⁻ᵀ = QΘQᵀ give β = L⁻ᵀQ(I + λΘ)⁻¹QᵀL⁻¹b.
class NystromPath {
 public:
  explicit NystromPath(const NystromSystem& sys) {
    Eigen::MatrixXd Gj = sys.G;
    Gj.diagonal().array() += nystrom_jitter(sys);
    const Eigen::LLT<Eigen::MatrixXd> llt(Gj);
    const auto L = llt.matrixL();
    Eigen::MatrixXd M = L.solve(sys.Kzz);
    M = L.solve(M.transpose()).eval();
    M = 0.5 * (M + M.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    theta_ = eig.eigenvalues();
    // Back-substitution basis L⁻ᵀQ and projected right-hand side QᵀL⁻¹b.
    basis_ = llt.matrixU().solve(eig.eigenvectors());
    rhs_ = eig.eigenvectors().transpose() * L.solve(sys.b);
  }

  Eigen::VectorXd solve(double lambda) const {
    const Eigen::VectorXd scaled =
        rhs_.array() / (1.0 + lambda * theta_.array().max(0.0));
    return basis_ * scaled;
  }

 private:
  Eigen::VectorXd theta_, rhs_;
  Eigen::MatrixXd basis_;
};

double held_out_mse(const Dataset& data, const std::vector<std::size_t>& rows, const Function& f) {
  double acc = 0.0;
  for (auto i : rows) {
    const double r = data.y[i] - f(data.point(i));
    acc += r * r;
  }
  return acc / static_cast<double>(std::max<std::size_t>(rows.size(), 1));
}

EstimatorReport finish_krr(const Dataset& data, Kernel kernel, double lambda, double h,
                           Function f) {
  EstimatorReport rep;
  rep.method = "krr_" + kernel_name(kernel);
  rep.estimate = std::move(f);
  rep.lambda = lambda;
  rep.bandwidth = kernel == Kernel::gaussian ? h : 0.0;
  rep.dictionary_size = static_cast<long long>(data.size());
  rep.residual = training_mse(data, rep.estimate);
  return rep;
}

Function spline_function(SplineFit fit) {
  auto shared = std::make_shared<const SplineFit>(std::move(fit));
  return [shared](std::span<const double> x) { return (*shared)(x[0]); };
}

Function gaussian_function(GaussianModel model) {
  auto shared = std::make_shared<const GaussianModel>(std::move(model));
  return [shared](std::span<const double> x) { return (*shared)(x); };
}

}  // namespace

void RegressionConfig::validate() const {
  if (n < 1) throw std::invalid_argument("RegressionConfig: n must be >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("RegressionConfig: sigma must be >= 0");
  if (!(F >= 1.0)) throw std::invalid_argument("RegressionConfig: F must be >= 1");
  if (d < 1) throw std::invalid_argument("RegressionConfig: d must be >= 1");
}

Dataset generate_data(const Function& f0, const RegressionConfig& cfg) {
  cfg.validate();
  Dataset data;
  data.d = cfg.d;
  data.x.resize(static_cast<std::size_t>(cfg.n) * cfg.d);
  data.y.resize(static_cast<std::size_t>(cfg.n));
  Rng inputs(cfg.seed, 1), noise(cfg.seed, 2);
  for (double& v : data.x) v = inputs.uniform();
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    const double xi = noise.normal();
    data.y[i] = f0(data.point(i)) + cfg.sigma * xi;
  }
  return data;
}

std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream out;
  for (int i = 0; i < data.d; ++i) out << "x_" << i + 1 << ',';
  out << "y\n";
  char buf[32];
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.point(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", data.y[r]);
    out << buf << '\n';
  }
  return out.str();
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset csv: missing header");
  const auto cols = std::count(line.begin(), line.end(), ',') + 1;
  if (cols < 2) throw std::invalid_argument("dataset csv: need at least one input column");
  Dataset data;
  data.d = static_cast<int>(cols - 1);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<long>(vals.size()) != cols) throw std::invalid_argument("dataset csv: ragged row");
    data.x.insert(data.x.end(), vals.begin(), vals.end() - 1);
    data.y.push_back(vals.back());
  }
  return data;
}

nlohmann::json report_to_json(const EstimatorReport& r) {
  nlohmann::json j{{"method", r.method},         {"dictionary_size", r.dictionary_size},
                   {"residual", r.residual},     {"clipped", r.clipped},
                   {"F", r.F},                   {"jitter", r.jitter},
                   {"lambda", r.lambda},         {"bandwidth", r.bandwidth}};
  if (!r.theory.is_null()) j["theory"] = r.theory;
  return j;
}

EstimatorReport fit_dictionary(const Dataset& data, int m, const std::vector<DyadicIndex>& dict,
                               double F) {
  if (data.size() == 0) throw std::invalid_argument("fit_dictionary: empty data");
  if (!(F >= 1.0)) throw std::invalid_argument("fit_dictionary: F must be >= 1");
  for (const auto& idx : dict) {
    validate_index(idx, m);
    if (idx.dim() != data.d) throw std::invalid_argument("fit_dictionary: dimension mismatch");
  }
  EstimatorReport rep;
  rep.method = "adaptive_dictionary";
  rep.F = F;
  rep.clipped = true;
  rep.dictionary_size = static_cast<long long>(dict.size());
  Expansion e(m, data.d);
  if (!dict.empty()) {
    const Eigen::VectorXd a = dense_ls(data, m, dict, data.y, &rep.jitter);
    for (std::size_t c = 0; c < dict.size(); ++c) e.set(dict[c], a(static_cast<Eigen::Index>(c)));
  }
  rep.estimate = clipped_function(std::make_shared<const ExpansionEvaluator>(e), F);
  rep.residual = training_mse(data, rep.estimate);
  return rep;
}

EstimatorReport fit_adaptive_dictionary(const Dataset& data, const SpaceParams& params, long long N,
                                        double F, double points_per_term) {
  if (data.size() == 0) throw std::invalid_argument("fit_adaptive_dictionary: empty data");
  if (params.d != data.d) throw std::invalid_argument("fit_adaptive_dictionary: dimension mismatch");
  const AdaptiveBudget budget = nterm_budget(params, N);
  const int m = params.m, d = params.d;

  std::vector<DyadicIndex> dict;
  for (int k = 0; k <= budget.K; ++k) {
    const auto lv = full_level(Expansion::Level(d, k), m);
    dict.insert(dict.end(), lv.begin(), lv.end());
  }
  // Running residual of the coarse fit; each tail level is fitted against it.
  std::vector<double> resid = data.y;
  auto subtract = [&](const std::vector<DyadicIndex>& cols) {
    const Eigen::VectorXd a = dense_ls(data, m, cols, resid, nullptr);
    Expansion part(m, d);
    for (std::size_t c = 0; c < cols.size(); ++c) part.set(cols[c], a(static_cast<Eigen::Index>(c)));
    const ExpansionEvaluator ev(part);
    for (std::size_t i = 0; i < data.size(); ++i) resid[i] -= ev(data.point(i));
  };
  subtract(dict);
  for (const auto& [k, nk] : budget.n_k) {
    if (points_per_term > 0.0 &&
        static_cast<double>(active_level_size(Expansion::Level(d, k), m)) * points_per_term > static_cast<double>(data.size()))
      continue;
    const Expansion::Level lv(d, k);
    const auto pilot = level_pilot(data, m, lv, resid);
    std::vector<DyadicIndex> chosen;
    for (const auto& j : select_largest(pilot, nk)) chosen.push_back({lv, j});
    if (chosen.empty()) continue;
    subtract(chosen);
    dict.insert(dict.end(), chosen.begin(), chosen.end());
  }
  EstimatorReport rep = fit_dictionary(data, m, dict, F);
  rep.theory = {{"budget", budget_to_json(budget)}};
  return rep;
}

long long dictionary_budget(long long n, const SpaceParams& params, double c) {
  return static_cast<long long>(
      std::ceil(c * std::pow(static_cast<double>(n), params.d / (2.0 * params.s + params.d))));
}

std::string kernel_name(Kernel k) { return k == Kernel::gaussian ? "gaussian" : "spline"; }

EstimatorReport fit_krr(const Dataset& data, Kernel kernel, double lambda, const KrrOptions& options) {
  if (data.size() == 0) throw std::invalid_argument("fit_krr: empty data");
  if (!(lambda >= 0.0)) throw std::invalid_argument("fit_krr: lambda must be >= 0");
  if (kernel == Kernel::spline) {
    if (data.d != 1) throw std::invalid_argument("fit_krr: the spline kernel needs d = 1");
    if (lambda == 0.0) {
      std::vector<double> xs = data.x;
      std::sort(xs.begin(), xs.end());
      if (std::adjacent_find(xs.begin(), xs.end()) != xs.end()) {
        throw std::runtime_error("fit_krr: singular Gram matrix (duplicate inputs at lambda = 0)");
      }
    }
    return finish_krr(data, kernel, lambda, 0.0, spline_function(spline_smoother(data.x, data.y, lambda)));
  }
  const double h = options.bandwidth;
  if (!(h > 0.0)) throw std::invalid_argument("fit_krr: bandwidth must be > 0");
  if (static_cast<long long>(data.size()) <= options.landmarks) {
    return finish_krr(data, kernel, lambda, h, gaussian_function(gaussian_exact(data, all_rows(data), lambda, h)));
  }
  const auto centers = pick_landmarks(data, options.landmarks, options.seed);
  const Eigen::MatrixXd Phi = gaussian_cross(data, all_rows(data), centers, data.d, h);
  NystromSystem sys;
  sys.G = gram(Phi);
  sys.b = Phi.transpose() * Eigen::Map<const Eigen::VectorXd>(data.y.data(), data.y.size());
  Dataset lm;
  lm.d = data.d;
  lm.x = centers;
  lm.y.assign(centers.size() / data.d, 0.0);
  sys.Kzz = gaussian_cross(lm, all_rows(lm), centers, data.d, h);
  return finish_krr(data, kernel, lambda, h, gaussian_function(nystrom_solve(sys, centers, data.d, h, lambda)));
}

EstimatorReport fit_krr_cv(const Dataset& data, Kernel kernel, const KrrCvOptions& options) {
  const std::size_t n = data.size();
  if (n < static_cast<std::size_t>(options.folds) || options.folds < 2) {
    throw std::invalid_argument("fit_krr_cv: need at least `folds` >= 2 points");
  }
  std::vector<double> lambdas = options.lambdas;
  if (lambdas.empty())
    for (double t = 1.0; t <= 9.0 + 1e-9; t += 0.5) lambdas.push_back(n * std::pow(10.0, -t));
  std::vector<double> widths = options.bandwidths;
  if (widths.empty()) widths = {0.005, 0.02, 0.08};
  if (kernel == Kernel::spline) widths = {0.0};

  // Deterministic fold assignment by a seeded shuffle.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(options.seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<std::vector<std::size_t>> test(options.folds), train(options.folds);
  for (std::size_t r = 0; r < n; ++r) test[r % options.folds].push_back(perm[r]);
  for (int f = 0; f < options.folds; ++f) {
    for (int g = 0; g < options.folds; ++g)
      if (g != f) train[f].insert(train[f].end(), test[g].begin(), test[g].end());
    std::sort(train[f].begin(), train[f].end());
  }
  auto subset = [&](const std::vector<std::size_t>& rows) {
    Dataset s;
    s.d = data.d;
    for (auto i : rows) {
      for (double v : data.point(i)) s.x.push_back(v);
      s.y.push_back(data.y[i]);
    }
    return s;
  };

  double best = kInf, best_lambda = lambdas.front(), best_h = widths.front();
  for (double h : widths) {
    std::vector<double> cv(lambdas.size(), 0.0);
    const bool nystrom =
        kernel == Kernel::gaussian && static_cast<long long>(n) > options.krr.landmarks;
    if (nystrom) {
      const auto centers = pick_landmarks(data, options.krr.landmarks, options.krr.seed);
      Dataset lm;
      lm.d = data.d;
      lm.x = centers;
      lm.y.assign(centers.size() / data.d, 0.0);
      const Eigen::MatrixXd Kzz = gaussian_cross(lm, all_rows(lm), centers, data.d, h);
      const Eigen::MatrixXd Phi = gaussian_cross(data, all_rows(data), centers, data.d, h);
      std::vector<Eigen::MatrixXd> Pf(options.folds), Gf(options.folds);
      std::vector<Eigen::VectorXd> yf(options.folds), bf(options.folds);
      Eigen::MatrixXd Gall = Eigen::MatrixXd::Zero(Phi.cols(), Phi.cols());
      Eigen::VectorXd ball = Eigen::VectorXd::Zero(Phi.cols());
      for (int f = 0; f < options.folds; ++f) {
        Pf[f].resize(test[f].size(), Phi.cols());
        yf[f].resize(test[f].size());
        for (std::size_t r = 0; r < test[f].size(); ++r) {
          Pf[f].row(r) = Phi.row(test[f][r]);
          yf[f](r) = data.y[test[f][r]];
        }
        Gf[f] = gram(Pf[f]);
        bf[f] = Pf[f].transpose() * yf[f];
        Gall += Gf[f];
        ball += bf[f];
      }
      for (int f = 0; f < options.folds; ++f) {
        const NystromPath path(NystromSystem{Gall - Gf[f], ball - bf[f], Kzz});
        for (std::size_t l = 0; l < lambdas.size(); ++l) {
          const Eigen::VectorXd beta = path.solve(lambdas[l] * (options.folds - 1.0) / options.folds);
          cv[l] += (yf[f] - Pf[f] * beta).squaredNorm();
        }
      }
    } else if (kernel == Kernel::gaussian) {
      // Exact path: one eigendecomposition of the training Gram per fold.
      for (int f = 0; f < options.folds; ++f) {
        const auto& tr = train[f];
        std::vector<double> pts;
        for (auto i : tr)
          for (double v : data.point(i)) pts.push_back(v);
        const Eigen::MatrixXd Ktr = gaussian_cross(data, tr, pts, data.d, h);
        const Eigen::MatrixXd Kte = gaussian_cross(data, test[f], pts, data.d, h);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Ktr);
        Eigen::VectorXd ytr(tr.size()), yte(test[f].size());
        for (std::size_t r = 0; r < tr.size(); ++r) ytr(r) = data.y[tr[r]];
        for (std::size_t r = 0; r < test[f].size(); ++r) yte(r) = data.y[test[f][r]];
        const Eigen::VectorXd uy = eig.eigenvectors().transpose() * ytr;
        const Eigen::MatrixXd KU = Kte * eig.eigenvectors();
        const double scale = (options.folds - 1.0) / options.folds;
        for (std::size_t l = 0; l < lambdas.size(); ++l) {
          const Eigen::VectorXd c =
              uy.array() / (eig.eigenvalues().array().max(0.0) + lambdas[l] * scale);
          cv[l] += (yte - KU * c).squaredNorm();
        }
      }
    } else {
      for (int f = 0; f < options.folds; ++f) {
        const Dataset tr = subset(train[f]);
        const double scale = (options.folds - 1.0) / options.folds;
        for (std::size_t l = 0; l < lambdas.size(); ++l) {
          const auto rep = fit_krr(tr, kernel, lambdas[l] * scale, options.krr);
          cv[l] += held_out_mse(data, test[f], rep.estimate) * static_cast<double>(test[f].size());
        }
      }
    }
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      if (cv[l] < best) {
        best = cv[l];
        best_lambda = lambdas[l];
        best_h = h;
      }
    }
  }
  KrrOptions o = options.krr;
  if (kernel == Kernel::gaussian) o.bandwidth = best_h;
  EstimatorReport rep = fit_krr(data, kernel, best_lambda, o);
  rep.theory = {{"cv_mse", best / static_cast<double>(n)}, {"folds", options.folds}};
  return rep;
}

RiskEstimate empirical_l2_risk(const Function& fhat, const Function& f0, int d,
                               const RiskOptions& options) {
  if (d < 1) throw std::invalid_argument("empirical_l2_risk: d must be >= 1");
  // 4-point Gauss–Legendre on [0, 1].
  static constexpr double a = 0.3399810435848563, b = 0.8611363115940526;
  static constexpr double wa = 0.6521451548625461, wb = 0.3478548451374538;
  static constexpr double nodes[4] = {0.5 * (1 - b), 0.5 * (1 - a), 0.5 * (1 + a), 0.5 * (1 + b)};
  static constexpr double weights[4] = {0.5 * wb, 0.5 * wa, 0.5 * wa, 0.5 * wb};
  RiskEstimate out;
  if (d <= 2) {
    out.method = "gauss";
    const int cells = d == 1 ? options.cells_1d : options.cells_2d;
    const double h = 1.0 / cells;
    double acc = 0.0;
    std::vector<double> x(d);
    if (d == 1) {
      for (int c = 0; c < cells; ++c)
        for (int q = 0; q < 4; ++q) {
          x[0] = (c + nodes[q]) * h;
          const double e = fhat(x) - f0(x);
          acc += weights[q] * h * e * e;
        }
    } else {
      for (int c0 = 0; c0 < cells; ++c0)
        for (int c1 = 0; c1 < cells; ++c1)
          for (int q0 = 0; q0 < 4; ++q0)
            for (int q1 = 0; q1 < 4; ++q1) {
              x[0] = (c0 + nodes[q0]) * h;
              x[1] = (c1 + nodes[q1]) * h;
              const double e = fhat(x) - f0(x);
              acc += weights[q0] * weights[q1] * h * h * e * e;
            }
    }
    out.risk = acc;
    return out;
  }
  out.method = "monte_carlo";
  Rng rng(options.seed);
  std::vector<double> x(d);
  double mean = 0.0, m2 = 0.0;
  for (long long t = 0; t < options.mc_samples; ++t) {
    for (double& v : x) v = rng.uniform();
    const double e = fhat(x) - f0(x);
    const double v = e * e;
    const double delta = v - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (v - mean);
  }
  out.risk = mean;
  const auto ns = static_cast<double>(options.mc_samples);
  out.std_error = ns > 1 ? std::sqrt(m2 / (ns - 1.0) / ns) : 0.0;
  return out;
}

double covering_number_bound(long long L, long long W, double S, double B, double delta) {
  if (L < 1 || W < 1 || !(S > 0.0) || !(B > 0.0) || !(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("covering_number_bound: need positive sizes and delta in (0, 1]");
  }
  return 2.0 * S * L * std::log(L * std::max(B, 1.0) * (W + 1.0) / delta);
}

double covering_number_bound_sharp(long long L, long long W, double S, double B, double delta) {
  if (L < 1 || W < 1 || !(S > 0.0) || !(B > 0.0) || !(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("covering_number_bound: need positive sizes and delta in (0, 1]");
  }
  return S * (std::log(L / delta) + (L - 1.0) * std::log(std::max(B, 1.0)) +
              2.0 * L * std::log(W + 1.0));
}

RiskBound risk_bound(double approx_err, double cover_log, long long n, double F, double eps,
                     double delta) {
  if (!(approx_err >= 0.0) || !(cover_log >= 0.0) || n < 1 || !(F > 0.0) ||
      !(eps > 0.0 && eps <= 1.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("risk_bound: invalid arguments");
  }
  RiskBound r;
  r.bracket = approx_err + F * F * (cover_log - std::log(delta)) / (static_cast<double>(n) * eps) +
              delta * F * F;
  r.bound = (1.0 + eps) * (1.0 + eps) * r.bracket;
  return r;
}

double RateParams::u() const {
  return p >= 2.0 ? positive_part(1.0 - reciprocal(q)) : positive_part(0.5 - reciprocal(q));
}

double RateParams::v() const { return 2.0 / std::min(p, 2.0) - 1.0; }

RateValue rate_reference(const RateParams& rp, double n) {
  if (!(rp.s > 0.0) || rp.d < 1 || !(rp.p > 0.0) || !(rp.q > 0.0) || !(n > 1.0)) {
    throw std::invalid_argument("rate_reference: invalid parameters");
  }
  const double s = rp.s, d = rp.d, log2e = std::numbers::log2e;
  RateValue out;
  switch (rp.family) {
    case RateFamily::besov:
      out.exponent = -2.0 * s / (2.0 * s + d);
      break;
    case RateFamily::mixed:
      out.exponent = -2.0 * s / (2.0 * s + 1.0);
      out.log_power = 2.0 * (d - 1.0) * (rp.u() + s) / (1.0 + 2.0 * s);
      break;
    case RateFamily::mixed_second: {
      const double u = rp.u();
      if (!(s > u * log2e)) throw std::invalid_argument("rate_reference: need s > u·log2(e)");
      out.exponent = -(2.0 * s - 2.0 * u * log2e) / (2.0 * s + 1.0 + (1.0 - 2.0 * u) * log2e);
      break;
    }
    case RateFamily::linear_lower: {
      if (rp.d != 1) throw std::invalid_argument("rate_reference: linear_lower needs d = 1");
      const double v = rp.v();
      out.exponent = -(2.0 * s - v) / (2.0 * s + 1.0 - v);
      break;
    }
    case RateFamily::mixed_minimax:
      out.exponent = -2.0 * s / (2.0 * s + 1.0);
      out.log_power = 2.0 * (d - 1.0) * positive_part(s + 0.5 - reciprocal(rp.q)) / (2.0 * s + 1.0);
      break;
    case RateFamily::approx_adaptive:
      out.exponent = -s / d;
      break;
    case RateFamily::approx_linear:
      out.exponent = -s / d + positive_part(reciprocal(rp.p) - reciprocal(rp.r));
      break;
  }
  out.value = std::pow(n, out.exponent) * std::pow(std::log(n), out.log_power);
  return out;
}

std::string rate_family_name(RateFamily f) {
  switch (f) {
    case RateFamily::besov: return "besov";
    case RateFamily::mixed: return "mixed";
    case RateFamily::mixed_second: return "mixed_second";
    case RateFamily::linear_lower: return "linear_lower";
    case RateFamily::mixed_minimax: return "mixed_minimax";
    case RateFamily::approx_adaptive: return "approx_adaptive";
    case RateFamily::approx_linear: return "approx_linear";
  }
  return "besov";
}

RateFamily rate_family_from_name(const std::string& name) {
  for (auto f : {RateFamily::besov, RateFamily::mixed, RateFamily::mixed_second,
                 RateFamily::linear_lower, RateFamily::mixed_minimax, RateFamily::approx_adaptive,
                 RateFamily::approx_linear})
    if (rate_family_name(f) == name) return f;
  throw std::invalid_argument("unknown rate family: " + name);
}

}  // namespace besov
