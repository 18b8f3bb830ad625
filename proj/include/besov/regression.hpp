#pragma once

// Regression model data, the clipped adaptive B-spline dictionary estimator,
// kernel ridge baselines, risk measurement and closed-form rate calculators.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "besov/approx.hpp"
#include "besov/bspline.hpp"
#include "besov/space_params.hpp"

namespace besov {

struct RegressionConfig {
  long long n = 0;
  double sigma = 0.0;
  double F = 1.0;
  std::uint64_t seed = 0;
  int d = 1;

  /// Throws std::invalid_argument unless n ≥ 1, σ ≥ 0, F ≥ 1, d ≥ 1.
  void validate() const;
};

/// Row-major inputs x (n × d) and responses y.
struct Dataset {
  int d = 1;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> point(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
};

/// x_i uniform on [0,1]^d, y_i = f0(x_i) + σ·ξ_i. Deterministic in the seed.
Dataset generate_data(const Function& f0, const RegressionConfig& cfg);

/// CSV with header x_1,…,x_d,y and "%.17g" values.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);

struct EstimatorReport {
  std::string method;
  Function estimate;
  long long dictionary_size = 0;
  double residual = 0.0;  ///< training mean squared error of the returned estimate
  bool clipped = false;
  double F = 0.0;
  double jitter = 0.0;  ///< ridge added to the Gram diagonal
  double lambda = 0.0;  ///< KRR only
  double bandwidth = 0.0;  ///< Gaussian KRR only
  nlohmann::json theory;  ///< optional sidecar
};

nlohmann::json report_to_json(const EstimatorReport& report);

/// Clipped least squares over an explicit dictionary. Jitter 1e-10 (relative
/// to the mean Gram diagonal) keeps the solve defined for rank-deficient
/// designs.
EstimatorReport fit_dictionary(const Dataset& data, int m, const std::vector<DyadicIndex>& dictionary,
                               double F);

/// Adaptive dictionary of at most N terms: full levels k ≤ K, then for
/// K < k ≤ K* a pilot least-squares fit of the running residual on all level-k
/// terms keeps the n_k largest; a joint least-squares refit over the selected
/// dictionary is clipped at ±F. Tail levels with more than n/points_per_term
/// terms are skipped (0 disables the cap).
EstimatorReport fit_adaptive_dictionary(const Dataset& data, const SpaceParams& params, long long N,
                                        double F, double points_per_term = 4.0);

/// Dictionary size used by the estimation experiments: ⌈c·n^{d/(2s+d)}⌉.
long long dictionary_budget(long long n, const SpaceParams& params, double c = 4.0);

enum class Kernel { gaussian, spline };

std::string kernel_name(Kernel k);

struct KrrOptions {
  double bandwidth = 0.05;     ///< Gaussian: exp(−‖x−x'‖²/(2h²))
  int landmarks = 512;         ///< Nyström rank above this many points
  std::uint64_t seed = 0x5eed;  ///< landmark choice
};

/// f̂(x) = k_{x,X}(k_{XX} + λI)^{−1}Y. The spline kernel (d = 1 only) is
/// k(x,x') = 1 + xx' + min²(3·max − min)/6, solved exactly in O(n) by a
/// state-space smoother. The Gaussian kernel is exact up to `landmarks`
/// points and Nyström-approximated above.
EstimatorReport fit_krr(const Dataset& data, Kernel kernel, double lambda,
                        const KrrOptions& options = {});

struct KrrCvOptions {
  std::vector<double> lambdas;     ///< empty: n·10^{−t}, t = 1, 1.5, …, 9
  std::vector<double> bandwidths;  ///< Gaussian only; empty: {0.005, 0.02, 0.08}
  int folds = 5;
  std::uint64_t seed = 0xc5;
  KrrOptions krr;
};

/// λ (and bandwidth) by K-fold cross-validation, then a refit on all data.
EstimatorReport fit_krr_cv(const Dataset& data, Kernel kernel, const KrrCvOptions& options = {});

struct RiskOptions {
  int cells_1d = 1 << 15;
  int cells_2d = 256;
  long long mc_samples = 200000;
  std::uint64_t seed = 0x715c;
};

struct RiskEstimate {
  double risk = 0.0;
  double std_error = 0.0;  ///< Monte Carlo only
  std::string method;      ///< "gauss" or "monte_carlo"
};

/// ∫(f̂ − f0)² over the uniform law on [0,1]^d: composite Gauss–Legendre for
/// d ≤ 2, Monte Carlo otherwise.
RiskEstimate empirical_l2_risk(const Function& fhat, const Function& f0, int d,
                               const RiskOptions& options = {});

/// 2SL·log(δ^{−1}L(B ∨ 1)(W+1)), natural log.
double covering_number_bound(long long L, long long W, double S, double B, double delta);

/// S·log(δ^{−1}L(B ∨ 1)^{L−1}(W+1)^{2L}), the sharper form of the same bound.
double covering_number_bound_sharp(long long L, long long W, double S, double B, double delta);

struct RiskBound {
  double bracket = 0.0;  ///< approx + F²(cover − log δ)/(nε) + δF²
  double bound = 0.0;    ///< (1+ε)²·bracket, universal constant taken as 1
};

RiskBound risk_bound(double approx_err, double cover_log, long long n, double F, double eps,
                     double delta);

enum class RateFamily {
  besov,           ///< n^{−2s/(2s+d)}
  mixed,           ///< n^{−2s/(2s+1)}·log(n)^{2(d−1)(u+s)/(1+2s)}
  mixed_second,    ///< n^{−(2s−2u·log₂e)/(2s+1+(1−2u)log₂e)}
  linear_lower,    ///< n^{−(2s−v)/(2s+1−v)}
  mixed_minimax,   ///< n^{−2s/(2s+1)}·log(n)^{2(d−1)(s+1/2−1/q)_+/(2s+1)}
  approx_adaptive,  ///< N^{−s/d}
  approx_linear,    ///< N^{−s/d+(1/p−1/r)_+}
};

struct RateParams {
  RateFamily family = RateFamily::besov;
  double s = 1.0, p = 2.0, q = 2.0, r = 2.0;
  int d = 1;

  /// (1 − 1/q)_+ for p ≥ 2, (1/2 − 1/q)_+ otherwise.
  double u() const;
  /// 2/(p ∧ 2) − 1
  double v() const;
};

struct RateValue {
  double value = 0.0;
  double exponent = 0.0;    ///< power of n (or N)
  double log_power = 0.0;   ///< power of log n multiplying it
};

/// Closed-form reference rate. The trailing log(n)² factors of the upper
/// bounds are not included. Throws std::invalid_argument on a family and
/// parameter mismatch (linear_lower needs d = 1, mixed_second needs s > u·log₂e).
RateValue rate_reference(const RateParams& params, double n_or_N);

std::string rate_family_name(RateFamily f);
RateFamily rate_family_from_name(const std::string& name);

}  // namespace besov
