#pragma once

// Experiment driver: target corpus, configuration, deterministic runs over
// (seed, grid value, method) cells, log-log slope fits and CSV/JSON output.

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "besov/approx.hpp"
#include "besov/space_params.hpp"

namespace besov {

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

/// Ordinary least squares on (log₂ x, log₂ y). Throws std::invalid_argument
/// for fewer than 2 points, nonpositive values or a single distinct x.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

struct TargetSpec {
  std::string name = "spike-train";
  double radius = 1.0;
  int max_level = 24;
  int dense_max_level = 12;  ///< spike-train only; −1 for no limit
  double spike_share = 0.5;
  int spikes_per_level = 1;
  bool grade_normalized = false;
  /// Fixed target seed; unset draws one target per run seed.
  std::optional<std::uint64_t> seed;
};

struct CorpusFunction {
  std::string name;
  SpaceParams space;           ///< claimed membership
  double radius = 0.0;         ///< sequence norm of the expansion
  std::string certification;   ///< how membership is established
  std::shared_ptr<const Expansion> expansion;
  Function f;
};

/// Corpus entries: "spike-train", "besov-ball", "smooth-sine", "tensor-prod",
/// "additive". Each is an explicit B-spline expansion rescaled so that its
/// sequence norm equals spec.radius. Throws std::invalid_argument for an
/// unknown name.
CorpusFunction make_corpus(const TargetSpec& spec, const SpaceParams& space, std::uint64_t seed);

std::vector<std::string> corpus_names();

enum class ExperimentKind { approx_rate, estimate_rate, compile_verify };

std::string kind_name(ExperimentKind k);
ExperimentKind kind_from_name(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::approx_rate;
  SpaceParams space;
  /// N (approx, isotropic), K (approx, mixed), n (estimate) or N (compile).
  std::vector<long long> grid;
  std::vector<std::uint64_t> seeds;
  TargetSpec target;
  /// approx: adaptive, linear (isotropic); sparse_grid, full_grid (mixed).
  /// estimate: adaptive, krr_gaussian, krr_spline. compile: compiled.
  std::vector<std::string> methods;
  double sigma = 0.1;
  double F = 1.0;
  double dictionary_c = 4.0;
  double points_per_term = 4.0;
  long long mc_samples = 200000;  ///< error integrals by Monte Carlo (d ≥ 3)
  bool timing = true;             ///< false writes wall_ms = 0
  int threads = 1;
  std::string output;

  /// Throws std::invalid_argument on an invalid configuration.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys take the defaults above; "schema" must be 1.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  /// FNV-1a of the canonical JSON, 16 hex digits. `output` and `threads`
  /// are excluded.
  std::string hash() const;
};

struct ResultRow {
  std::string kind;
  std::string method;
  long long n_or_N = 0;
  std::uint64_t seed = 0;
  double error = 0.0;
  /// estimate: training MSE; approx: number of terms; compile: the
  /// guaranteed bound eps_unit·Σ|α|.
  double fit_residual = 0.0;
  double wall_ms = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  ///< seed-major, then grid, then method
  nlohmann::json summary;
  bool interrupted = false;
  std::vector<std::uint64_t> completed_seeds;
};

struct RunControl {
  /// Polled between seeds; when set the run stops with partial results.
  const std::atomic<bool>* stop = nullptr;
  /// Rows from an earlier interrupted run; seeds fully present are reused.
  std::vector<ResultRow> resume_rows;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunControl& control = {});

/// Per method: mean error per grid value, slope of the mean curve, median of
/// per-seed slopes and the reference exponent.
nlohmann::json summarize(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows);

std::string rows_to_csv(const std::vector<ResultRow>& rows);
/// Throws std::invalid_argument on a header or field mismatch.
std::vector<ResultRow> rows_from_csv(const std::string& text);

}  // namespace besov
