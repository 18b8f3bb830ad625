#include "besov/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "besov/compiler.hpp"
#include "besov/regression.hpp"
#include "besov/rng.hpp"

namespace besov {

namespace {

constexpr long long kCorpusTermLimit = 200000;

SpaceParams one_dim(const SpaceParams& p) {
  SpaceParams q = p;
  q.d = 1;
  q.mixed = false;
  return q;
}

SampleOptions sample_options(const TargetSpec& spec) {
  SampleOptions o;
  o.spike_share = spec.spike_share;
  o.spikes_per_level = spec.spikes_per_level;
  o.dense_max_level = spec.dense_max_level;
  o.grade_normalized = spec.grade_normalized;
  return o;
}

long long dense_terms_1d(int L, int m) {
  long long t = 0;
  for (int k = 0; k <= L; ++k) t += active_shift_count(k, m);
  return t;
}

// Largest level whose dense 1-D factor keeps `copies(size)` under the limit.
template <class Copies>
int factor_level(int max_level, int m, Copies copies) {
  int L = 0;
  while (L < max_level && copies(dense_terms_1d(L + 1, m)) <= kCorpusTermLimit) ++L;
  return L;
}

Expansion rescale_to(const Expansion& e, const SpaceParams& space, double radius) {
  const double norm = sequence_norm(e, space, space.mode());
  if (!(norm > 0.0)) throw std::runtime_error("corpus: target has zero norm");
  return e.scaled(radius / norm);
}

Expansion tensor_product(const std::vector<Expansion>& factors, int m) {
  const int d = static_cast<int>(factors.size());
  Expansion out(m, d);
  DyadicIndex idx{std::vector<int>(d), std::vector<int>(d)};
  const auto walk = [&](auto&& self, int axis, double coef) -> void {
    if (axis == d) {
      out.set(idx, coef);
      return;
    }
    factors[axis].for_each([&](const Expansion::Level& k, const std::vector<int>& j, double a) {
      idx.k[axis] = k[0];
      idx.j[axis] = j[0];
      self(self, axis + 1, coef * a);
    });
  };
  walk(walk, 0, 1.0);
  return out;
}

// Σ_i g_i(x_i) using Σ_j M_{0,j} ≡ 1 on [0,1] along the other axes.
Expansion additive_sum(const std::vector<Expansion>& parts, int m) {
  const int d = static_cast<int>(parts.size());
  Expansion out(m, d);
  for (int axis = 0; axis < d; ++axis) {
    parts[axis].for_each([&](const Expansion::Level& k, const std::vector<int>& j, double a) {
      DyadicIndex idx{std::vector<int>(d, 0), std::vector<int>(d, -m)};
      idx.k[axis] = k[0];
      idx.j[axis] = j[0];
      const auto walk = [&](auto&& self, int other) -> void {
        if (other == d) {
          out.add(idx, a);
          return;
        }
        if (other == axis) return self(self, other + 1);
        for (idx.j[other] = -m; idx.j[other] <= 0; ++idx.j[other]) self(self, other + 1);
      };
      walk(walk, 0);
    });
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::set<std::string>& methods_for(ExperimentKind kind, bool mixed) {
  static const std::set<std::string> approx_iso{"adaptive", "linear"};
  static const std::set<std::string> approx_mixed{"adaptive", "sparse_grid", "full_grid"};
  static const std::set<std::string> estimate{"adaptive", "krr_gaussian", "krr_spline"};
  static const std::set<std::string> compile{"compiled"};
  switch (kind) {
    case ExperimentKind::approx_rate: return mixed ? approx_mixed : approx_iso;
    case ExperimentKind::estimate_rate: return estimate;
    case ExperimentKind::compile_verify: return compile;
  }
  return compile;
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// ---- per-seed tasks -----------------------------------------------------------

std::vector<ResultRow> approx_task(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& sp = cfg.space;
  const auto target = make_corpus(cfg.target, sp, cfg.target.seed.value_or(seed));
  const Expansion& e = *target.expansion;
  LrOptions lo;
  lo.mc_samples = cfg.mc_samples;
  lo.seed = Rng::mix(seed ^ 0x10a7);
  const std::string kind = kind_name(cfg.kind);
  std::vector<ResultRow> rows;
  if (!sp.mixed) {
    for (long long N : cfg.grid)
      for (const auto& method : cfg.methods) {
        const auto t0 = Clock::now();
        ResultRow row{kind, method, N, seed};
        if (method == "adaptive") {
          const auto sel = adaptive_nterm(e, nterm_budget(sp, N));
          row.error = lr_norm(difference(e, sel.approx), sp.r, lo);
          row.fit_residual = static_cast<double>(sel.approx.size());
        } else {
          const int K = linear_level_for_budget(N, sp.m, sp.d);
          row.error = lr_norm(difference(e, truncate_levels(e, K)), sp.r, lo);
          long long dim = 0;
          for (int k = 0; k <= K; ++k)
            dim += static_cast<long long>(std::pow(static_cast<double>(active_shift_count(k, sp.m)), sp.d));
          row.fit_residual = static_cast<double>(dim);
        }
        row.wall_ms = elapsed_ms(t0);
        rows.push_back(row);
      }
    return rows;
  }
  // Mixed: grid values are K; every method is charged the sparse-grid dimension.
  std::vector<std::function<bool(const Expansion::Level&)>> keep;
  std::vector<std::pair<std::size_t, std::size_t>> slot;  // (grid index, method index)
  std::map<std::pair<std::size_t, std::size_t>, ResultRow> done;
  for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
    const int K = static_cast<int>(cfg.grid[g]);
    const long long budget = sparse_grid_dimension(K, sp.d, sp.m);
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const auto& method = cfg.methods[mi];
      ResultRow row{kind, method, budget, seed};
      if (method == "sparse_grid") {
        keep.push_back([K](const Expansion::Level& k) { return std::accumulate(k.begin(), k.end(), 0) <= K; });
        row.fit_residual = static_cast<double>(budget);
      } else if (method == "full_grid") {
        int Kf = -1;
        while (full_grid_dimension(Kf + 1, sp.d, sp.m) <= budget) ++Kf;
        keep.push_back([Kf](const Expansion::Level& k) { return *std::max_element(k.begin(), k.end()) <= Kf; });
        row.fit_residual = Kf < 0 ? 0.0 : static_cast<double>(full_grid_dimension(Kf, sp.d, sp.m));
      } else {
        const auto t1 = Clock::now();
        const auto sel = adaptive_sparse_grid(e, K, sp);
        row.error = lr_norm(difference(e, sel.approx), sp.r, lo);
        row.fit_residual = static_cast<double>(sel.approx.size());
        row.wall_ms = elapsed_ms(t1);
        done[{g, mi}] = row;
        continue;
      }
      slot.push_back({g, mi});
      done[{g, mi}] = row;
    }
  }
  if (!keep.empty()) {
    const auto t1 = Clock::now();
    const auto errs = truncation_errors(e, keep, sp.r, lo);
    const double each = elapsed_ms(t1) / static_cast<double>(keep.size());
    for (std::size_t i = 0; i < slot.size(); ++i) {
      done[slot[i]].error = errs[i];
      done[slot[i]].wall_ms = each;
    }
  }
  for (auto& [key, row] : done) rows.push_back(row);
  return rows;
}

std::vector<ResultRow> estimate_task(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& sp = cfg.space;
  const auto target = make_corpus(cfg.target, sp, cfg.target.seed.value_or(seed));
  RiskOptions ro;
  ro.mc_samples = cfg.mc_samples;
  ro.seed = Rng::mix(seed ^ 0x715c);
  const std::string kind = kind_name(cfg.kind);
  std::vector<ResultRow> rows;
  for (long long n : cfg.grid) {
    RegressionConfig rc{n, cfg.sigma, cfg.F, Rng::mix(seed) + static_cast<std::uint64_t>(n), sp.d};
    const Dataset data = generate_data(target.f, rc);
    for (const auto& method : cfg.methods) {
      const auto t0 = Clock::now();
      EstimatorReport rep;
      if (method == "adaptive") {
        rep = fit_adaptive_dictionary(data, sp, dictionary_budget(n, sp, cfg.dictionary_c), cfg.F,
                                      cfg.points_per_term);
      } else {
        rep = fit_krr_cv(data, method == "krr_gaussian" ? Kernel::gaussian : Kernel::spline);
      }
      ResultRow row{kind, method, n, seed};
      row.error = empirical_l2_risk(rep.estimate, target.f, sp.d, ro).risk;
      row.fit_residual = rep.residual;
      row.wall_ms = elapsed_ms(t0);
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<ResultRow> compile_task(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& sp = cfg.space;
  const auto target = make_corpus(cfg.target, sp, cfg.target.seed.value_or(seed));
  const std::string kind = kind_name(cfg.kind);
  std::vector<ResultRow> rows;
  for (long long N : cfg.grid) {
    const auto t0 = Clock::now();
    const Expansion approx = sp.mixed ? adaptive_sparse_grid(*target.expansion, static_cast<int>(N), sp).approx
                                      : adaptive_nterm(*target.expansion, nterm_budget(sp, N)).approx;
    const double eps = architecture_budget(sp, sp.mixed ? sparse_grid_dimension(static_cast<int>(N), sp.d, sp.m) : N)
                           .eps_unit;
    const SparseNetwork net = compile_expansion(approx, eps);
    const ExpansionEvaluator ev(approx);
    double worst = 0.0, l1 = 0.0;
    approx.for_each([&](const auto&, const auto&, double a) { l1 += std::abs(a); });
    std::vector<double> x(sp.d);
    Rng rng(Rng::mix(seed ^ 0xc0de));
    const int probes = 4001;
    for (int i = 0; i < probes; ++i) {
      if (sp.d == 1) {
        x[0] = static_cast<double>(i) / (probes - 1);
      } else {
        for (double& v : x) v = rng.uniform();
      }
      worst = std::max(worst, std::abs(net.evaluate_scalar(x) - ev(x)));
    }
    for (const auto& method : cfg.methods) {
      ResultRow row{kind, method, N, seed};
      row.error = worst;
      row.fit_residual = eps * l1;
      row.wall_ms = elapsed_ms(t0);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace

// ---- rate fit -----------------------------------------------------------------

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw std::invalid_argument("fit_rate: need at least 2 points");
  for (const auto& [x, y] : points)
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("fit_rate: values must be positive");
  // Pairwise form of least squares on log ratios, so rescaling y by a power
  // of two leaves every term bit-identical.
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double a = std::log2(points[i].first / points[j].first);
      const double b = std::log2(points[i].second / points[j].second);
      sxx += a * a;
      sxy += a * b;
      syy += b * b;
    }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: need two distinct x values");
  RateFit out;
  out.slope = sxy / sxx;
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += std::log2(x);
    my += std::log2(y);
  }
  const double n = static_cast<double>(points.size());
  out.intercept = (my - out.slope * mx) / n;
  out.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return out;
}

// ---- corpus -------------------------------------------------------------------

std::vector<std::string> corpus_names() {
  return {"spike-train", "besov-ball", "smooth-sine", "tensor-prod", "additive"};
}

CorpusFunction make_corpus(const TargetSpec& spec, const SpaceParams& space, std::uint64_t seed) {
  space.validate();
  if (!(spec.radius > 0.0)) throw std::invalid_argument("corpus: radius must be > 0");
  if (spec.max_level < 0) throw std::invalid_argument("corpus: max_level must be >= 0");
  const int m = space.m, d = space.d;
  CorpusFunction out;
  out.name = spec.name;
  out.space = space;
  out.radius = spec.radius;
  Expansion e(m, d);
  if (spec.name == "spike-train" || spec.name == "besov-ball") {
    SampleOptions o = sample_options(spec);
    if (spec.name == "besov-ball") {
      o.spike_share = 0.0;
      o.dense_max_level = -1;
    }
    e = sample_besov_function(space, spec.radius, spec.max_level, seed, o);
    out.certification = "exact sequence norm";
  } else if (spec.name == "smooth-sine") {
    int L = 0;
    while (L < spec.max_level && std::pow(static_cast<double>(dense_terms_1d(L + 1, m)), d) <= kCorpusTermLimit) ++L;
    const Function f = [](std::span<const double> x) {
      double v = 1.0;
      for (double t : x) v *= std::sin(2.0 * std::numbers::pi * t) + 0.5;
      return v;
    };
    SpaceParams iso = space;
    iso.mixed = false;
    e = rescale_to(multilevel_decomposition(f, L, iso), space, spec.radius);
    out.certification = "analytic function; exact sequence norm of its multilevel decomposition";
  } else if (spec.name == "tensor-prod" || spec.name == "additive") {
    if (d > 1 && !space.mixed) {
      throw std::invalid_argument("corpus: " + spec.name + " needs mixed mode for d > 1");
    }
    const bool tensor = spec.name == "tensor-prod";
    const int L = tensor ? factor_level(spec.max_level, m,
                                        [d](long long t) { return static_cast<long long>(std::pow(static_cast<double>(t), d)); })
                         : factor_level(spec.max_level, m, [d, m](long long t) {
                             return d * t * static_cast<long long>(std::pow(m + 1.0, d - 1));
                           });
    std::vector<Expansion> factors;
    for (int i = 0; i < d; ++i)
      factors.push_back(sample_besov_function(one_dim(space), 1.0, L, Rng::mix(seed + i), sample_options(spec)));
    e = rescale_to(tensor ? tensor_product(factors, m) : additive_sum(factors, m), space, spec.radius);
    out.certification = "exact sequence norm";
  } else {
    throw std::invalid_argument("corpus: unknown target '" + spec.name + "'");
  }
  out.radius = sequence_norm(e, space, space.mode());
  auto shared = std::make_shared<const Expansion>(std::move(e));
  auto ev = std::make_shared<const ExpansionEvaluator>(*shared);
  out.expansion = shared;
  out.f = [ev](std::span<const double> x) { return (*ev)(x); };
  return out;
}

// ---- configuration ------------------------------------------------------------

std::string kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::approx_rate: return "approx_rate";
    case ExperimentKind::estimate_rate: return "estimate_rate";
    case ExperimentKind::compile_verify: return "compile_verify";
  }
  return "";
}

ExperimentKind kind_from_name(const std::string& name) {
  if (name == "approx_rate") return ExperimentKind::approx_rate;
  if (name == "estimate_rate") return ExperimentKind::estimate_rate;
  if (name == "compile_verify") return ExperimentKind::compile_verify;
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

void ExperimentConfig::validate() const {
  space.validate();
  if (grid.empty()) throw std::invalid_argument("config: grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0 || (grid[i] == 0 && !space.mixed))
      throw std::invalid_argument("config: grid values must be positive");
    if (i > 0 && grid[i] <= grid[i - 1]) throw std::invalid_argument("config: grid must be strictly increasing");
  }
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw std::invalid_argument("config: seeds must be distinct");
  if (methods.empty()) throw std::invalid_argument("config: methods must be nonempty");
  const auto& allowed = methods_for(kind, space.mixed);
  for (const auto& m : methods) {
    if (!allowed.count(m)) throw std::invalid_argument("config: method '" + m + "' not valid for " + kind_name(kind));
    if (m == "krr_spline" && space.d != 1) throw std::invalid_argument("config: krr_spline needs d = 1");
  }
  if (std::set<std::string>(methods.begin(), methods.end()).size() != methods.size())
    throw std::invalid_argument("config: methods must be distinct");
  const auto names = corpus_names();
  if (std::find(names.begin(), names.end(), target.name) == names.end())
    throw std::invalid_argument("config: unknown target '" + target.name + "'");
  if (!(target.radius > 0.0)) throw std::invalid_argument("config: target radius must be > 0");
  if (target.max_level < 0) throw std::invalid_argument("config: target max_level must be >= 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("config: sigma must be >= 0");
  if (!(F >= 1.0)) throw std::invalid_argument("config: F must be >= 1");
  if (!(dictionary_c > 0.0)) throw std::invalid_argument("config: dictionary_c must be > 0");
  if (!(points_per_term >= 0.0)) throw std::invalid_argument("config: points_per_term must be >= 0");
  if (mc_samples < 1) throw std::invalid_argument("config: mc_samples must be >= 1");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json t = {{"name", target.name},
                      {"radius", target.radius},
                      {"max_level", target.max_level},
                      {"dense_max_level", target.dense_max_level},
                      {"spike_share", target.spike_share},
                      {"spikes_per_level", target.spikes_per_level},
                      {"grade_normalized", target.grade_normalized}};
  t["seed"] = target.seed ? nlohmann::json(*target.seed) : nlohmann::json(nullptr);
  return {{"schema", 1},
          {"kind", kind_name(kind)},
          {"space",
           {{"s", space.s}, {"p", space.p}, {"q", space.q}, {"r", space.r}, {"d", space.d}, {"m", space.m},
            {"mixed", space.mixed}}},
          {"grid", grid},
          {"seeds", seeds},
          {"target", t},
          {"methods", methods},
          {"sigma", sigma},
          {"F", F},
          {"dictionary_c", dictionary_c},
          {"points_per_term", points_per_term},
          {"mc_samples", mc_samples},
          {"timing", timing},
          {"threads", threads},
          {"output", output}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  static const std::set<std::string> keys{"schema", "kind", "space", "grid", "seeds", "target", "methods",
                                          "sigma", "F", "dictionary_c", "points_per_term", "mc_samples",
                                          "timing", "threads", "output"};
  if (!doc.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [k, v] : doc.items())
    if (!keys.count(k)) throw std::invalid_argument("config: unknown key '" + k + "'");
  if (doc.value("schema", 0) != 1) throw std::invalid_argument("config: \"schema\" must be 1");
  try {
    ExperimentConfig c;
    c.kind = kind_from_name(doc.at("kind").get<std::string>());
    const auto& s = doc.at("space");
    c.space.s = s.value("s", c.space.s);
    c.space.p = s.value("p", c.space.p);
    c.space.q = s.value("q", c.space.q);
    c.space.r = s.value("r", c.space.r);
    c.space.d = s.value("d", c.space.d);
    c.space.m = s.value("m", c.space.m);
    c.space.mixed = s.value("mixed", c.space.mixed);
    c.grid = doc.at("grid").get<std::vector<long long>>();
    c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("target")) {
      const auto& t = doc["target"];
      if (t.is_string()) {
        c.target.name = t.get<std::string>();
      } else {
        c.target.name = t.value("name", c.target.name);
        c.target.radius = t.value("radius", c.target.radius);
        c.target.max_level = t.value("max_level", c.target.max_level);
        c.target.dense_max_level = t.value("dense_max_level", c.target.dense_max_level);
        c.target.spike_share = t.value("spike_share", c.target.spike_share);
        c.target.spikes_per_level = t.value("spikes_per_level", c.target.spikes_per_level);
        c.target.grade_normalized = t.value("grade_normalized", c.target.grade_normalized);
        if (t.contains("seed") && !t["seed"].is_null()) c.target.seed = t["seed"].get<std::uint64_t>();
      }
    }
    if (doc.contains("methods")) {
      c.methods = doc["methods"].get<std::vector<std::string>>();
    } else {
      const auto& all = methods_for(c.kind, c.space.mixed);
      if (c.kind == ExperimentKind::estimate_rate) {
        c.methods = {"adaptive", "krr_gaussian"};
        if (c.space.d == 1) c.methods.push_back("krr_spline");
      } else {
        c.methods.assign(all.begin(), all.end());
      }
    }
    c.sigma = doc.value("sigma", c.sigma);
    c.F = doc.value("F", c.F);
    c.dictionary_c = doc.value("dictionary_c", c.dictionary_c);
    c.points_per_term = doc.value("points_per_term", c.points_per_term);
    c.mc_samples = doc.value("mc_samples", c.mc_samples);
    c.timing = doc.value("timing", c.timing);
    c.threads = doc.value("threads", c.threads);
    c.output = doc.value("output", c.output);
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("config: ") + ex.what());
  }
}

std::string ExperimentConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("output");
  j.erase("threads");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

// ---- running ------------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunControl& control) {
  cfg.validate();
  const std::size_t per_seed = cfg.grid.size() * cfg.methods.size();
  std::vector<std::vector<ResultRow>> by_seed(cfg.seeds.size());
  std::vector<bool> ready(cfg.seeds.size(), false);
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    for (const auto& r : control.resume_rows)
      if (r.seed == cfg.seeds[i] && r.kind == kind_name(cfg.kind)) by_seed[i].push_back(r);
    ready[i] = by_seed[i].size() == per_seed;
    if (!ready[i]) by_seed[i].clear();
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> interrupted{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      if (ready[i]) continue;
      if (control.stop && control.stop->load()) {
        interrupted = true;
        return;
      }
      try {
        std::vector<ResultRow> rows;
        switch (cfg.kind) {
          case ExperimentKind::approx_rate: rows = approx_task(cfg, cfg.seeds[i]); break;
          case ExperimentKind::estimate_rate: rows = estimate_task(cfg, cfg.seeds[i]); break;
          case ExperimentKind::compile_verify: rows = compile_task(cfg, cfg.seeds[i]); break;
        }
        if (!cfg.timing)
          for (auto& r : rows) r.wall_ms = 0.0;
        by_seed[i] = std::move(rows);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = cfg.seeds.size();
        return;
      }
    }
  };
  const int nthreads = std::min<int>(cfg.threads, static_cast<int>(cfg.seeds.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  ExperimentResult out;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (by_seed[i].size() != per_seed) {
      out.interrupted = true;
      continue;
    }
    out.completed_seeds.push_back(cfg.seeds[i]);
    out.rows.insert(out.rows.end(), by_seed[i].begin(), by_seed[i].end());
  }
  out.interrupted = out.interrupted || interrupted;
  out.summary = summarize(cfg, out.rows);
  out.summary["interrupted"] = out.interrupted;
  return out;
}

nlohmann::json summarize(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
  nlohmann::json out;
  out["config_hash"] = cfg.hash();
  out["kind"] = kind_name(cfg.kind);
  out["rows"] = rows.size();
  const auto& sp = cfg.space;
  const auto reference = [&](const std::string& method) -> nlohmann::json {
    RateParams rp{RateFamily::besov, sp.s, sp.p, sp.q, sp.r, sp.d};
    if (cfg.kind == ExperimentKind::approx_rate) {
      if (sp.mixed) {
        rp.family = RateFamily::approx_adaptive;
        if (method != "full_grid") rp.d = 1;  // N^{−s} up to log factors
      } else {
        rp.family = method == "linear" ? RateFamily::approx_linear : RateFamily::approx_adaptive;
      }
    } else if (cfg.kind == ExperimentKind::estimate_rate) {
      if (method == "adaptive") {
        rp.family = sp.mixed ? RateFamily::mixed : RateFamily::besov;
      } else {
        rp.family = RateFamily::linear_lower;
      }
    } else {
      return nullptr;
    }
    try {
      return rate_reference(rp, 2.0).exponent;
    } catch (const std::invalid_argument&) {
      return nullptr;
    }
  };
  // method -> x -> errors; method -> seed -> points
  std::map<std::string, std::map<long long, std::vector<double>>> curves;
  std::map<std::string, std::map<std::uint64_t, std::vector<std::pair<double, double>>>> per_seed;
  for (const auto& r : rows) {
    curves[r.method][r.n_or_N].push_back(r.error);
    per_seed[r.method][r.seed].push_back({static_cast<double>(r.n_or_N), r.error});
  }
  const auto slope_or_null = [](const std::vector<std::pair<double, double>>& pts) -> nlohmann::json {
    try {
      const auto f = fit_rate(pts);
      return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
    } catch (const std::invalid_argument&) {
      return nullptr;
    }
  };
  nlohmann::json methods = nlohmann::json::object();
  std::map<std::string, std::vector<std::pair<double, double>>> means;
  for (const auto& method : cfg.methods) {
    nlohmann::json m;
    std::vector<std::pair<double, double>> mean_pts;
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& [x, errs] : curves[method]) {
      double mean = 0.0;
      for (double e : errs) mean += e;
      mean /= static_cast<double>(errs.size());
      mean_pts.push_back({static_cast<double>(x), mean});
      grid.push_back({{"n_or_N", x}, {"mean_error", mean}, {"count", errs.size()}});
    }
    means[method] = mean_pts;
    m["grid"] = grid;
    m["fit_of_mean"] = slope_or_null(mean_pts);
    std::vector<double> slopes;
    for (const auto& [seed, pts] : per_seed[method]) {
      try {
        slopes.push_back(fit_rate(pts).slope);
      } catch (const std::invalid_argument&) {
      }
    }
    m["median_seed_slope"] = slopes.empty() ? nlohmann::json(nullptr) : nlohmann::json(median(slopes));
    m["reference_exponent"] = reference(method);
    methods[method] = m;
  }
  if (means.count("krr_gaussian") && means.count("krr_spline") &&
      means["krr_gaussian"].size() == means["krr_spline"].size()) {
    std::vector<std::pair<double, double>> best;
    for (std::size_t i = 0; i < means["krr_gaussian"].size(); ++i)
      best.push_back({means["krr_gaussian"][i].first,
                      std::min(means["krr_gaussian"][i].second, means["krr_spline"][i].second)});
    out["krr_best"] = {{"fit_of_mean", slope_or_null(best)}};
  }
  out["methods"] = methods;
  return out;
}

// ---- CSV ----------------------------------------------------------------------

namespace {
constexpr const char* kHeader = "kind,method,n_or_N,seed,error,fit_residual,wall_ms";
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kHeader) + "\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%lld,%llu,%.17g,%.17g,%.17g\n", r.kind.c_str(), r.method.c_str(),
                  r.n_or_N, static_cast<unsigned long long>(r.seed), r.error, r.fit_residual, r.wall_ms);
    out += buf;
  }
  return out;
}

std::vector<ResultRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::invalid_argument("csv: bad header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw std::invalid_argument("csv: expected 7 fields");
    try {
      ResultRow r;
      r.kind = f[0];
      r.method = f[1];
      r.n_or_N = std::stoll(f[2]);
      r.seed = std::stoull(f[3]);
      r.error = std::stod(f[4]);
      r.fit_residual = std::stod(f[5]);
      r.wall_ms = std::stod(f[6]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("csv: malformed field in '" + line + "'");
    }
  }
  return rows;
}

}  // namespace besov
