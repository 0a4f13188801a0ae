#pragma once

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "adalag/io.hpp"
#include "adalag/kalman.hpp"
#include "adalag/lgssm.hpp"
#include "adalag/smoothers.hpp"
#include "adalag/sv.hpp"

namespace adalag {

/// Settings for one study. Grid values, sample sizes and replicate counts
/// follow the defaults used throughout the benchmark study; every field is
/// overridable from the CLI or a config file.
struct ExperimentConfig {
  std::string model = "lgssm";  // lgssm | sv

  // Linear Gaussian parameters (scalar model).
  double a = 0.95;
  double b = 0.5;
  double sigma_u = 0.5;
  double sigma_v = 2.0;

  // Stochastic volatility parameters.
  double phi = 0.98;
  double sv_sigma = 0.31622776601683794;  // sqrt(.1)
  double sv_beta = 0.83666002653407556;   // sqrt(.7)

  int horizon = 200;
  std::vector<double> epsilons{0.5, 0.2, 0.1, 1e-3};
  std::vector<int> deltas{1, 2, 4, 8, 16, 32, 64, 128};
  int n_particles = 400;
  int precision_k = 2;
  int replicates = 100;
  std::uint64_t seed = 1;
  std::string objective = "identity";  // identity | square
  int probe_index = 750;
  std::size_t active_cap = 0;
  int threads = 0;  // 0 = hardware concurrency

  /// Reference ("full PaRIS") settings for the SV model.
  int reference_runs = 10;
  int reference_particles = 2000;

  /// When set, runtimes are reported as 0 so report files are byte-stable
  /// across reruns; efficiency is then reported as 0 (not measured).
  bool fixed_timing = false;

  std::string out_dir = ".";

  void validate(bool needs_deltas = false) const {
    if (model != "lgssm" && model != "sv")
      throw InvalidParameterError("model must be lgssm or sv");
    if (horizon < 1) throw InvalidParameterError("horizon must be >= 1");
    if (replicates < 1) throw InvalidParameterError("replicates must be >= 1");
    if (epsilons.empty()) throw InvalidParameterError("epsilon grid must be non-empty");
    if (needs_deltas && deltas.empty()) throw InvalidParameterError("delta grid must be non-empty");
    for (double e : epsilons)
      if (!(e >= 0.0)) throw InvalidParameterError("epsilons must be >= 0");
    for (int d : deltas)
      if (d < 1) throw InvalidParameterError("deltas must be >= 1");
    if (n_particles < 1) throw InvalidParameterError("n_particles must be >= 1");
    if (precision_k < 1) throw InvalidParameterError("precision K must be >= 1");
    if (objective != "identity" && objective != "square")
      throw InvalidParameterError("objective must be identity or square for studies");
    if (reference_runs < 1 || reference_particles < 1)
      throw InvalidParameterError("reference settings must be >= 1");
  }
};

/// Aggregates for one (method, grid value) cell.
struct MethodResult {
  std::string method;  // adaptive | ideal | fixed
  double param = 0.0;  // epsilon or delta
  double mse = 0.0;
  double runtime_seconds = 0.0;  // mean smoothing-loop wall time per replicate
  double efficiency = 0.0;
  std::vector<double> mean_estimate;  // per s
  std::vector<double> std_estimate;   // per s, across replicates
  std::vector<double> mean_lag;       // per s
  int max_active = 0;                 // max |S| over all replicates
  double probe_mean = 0.0;            // compare-lags probe statistics
  double probe_std = 0.0;
  double probe_bias = 0.0;
};

struct Report {
  std::string experiment;
  std::string model;
  int horizon = 0;
  int n_particles = 0;
  int precision_k = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::string objective;
  int probe_index = -1;
  std::vector<double> reference;  // per s
  std::vector<double> reference_band_lo;
  std::vector<double> reference_band_hi;
  std::vector<MethodResult> results;
  std::vector<double> variance_trace;  // s = 0 criterion, never-stopped run
  std::vector<int> active_size_trace;  // |S| per t, replicate 0 at smallest epsilon
};

/// The tuning figure of merit: 1 / (MSE * runtime).
inline double efficiency(double mse, double runtime_seconds) {
  if (!(mse > 0.0) || !(runtime_seconds > 0.0))
    throw InvalidParameterError("efficiency requires positive MSE and runtime");
  return 1.0 / (mse * runtime_seconds);
}

namespace detail {

// Seed stream families; replicates never share an engine.
enum SeedFamily : std::uint64_t {
  kFamData = 1,
  kFamAdaptive = 2,
  kFamFixed = 3,
  kFamReference = 4,
  kFamTrace = 5,
};

inline std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t family,
                                    std::uint64_t param_index, std::uint64_t r) {
  return derive_seed(derive_seed(derive_seed(base, family), param_index), r);
}

inline std::uint64_t mix_double(std::uint64_t h, double v) {
  return derive_seed(h, std::bit_cast<std::uint64_t>(v));
}

/// Runs body(0..count-1) on a small worker pool. Results must be written to
/// per-replicate slots; aggregation happens afterwards in index order, so
/// scheduling cannot change any output value.
inline void parallel_replicates(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int r = 0; r < count; ++r) body(r);
    return;
  }
  std::atomic<int> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const int r = cursor.fetch_add(1);
      if (r >= count) return;
      try {
        body(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline LgssmParams lgssm_params_from(const ExperimentConfig& cfg) {
  if (!(std::abs(cfg.a) < 1.0))
    throw InvalidParameterError("|a| must be < 1 for the default initial law");
  const double init_var = cfg.sigma_v * cfg.sigma_v / (1.0 - cfg.a * cfg.a);
  return LgssmParams::scalar(cfg.a, cfg.b, cfg.sigma_u, cfg.sigma_v, 0.0, init_var);
}

inline SvParams sv_params_from(const ExperimentConfig& cfg) {
  return SvParams{cfg.phi, cfg.sv_sigma, cfg.sv_beta};
}

inline ModelSpec model_from(const ExperimentConfig& cfg) {
  return cfg.model == "lgssm" ? make_lgssm(lgssm_params_from(cfg)) : make_sv(sv_params_from(cfg));
}

inline double moment_of(const GaussianMoments& m, const std::string& objective) {
  if (objective == "identity") return m.mean[0];
  return m.mean[0] * m.mean[0] + m.cov(0, 0);  // square
}

struct ReplicateMatrix {
  // estimates[r][s], lags[r][s]
  std::vector<std::vector<double>> estimates;
  std::vector<std::vector<double>> lags;
  std::vector<double> runtimes;
  std::vector<int> max_active;

  ReplicateMatrix(int r_count, int s_count)
      : estimates(r_count, std::vector<double>(s_count, 0.0)),
        lags(r_count, std::vector<double>(s_count, 0.0)),
        runtimes(r_count, 0.0),
        max_active(r_count, 0) {}
};

inline void fill_from_emissions(const std::vector<SmoothedMarginal>& emissions,
                                std::vector<double>& est, std::vector<double>& lag) {
  for (const auto& m : emissions) {
    est[m.s] = m.estimate;
    lag[m.s] = m.lag;
  }
}

/// Sample standard deviation (n - 1 denominator); zero for a single value.
inline double sample_std(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / (static_cast<double>(values.size()) - 1.0));
}

inline MethodResult aggregate(const std::string& method, double param, const ReplicateMatrix& mat,
                              const std::vector<double>& reference, bool fixed_timing) {
  const int r_count = static_cast<int>(mat.estimates.size());
  const int s_count = static_cast<int>(reference.size());
  MethodResult out;
  out.method = method;
  out.param = param;
  out.mean_estimate.assign(s_count, 0.0);
  out.std_estimate.assign(s_count, 0.0);
  out.mean_lag.assign(s_count, 0.0);

  double sq_err = 0.0;
  std::vector<double> column(r_count);
  for (int s = 0; s < s_count; ++s) {
    double mean = 0.0, lag = 0.0;
    for (int r = 0; r < r_count; ++r) {
      column[r] = mat.estimates[r][s];
      mean += column[r];
      lag += mat.lags[r][s];
      const double d = column[r] - reference[s];
      sq_err += d * d;
    }
    mean /= r_count;
    out.mean_estimate[s] = mean;
    out.std_estimate[s] = sample_std(column, mean);
    out.mean_lag[s] = lag / r_count;
  }
  out.mse = sq_err / (static_cast<double>(r_count) * s_count);

  double rt = 0.0;
  for (double v : mat.runtimes) rt += v;
  rt /= r_count;
  out.runtime_seconds = fixed_timing ? 0.0 : rt;
  out.efficiency =
      (fixed_timing || !(out.mse > 0.0) || !(rt > 0.0)) ? 0.0 : efficiency(out.mse, rt);

  for (int v : mat.max_active) out.max_active = std::max(out.max_active, v);
  return out;
}

inline void set_probe_stats(MethodResult& res, const ReplicateMatrix& mat, int probe,
                            double reference_value) {
  std::vector<double> values(mat.estimates.size());
  double mean = 0.0;
  for (std::size_t r = 0; r < mat.estimates.size(); ++r) {
    values[r] = mat.estimates[r][probe];
    mean += values[r];
  }
  mean /= static_cast<double>(values.size());
  res.probe_mean = mean;
  res.probe_std = sample_std(values, mean);
  res.probe_bias = mean - reference_value;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// One adaptive-lag replicate; returns emissions and fills timing/|S| slots.
inline void adaptive_replicate(const ModelSpec& model, const Objective& h,
                               const ExperimentConfig& cfg, double eps, std::uint64_t seed,
                               std::vector<double>& est, std::vector<double>& lag, double& runtime,
                               int& max_active) {
  RngStream rng(seed);
  AdaptiveLagOptions opt;
  opt.n_particles = cfg.n_particles;
  opt.precision_k = cfg.precision_k;
  opt.epsilon = eps;
  opt.max_active = cfg.active_cap;
  std::vector<int> sizes;
  opt.active_size_trace = &sizes;
  const auto t0 = Clock::now();
  const auto emissions = run_adaptive_lag(model, h, opt, rng);
  runtime = seconds_since(t0);
  fill_from_emissions(emissions, est, lag);
  max_active = 0;
  for (int v : sizes) max_active = std::max(max_active, v);
}

/// Dedicated never-stopping run recording the s = 0 criterion trace.
inline std::vector<double> criterion_trace_run(const ModelSpec& model, const Objective& h,
                                               const ExperimentConfig& cfg) {
  RngStream rng(replicate_seed(cfg.seed, kFamTrace, 0, 0));
  AdaptiveLagOptions opt;
  opt.n_particles = cfg.n_particles;
  opt.precision_k = cfg.precision_k;
  opt.epsilon = 0.0;
  std::vector<double> trace;
  opt.on_criterion = [&trace](int s, int, double v) {
    if (s == 0) trace.push_back(v);
  };
  run_adaptive_lag(model, h, opt, rng);
  return trace;
}

/// Average of `runs` independent full-PaRIS runs (never stopping), the proxy
/// reference for models without exact smoothers. Returns the per-s estimates
/// of every run.
inline std::vector<std::vector<double>> full_paris_runs(const ModelSpec& model, const Objective& h,
                                                        int runs, int n_particles, int precision_k,
                                                        std::uint64_t base_seed, int threads) {
  const int s_count = model.observation_count();
  std::vector<std::vector<double>> out(runs, std::vector<double>(s_count, 0.0));
  parallel_replicates(runs, threads, [&](int j) {
    RngStream rng(derive_seed(base_seed, static_cast<std::uint64_t>(j)));
    AdaptiveLagOptions opt;
    opt.n_particles = n_particles;
    opt.precision_k = precision_k;
    opt.epsilon = 0.0;
    const auto emissions = run_adaptive_lag(model, h, opt, rng);
    std::vector<double> lag(s_count, 0.0);
    fill_from_emissions(emissions, out[j], lag);
  });
  return out;
}

/// The SV reference is expensive (several full-PaRIS runs at a large N), so it
/// is cached on disk keyed by model parameters, data seed and reference
/// settings, and reused across tolerance values.
inline std::vector<std::vector<double>> cached_sv_reference(const ExperimentConfig& cfg,
                                                            const ModelSpec& model,
                                                            const Objective& h,
                                                            std::uint64_t data_seed) {
  std::uint64_t key = derive_seed(0x5e11ed, cfg.reference_runs);
  key = derive_seed(key, cfg.reference_particles);
  key = derive_seed(key, cfg.precision_k);
  key = derive_seed(key, cfg.horizon);
  key = derive_seed(key, data_seed);
  key = mix_double(key, cfg.phi);
  key = mix_double(key, cfg.sv_sigma);
  key = mix_double(key, cfg.sv_beta);
  key = derive_seed(key, std::hash<std::string>{}(cfg.objective));

  char name[64];
  std::snprintf(name, sizeof(name), "sv_reference_%016llx.json",
                static_cast<unsigned long long>(key));
  const std::filesystem::path path = std::filesystem::path(cfg.out_dir) / name;

  if (std::filesystem::exists(path)) {
    std::ifstream is(path);
    nlohmann::json j;
    is >> j;
    auto runs = j.at("runs").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(runs.size()) == cfg.reference_runs &&
        !runs.empty() && static_cast<int>(runs[0].size()) == cfg.horizon + 1)
      return runs;
  }

  auto runs = full_paris_runs(model, h, cfg.reference_runs, cfg.reference_particles,
                              cfg.precision_k, derive_seed(cfg.seed, kFamReference), cfg.threads);
  nlohmann::json j;
  j["runs"] = runs;
  j["model"] = "sv";
  j["horizon"] = cfg.horizon;
  j["n_particles"] = cfg.reference_particles;
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << j.dump(2) << "\n";
  return runs;
}

inline std::vector<double> mean_of_runs(const std::vector<std::vector<double>>& runs) {
  std::vector<double> out(runs[0].size(), 0.0);
  for (const auto& run : runs)
    for (std::size_t s = 0; s < out.size(); ++s) out[s] += run[s];
  for (auto& v : out) v /= static_cast<double>(runs.size());
  return out;
}

}  // namespace detail

/// Study over the linear Gaussian model: the particle adaptive-lag smoother
/// and the exact Kalman variant are run over the tolerance grid against the
/// disturbance-smoother reference.
inline Report run_lgssm_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.model != "lgssm") throw InvalidParameterError("run_lgssm_experiment requires model=lgssm");

  const LgssmParams params = detail::lgssm_params_from(cfg);
  ModelSpec model = make_lgssm(params);
  const std::uint64_t data_seed = detail::replicate_seed(cfg.seed, detail::kFamData, 0, 0);
  const Trajectory data = simulate(model, cfg.horizon, data_seed);
  model.bind_observations(data.observations);
  const Objective h = objective_by_name(cfg.objective);
  const int s_count = cfg.horizon + 1;

  Report report;
  report.experiment = "lgssm-study";
  report.model = cfg.model;
  report.horizon = cfg.horizon;
  report.n_particles = cfg.n_particles;
  report.precision_k = cfg.precision_k;
  report.replicates = cfg.replicates;
  report.seed = cfg.seed;
  report.objective = cfg.objective;

  const auto moments = disturbance_smoother(params, data.observations);
  report.reference.resize(s_count);
  for (int s = 0; s < s_count; ++s)
    report.reference[s] = detail::moment_of(moments[s], cfg.objective);

  for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
    const double eps = cfg.epsilons[e];
    detail::ReplicateMatrix mat(cfg.replicates, s_count);
    detail::parallel_replicates(cfg.replicates, cfg.threads, [&](int r) {
      detail::adaptive_replicate(
          model, h, cfg, eps,
          detail::replicate_seed(cfg.seed, detail::kFamAdaptive, e, r), mat.estimates[r],
          mat.lags[r], mat.runtimes[r], mat.max_active[r]);
    });
    report.results.push_back(
        detail::aggregate("adaptive", eps, mat, report.reference, cfg.fixed_timing));
    if (e == cfg.epsilons.size() - 1 && cfg.replicates > 0) {
      // |S| trace from replicate 0 at the last (finest) tolerance.
      std::vector<int> sizes;
      RngStream rng(detail::replicate_seed(cfg.seed, detail::kFamAdaptive, e, 0));
      AdaptiveLagOptions opt;
      opt.n_particles = cfg.n_particles;
      opt.precision_k = cfg.precision_k;
      opt.epsilon = eps;
      opt.max_active = cfg.active_cap;
      opt.active_size_trace = &sizes;
      run_adaptive_lag(model, h, opt, rng);
      report.active_size_trace = sizes;
    }
  }

  // Exact variant, affine objectives only.
  if (cfg.objective == "identity") {
    AffineObjectives objectives = [](int) {
      return AffineObjective{Eigen::VectorXd::Ones(1), 0.0};
    };
    for (double eps : cfg.epsilons) {
      detail::ReplicateMatrix mat(1, s_count);
      const auto t0 = detail::Clock::now();
      const auto emissions =
          ideal_adaptive_lag_run(params, data.observations, objectives, eps);
      mat.runtimes[0] = detail::seconds_since(t0);
      detail::fill_from_emissions(emissions, mat.estimates[0], mat.lags[0]);
      report.results.push_back(
          detail::aggregate("ideal", eps, mat, report.reference, cfg.fixed_timing));
    }
  }

  report.variance_trace = detail::criterion_trace_run(model, h, cfg);
  return report;
}

/// Study over the stochastic volatility model against the cached full-PaRIS
/// reference (no stopping, larger N), averaged over independent replicates.
inline Report run_sv_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.model != "sv") throw InvalidParameterError("run_sv_experiment requires model=sv");

  ModelSpec model = make_sv(detail::sv_params_from(cfg));
  const std::uint64_t data_seed = detail::replicate_seed(cfg.seed, detail::kFamData, 0, 0);
  const Trajectory data = simulate(model, cfg.horizon, data_seed);
  model.bind_observations(data.observations);
  const Objective h = objective_by_name(cfg.objective);
  const int s_count = cfg.horizon + 1;

  Report report;
  report.experiment = "sv-study";
  report.model = cfg.model;
  report.horizon = cfg.horizon;
  report.n_particles = cfg.n_particles;
  report.precision_k = cfg.precision_k;
  report.replicates = cfg.replicates;
  report.seed = cfg.seed;
  report.objective = cfg.objective;

  const auto reference_runs = detail::cached_sv_reference(cfg, model, h, data_seed);
  report.reference = detail::mean_of_runs(reference_runs);
  report.reference_band_lo.assign(s_count, std::numeric_limits<double>::infinity());
  report.reference_band_hi.assign(s_count, -std::numeric_limits<double>::infinity());
  for (const auto& run : reference_runs)
    for (int s = 0; s < s_count; ++s) {
      report.reference_band_lo[s] = std::min(report.reference_band_lo[s], run[s]);
      report.reference_band_hi[s] = std::max(report.reference_band_hi[s], run[s]);
    }

  for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
    const double eps = cfg.epsilons[e];
    detail::ReplicateMatrix mat(cfg.replicates, s_count);
    detail::parallel_replicates(cfg.replicates, cfg.threads, [&](int r) {
      detail::adaptive_replicate(
          model, h, cfg, eps,
          detail::replicate_seed(cfg.seed, detail::kFamAdaptive, e, r), mat.estimates[r],
          mat.lags[r], mat.runtimes[r], mat.max_active[r]);
    });
    report.results.push_back(
        detail::aggregate("adaptive", eps, mat, report.reference, cfg.fixed_timing));
  }

  report.variance_trace = detail::criterion_trace_run(model, h, cfg);
  return report;
}

/// Fixed-lag versus adaptive-lag comparison at one probe index, both methods
/// over their grids with independent replicates.
inline Report run_fixed_vs_adaptive(const ExperimentConfig& cfg) {
  cfg.validate(/*needs_deltas=*/true);

  ModelSpec model = detail::model_from(cfg);
  const std::uint64_t data_seed = detail::replicate_seed(cfg.seed, detail::kFamData, 0, 0);
  const Trajectory data = simulate(model, cfg.horizon, data_seed);
  model.bind_observations(data.observations);
  const Objective h = objective_by_name(cfg.objective);
  const int s_count = cfg.horizon + 1;
  if (cfg.probe_index < 0 || cfg.probe_index > cfg.horizon)
    throw InvalidParameterError("probe_index must lie in [0, horizon]");

  Report report;
  report.experiment = "compare-lags";
  report.model = cfg.model;
  report.horizon = cfg.horizon;
  report.n_particles = cfg.n_particles;
  report.precision_k = cfg.precision_k;
  report.replicates = cfg.replicates;
  report.seed = cfg.seed;
  report.objective = cfg.objective;
  report.probe_index = cfg.probe_index;

  if (cfg.model == "lgssm") {
    const LgssmParams params = detail::lgssm_params_from(cfg);
    const auto moments = disturbance_smoother(params, data.observations);
    report.reference.resize(s_count);
    for (int s = 0; s < s_count; ++s)
      report.reference[s] = detail::moment_of(moments[s], cfg.objective);
  } else {
    report.reference = detail::mean_of_runs(detail::cached_sv_reference(cfg, model, h, data_seed));
  }
  const double probe_reference = report.reference[cfg.probe_index];

  for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
    const int delta = cfg.deltas[d];
    detail::ReplicateMatrix mat(cfg.replicates, s_count);
    detail::parallel_replicates(cfg.replicates, cfg.threads, [&](int r) {
      RngStream rng(detail::replicate_seed(cfg.seed, detail::kFamFixed, d, r));
      const auto t0 = detail::Clock::now();
      const auto out = fixed_lag_run(model, delta, cfg.n_particles, h, rng);
      mat.runtimes[r] = detail::seconds_since(t0);
      detail::fill_from_emissions(out, mat.estimates[r], mat.lags[r]);
    });
    auto res = detail::aggregate("fixed", delta, mat, report.reference, cfg.fixed_timing);
    detail::set_probe_stats(res, mat, cfg.probe_index, probe_reference);
    report.results.push_back(std::move(res));
  }

  for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
    const double eps = cfg.epsilons[e];
    detail::ReplicateMatrix mat(cfg.replicates, s_count);
    detail::parallel_replicates(cfg.replicates, cfg.threads, [&](int r) {
      detail::adaptive_replicate(
          model, h, cfg, eps,
          detail::replicate_seed(cfg.seed, detail::kFamAdaptive, e, r), mat.estimates[r],
          mat.lags[r], mat.runtimes[r], mat.max_active[r]);
    });
    auto res = detail::aggregate("adaptive", eps, mat, report.reference, cfg.fixed_timing);
    detail::set_probe_stats(res, mat, cfg.probe_index, probe_reference);
    report.results.push_back(std::move(res));
  }

  report.variance_trace = detail::criterion_trace_run(model, h, cfg);
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization.

inline nlohmann::json to_json(const MethodResult& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["param"] = r.param;
  j["mse"] = r.mse;
  j["runtime_seconds"] = r.runtime_seconds;
  j["efficiency"] = r.efficiency;
  j["mean_estimate"] = r.mean_estimate;
  j["std_estimate"] = r.std_estimate;
  j["mean_lag"] = r.mean_lag;
  j["max_active"] = r.max_active;
  j["probe_mean"] = r.probe_mean;
  j["probe_std"] = r.probe_std;
  j["probe_bias"] = r.probe_bias;
  return j;
}

inline nlohmann::json to_json(const Report& report) {
  nlohmann::json j;
  j["experiment"] = report.experiment;
  j["model"] = report.model;
  j["horizon"] = report.horizon;
  j["n_particles"] = report.n_particles;
  j["precision_k"] = report.precision_k;
  j["replicates"] = report.replicates;
  j["seed"] = report.seed;
  j["objective"] = report.objective;
  j["probe_index"] = report.probe_index;
  j["reference"] = report.reference;
  if (!report.reference_band_lo.empty()) {
    j["reference_band_lo"] = report.reference_band_lo;
    j["reference_band_hi"] = report.reference_band_hi;
  }
  j["results"] = nlohmann::json::array();
  for (const auto& r : report.results) j["results"].push_back(to_json(r));
  j["variance_trace"] = report.variance_trace;
  j["active_size_trace"] = report.active_size_trace;
  return j;
}

inline void write_report_json(const std::string& path, const Report& report) {
  std::ofstream os(path);
  if (!os) throw InvalidParameterError("cannot open " + path + " for writing");
  os << to_json(report).dump(2) << "\n";
}

inline void write_estimates_csv(const std::string& path, const Report& report) {
  std::ofstream os(path);
  if (!os) throw InvalidParameterError("cannot open " + path + " for writing");
  os << "method,param,s,mean,std,lag_mean\n";
  for (const auto& r : report.results)
    for (std::size_t s = 0; s < r.mean_estimate.size(); ++s)
      os << r.method << "," << format_double(r.param) << "," << s << ","
         << format_double(r.mean_estimate[s]) << "," << format_double(r.std_estimate[s]) << ","
         << format_double(r.mean_lag[s]) << "\n";
}

inline void write_variance_trace_csv(const std::string& path, const Report& report) {
  std::ofstream os(path);
  if (!os) throw InvalidParameterError("cannot open " + path + " for writing");
  os << "t,criterion\n";
  for (std::size_t t = 0; t < report.variance_trace.size(); ++t)
    os << t << "," << format_double(report.variance_trace[t]) << "\n";
}

/// Writes report.json, estimates.csv and variance_trace.csv into out_dir.
inline void write_report_files(const ExperimentConfig& cfg, const Report& report) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path dir(cfg.out_dir);
  write_report_json((dir / "report.json").string(), report);
  write_estimates_csv((dir / "estimates.csv").string(), report);
  write_variance_trace_csv((dir / "variance_trace.csv").string(), report);
}

}  // namespace adalag
