// Command-line front end: trajectory simulation, single smoothing runs with a
// streamed emission record per finalized marginal, and the three benchmark
// studies writing report.json / estimates.csv / variance_trace.csv.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

#include "adalag/experiment.hpp"
#include "adalag/genealogy.hpp"
#include "adalag/io.hpp"
#include "adalag/smoothers.hpp"

namespace {

using namespace adalag;

/// Registers every experiment option on a subcommand, bound to cfg. All keys
/// can also come from a `--config` file (one `key=value` per line); explicit
/// command-line flags override file values.
void add_experiment_options(CLI::App* cmd, ExperimentConfig& cfg, bool with_deltas) {
  cmd->set_config("--config", "", "Config file with key=value lines");
  cmd->add_option("--model", cfg.model, "Model: lgssm or sv");
  cmd->add_option("--a", cfg.a, "LGSSM state coefficient");
  cmd->add_option("--b", cfg.b, "LGSSM observation coefficient");
  cmd->add_option("--sigma-u", cfg.sigma_u, "LGSSM state noise std");
  cmd->add_option("--sigma-v", cfg.sigma_v, "LGSSM observation noise std");
  cmd->add_option("--phi", cfg.phi, "SV autoregression coefficient");
  cmd->add_option("--sv-sigma", cfg.sv_sigma, "SV state noise std");
  cmd->add_option("--sv-beta", cfg.sv_beta, "SV volatility scale");
  cmd->add_option("--horizon", cfg.horizon, "Number of time steps T (T+1 observations)");
  cmd->add_option("--epsilons", cfg.epsilons, "Tolerance grid")->delimiter(',');
  if (with_deltas) cmd->add_option("--deltas", cfg.deltas, "Fixed-lag grid")->delimiter(',');
  cmd->add_option("--particles", cfg.n_particles, "Particle count N");
  cmd->add_option("--precision", cfg.precision_k, "Backward draws per particle K");
  cmd->add_option("--replicates", cfg.replicates, "Independent runs per grid value");
  cmd->add_option("--seed", cfg.seed, "Base seed");
  cmd->add_option("--objective", cfg.objective, "Objective: identity or square");
  if (with_deltas) cmd->add_option("--probe-index", cfg.probe_index, "Marginal index to compare at");
  cmd->add_option("--active-cap", cfg.active_cap, "Hard cap on |S| (0 = unlimited)");
  cmd->add_option("--threads", cfg.threads, "Worker threads (0 = hardware)");
  cmd->add_option("--reference-runs", cfg.reference_runs, "Full-PaRIS reference replicates (sv)");
  cmd->add_option("--reference-particles", cfg.reference_particles,
                  "Full-PaRIS reference particle count (sv)");
  cmd->add_flag("--fixed-timing", cfg.fixed_timing,
                "Report runtimes as 0 so outputs are byte-stable across reruns");
  cmd->add_option("--out-dir", cfg.out_dir, "Output directory");
}

void warn_precision(int k) {
  if (k == 1)
    std::cerr << "warning: K=1 backward draws degenerate like the genealogical tree; "
                 "K>=2 keeps the update numerically stable\n";
}

ModelSpec model_from_cli(const ExperimentConfig& cfg) {
  if (cfg.model == "lgssm") return make_lgssm(detail::lgssm_params_from(cfg));
  if (cfg.model == "sv") return make_sv(detail::sv_params_from(cfg));
  throw InvalidParameterError("model must be lgssm or sv");
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_path) {
  ModelSpec model = model_from_cli(cfg);
  const Trajectory traj = simulate(model, cfg.horizon, cfg.seed);
  if (out_path.empty() || out_path == "-") {
    write_trajectory_csv(std::cout, traj);
  } else {
    write_trajectory_csv(out_path, traj);
    std::cerr << "wrote " << traj.states.size() << " rows to " << out_path << "\n";
  }
  return 0;
}

int cmd_smooth(const ExperimentConfig& cfg, const std::string& input_path, double epsilon,
               const std::string& diagnostics_path) {
  warn_precision(cfg.precision_k);
  ModelSpec model = model_from_cli(cfg);
  model.bind_observations(read_observations_csv(input_path));
  const int horizon = model.observation_count() - 1;

  AdaptiveLagOptions opt;
  opt.n_particles = cfg.n_particles;
  opt.precision_k = cfg.precision_k;
  opt.epsilon = epsilon;
  opt.max_active = cfg.active_cap;
  opt.on_emit = [](const SmoothedMarginal& m) { std::cout << format_emission(m) << "\n"; };

  std::unique_ptr<GenealogyStore> store;
  std::ofstream diag;
  if (!diagnostics_path.empty()) {
    store = std::make_unique<GenealogyStore>(horizon + 1);
    diag.open(diagnostics_path);
    if (!diag) throw InvalidParameterError("cannot open " + diagnostics_path + " for writing");
    diag << "t,ess,unique_ancestors_at_0\n";
    opt.on_sample = [&](const WeightedSample& sample) {
      store->push(sample);
      diag << sample.t << "," << format_double(sample.ess()) << ","
           << unique_ancestors(*store, 0, sample.t) << "\n";
    };
  }

  std::cout << kEmissionHeader << "\n";
  RngStream rng(cfg.seed);
  const Objective h = objective_by_name(cfg.objective);
  run_adaptive_lag(model, h, opt, rng);
  return 0;
}

void print_summary(const Report& report) {
  std::cout << report.experiment << " model=" << report.model << " T=" << report.horizon
            << " N=" << report.n_particles << " K=" << report.precision_k
            << " R=" << report.replicates << "\n";
  for (const auto& r : report.results) {
    std::cout << "  " << r.method << " param=" << format_double(r.param)
              << " mse=" << format_double(r.mse);
    if (r.runtime_seconds > 0.0)
      std::cout << " runtime=" << format_double(r.runtime_seconds)
                << " efficiency=" << format_double(r.efficiency);
    if (report.probe_index >= 0)
      std::cout << " probe_mean=" << format_double(r.probe_mean)
                << " probe_std=" << format_double(r.probe_std)
                << " probe_bias=" << format_double(r.probe_bias);
    std::cout << "\n";
  }
}

int run_study(const std::string& which, ExperimentConfig& cfg) {
  warn_precision(cfg.precision_k);
  Report report;
  if (which == "lgssm-study") {
    report = run_lgssm_experiment(cfg);
  } else if (which == "sv-study") {
    report = run_sv_experiment(cfg);
  } else {
    report = run_fixed_vs_adaptive(cfg);
  }
  write_report_files(cfg, report);
  print_summary(report);
  std::cerr << "reports written to " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online marginal smoothing for state-space models"};
  app.require_subcommand(1);

  ExperimentConfig sim_cfg;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "Simulate a trajectory and write it as CSV");
  add_experiment_options(sim, sim_cfg, false);
  sim->add_option("--out", sim_out, "Output CSV path (default stdout)");

  ExperimentConfig smooth_cfg;
  std::string smooth_input, smooth_diag;
  double smooth_epsilon = 1e-3;
  auto* smooth = app.add_subcommand(
      "smooth", "One adaptive-lag run over a CSV observation file, emissions to stdout");
  add_experiment_options(smooth, smooth_cfg, false);
  smooth->add_option("--input", smooth_input, "Observation CSV (trajectory format)")->required();
  smooth->add_option("--epsilon", smooth_epsilon, "Stopping tolerance");
  smooth->add_option("--diagnostics", smooth_diag, "Optional CSV: t,ess,unique_ancestors_at_0");

  ExperimentConfig lgssm_cfg;
  auto* lgssm_study = app.add_subcommand("lgssm-study", "Linear Gaussian benchmark study");
  add_experiment_options(lgssm_study, lgssm_cfg, false);

  ExperimentConfig sv_cfg;
  sv_cfg.model = "sv";
  sv_cfg.epsilons = {0.5, 0.1, 1e-3};
  sv_cfg.replicates = 200;
  auto* sv_study = app.add_subcommand("sv-study", "Stochastic volatility benchmark study");
  add_experiment_options(sv_study, sv_cfg, false);

  ExperimentConfig cmp_cfg;
  cmp_cfg.horizon = 1000;
  cmp_cfg.epsilons = {0.5, 0.2, 0.1, 1e-3, 1e-6};
  cmp_cfg.replicates = 200;
  cmp_cfg.objective = "square";
  auto* cmp = app.add_subcommand("compare-lags", "Fixed-lag versus adaptive-lag comparison");
  add_experiment_options(cmp, cmp_cfg, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_cfg, sim_out);
    if (smooth->parsed()) return cmd_smooth(smooth_cfg, smooth_input, smooth_epsilon, smooth_diag);
    if (lgssm_study->parsed()) return run_study("lgssm-study", lgssm_cfg);
    if (sv_study->parsed()) return run_study("sv-study", sv_cfg);
    if (cmp->parsed()) return run_study("compare-lags", cmp_cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
