#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "byzsim/config.hpp"
#include "byzsim/connectivity.hpp"
#include "byzsim/csv.hpp"
#include "byzsim/pipeline.hpp"
#include "byzsim/sweep.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kPhaseFailure = 3;

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : byzsim::csv::split_line(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size()) throw byzsim::ConfigError("sweep: bad value '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw byzsim::ConfigError("sweep: no values");
  return out;
}

byzsim::RunConfig load(const std::string& path, bool full_scale) {
  const auto defaults = full_scale ? byzsim::full_scale_defaults() : byzsim::RunConfig{};
  return byzsim::load_config(path, defaults);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust decentralized SGD simulator"};
  app.require_subcommand(1);
  bool full_scale = false;
  app.add_flag("--paper-scale", full_scale, "full-size defaults (m=150, K=3000)");

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run the full pipeline once");
  run->add_option("--config", config_path, "JSON config")->required();
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--out", out_dir, "output directory");

  std::string axis, values;
  std::size_t reps = 1, threads = 0;
  auto* sweep = app.add_subcommand("sweep", "replicated runs over one axis");
  sweep->add_option("--config", config_path, "JSON config")->required();
  sweep->add_option("--axis", axis, "s_r, rho, alpha or K")->required();
  sweep->add_option("--values", values, "comma-separated axis values")->required();
  sweep->add_option("--reps", reps, "replications per value");
  sweep->add_option("--threads", threads, "worker threads (0: all cores)");
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--seed", seed, "base seed override");

  byzsim::ConnectivityStudy study;
  std::string model = "exact";
  auto* conn = app.add_subcommand("connectivity", "Monte Carlo closed-SCC probability");
  conn->add_option("--m", study.m, "nodes");
  conn->add_option("--p", study.p, "edge probability");
  conn->add_option("--rho", study.rho, "Byzantine fraction");
  conn->add_option("--model", model, "none, exact, delete_all_normal or pipeline");
  conn->add_option("--trials", study.trials, "Monte Carlo trials");
  conn->add_option("--seed", seed, "first trial seed");
  conn->add_option("--delta", study.delta, "slack in c(m, p, delta)");
  conn->add_option("--threads", study.threads, "worker threads (0: all cores)");
  conn->add_option("--config", config_path, "JSON config for the pipeline model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) {
      auto cfg = load(config_path, full_scale);
      if (seed) cfg.topology.seed = *seed;
      if (!out_dir.empty()) cfg.output.dir = out_dir;
      const auto res = byzsim::run_pipeline(cfg);
      try {
        byzsim::write_artifacts(res, cfg.output.dir);
      } catch (const std::exception& e) {
        throw byzsim::PhaseError("output", e.what());
      }
      if (cfg.output.verbosity > 0) {
        const auto& last = res.optimization.metrics.back();
        std::printf("avg_fdp=%.6g avg_pa=%.6g scc=%zu final_gap=%.6g retries=%zu out=%s\n", res.detection.avg_fdp,
                    res.detection.avg_pa, res.scc.size(), last.gap, res.scenario.retries, cfg.output.dir.c_str());
      }
    } else if (*sweep) {
      auto cfg = load(config_path, full_scale);
      if (seed) cfg.topology.seed = *seed;
      if (!out_dir.empty()) cfg.output.dir = out_dir;
      byzsim::SweepSpec spec;
      spec.axis = byzsim::parse_axis(axis);
      spec.values = parse_values(values);
      spec.replications = reps;
      spec.threads = threads;
      const auto rows = byzsim::run_sweep(cfg, spec);
      std::filesystem::create_directories(cfg.output.dir);
      const auto path = std::filesystem::path(cfg.output.dir) / "sweep.csv";
      std::ofstream os(path, std::ios::binary);
      if (!os) throw byzsim::PhaseError("output", "cannot write " + path.string());
      byzsim::write_sweep_csv(os, spec.axis, rows);
      std::size_t failed = 0;
      for (const auto& r : rows)
        if (!r.ok) {
          if (failed == 0) std::cerr << "phase failure: " << r.error << " (value " << r.value << ", rep " << r.rep << ")\n";
          ++failed;
        }
      if (failed > 0) {
        std::cerr << failed << " of " << rows.size() << " runs failed; partial results in " << path.string() << '\n';
        return kPhaseFailure;
      }
      if (cfg.output.verbosity > 0) std::printf("rows=%zu out=%s\n", rows.size(), path.string().c_str());
    } else if (*conn) {
      study.model = byzsim::parse_removal_model(model);
      if (seed) study.seed = *seed;
      if (full_scale && conn->count("--m") == 0) study.m = 150;
      if (!config_path.empty()) study.pipeline = load(config_path, full_scale);
      const auto r = byzsim::connectivity_study(study);
      std::printf("model=%s m=%zu p=%g rho=%g trials=%zu successes=%zu probability=%.6g c_mp=%.6g c_mp_delta=%.6g\n",
                  byzsim::removal_model_name(study.model).c_str(), study.m, study.p, study.rho, r.trials, r.successes,
                  r.probability, r.c_isolation, r.c_connectivity);
    }
  } catch (const byzsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const byzsim::PhaseError& e) {
    std::cerr << "phase failure: " << e.what() << '\n';
    return kPhaseFailure;
  } catch (const std::exception& e) {
    std::cerr << "phase failure: unknown: " << e.what() << '\n';
    return kPhaseFailure;
  }
  return 0;
}
