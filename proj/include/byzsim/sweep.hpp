#pragma once

// Replicated pipeline runs over one configuration axis.

#include <ostream>
#include <string>
#include <vector>

#include "byzsim/config.hpp"

namespace byzsim {

enum class SweepAxis { SignalRatio, Rho, Alpha, Iterations };

// "s_r", "rho", "alpha", "K". Throws ConfigError otherwise.
SweepAxis parse_axis(const std::string& name);
std::string axis_name(SweepAxis axis);

struct SweepSpec {
  SweepAxis axis = SweepAxis::SignalRatio;
  std::vector<double> values;
  std::size_t replications = 1;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct SweepRow {
  double value = 0.0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  bool detected = false;  // avg_fdp / avg_pa valid even when !ok
  double avg_fdp = 0.0;
  double avg_pa = 0.0;
  double final_gap = 0.0;
  double final_grad_norm_bar = 0.0;
  double final_grad_norm_tilde = 0.0;
  std::size_t scc_size = 0;
  std::size_t retries = 0;
  std::string error;  // "phase: message" when !ok
};

// Copy of cfg with the axis set to value. Throws ConfigError (e.g. s_r without a param attack).
RunConfig with_axis(const RunConfig& cfg, SweepAxis axis, double value);

// One pipeline per (value, rep) with seed cfg.topology.seed + rep. Rows come
// back in (value, rep) order; a failing run yields a row with ok = false that
// still carries its detection summary when that phase finished.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, const SweepSpec& spec);

void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace byzsim
