#include "byzsim/sweep.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "byzsim/csv.hpp"
#include "byzsim/pipeline.hpp"

namespace byzsim {

SweepAxis parse_axis(const std::string& name) {
  if (name == "s_r") return SweepAxis::SignalRatio;
  if (name == "rho") return SweepAxis::Rho;
  if (name == "alpha") return SweepAxis::Alpha;
  if (name == "K") return SweepAxis::Iterations;
  throw ConfigError("sweep: unknown axis '" + name + "' (s_r, rho, alpha, K)");
}

std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::SignalRatio: return "s_r";
    case SweepAxis::Rho: return "rho";
    case SweepAxis::Alpha: return "alpha";
    case SweepAxis::Iterations: return "K";
  }
  return "?";
}

RunConfig with_axis(const RunConfig& cfg, SweepAxis axis, double value) {
  RunConfig c = cfg;
  switch (axis) {
    case SweepAxis::SignalRatio: {
      auto* a = std::get_if<problem::ParamAttack>(&c.byzantine.attack);
      if (a == nullptr) throw ConfigError("sweep: axis s_r needs a param attack");
      a->s_r = value;
      break;
    }
    case SweepAxis::Rho: c.byzantine.rho = value; break;
    case SweepAxis::Alpha: c.detection.alpha = value; break;
    case SweepAxis::Iterations:
      if (!(value >= 1.0) || value != std::floor(value)) throw ConfigError("sweep: K values must be positive integers");
      c.optimization.K = static_cast<std::size_t>(value);
      break;
  }
  validate(c);
  return c;
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg, const SweepSpec& spec) {
  if (spec.values.empty()) throw ConfigError("sweep: no values");
  if (spec.replications == 0) throw ConfigError("sweep: replications must be positive");
  std::vector<RunConfig> jobs;
  std::vector<SweepRow> rows;
  for (double v : spec.values) {
    const RunConfig base = with_axis(cfg, spec.axis, v);
    for (std::size_t r = 0; r < spec.replications; ++r) {
      RunConfig c = base;
      c.topology.seed = cfg.topology.seed + r;
      jobs.push_back(c);
      SweepRow row;
      row.value = v;
      row.rep = r;
      row.seed = c.topology.seed;
      rows.push_back(row);
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t q = next++; q < jobs.size(); q = next++) {
      auto& row = rows[q];
      PipelineResult res;
      try {
        run_pipeline_into(jobs[q], res);
        const auto& last = res.optimization.metrics.back();
        row.ok = true;
        row.final_gap = last.gap;
        row.final_grad_norm_bar = last.grad_norm_bar;
        row.final_grad_norm_tilde = last.grad_norm_tilde;
        row.scc_size = res.scc.size();
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.retries = res.scenario.retries;
      if (res.detected) {
        row.detected = true;
        row.avg_fdp = res.detection.avg_fdp;
        row.avg_pa = res.detection.avg_pa;
      }
    }
  };
  std::size_t n = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  n = std::min(n, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepRow>& rows) {
  os << "axis,value,rep,seed,status,avg_fdp,avg_pa,final_gap,final_grad_norm_bar,final_grad_norm_tilde,scc_size,"
        "retries,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (auto& ch : err)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
    os << axis_name(axis) << ',' << csv::format_double(r.value) << ',' << r.rep << ',' << r.seed << ','
       << (r.ok ? "ok" : "error") << ',';
    if (r.detected)
      os << csv::format_double(r.avg_fdp) << ',' << csv::format_double(r.avg_pa) << ',';
    else
      os << ",,";
    if (r.ok) {
      os << csv::format_double(r.final_gap) << ',' << csv::format_double(r.final_grad_norm_bar) << ','
         << csv::format_double(r.final_grad_norm_tilde) << ',' << r.scc_size << ',' << r.retries << ",\n";
    } else {
      os << ",,,," << r.retries << ',' << err << '\n';
    }
  }
}

}  // namespace byzsim
