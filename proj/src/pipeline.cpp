#include "byzsim/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "byzsim/rng.hpp"
#include "byzsim/simd.hpp"
#include "byzsim/warmup.hpp"

#ifndef BYZSIM_VERSION
#define BYZSIM_VERSION "unknown"
#endif

namespace byzsim {

namespace {

template <class F>
auto in_phase(const char* phase, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PhaseError&) {
    throw;
  } catch (const std::exception& e) {
    throw PhaseError(phase, e.what());
  }
}

topology::NodeSet complement(std::size_t m, const topology::NodeSet& s) {
  topology::NodeSet out;
  for (std::size_t i = 0; i < m; ++i)
    if (!std::binary_search(s.begin(), s.end(), i)) out.push_back(i);
  return out;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

}  // namespace

bool admissible(const topology::UndirectedGraph& g, const topology::NodeSet& byz_ids) {
  return g.connected() && g.connected_on(complement(g.size(), byz_ids));
}

topology::NodeSet sample_byzantine(std::size_t m, std::size_t count, std::uint64_t seed) {
  if (count > m) throw std::invalid_argument("sample_byzantine: more Byzantine nodes than nodes");
  std::vector<std::size_t> ids(m);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed, Stream::ByzantineSet);
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  topology::NodeSet out(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.begin(), out.end());
  return out;
}

Scenario sample_scenario(const RunConfig& cfg) {
  for (std::size_t a = 0; a < kMaxTopologyAttempts; ++a) {
    const std::uint64_t s = cfg.topology.seed + a;
    Scenario sc;
    sc.graph = topology::gen_erdos_renyi(cfg.topology.m, cfg.topology.p, s);
    sc.byz_ids = sample_byzantine(cfg.topology.m, cfg.byzantine_count(), s);
    if (admissible(sc.graph, sc.byz_ids)) {
      sc.topology_seed = s;
      sc.retries = a;
      return sc;
    }
  }
  throw PhaseError("topology", "no admissible graph (connected, with connected normal subgraph) after " +
                                   std::to_string(kMaxTopologyAttempts) + " seeds starting at " +
                                   std::to_string(cfg.topology.seed));
}

namespace {

void run_phases(const RunConfig& cfg, Scenario scenario, const PipelineOptions& opt, PipelineResult& res) {
  in_phase("config", [&] { validate(cfg); });
  res.config = cfg;
  const std::uint64_t seed = cfg.topology.seed;
  res.scenario = std::move(scenario);
  const auto& g = res.scenario.graph;
  const auto& byz = res.scenario.byz_ids;
  const std::size_t m = g.size();

  in_phase("data", [&] {
    const auto task = problem::LinearTask::make(cfg.task.d, cfg.task.noise);
    res.data = problem::generate_network_data(task, m, cfg.task.N, byz, cfg.byzantine.attack, seed);
  });
  in_phase("split", [&] {
    for (auto& ds : res.data) ds = problem::split_dataset(std::move(ds), cfg.identification_size(), seed);
  });

  const auto metropolis = topology::metropolis_weights(g);
  const auto warm = in_phase("warmup", [&] {
    warmup::Network net{&g, &metropolis, res.data, byz, cfg.byzantine.attack, seed};
    warmup::Options o;
    o.k0 = cfg.warmup.k0;
    o.batch = cfg.warmup.batch;
    o.step = cfg.warmup.step;
    return warmup::run_warmup(net, cfg.warmup.rule, o);
  });
  res.warmup_consensus = warm.consensus_trace;

  in_phase("detection", [&] {
    bymi::DetectionSetup s;
    s.graph = &g;
    s.data = res.data;
    s.thetas = warm.thetas;
    s.byz_ids = byz;
    s.attack = cfg.byzantine.attack;
    s.seed = seed;
    s.estimator = cfg.detection.estimator;
    s.omega = cfg.detection.omega;
    s.alpha = cfg.detection.alpha;
    res.detection = bymi::detect(s);
  });
  res.detected = true;

  if (opt.last == Stage::Detection) return;

  in_phase("prune", [&] {
    res.removals = bymi::prune_decisions(res.detection, g, byz, cfg.detection.byzantine_policy);
    if (cfg.detection.exact) {
      for (auto i : complement(m, byz)) {
        res.removals[i].clear();
        for (auto j : g.neighbors(i))
          if (std::binary_search(byz.begin(), byz.end(), j)) res.removals[i].push_back(j);
      }
    }
    auto [pruned, weights] = topology::prune_and_reweight(metropolis, res.removals);
    res.pruned = std::move(pruned);
    res.pruned_weights = std::move(weights);
  });

  in_phase("scc", [&] {
    auto scc = topology::largest_closed_scc(res.pruned);
    if (!scc)
      throw std::runtime_error("the largest strongly connected component of the pruned graph has incoming arcs; "
                               "review the detection output");
    res.scc = std::move(*scc);
    res.scc_is_normal_set = res.scc == complement(m, byz);
  });
  if (opt.last == Stage::Scc) return;

  in_phase("spectral", [&] { res.profile = topology::spectral_profile(res.pruned_weights.restricted_to(res.scc)); });

  const auto normal_ids = complement(m, byz);
  std::vector<problem::NodeDataset> normal;
  for (auto i : normal_ids) normal.push_back(res.data[i]);
  const problem::GlobalObjective objective = in_phase("objective", [&] { return problem::GlobalObjective(normal); });
  res.objective_condition = objective.condition_number();

  in_phase("optimization", [&] {
    drsgd::Network net;
    net.weights = &res.pruned_weights;
    net.scc = res.scc;
    net.profile = &res.profile;
    net.data = res.data;
    net.byz_ids = byz;
    net.attack = cfg.byzantine.attack;
    net.seed = seed;
    net.objective = &objective;
    drsgd::Options o;
    o.iterations = cfg.optimization.K;
    o.batch = cfg.optimization.batch;
    o.t0 = cfg.optimization.t0;
    o.initial = warm.thetas;
    res.optimization = drsgd::run_optimization(net, o);
  });
  res.optimized = true;
}

}  // namespace

void run_pipeline_into(const RunConfig& cfg, PipelineResult& res, const PipelineOptions& opt) {
  in_phase("config", [&] { validate(cfg); });
  run_phases(cfg, sample_scenario(cfg), opt, res);
}

PipelineResult run_pipeline(const RunConfig& cfg, const PipelineOptions& opt) {
  PipelineResult res;
  run_pipeline_into(cfg, res, opt);
  return res;
}

PipelineResult run_pipeline_on(const RunConfig& cfg, Scenario scenario, const PipelineOptions& opt) {
  PipelineResult res;
  run_phases(cfg, std::move(scenario), opt, res);
  return res;
}

std::string manifest_json(const PipelineResult& res) {
  using json = nlohmann::json;
  json j;
  j["config"] = json::parse(serialize_config(res.config));
  j["seed"] = res.config.topology.seed;
  j["topology_seed"] = res.scenario.topology_seed;
  j["topology_retries"] = res.scenario.retries;
  j["byzantine_ids"] = res.scenario.byz_ids;
  j["versions"] = {{"byzsim", BYZSIM_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__},
                   {"simd", simd::active().name}};
  json det = {{"avg_fdp", res.detection.avg_fdp}, {"avg_pa", res.detection.avg_pa}};
  det["warnings"] = res.detection.warnings;
  j["detection"] = det;
  j["scc"] = {{"size", res.scc.size()}, {"equals_normal_set", res.scc_is_normal_set}};
  j["warmup_final_consensus"] = res.warmup_consensus.empty() ? 0.0 : res.warmup_consensus.back();
  if (res.optimized) {
    const auto& last = res.optimization.metrics.back();
    j["spectral"] = {{"rho", res.profile.rho},
                     {"c", res.profile.c_const},
                     {"w", res.profile.w_const},
                     {"lambda2", res.profile.lambda2},
                     {"v1_residual", res.profile.v1_residual}};
    j["optimization"] = {{"t0", res.optimization.t0},
                         {"eta", res.optimization.eta},
                         {"objective_condition", res.objective_condition},
                         {"final_gap", last.gap},
                         {"final_grad_norm_bar", last.grad_norm_bar},
                         {"final_grad_norm_tilde", last.grad_norm_tilde},
                         {"final_consensus_Mk", last.consensus_mk}};
  }
  j["implementation_choices"] = {
      "warm-up step defaults to 0.5/sqrt(k0) when warmup.step is null",
      "warm-up rule default is centered clipping (tau=1, 3 rounds) over Metropolis weights",
      "warm-up and optimization minibatches are drawn with replacement",
      "t0 defaults to the floor formula on estimated c, rho, w, clamped to [1, 50]",
      "optimality gap and gradients use the objective pooled over the normal nodes",
      "nodes outside the closed SCC take unscaled gradient steps",
  };
  return j.dump(2);
}

void write_artifacts(const PipelineResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto os = open_out(dir / "detection.csv");
    bymi::write_detection_csv(os, res.detection, res.scenario.byz_ids);
  }
  {
    auto os = open_out(dir / "metrics.csv");
    drsgd::write_metrics_csv(os, res.optimization.metrics);
  }
  {
    auto os = open_out(dir / "scc.txt");
    for (auto i : res.scc) os << i << '\n';
  }
  {
    auto os = open_out(dir / "run.json");
    os << manifest_json(res) << '\n';
  }
}

}  // namespace byzsim
