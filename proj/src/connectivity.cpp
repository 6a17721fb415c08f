#include "byzsim/connectivity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "byzsim/pipeline.hpp"
#include "byzsim/topology.hpp"

namespace byzsim {

RemovalModel parse_removal_model(const std::string& name) {
  if (name == "none") return RemovalModel::None;
  if (name == "exact") return RemovalModel::Exact;
  if (name == "delete_all_normal") return RemovalModel::DeleteAllNormal;
  if (name == "pipeline") return RemovalModel::Pipeline;
  throw ConfigError("connectivity: unknown removal model '" + name + "' (none, exact, delete_all_normal, pipeline)");
}

std::string removal_model_name(RemovalModel model) {
  switch (model) {
    case RemovalModel::None: return "none";
    case RemovalModel::Exact: return "exact";
    case RemovalModel::DeleteAllNormal: return "delete_all_normal";
    case RemovalModel::Pipeline: return "pipeline";
  }
  return "?";
}

namespace {

bool normal_set_is_closed_scc(const topology::UndirectedGraph& g, const topology::NodeSet& byz,
                              const topology::RemovalSets& removals) {
  const auto [pruned, weights] = topology::prune_and_reweight(topology::metropolis_weights(g), removals);
  const auto scc = topology::largest_closed_scc(pruned);
  if (!scc) return false;
  topology::NodeSet normal;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!std::binary_search(byz.begin(), byz.end(), i)) normal.push_back(i);
  return *scc == normal;
}

}  // namespace

ConnectivityResult connectivity_study(const ConnectivityStudy& st) {
  if (st.trials == 0) throw ConfigError("connectivity: trials must be positive");
  if (st.m < 2) throw ConfigError("connectivity: m must be at least 2");
  if (!(st.p >= 0.0 && st.p <= 1.0)) throw ConfigError("connectivity: p must lie in [0, 1]");
  if (!(st.rho >= 0.0 && st.rho < 0.5)) throw ConfigError("connectivity: rho must lie in [0, 0.5)");
  if (!(st.rho + st.delta < 1.0)) throw ConfigError("connectivity: rho + delta must be below 1");

  ConnectivityResult res;
  res.trials = st.trials;
  res.c_isolation = topology::isolation_constant(static_cast<double>(st.m), st.p);
  res.c_connectivity = topology::connectivity_constant(static_cast<double>(st.m), st.p, st.rho, st.delta);

  RunConfig base = st.pipeline;
  base.topology.m = st.m;
  base.topology.p = st.p;
  base.byzantine.rho = st.rho;
  validate(base);
  const std::size_t count = base.byzantine_count();

  std::vector<char> success(st.trials, 0);
  auto trial = [&](std::size_t t) {
    const std::uint64_t s = st.seed + t;
    bool ok = false;
    if (st.model == RemovalModel::Pipeline) {
      RunConfig c = base;
      c.topology.seed = s;
      Scenario sc;
      sc.graph = topology::gen_erdos_renyi(st.m, st.p, s);
      sc.byz_ids = sample_byzantine(st.m, count, s);
      try {
        ok = run_pipeline_on(c, sc, PipelineOptions{Stage::Scc}).scc_is_normal_set;
      } catch (const PhaseError&) {
        ok = false;
      }
    } else {
      const auto g = topology::gen_erdos_renyi(st.m, st.p, s);
      const auto byz = sample_byzantine(st.m, count, s);
      topology::RemovalSets rem(st.m);
      for (std::size_t i = 0; i < st.m; ++i) {
        if (std::binary_search(byz.begin(), byz.end(), i)) continue;
        if (st.model == RemovalModel::DeleteAllNormal) {
          rem[i] = g.neighbors(i);
        } else if (st.model == RemovalModel::Exact) {
          for (auto j : g.neighbors(i))
            if (std::binary_search(byz.begin(), byz.end(), j)) rem[i].push_back(j);
        }
      }
      ok = normal_set_is_closed_scc(g, byz, rem);
    }
    success[t] = ok ? 1 : 0;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < st.trials; t = next++) trial(t);
  };
  std::size_t n = st.threads ? st.threads : std::max(1u, std::thread::hardware_concurrency());
  n = std::min(n, st.trials);
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (char c : success) res.successes += static_cast<std::size_t>(c);
  res.probability = static_cast<double>(res.successes) / static_cast<double>(res.trials);
  return res;
}

}  // namespace byzsim
