#include "byzsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace byzsim {

namespace {

using json = nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number()) fail(where(key), "expected a number");
    out = v.get<double>();
  }

  void get(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (v.is_number_unsigned()) {
      out = v.get<std::size_t>();
    } else if (v.is_number_integer()) {
      fail(where(key), "expected a non-negative integer");
    } else {
      fail(where(key), "expected an integer");
    }
  }

  void get(const std::string& key, std::uint64_t& out, bool) {
    std::size_t tmp = out;
    get(key, tmp);
    out = tmp;
  }

  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_integer()) fail(where(key), "expected an integer");
    out = v.get<int>();
  }

  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_string()) fail(where(key), "expected a string");
    out = v.get<std::string>();
  }

  template <class T>
  void get_optional(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    if (j_.at(key).is_null()) {
      seen_.insert(key);
      out.reset();
      return;
    }
    T tmp{};
    get(key, tmp);
    out = tmp;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail(where(k), "unknown key");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ConfigError("config: " + path + ": " + msg);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string type_of(const json& j, const std::string& path) {
  if (!j.is_object()) Reader::fail(path, "expected an object with a \"type\" key");
  if (!j.contains("type") || !j.at("type").is_string()) Reader::fail(path + ".type", "missing or not a string");
  return j.at("type").get<std::string>();
}

problem::AttackSpec read_attack(const json& j, const std::string& path, const problem::AttackSpec& current) {
  const std::string type = type_of(j, path);
  Reader r(j, path);
  r.at("type");
  const bool same = problem::attack_name(current) == type;
  problem::AttackSpec out;
  if (type == "none") {
    out = problem::NoAttack{};
  } else if (type == "param") {
    auto a = same ? std::get<problem::ParamAttack>(current) : problem::ParamAttack{};
    r.get("mu_c", a.mu_c);
    r.get("s_r", a.s_r);
    out = a;
  } else if (type == "data") {
    auto a = same ? std::get<problem::DataAttack>(current) : problem::DataAttack{};
    r.get("scale", a.scale);
    r.get("shift", a.shift);
    r.get("response_bias", a.response_bias);
    out = a;
  } else if (type == "grad") {
    auto a = same ? std::get<problem::GradAttack>(current) : problem::GradAttack{};
    r.get("mean_coef", a.mean_coef);
    r.get("offset_scale", a.offset_scale);
    out = a;
  } else if (type == "ipm") {
    auto a = same ? std::get<problem::IpmAttack>(current) : problem::IpmAttack{};
    r.get("a", a.a);
    out = a;
  } else {
    Reader::fail(path + ".type", "unknown attack '" + type + "' (none, param, data, grad, ipm)");
  }
  r.finish();
  return out;
}

robust::WarmupRule read_rule(const json& j, const std::string& path, const robust::WarmupRule& current) {
  const std::string type = type_of(j, path);
  Reader r(j, path);
  r.at("type");
  const bool same = robust::rule_name(current) == type;
  robust::WarmupRule out;
  if (type == "centered_clip") {
    auto x = same ? std::get<robust::CenteredClip>(current) : robust::CenteredClip{};
    r.get("tau", x.tau);
    r.get("rounds", x.rounds);
    out = x;
  } else if (type == "ios") {
    auto x = same ? std::get<robust::IosRemove>(current) : robust::IosRemove{};
    r.get("b", x.b);
    out = x;
  } else if (type == "balance") {
    auto x = same ? std::get<robust::BalanceDecay>(current) : robust::BalanceDecay{};
    r.get("gamma", x.gamma);
    r.get("lambda", x.lambda);
    out = x;
  } else if (type == "ubar") {
    auto x = same ? std::get<robust::UbarSelect>(current) : robust::UbarSelect{};
    r.get("b", x.b);
    out = x;
  } else {
    Reader::fail(path + ".type", "unknown rule '" + type + "' (centered_clip, ios, balance, ubar)");
  }
  r.finish();
  return out;
}

robust::RobustMeanEstimator read_estimator(const json& j, const std::string& path,
                                           const robust::RobustMeanEstimator& current) {
  const std::string type = type_of(j, path);
  Reader r(j, path);
  r.at("type");
  const bool same = robust::estimator_name(current) == type;
  robust::RobustMeanEstimator out;
  if (type == "median") {
    out = robust::CoordinateMedian{};
  } else if (type == "trimmed_mean") {
    auto x = same ? std::get<robust::TrimmedMean>(current) : robust::TrimmedMean{};
    r.get("fraction", x.fraction);
    out = x;
  } else if (type == "filtering") {
    auto x = same ? std::get<robust::Filtering>(current) : robust::Filtering{};
    r.get("eps", x.eps);
    out = x;
  } else {
    Reader::fail(path + ".type", "unknown estimator '" + type + "' (median, trimmed_mean, filtering)");
  }
  r.finish();
  return out;
}

bymi::OmegaSpec read_omega(const json& j, const std::string& path, const bymi::OmegaSpec& current) {
  const std::string type = type_of(j, path);
  Reader r(j, path);
  r.at("type");
  bymi::OmegaSpec out;
  if (type == "identity") {
    out = bymi::IdentityOmega{};
  } else if (type == "pca") {
    auto x = bymi::omega_name(current) == type ? std::get<bymi::PcaProjection>(current) : bymi::PcaProjection{};
    r.get("variance_fraction", x.variance_fraction);
    out = x;
  } else {
    Reader::fail(path + ".type", "unknown omega '" + type + "' (identity, pca)");
  }
  r.finish();
  return out;
}

json attack_json(const problem::AttackSpec& a) {
  json j{{"type", problem::attack_name(a)}};
  if (const auto* x = std::get_if<problem::ParamAttack>(&a)) {
    j["mu_c"] = x->mu_c;
    j["s_r"] = x->s_r;
  } else if (const auto* x = std::get_if<problem::DataAttack>(&a)) {
    j["scale"] = x->scale;
    j["shift"] = x->shift;
    j["response_bias"] = x->response_bias;
  } else if (const auto* x = std::get_if<problem::GradAttack>(&a)) {
    j["mean_coef"] = x->mean_coef;
    j["offset_scale"] = x->offset_scale;
  } else if (const auto* x = std::get_if<problem::IpmAttack>(&a)) {
    j["a"] = x->a;
  }
  return j;
}

json rule_json(const robust::WarmupRule& r) {
  json j{{"type", robust::rule_name(r)}};
  if (const auto* x = std::get_if<robust::CenteredClip>(&r)) {
    j["tau"] = x->tau;
    j["rounds"] = x->rounds;
  } else if (const auto* x = std::get_if<robust::IosRemove>(&r)) {
    j["b"] = x->b;
  } else if (const auto* x = std::get_if<robust::BalanceDecay>(&r)) {
    j["gamma"] = x->gamma;
    j["lambda"] = x->lambda;
  } else if (const auto* x = std::get_if<robust::UbarSelect>(&r)) {
    j["b"] = x->b;
  }
  return j;
}

json estimator_json(const robust::RobustMeanEstimator& e) {
  json j{{"type", robust::estimator_name(e)}};
  if (const auto* x = std::get_if<robust::TrimmedMean>(&e)) j["fraction"] = x->fraction;
  if (const auto* x = std::get_if<robust::Filtering>(&e)) j["eps"] = x->eps;
  return j;
}

json omega_json(const bymi::OmegaSpec& o) {
  json j{{"type", bymi::omega_name(o)}};
  if (const auto* x = std::get_if<bymi::PcaProjection>(&o)) j["variance_fraction"] = x->variance_fraction;
  return j;
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

const char* policy_name(bymi::ByzantinePolicy p) {
  return p == bymi::ByzantinePolicy::KeepAll ? "keep_all" : "drop_all";
}

void check(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) Reader::fail(path, msg);
}

}  // namespace

std::size_t RunConfig::byzantine_count() const {
  return static_cast<std::size_t>(std::llround(byzantine.rho * static_cast<double>(topology.m)));
}

RunConfig full_scale_defaults() {
  RunConfig c;
  c.topology.m = 150;
  c.optimization.K = 3000;
  c.warmup.k0 = 300;
  return c;
}

void validate(const RunConfig& c) {
  check(c.topology.m >= 2, "topology.m", "must be at least 2");
  check(c.topology.p >= 0.0 && c.topology.p <= 1.0, "topology.p", "must lie in [0, 1]");
  check(c.task.d >= 1, "task.d", "must be positive");
  check(c.task.N >= 2, "task.N", "must be at least 2");
  check(std::isfinite(c.task.noise) && c.task.noise >= 0.0, "task.noise", "must be finite and non-negative");
  check(c.byzantine.rho >= 0.0 && c.byzantine.rho < 0.5, "byzantine.rho", "must lie in [0, 0.5)");
  check(2 * c.byzantine_count() < c.topology.m, "byzantine.rho", "Byzantine nodes must be a strict minority");
  std::visit(
      [](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, problem::ParamAttack>) {
          check(std::isfinite(a.mu_c), "byzantine.attack.mu_c", "must be finite");
          check(a.s_r > 0.0 && a.s_r <= 1.0, "byzantine.attack.s_r", "must lie in (0, 1]");
        } else if constexpr (std::is_same_v<T, problem::DataAttack>) {
          check(std::isfinite(a.scale) && std::isfinite(a.shift) && std::isfinite(a.response_bias),
                "byzantine.attack", "parameters must be finite");
        } else if constexpr (std::is_same_v<T, problem::GradAttack>) {
          check(std::isfinite(a.mean_coef) && a.offset_scale >= 0.0 && std::isfinite(a.offset_scale),
                "byzantine.attack", "parameters must be finite, offset_scale non-negative");
        } else if constexpr (std::is_same_v<T, problem::IpmAttack>) {
          check(std::isfinite(a.a), "byzantine.attack.a", "must be finite");
        }
      },
      c.byzantine.attack);
  check(c.warmup.k0 >= 1, "warmup.k0", "must be positive");
  check(c.warmup.batch >= 1, "warmup.batch", "must be positive");
  check(!c.warmup.step || (*c.warmup.step > 0.0 && std::isfinite(*c.warmup.step)), "warmup.step",
        "must be positive");
  try {
    robust::validate(c.warmup.rule);
    robust::validate(c.detection.estimator);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (const auto* p = std::get_if<bymi::PcaProjection>(&c.detection.omega))
    check(p->variance_fraction > 0.0 && p->variance_fraction <= 1.0, "detection.omega.variance_fraction",
          "must lie in (0, 1]");
  check(c.detection.alpha > 0.0 && c.detection.alpha < 1.0, "detection.alpha", "must lie in (0, 1)");
  const std::size_t n = c.identification_size();
  check(n >= 2 && n % 2 == 0, "detection.n", "must be even and at least 2");
  check(n < c.task.N, "detection.n", "must leave warm-up samples (n < N)");
  check(c.optimization.K >= 1, "optimization.K", "must be positive");
  check(c.optimization.batch >= 1, "optimization.batch", "must be positive");
  check(!c.optimization.t0 || *c.optimization.t0 >= 1, "optimization.t0", "must be at least 1");
  check(c.output.verbosity >= 0, "output.verbosity", "must be non-negative");
  check(!c.output.dir.empty(), "output.dir", "must not be empty");
}

RunConfig parse_config(const std::string& text, const RunConfig& defaults) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  RunConfig c = defaults;
  Reader top(root, "");
  const auto section = [&](const char* name, auto&& fn) {
    if (!top.has(name)) return;
    Reader r(top.at(name), name);
    fn(r);
    r.finish();
  };
  section("topology", [&](Reader& r) {
    r.get("m", c.topology.m);
    r.get("p", c.topology.p);
    r.get("seed", c.topology.seed, true);
  });
  section("task", [&](Reader& r) {
    r.get("d", c.task.d);
    r.get("N", c.task.N);
    r.get("noise", c.task.noise);
  });
  section("byzantine", [&](Reader& r) {
    r.get("rho", c.byzantine.rho);
    if (r.has("attack")) c.byzantine.attack = read_attack(r.at("attack"), r.where("attack"), c.byzantine.attack);
  });
  section("warmup", [&](Reader& r) {
    if (r.has("rule")) c.warmup.rule = read_rule(r.at("rule"), r.where("rule"), c.warmup.rule);
    r.get("k0", c.warmup.k0);
    r.get("batch", c.warmup.batch);
    r.get_optional("step", c.warmup.step);
  });
  section("detection", [&](Reader& r) {
    if (r.has("estimator"))
      c.detection.estimator = read_estimator(r.at("estimator"), r.where("estimator"), c.detection.estimator);
    if (r.has("omega")) c.detection.omega = read_omega(r.at("omega"), r.where("omega"), c.detection.omega);
    r.get("alpha", c.detection.alpha);
    r.get_optional("n", c.detection.n);
    if (r.has("exact")) {
      const auto& v = r.at("exact");
      if (!v.is_boolean()) Reader::fail("detection.exact", "expected true or false");
      c.detection.exact = v.get<bool>();
    }
    std::string policy = policy_name(c.detection.byzantine_policy);
    r.get("byzantine_policy", policy);
    if (policy == "keep_all") {
      c.detection.byzantine_policy = bymi::ByzantinePolicy::KeepAll;
    } else if (policy == "drop_all") {
      c.detection.byzantine_policy = bymi::ByzantinePolicy::DropAll;
    } else {
      Reader::fail("detection.byzantine_policy", "expected keep_all or drop_all");
    }
  });
  section("optimization", [&](Reader& r) {
    r.get("K", c.optimization.K);
    r.get("batch", c.optimization.batch);
    r.get_optional("t0", c.optimization.t0);
  });
  section("output", [&](Reader& r) {
    r.get("dir", c.output.dir);
    r.get("verbosity", c.output.verbosity);
  });
  top.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path, const RunConfig& defaults) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), defaults);
}

std::string serialize_config(const RunConfig& c, int indent) {
  json j;
  j["topology"] = {{"m", c.topology.m}, {"p", c.topology.p}, {"seed", c.topology.seed}};
  j["task"] = {{"d", c.task.d}, {"N", c.task.N}, {"noise", c.task.noise}};
  j["byzantine"] = {{"rho", c.byzantine.rho}, {"attack", attack_json(c.byzantine.attack)}};
  j["warmup"] = {{"rule", rule_json(c.warmup.rule)},
                 {"k0", c.warmup.k0},
                 {"batch", c.warmup.batch},
                 {"step", optional_json(c.warmup.step)}};
  j["detection"] = {{"estimator", estimator_json(c.detection.estimator)},
                    {"omega", omega_json(c.detection.omega)},
                    {"alpha", c.detection.alpha},
                    {"n", optional_json(c.detection.n)},
                    {"byzantine_policy", policy_name(c.detection.byzantine_policy)},
                    {"exact", c.detection.exact}};
  j["optimization"] = {{"K", c.optimization.K}, {"batch", c.optimization.batch}, {"t0", optional_json(c.optimization.t0)}};
  j["output"] = {{"dir", c.output.dir}, {"verbosity", c.output.verbosity}};
  return j.dump(indent);
}

}  // namespace byzsim
