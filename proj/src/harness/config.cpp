// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/harness/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rlpeft/errors.hpp"

namespace rlpeft::harness {
namespace {

using nlohmann::json;

// Reads an object field by field and rejects anything left unread.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <typename Fn>
  void field(const char* key, Fn&& fn) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it != j_.end()) fn(*it, child(key));
  }

  void get(const char* key, double& out) {
    field(key, [&](const json& v, const std::string& p) {
      if (!v.is_number()) throw ConfigError(p + ": expected a number");
      out = v.get<double>();
    });
  }
  void get(const char* key, std::size_t& out) {
    field(key, [&](const json& v, const std::string& p) { out = count(v, p); });
  }
  void get(const char* key, std::uint64_t& out, bool) {
    field(key, [&](const json& v, const std::string& p) { out = count(v, p); });
  }
  void get(const char* key, int& out) {
    field(key, [&](const json& v, const std::string& p) {
      if (!v.is_number_integer()) throw ConfigError(p + ": expected an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError(p + ": out of range");
      }
      out = static_cast<int>(x);
    });
  }
  void get(const char* key, std::string& out) {
    field(key, [&](const json& v, const std::string& p) {
      if (!v.is_string()) throw ConfigError(p + ": expected a string");
      out = v.get<std::string>();
    });
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(child(k) + ": unknown field");
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  static std::uint64_t count(const json& v, const std::string& p) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() < 0) throw ConfigError(p + ": must be non-negative");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ConfigError(p + ": expected a non-negative integer");
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_policy(const json& j, const std::string& path, ExperimentConfig& cfg) {
  Reader r(j, path);
  auto& p = cfg.policy;
  r.get("vocab", p.vocab);
  r.get("d_model", p.d_model);
  r.get("n_layers", p.n_layers);
  r.get("n_heads", p.n_heads);
  r.get("d_ff", p.d_ff);
  r.get("max_seq", p.max_seq);
  r.field("warm_start", [&](const json& v, const std::string& wp) {
    Reader w(v, wp);
    w.get("steps", cfg.warm_start.steps);
    w.get("lr", cfg.warm_start.lr);
    w.get("batch", cfg.warm_start.batch);
    w.get("auxiliary_fraction", cfg.warm_start.auxiliary_fraction);
    w.finish();
  });
  r.finish();
}

void read_adapter(const json& j, const std::string& path, adapters::AdapterConfig& a) {
  Reader r(j, path);
  r.field("kind", [&](const json& v, const std::string& p) {
    if (!v.is_string()) throw ConfigError(p + ": expected a string");
    a.kind = adapters::parse_kind(v.get<std::string>());
  });
  r.get("rank", a.rank);
  r.get("alpha", a.alpha);
  r.get("dropout", a.dropout);
  r.get("lora_plus_lambda", a.lora_plus_lambda);
  r.get("miss_group", a.miss_group);
  r.get("init_sigma", a.init_sigma);
  r.get("adalora_target_rank", a.adalora_target_rank);
  r.get("adalora_t_init", a.adalora_t_init);
  r.get("adalora_t_final", a.adalora_t_final);
  r.field("targets", [&](const json& v, const std::string& p) {
    if (!v.is_array()) throw ConfigError(p + ": expected an array of module names");
    a.targets.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(p + ": expected an array of module names");
      a.targets.push_back(adapters::parse_role(e.get<std::string>()));
    }
  });
  r.finish();
}

void read_rlvr(const json& j, const std::string& path, rlvr::TrainerConfig& t) {
  Reader r(j, path);
  bool eps_high_given = false;
  r.field("variant", [&](const json& v, const std::string& p) {
    if (!v.is_string()) throw ConfigError(p + ": expected a string");
    const auto variant = rlvr::parse_variant(v.get<std::string>());
    const double low = t.surrogate.eps_low, floor = t.surrogate.std_floor;
    t.surrogate = rlvr::SurrogateParams::defaults(variant);
    t.surrogate.eps_low = low;
    t.surrogate.std_floor = floor;
  });
  r.get("eps_low", t.surrogate.eps_low);
  r.field("eps_high", [&](const json& v, const std::string& p) {
    if (!v.is_number()) throw ConfigError(p + ": expected a number");
    t.surrogate.eps_high = v.get<double>();
    eps_high_given = true;
  });
  if (!eps_high_given && t.surrogate.variant != rlvr::Variant::kDAPO) t.surrogate.eps_high = t.surrogate.eps_low;
  r.get("std_floor", t.surrogate.std_floor);
  r.get("group_size", t.group_size);
  r.get("max_new", t.max_new);
  r.get("temperature", t.temperature);
  r.get("top_p", t.top_p);
  r.get("lr", t.lr);
  r.field("adam", [&](const json& v, const std::string& p) {
    Reader a(v, p);
    a.get("beta1", t.adam.beta1);
    a.get("beta2", t.adam.beta2);
    a.get("eps", t.adam.eps);
    a.finish();
  });
  r.finish();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name: must not be empty");
  if (out_dir.empty()) throw ConfigError("out_dir: must not be empty");
  if (batch_size == 0) throw ConfigError("batch_size: must be positive");
  if (stop_reward < 0.0 || stop_reward > 1.0) throw ConfigError("stop_reward: must be in [0, 1]");
  if (stop_window == 0) throw ConfigError("stop_window: must be positive");
  policy.validate();
  adapters::validate(adapter);
  rlvr.validate();
  if (warm_start.steps > 0 && (warm_start.batch == 0 || !(warm_start.lr > 0.0))) {
    throw ConfigError("policy.warm_start: batch and lr must be positive");
  }
  if (!(warm_start.auxiliary_fraction >= 0.0 && warm_start.auxiliary_fraction <= 1.0)) {
    throw ConfigError("policy.warm_start.auxiliary_fraction: must be in [0, 1]");
  }
  if (task.difficulty < 1) throw ConfigError("task.difficulty: must be >= 1");
  if (tasks::vocab_needed(task.family, task.difficulty) > policy.vocab) {
    throw ConfigError("task.difficulty: needs vocab " +
                      std::to_string(tasks::vocab_needed(task.family, task.difficulty)) + " but policy.vocab is " +
                      std::to_string(policy.vocab));
  }
  if (tasks::max_prompt_length(task.family, task.difficulty) > policy.max_seq / 2) {
    throw ConfigError("task.difficulty: prompts exceed policy.max_seq / 2");
  }
  if (eval.k == 0) throw ConfigError("eval.k: must be >= 1");
  if (eval.instances == 0) throw ConfigError("eval.instances: must be >= 1");
  if (!(eval.temperature >= 0.0)) throw ConfigError("eval.temperature: must be >= 0");
  if (!(eval.top_p > 0.0 && eval.top_p <= 1.0)) throw ConfigError("eval.top_p: must be in (0, 1]");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Reader r(j, "");
  r.get("name", cfg.name);
  r.get("seed", cfg.seed, true);
  r.get("out_dir", cfg.out_dir);
  r.get("steps", cfg.steps);
  r.get("batch_size", cfg.batch_size);
  r.get("stop_reward", cfg.stop_reward);
  r.get("stop_window", cfg.stop_window);
  r.field("policy", [&](const json& v, const std::string& p) { read_policy(v, p, cfg); });
  r.field("adapter", [&](const json& v, const std::string& p) { read_adapter(v, p, cfg.adapter); });
  r.field("rlvr", [&](const json& v, const std::string& p) { read_rlvr(v, p, cfg.rlvr); });
  r.field("task", [&](const json& v, const std::string& p) {
    Reader t(v, p);
    t.field("family", [&](const json& f, const std::string& fp) {
      if (!f.is_string()) throw ConfigError(fp + ": expected a string");
      cfg.task.family = tasks::parse_task(f.get<std::string>());
    });
    t.get("difficulty", cfg.task.difficulty);
    t.finish();
  });
  r.field("eval", [&](const json& v, const std::string& p) {
    Reader e(v, p);
    e.get("k", cfg.eval.k);
    e.get("instances", cfg.eval.instances);
    e.get("temperature", cfg.eval.temperature);
    e.get("top_p", cfg.eval.top_p);
    e.get("seed", cfg.eval.seed, true);
    e.finish();
  });
  r.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  json targets = json::array();
  for (auto role : c.adapter.targets) targets.push_back(std::string(adapters::role_name(role)));
  json j = {
      {"name", c.name},
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"steps", c.steps},
      {"batch_size", c.batch_size},
      {"stop_reward", c.stop_reward},
      {"stop_window", c.stop_window},
      {"policy",
       {{"vocab", c.policy.vocab},
        {"d_model", c.policy.d_model},
        {"n_layers", c.policy.n_layers},
        {"n_heads", c.policy.n_heads},
        {"d_ff", c.policy.d_ff},
        {"max_seq", c.policy.max_seq},
        {"warm_start",
         {{"steps", c.warm_start.steps},
          {"lr", c.warm_start.lr},
          {"batch", c.warm_start.batch},
          {"auxiliary_fraction", c.warm_start.auxiliary_fraction}}}}},
      {"adapter",
       {{"kind", std::string(adapters::kind_name(c.adapter.kind))},
        {"rank", c.adapter.rank},
        {"alpha", c.adapter.alpha},
        {"dropout", c.adapter.dropout},
        {"lora_plus_lambda", c.adapter.lora_plus_lambda},
        {"miss_group", c.adapter.miss_group},
        {"init_sigma", c.adapter.init_sigma},
        {"adalora_target_rank", c.adapter.adalora_target_rank},
        {"adalora_t_init", c.adapter.adalora_t_init},
        {"adalora_t_final", c.adapter.adalora_t_final},
        {"targets", targets}}},
      {"rlvr",
       {{"variant", std::string(rlvr::variant_name(c.rlvr.surrogate.variant))},
        {"eps_low", c.rlvr.surrogate.eps_low},
        {"eps_high", c.rlvr.surrogate.eps_high},
        {"std_floor", c.rlvr.surrogate.std_floor},
        {"group_size", c.rlvr.group_size},
        {"max_new", c.rlvr.max_new},
        {"temperature", c.rlvr.temperature},
        {"top_p", c.rlvr.top_p},
        {"lr", c.rlvr.lr},
        {"adam", {{"beta1", c.rlvr.adam.beta1}, {"beta2", c.rlvr.adam.beta2}, {"eps", c.rlvr.adam.eps}}}}},
      {"task", {{"family", std::string(tasks::task_name(c.task.family))}, {"difficulty", c.task.difficulty}}},
      {"eval",
       {{"k", c.eval.k},
        {"instances", c.eval.instances},
        {"temperature", c.eval.temperature},
        {"top_p", c.eval.top_p},
        {"seed", c.eval.seed}}},
  };
  return j.dump(2);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* seed = std::getenv("SEED"); seed && *seed) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(seed, &end, 10);
    if (errno != 0 || *end != '\0' || seed[0] == '-') throw ConfigError("SEED: expected a non-negative integer");
    cfg.seed = v;
  }
  if (const char* out = std::getenv("OUT_DIR"); out && *out) cfg.out_dir = out;
}

}  // namespace rlpeft::harness
