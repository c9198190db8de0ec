#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "esi/checkpoint.hpp"
#include "esi/engine.hpp"
#include "esi/envs/registry.hpp"

namespace esi::runner {

namespace fs = std::filesystem;

// Process exit codes of the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBadConfig = 2;
inline constexpr int kExitEnvFailure = 3;
inline constexpr int kExitBadCheckpoint = 4;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  std::string profile;
  envs::EnvConfig env;
  Hyperparams hyperparams;
  int workers = 1;
  std::string output_dir = "esi_run";
  bool dump_active_set = true;
  std::optional<std::string> resume_from;
  std::optional<std::string> demo;
  std::int64_t max_episodes = 0;  // 0: until the budget is spent
  std::uint64_t eval_level_start = 10000;
  std::uint64_t eval_levels = 1000;
  std::size_t eval_episodes = 20;  // per split, used by sweep
};

// Profile values are applied before any explicit key, whatever the key order.
inline void apply_profile(RunConfig& c, const std::string& name) {
  if (name == "biped-like") {
    c.env = envs::EnvConfig{};
    c.env.name = "linewalk";
    c.hyperparams = Hyperparams::biped_like();
    c.hyperparams.bootstrap = Bootstrap::kRandomActions;
  } else if (name == "plunder-like") {
    c.env = envs::EnvConfig{};
    c.env.name = "gridnav";
    c.hyperparams = Hyperparams::plunder_like();
    c.hyperparams.bootstrap = Bootstrap::kRandomActions;
    c.hyperparams.env_seed_mode = EnvSeedMode::kFixed;
    c.hyperparams.eval_repeats = 10;
  } else {
    throw ConfigError("profile", "unknown profile '" + name + "' (expected biped-like or plunder-like)");
  }
  c.profile = name;
}

namespace detail {

using json = nlohmann::json;

inline std::uint64_t as_uint(const std::string& key, const json& v) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<int>();
}

inline double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

inline std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

inline bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
  return v.get<bool>();
}

using Setter = std::function<void(RunConfig&, const std::string&, const json&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"profile", [](RunConfig&, const std::string&, const json&) {}},
      {"env", [](RunConfig& c, const std::string& k, const json& v) {
         c.env.name = as_string(k, v);
         if (!envs::is_builtin(c.env.name)) throw ConfigError(k, "unknown environment '" + c.env.name + "'");
       }},
      {"max_steps", [](RunConfig& c, const std::string& k, const json& v) { c.env.max_steps = as_int(k, v); }},
      {"grid_size", [](RunConfig& c, const std::string& k, const json& v) { c.env.grid_size = as_int(k, v); }},
      {"walls", [](RunConfig& c, const std::string& k, const json& v) { c.env.walls = as_int(k, v); }},
      {"level_start", [](RunConfig& c, const std::string& k, const json& v) { c.env.level_start = as_uint(k, v); }},
      {"num_levels", [](RunConfig& c, const std::string& k, const json& v) { c.env.num_levels = as_uint(k, v); }},
      {"eval_level_start", [](RunConfig& c, const std::string& k, const json& v) { c.eval_level_start = as_uint(k, v); }},
      {"eval_levels", [](RunConfig& c, const std::string& k, const json& v) { c.eval_levels = as_uint(k, v); }},
      {"eval_episodes", [](RunConfig& c, const std::string& k, const json& v) { c.eval_episodes = as_uint(k, v); }},
      {"checklist_length", [](RunConfig& c, const std::string& k, const json& v) { c.env.checklist_length = as_int(k, v); }},
      {"checklist_actions", [](RunConfig& c, const std::string& k, const json& v) { c.env.checklist_actions = as_int(k, v); }},
      {"plant_seed", [](RunConfig& c, const std::string& k, const json& v) { c.env.plant_seed = as_uint(k, v); }},
      {"M", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.active_set_size = as_uint(k, v); }},
      {"N", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.iterations_per_episode = as_uint(k, v); }},
      {"L0", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.initial_scope = as_uint(k, v); }},
      {"lambda", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.mutation_strength = as_double(k, v); }},
      {"batch_size", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.trainer.batch_size = as_int(k, v); }},
      {"learning_rate", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.trainer.learning_rate = as_double(k, v); }},
      {"train_iters", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.trainer.train_iters = as_int(k, v); }},
      {"init_scale", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.trainer.init_scale = as_double(k, v); }},
      {"hidden", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.hidden_dim = as_int(k, v); }},
      {"activation", [](RunConfig& c, const std::string& k, const json& v) {
         try {
           c.hyperparams.activation = net::activation_from_string(as_string(k, v));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"seed", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.master_seed = as_uint(k, v); }},
      {"budget", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.total_step_budget = as_uint(k, v); }},
      {"eval_repeats", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.eval_repeats = as_int(k, v); }},
      {"env_seed_mode", [](RunConfig& c, const std::string& k, const json& v) {
         try {
           c.hyperparams.env_seed_mode = env_seed_mode_from_string(as_string(k, v));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"fixed_env_seed", [](RunConfig& c, const std::string& k, const json& v) { c.hyperparams.fixed_env_seed = as_uint(k, v); }},
      {"bootstrap", [](RunConfig& c, const std::string& k, const json& v) {
         try {
           c.hyperparams.bootstrap = bootstrap_from_string(as_string(k, v));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"workers", [](RunConfig& c, const std::string& k, const json& v) { c.workers = as_int(k, v); }},
      {"output_dir", [](RunConfig& c, const std::string& k, const json& v) { c.output_dir = as_string(k, v); }},
      {"dump_active_set", [](RunConfig& c, const std::string& k, const json& v) { c.dump_active_set = as_bool(k, v); }},
      {"resume_from", [](RunConfig& c, const std::string& k, const json& v) { c.resume_from = as_string(k, v); }},
      {"demo", [](RunConfig& c, const std::string& k, const json& v) { c.demo = as_string(k, v); }},
      {"max_episodes", [](RunConfig& c, const std::string& k, const json& v) { c.max_episodes = as_int(k, v); }},
  };
  return table;
}

}  // namespace detail

// Validates value ranges that the setters cannot check one key at a time.
inline void validate(const RunConfig& c) {
  const Hyperparams& hp = c.hyperparams;
  auto require = [](bool ok, const char* key, const char* msg) {
    if (!ok) throw ConfigError(key, msg);
  };
  require(hp.active_set_size >= 1, "M", "must be >= 1");
  require(hp.iterations_per_episode >= 1, "N", "must be >= 1");
  require(hp.initial_scope >= 1, "L0", "must be >= 1");
  require(hp.mutation_strength >= 0.0 && hp.mutation_strength <= 1.0, "lambda", "must lie in [0, 1]");
  require(hp.trainer.batch_size >= 1, "batch_size", "must be >= 1");
  require(hp.trainer.learning_rate >= 0.0 && std::isfinite(hp.trainer.learning_rate), "learning_rate", "must be finite and >= 0");
  require(hp.trainer.train_iters >= 0, "train_iters", "must be >= 0");
  require(hp.trainer.init_scale >= 0.0, "init_scale", "must be >= 0");
  require(hp.hidden_dim >= 1, "hidden", "must be >= 1");
  require(hp.total_step_budget >= 1, "budget", "must be >= 1");
  require(hp.eval_repeats >= 1, "eval_repeats", "must be >= 1");
  require(c.workers >= 1, "workers", "must be >= 1");
  require(c.max_episodes >= 0, "max_episodes", "must be >= 0");
  require(!c.env.max_steps || *c.env.max_steps >= 1, "max_steps", "must be >= 1");
  try {
    envs::make_env(c.env);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("env", e.what());
  }
}

inline RunConfig parse_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("<document>", "config must be a flat JSON object");
  RunConfig c;
  if (doc.contains("profile")) apply_profile(c, detail::as_string("profile", doc.at("profile")));
  const auto& table = detail::setters();
  for (const auto& [key, value] : doc.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, "unknown key");
    it->second(c, key, value);
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline Checkpoint make_checkpoint(const RunConfig& c, const TrainingState& state) {
  return {c.env, c.hyperparams, state, c.eval_level_start, c.eval_levels};
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  TrainingState state;
  fs::path checkpoint_path;
  fs::path history_path;
};

inline void write_outputs(const fs::path& dir, const Checkpoint& ckpt) {
  save_checkpoint(dir / "checkpoint.json", ckpt);
  std::ofstream hist(dir / "history.csv", std::ios::binary | std::ios::trunc);
  write_history_csv(hist, ckpt.state.history);
}

// Runs (or resumes) training, writing checkpoint.json and history.csv after
// every episode. Throws ConfigError / EnvError / CheckpointError.
inline TrainOutcome train(RunConfig cfg) {
  std::optional<TrainingState> resumed;
  if (cfg.resume_from) {
    Checkpoint ck = load_checkpoint(*cfg.resume_from);
    cfg.env = ck.env;
    cfg.hyperparams = ck.hyperparams;
    cfg.eval_level_start = ck.eval_level_start;
    cfg.eval_levels = ck.eval_levels;
    resumed = std::move(ck.state);
  }
  validate(cfg);
  const EnvFactory factory = envs::make_env_factory(cfg.env);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);

  TrainingOptions options;
  options.workers = cfg.workers;
  if (cfg.demo && !resumed) {
    std::ifstream in(*cfg.demo);
    if (!in) throw ConfigError("demo", "cannot open demonstration " + *cfg.demo);
    try {
      options.demonstration = read_trajectory_jsonl(in).trajectory;
    } catch (const std::exception& e) {
      throw ConfigError("demo", e.what());
    }
  }
  options.on_episode_end = [&](const TrainingState& s) {
    write_outputs(dir, make_checkpoint(cfg, s));
    return cfg.max_episodes == 0 || s.episode.episode < cfg.max_episodes;
  };

  TrainingState state = resumed ? continue_training(std::move(*resumed), cfg.hyperparams, factory, options)
                                 : run_training(cfg.hyperparams, factory, options);
  const Checkpoint ckpt = make_checkpoint(cfg, state);
  write_outputs(dir, ckpt);
  if (cfg.dump_active_set) {
    std::ofstream traj(dir / "best_trajectory.jsonl", std::ios::binary | std::ios::trunc);
    write_trajectory_jsonl(traj, state.episode.best_trajectory, cfg.env.name);
  }
  return {std::move(state), dir / "checkpoint.json", dir / "history.csv"};
}

// ---------------------------------------------------------------------------
// eval

struct EvalStats {
  std::string split;
  std::size_t episodes = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::optional<double> optimal_fraction;  // GridNav only
};

inline EvalStats summarize(std::string split, const std::vector<double>& rewards, std::optional<double> optimal) {
  EvalStats s;
  s.split = std::move(split);
  s.episodes = rewards.size();
  if (rewards.empty()) return s;
  double sum = 0.0;
  for (double r : rewards) sum += r;
  s.mean = sum / static_cast<double>(rewards.size());
  double sq = 0.0;
  for (double r : rewards) sq += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(rewards.size()));
  s.min = *std::min_element(rewards.begin(), rewards.end());
  s.max = *std::max_element(rewards.begin(), rewards.end());
  s.optimal_fraction = optimal;
  return s;
}

inline EvalStats evaluate_split(const envs::EnvConfig& env_cfg, const std::string& split, const net::MlpPolicy& policy,
                                std::size_t episodes, std::uint64_t seed_start) {
  auto env = envs::make_env(env_cfg);
  auto* grid = dynamic_cast<envs::GridNav*>(env.get());
  std::vector<double> rewards;
  std::size_t optimal = 0;
  for (std::size_t k = 0; k < episodes; ++k) {
    const std::uint64_t seed = seed_start + k;
    const double r = execute_policy(*env, policy, seed).total_reward;
    rewards.push_back(r);
    if (grid && r == grid->optimal_reward(seed)) ++optimal;
  }
  std::optional<double> frac;
  if (grid && episodes > 0) frac = static_cast<double>(optimal) / static_cast<double>(episodes);
  return summarize(split, rewards, frac);
}

// Training split uses the checkpoint's environment (its level range); GridNav
// additionally gets a "test" row on the held-out level range.
inline std::vector<EvalStats> evaluate_checkpoint(const Checkpoint& ck, std::size_t episodes, std::uint64_t seed_start,
                                                  const std::string& which = "both") {
  if (!ck.state.episode.best_policy) throw CheckpointError("checkpoint has no best_policy to evaluate");
  const net::MlpPolicy& policy = *ck.state.episode.best_policy;
  std::vector<EvalStats> out;
  if (which == "train" || which == "both") out.push_back(evaluate_split(ck.env, "train", policy, episodes, seed_start));
  if (ck.env.name == "gridnav" && (which == "test" || which == "both")) {
    envs::EnvConfig test = ck.env;
    test.level_start = ck.eval_level_start;
    test.num_levels = ck.eval_levels;
    out.push_back(evaluate_split(test, "test", policy, episodes, seed_start));
  }
  return out;
}

inline void print_eval(std::ostream& out, const std::vector<EvalStats>& rows) {
  out << "split   episodes  mean            std             min             max             optimal\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << r.split << std::setw(10) << r.episodes << std::setw(16) << format_double(r.mean).substr(0, 15)
        << std::setw(16) << format_double(r.std).substr(0, 15) << std::setw(16) << format_double(r.min).substr(0, 15)
        << std::setw(16) << format_double(r.max).substr(0, 15)
        << (r.optimal_fraction ? format_double(*r.optimal_fraction) : std::string("-")) << '\n';
  }
  for (const auto& r : rows) out << r.split << ": " << r.mean << " +- " << r.std << '\n';
}

// ---------------------------------------------------------------------------
// inspect

struct InspectRow {
  std::size_t slot = 0;  // position in the active set
  ActiveSample sample;
};

// Active-set rows ordered by step index (then trajectory id, then slot).
inline std::vector<InspectRow> inspect_rows(const ActiveSet& active) {
  std::vector<InspectRow> rows;
  for (std::size_t i = 0; i < active.size(); ++i) rows.push_back({i, active.samples[i]});
  std::stable_sort(rows.begin(), rows.end(), [](const InspectRow& a, const InspectRow& b) {
    if (a.sample.source.step != b.sample.source.step) return a.sample.source.step < b.sample.source.step;
    if (a.sample.source.trajectory_id != b.sample.source.trajectory_id)
      return a.sample.source.trajectory_id < b.sample.source.trajectory_id;
    return a.slot < b.slot;
  });
  return rows;
}

inline void write_inspect_jsonl(std::ostream& out, const std::vector<InspectRow>& rows) {
  for (const auto& r : rows) {
    nlohmann::json j = to_json(r.sample);
    j["slot"] = r.slot;
    out << j.dump() << '\n';
  }
}

// Rebuilds the active set (in slot order) from inspect JSON-lines.
inline ActiveSet parse_inspect_jsonl(std::istream& in) {
  std::vector<std::pair<std::size_t, ActiveSample>> items;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() != '{') continue;
    const auto j = nlohmann::json::parse(line);
    items.emplace_back(j.at("slot").get<std::size_t>(), active_sample_from_json(j));
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  ActiveSet a;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].first != i) throw std::invalid_argument("inspect dump: missing or duplicate slot " + std::to_string(i));
    a.samples.push_back(std::move(items[i].second));
  }
  return a;
}

inline std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << std::setprecision(4) << v[i];
  os << ']';
  return os.str();
}

inline void print_inspect_table(std::ostream& out, const Checkpoint& ck, const std::vector<InspectRow>& rows) {
  auto env = envs::make_env(ck.env);
  const auto* checklist = dynamic_cast<const envs::Checklist*>(env.get());
  out << "active set: " << rows.size() << " samples (env " << ck.env.name << ", episode " << ck.state.episode.episode
      << ", best reward " << ck.state.episode.best_fitness << ")\n";
  out << "slot  traj_id  step  episode  reward      action                state\n";
  for (const auto& r : rows) {
    const auto& s = r.sample;
    out << std::left << std::setw(6) << r.slot << std::setw(9) << s.source.trajectory_id << std::setw(6) << s.source.step
        << std::setw(9) << s.source.episode << std::setw(12) << s.sample.reward << std::setw(22)
        << format_vector(s.sample.action) << format_vector(s.sample.state);
    if (checklist && checklist->is_planted(s.sample)) out << "  planted";
    out << '\n';
    if (ck.env.name == "gridnav") out << envs::GridNav::render_observation(s.sample.state) << '\n';
  }
}

// ---------------------------------------------------------------------------
// sweep

enum class SweepAxis { kActiveSetSize, kMutationStrength };

inline SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "active_set_size") return SweepAxis::kActiveSetSize;
  if (s == "mutation_strength") return SweepAxis::kMutationStrength;
  throw ConfigError("axis", "unknown sweep axis '" + s + "' (expected active_set_size or mutation_strength)");
}

inline std::string to_string(SweepAxis a) {
  return a == SweepAxis::kActiveSetSize ? "active_set_size" : "mutation_strength";
}

struct SweepRow {
  SweepAxis axis = SweepAxis::kMutationStrength;
  double value = 0.0;
  int repetition = 0;
  double train_reward = 0.0;
  double test_reward = 0.0;
};

// Final train/test reward of a finished run: mean over eval_episodes seeds of
// each split. Without any trained policy the best bootstrap fitness is used.
inline std::pair<double, double> final_rewards(const RunConfig& cfg, const TrainingState& s) {
  if (!s.episode.best_policy) return {s.episode.best_fitness, s.episode.best_fitness};
  const Checkpoint ck = make_checkpoint(cfg, s);
  const auto train = evaluate_split(ck.env, "train", *s.episode.best_policy, cfg.eval_episodes, 0);
  envs::EnvConfig test = ck.env;
  std::uint64_t test_seed = 0;
  if (ck.env.name == "gridnav") {
    test.level_start = cfg.eval_level_start;
    test.num_levels = cfg.eval_levels;
  } else {
    test_seed = cfg.eval_level_start;
  }
  const auto held_out = evaluate_split(test, "test", *s.episode.best_policy, cfg.eval_episodes, test_seed);
  return {train.mean, held_out.mean};
}

// One full training per (value, repetition); repetition r uses master seed
// base_seed + r.
inline std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values, int repetitions,
                                   const std::function<void(const SweepRow&)>& on_row = {}) {
  if (values.empty()) throw ConfigError("values", "at least one sweep value is required");
  std::vector<SweepRow> rows;
  for (double value : values) {
    for (int rep = 0; rep < repetitions; ++rep) {
      RunConfig cfg = base;
      if (axis == SweepAxis::kActiveSetSize) {
        if (value < 1 || value != std::floor(value)) throw ConfigError("values", "active set sizes must be positive integers");
        cfg.hyperparams.active_set_size = static_cast<std::size_t>(value);
      } else {
        cfg.hyperparams.mutation_strength = value;
      }
      cfg.hyperparams.master_seed = base.hyperparams.master_seed + static_cast<std::uint64_t>(rep);
      validate(cfg);
      TrainingOptions options;
      options.workers = cfg.workers;
      const TrainingState s = run_training(cfg.hyperparams, envs::make_env_factory(cfg.env), options);
      const auto [train_r, test_r] = final_rewards(cfg, s);
      rows.push_back({axis, value, rep, train_r, test_r});
      if (on_row) on_row(rows.back());
    }
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "axis,value,repetition,train_reward,test_reward\n";
  for (const auto& r : rows) {
    out << to_string(r.axis) << ',' << format_double(r.value) << ',' << r.repetition << ',' << format_double(r.train_reward)
        << ',' << format_double(r.test_reward) << '\n';
  }
}

}  // namespace esi::runner
