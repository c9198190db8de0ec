#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "esi/engine.hpp"
#include "esi/envs/registry.hpp"

namespace esi {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const net::TrainerConfig& t) {
  return {{"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"train_iters", t.train_iters},
          {"init_scale", t.init_scale},
          {"seed", t.seed}};
}

inline net::TrainerConfig trainer_config_from_json(const nlohmann::json& j) {
  net::TrainerConfig t;
  t.batch_size = j.at("batch_size").get<int>();
  t.learning_rate = j.at("learning_rate").get<double>();
  t.train_iters = j.at("train_iters").get<int>();
  t.init_scale = j.at("init_scale").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

inline nlohmann::json to_json(const Hyperparams& hp) {
  return {{"M", hp.active_set_size},
          {"N", hp.iterations_per_episode},
          {"L0", hp.initial_scope},
          {"lambda", hp.mutation_strength},
          {"trainer", to_json(hp.trainer)},
          {"hidden", hp.hidden_dim},
          {"activation", net::to_string(hp.activation)},
          {"master_seed", hp.master_seed},
          {"budget", hp.total_step_budget},
          {"eval_repeats", hp.eval_repeats},
          {"env_seed_mode", to_string(hp.env_seed_mode)},
          {"fixed_env_seed", hp.fixed_env_seed},
          {"bootstrap", to_string(hp.bootstrap)}};
}

inline Hyperparams hyperparams_from_json(const nlohmann::json& j) {
  Hyperparams hp;
  hp.active_set_size = j.at("M").get<std::size_t>();
  hp.iterations_per_episode = j.at("N").get<std::size_t>();
  hp.initial_scope = j.at("L0").get<std::size_t>();
  hp.mutation_strength = j.at("lambda").get<double>();
  hp.trainer = trainer_config_from_json(j.at("trainer"));
  hp.hidden_dim = j.at("hidden").get<int>();
  hp.activation = net::activation_from_string(j.at("activation").get<std::string>());
  hp.master_seed = j.at("master_seed").get<std::uint64_t>();
  hp.total_step_budget = j.at("budget").get<std::uint64_t>();
  hp.eval_repeats = j.at("eval_repeats").get<int>();
  hp.env_seed_mode = env_seed_mode_from_string(j.at("env_seed_mode").get<std::string>());
  hp.fixed_env_seed = j.at("fixed_env_seed").get<std::uint64_t>();
  hp.bootstrap = bootstrap_from_string(j.at("bootstrap").get<std::string>());
  return hp;
}

inline nlohmann::json to_json(const HistoryRow& r) {
  return {{"env_steps", r.env_steps},
          {"episode", r.episode},
          {"iteration", r.iteration},
          {"reward", r.reward},
          {"is_new_best", r.is_new_best}};
}

inline HistoryRow history_row_from_json(const nlohmann::json& j) {
  return {j.at("env_steps").get<std::uint64_t>(), j.at("episode").get<std::int64_t>(),
          j.at("iteration").get<std::size_t>(), j.at("reward").get<double>(), j.at("is_new_best").get<bool>()};
}

// Everything needed to resume a run bit-exactly or to evaluate/inspect it.
struct Checkpoint {
  envs::EnvConfig env;
  Hyperparams hyperparams;
  TrainingState state;
  // Held-out level range used by evaluation (GridNav test split).
  std::uint64_t eval_level_start = 10000;
  std::uint64_t eval_levels = 1000;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline nlohmann::json to_json(const Checkpoint& c) {
  const EpisodeState& ep = c.state.episode;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : c.state.history) history.push_back(to_json(r));
  const nlohmann::json best_policy = ep.best_policy ? net::to_json(*ep.best_policy) : nlohmann::json(nullptr);
  return {{"format_version", kCheckpointFormatVersion},
          {"env", envs::to_json(c.env)},
          {"eval_split", {{"level_start", c.eval_level_start}, {"levels", c.eval_levels}}},
          {"hyperparams", to_json(c.hyperparams)},
          {"episode_state",
           {{"episode", ep.episode},
            {"scope", ep.scope},
            {"best_trajectory", to_json(ep.best_trajectory)},
            {"best_trajectory_id", ep.best_trajectory_id},
            {"best_fitness", ep.best_fitness},
            {"best_policy_data", to_json(ep.best_policy_data)},
            {"steps_consumed", ep.steps_consumed},
            {"initial_reward", c.state.initial_reward},
            {"budget_exhausted", c.state.budget_exhausted}}},
          {"active_set", to_json(c.state.active)},
          {"best_policy", best_policy},
          {"history", std::move(history)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw CheckpointError("unsupported checkpoint format_version " + std::to_string(version));
    Checkpoint c;
    c.env = envs::env_config_from_json(j.at("env"));
    c.eval_level_start = j.at("eval_split").at("level_start").get<std::uint64_t>();
    c.eval_levels = j.at("eval_split").at("levels").get<std::uint64_t>();
    c.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    const auto& e = j.at("episode_state");
    EpisodeState& ep = c.state.episode;
    ep.episode = e.at("episode").get<std::int64_t>();
    ep.scope = e.at("scope").get<std::size_t>();
    ep.best_trajectory = trajectory_from_json(e.at("best_trajectory"));
    ep.best_trajectory_id = e.at("best_trajectory_id").get<std::uint64_t>();
    ep.best_fitness = e.at("best_fitness").get<double>();
    ep.best_policy_data = active_set_from_json(e.at("best_policy_data"));
    ep.steps_consumed = e.at("steps_consumed").get<std::uint64_t>();
    c.state.initial_reward = e.at("initial_reward").get<double>();
    c.state.budget_exhausted = e.at("budget_exhausted").get<bool>();
    if (!j.at("best_policy").is_null()) ep.best_policy = net::policy_from_json(j.at("best_policy"));
    c.state.active = active_set_from_json(j.at("active_set"));
    for (const auto& r : j.at("history")) c.state.history.push_back(history_row_from_json(r));
    if (c.state.active.size() != c.hyperparams.active_set_size)
      throw CheckpointError("active set holds " + std::to_string(c.state.active.size()) + " samples, expected M=" +
                            std::to_string(c.hyperparams.active_set_size));
    return c;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& ex) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + ex.what());
  }
}

inline std::string checkpoint_text(const Checkpoint& c) { return to_json(c).dump(1) + "\n"; }

// Writes to a temporary file first so a crash never leaves a torn checkpoint.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out << checkpoint_text(c);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + ex.what());
  }
  return checkpoint_from_json(j);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history) {
  out << "env_steps,episode,iteration,reward,is_new_best\n";
  for (const auto& r : history) {
    out << r.env_steps << ',' << r.episode << ',' << r.iteration << ',' << format_double(r.reward) << ','
        << (r.is_new_best ? 1 : 0) << '\n';
  }
}

}  // namespace esi
