#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "esi/active_set.hpp"
#include "esi/env.hpp"
#include "esi/net.hpp"
#include "esi/rng.hpp"

namespace esi {

// How the very first best trajectory is produced.
enum class Bootstrap {
  kPolicy,         // rollout of an untrained, freshly initialized policy
  kRandomActions,  // rollout with uniformly random actions
};

// Which environment seed each iteration is evaluated on.
enum class EnvSeedMode {
  kDerived,  // hash of (master_seed, episode, iteration, repeat)
  kFixed,    // fixed_env_seed + repeat for every iteration
};

inline std::string to_string(Bootstrap b) { return b == Bootstrap::kPolicy ? "policy" : "random_actions"; }
inline std::string to_string(EnvSeedMode m) { return m == EnvSeedMode::kDerived ? "derived" : "fixed"; }

inline Bootstrap bootstrap_from_string(const std::string& s) {
  if (s == "policy") return Bootstrap::kPolicy;
  if (s == "random_actions") return Bootstrap::kRandomActions;
  throw std::invalid_argument("unknown bootstrap '" + s + "' (expected policy or random_actions)");
}

inline EnvSeedMode env_seed_mode_from_string(const std::string& s) {
  if (s == "derived") return EnvSeedMode::kDerived;
  if (s == "fixed") return EnvSeedMode::kFixed;
  throw std::invalid_argument("unknown env_seed_mode '" + s + "' (expected derived or fixed)");
}

struct Hyperparams {
  std::size_t active_set_size = 25;          // M
  std::size_t iterations_per_episode = 125;  // N
  std::size_t initial_scope = 5;             // L_0
  double mutation_strength = 0.5;            // lambda
  net::TrainerConfig trainer;                // trainer.seed is replaced per iteration
  int hidden_dim = 40;
  net::Activation activation = net::Activation::kTanh;
  std::uint64_t master_seed = 0;
  std::uint64_t total_step_budget = 1'000'000;
  int eval_repeats = 1;
  EnvSeedMode env_seed_mode = EnvSeedMode::kDerived;
  std::uint64_t fixed_env_seed = 0;
  Bootstrap bootstrap = Bootstrap::kPolicy;

  std::size_t replaced() const { return replaced_count(active_set_size, mutation_strength); }

  void validate() const {
    if (active_set_size < 1) throw std::invalid_argument("M (active set size) must be >= 1");
    if (iterations_per_episode < 1) throw std::invalid_argument("N (iterations per episode) must be >= 1");
    if (initial_scope < 1) throw std::invalid_argument("L0 (initial scope) must be >= 1");
    if (!(mutation_strength >= 0.0 && mutation_strength <= 1.0))
      throw std::invalid_argument("lambda (mutation strength) must lie in [0, 1]");
    if (hidden_dim < 1) throw std::invalid_argument("hidden size must be >= 1");
    if (total_step_budget < 1) throw std::invalid_argument("step budget must be >= 1");
    if (eval_repeats < 1) throw std::invalid_argument("eval_repeats must be >= 1");
    trainer.validate();
  }

  // Reference settings for the walker-style and procedurally generated tasks.
  static Hyperparams biped_like() {
    Hyperparams hp;
    hp.active_set_size = 25;
    hp.iterations_per_episode = 125;
    hp.initial_scope = 5;
    hp.mutation_strength = 0.5;
    hp.hidden_dim = 40;
    return hp;
  }

  static Hyperparams plunder_like() {
    Hyperparams hp;
    hp.active_set_size = 160;
    hp.iterations_per_episode = 30;
    hp.initial_scope = 20;
    hp.mutation_strength = 0.5;
    hp.hidden_dim = 128;
    return hp;
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct IterationSeeds {
  std::uint64_t mutation = 0;
  std::uint64_t policy = 0;  // init + minibatch stream
  std::vector<std::uint64_t> env;  // one per evaluation repeat
};

inline IterationSeeds iteration_seeds(const Hyperparams& hp, std::int64_t episode, std::size_t iteration) {
  const auto e = static_cast<std::uint64_t>(episode);
  IterationSeeds s;
  s.mutation = derive_seed(hp.master_seed, {stream::kMutation, e, iteration});
  s.policy = derive_seed(hp.master_seed, {stream::kPolicy, e, iteration});
  for (int r = 0; r < hp.eval_repeats; ++r) {
    s.env.push_back(hp.env_seed_mode == EnvSeedMode::kFixed
                        ? hp.fixed_env_seed + static_cast<std::uint64_t>(r)
                        : derive_seed(hp.master_seed, {stream::kEnv, e, iteration, static_cast<std::uint64_t>(r)}));
  }
  return s;
}

// Trajectory id of iteration i in episode e. Id 0 is the bootstrap trajectory.
inline std::uint64_t trajectory_id(const Hyperparams& hp, std::int64_t episode, std::size_t iteration) {
  return 1 + static_cast<std::uint64_t>(episode) * hp.iterations_per_episode + iteration;
}

struct EpisodeState {
  std::int64_t episode = 0;  // e
  std::size_t scope = 1;     // L_e = L_0 + e
  Trajectory best_trajectory;
  std::uint64_t best_trajectory_id = 0;
  double best_fitness = 0.0;
  std::optional<net::MlpPolicy> best_policy;
  ActiveSet best_policy_data;
  std::uint64_t steps_consumed = 0;

  friend bool operator==(const EpisodeState&, const EpisodeState&) = default;
};

struct IterationResult {
  ActiveSet imitation_data;
  net::MlpPolicy policy;
  Trajectory trajectory;
  double fitness = 0.0;  // mean rollout reward
  std::uint64_t trajectory_id = 0;
};

struct HistoryRow {
  std::uint64_t env_steps = 0;  // cumulative, after this iteration
  std::int64_t episode = 0;
  std::size_t iteration = 0;
  double reward = 0.0;
  bool is_new_best = false;

  friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

struct TrainingState {
  EpisodeState episode;
  ActiveSet active;
  std::vector<HistoryRow> history;
  double initial_reward = 0.0;
  bool budget_exhausted = false;

  friend bool operator==(const TrainingState&, const TrainingState&) = default;
};

// Rolls `policy` out once per env seed and concatenates the rollouts.
inline Trajectory evaluate_rollouts(Environment& env, const net::MlpPolicy& policy,
                                    const std::vector<std::uint64_t>& env_seeds) {
  Trajectory out;
  out.env_seed = env_seeds.front();
  for (std::uint64_t seed : env_seeds) {
    Trajectory t = execute_policy(env, policy, seed);
    for (auto& s : t.samples) out.push(std::move(s));
  }
  return out;
}

// One mutate -> train -> rollout cycle. Reads the episode state, never writes it.
inline IterationResult run_iteration(const ActiveSet& active, const EpisodeState& episode, const Hyperparams& hp,
                                     Environment& env, std::size_t iteration) {
  const IterationSeeds seeds = iteration_seeds(hp, episode.episode, iteration);
  Rng rng(seeds.mutation);
  IterationResult r;
  r.trajectory_id = trajectory_id(hp, episode.episode, iteration);
  r.imitation_data = mutate_set(active, episode.best_trajectory, episode.best_trajectory_id, episode.scope,
                                hp.mutation_strength, episode.episode, rng);

  net::TrainerConfig tc = hp.trainer;
  tc.seed = seeds.policy;
  const EnvSpec& spec = env.spec();
  auto fresh = net::init_policy(spec.state_dim, hp.hidden_dim, spec.action_dim(), tc, hp.activation);
  const auto data = r.imitation_data.imitation_data();
  r.policy = net::train(std::move(fresh), data, tc);

  r.trajectory = evaluate_rollouts(env, r.policy, seeds.env);
  r.fitness = r.trajectory.total_reward / static_cast<double>(hp.eval_repeats);
  return r;
}

struct TrainingOptions {
  int workers = 1;
  // Called after every episode commit; return false to stop training.
  std::function<bool(const TrainingState&)> on_episode_end;
  // Optional demonstration used instead of the bootstrap rollout.
  std::optional<Trajectory> demonstration;
};

namespace detail {

// Runs iterations [first, first + count) of the current episode, `workers`
// at a time, each worker on its own environment instance.
inline std::vector<IterationResult> run_batch(const ActiveSet& active, const EpisodeState& frozen, const Hyperparams& hp,
                                              std::vector<std::unique_ptr<Environment>>& envs, std::size_t first,
                                              std::size_t count) {
  std::vector<std::optional<IterationResult>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  auto work = [&](std::size_t k) {
    try {
      slots[k] = run_iteration(active, frozen, hp, *envs[k], first + k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> threads;
    for (std::size_t k = 1; k < count; ++k) threads.emplace_back(work, k);
    work(0);
  }
  std::vector<IterationResult> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    out.push_back(std::move(*slots[k]));
  }
  return out;
}

inline bool budget_left(const TrainingState& s, const Hyperparams& hp) {
  return s.history.empty() || s.episode.steps_consumed < hp.total_step_budget;
}

}  // namespace detail

// Runs the N iterations of one episode against a frozen copy of the episode
// state, merges the results in iteration order (strict improvement, so the
// lowest index wins ties) and commits the globally best imitation data.
inline void run_episode(TrainingState& state, const Hyperparams& hp,
                        std::vector<std::unique_ptr<Environment>>& envs) {
  const std::size_t n = hp.iterations_per_episode;
  const std::size_t width = std::max<std::size_t>(1, envs.size());
  // Every iteration of the episode sees the state as it was at episode start.
  const EpisodeState frozen = state.episode;
  bool improved = false;
  for (std::size_t next = 0; next < n && !state.budget_exhausted;) {
    if (!detail::budget_left(state, hp)) {
      state.budget_exhausted = true;
      break;
    }
    const std::size_t count = std::min(width, n - next);
    auto results = detail::run_batch(state.active, frozen, hp, envs, next, count);
    for (std::size_t k = 0; k < count; ++k) {
      if (!detail::budget_left(state, hp)) {
        state.budget_exhausted = true;
        break;
      }
      IterationResult& r = results[k];
      EpisodeState& ep = state.episode;
      ep.steps_consumed += r.trajectory.size();
      const bool better = r.fitness > ep.best_fitness;
      state.history.push_back({ep.steps_consumed, ep.episode, next + k, r.fitness, better});
      if (better) {
        ep.best_fitness = r.fitness;
        ep.best_trajectory = std::move(r.trajectory);
        ep.best_trajectory_id = r.trajectory_id;
        ep.best_policy = std::move(r.policy);
        ep.best_policy_data = std::move(r.imitation_data);
        improved = true;
      }
    }
    next += count;
  }
  if (state.episode.steps_consumed >= hp.total_step_budget) state.budget_exhausted = true;
  if (improved) state.active = state.episode.best_policy_data;
  state.episode.episode += 1;
  state.episode.scope = hp.initial_scope + static_cast<std::size_t>(state.episode.episode);
}

// Initial state: best trajectory from the bootstrap rollouts (or a supplied
// demonstration) and a random size-M subset of it as the active set. The
// bootstrap fitness uses the same eval_repeats rollouts as an iteration.
inline TrainingState bootstrap_training(const Hyperparams& hp, const EnvFactory& make_env,
                                        const std::optional<Trajectory>& demonstration = std::nullopt) {
  hp.validate();
  auto env = make_env();
  TrainingState s;
  EpisodeState& ep = s.episode;
  ep.scope = hp.initial_scope;
  std::vector<std::uint64_t> env_seeds;
  for (int r = 0; r < hp.eval_repeats; ++r) {
    env_seeds.push_back(hp.env_seed_mode == EnvSeedMode::kFixed
                            ? hp.fixed_env_seed + static_cast<std::uint64_t>(r)
                            : derive_seed(hp.master_seed, {stream::kEnv, stream::kBootstrap, static_cast<std::uint64_t>(r)}));
  }
  if (demonstration) {
    if (demonstration->empty()) throw std::invalid_argument("demonstration trajectory is empty");
    for (const auto& smp : demonstration->samples) {
      if (smp.state.size() != env->spec().state_dim || smp.action.size() != env->spec().action_dim())
        throw DimensionError("demonstration sample shape does not match the environment");
    }
    ep.best_trajectory = *demonstration;
    ep.best_fitness = demonstration->total_reward;
  } else if (hp.bootstrap == Bootstrap::kRandomActions) {
    for (std::size_t r = 0; r < env_seeds.size(); ++r) {
      Trajectory t = random_action_trajectory(*env, env_seeds[r], derive_seed(hp.master_seed, {stream::kBootstrap, r}));
      for (auto& smp : t.samples) ep.best_trajectory.push(std::move(smp));
    }
    ep.best_trajectory.env_seed = env_seeds.front();
    ep.steps_consumed = ep.best_trajectory.size();
    ep.best_fitness = ep.best_trajectory.total_reward / hp.eval_repeats;
  } else {
    net::TrainerConfig init = hp.trainer;
    init.seed = derive_seed(hp.master_seed, {stream::kBootstrap, stream::kPolicy});
    const EnvSpec& spec = env->spec();
    auto policy = net::init_policy(spec.state_dim, hp.hidden_dim, spec.action_dim(), init, hp.activation);
    ep.best_trajectory = evaluate_rollouts(*env, policy, env_seeds);
    ep.best_policy = std::move(policy);
    ep.steps_consumed = ep.best_trajectory.size();
    ep.best_fitness = ep.best_trajectory.total_reward / hp.eval_repeats;
  }
  ep.best_trajectory_id = 0;
  s.initial_reward = ep.best_fitness;
  Rng rng(derive_seed(hp.master_seed, {stream::kInitialSubset}));
  s.active = initial_active_set(ep.best_trajectory, 0, hp.active_set_size, rng);
  ep.best_policy_data = s.active;
  return s;
}

// Runs episodes until the step budget is spent (at least one iteration always
// runs) or the episode callback asks to stop.
inline TrainingState continue_training(TrainingState state, const Hyperparams& hp, const EnvFactory& make_env,
                                       const TrainingOptions& options = {}) {
  hp.validate();
  std::vector<std::unique_ptr<Environment>> envs;
  for (int w = 0; w < std::max(1, options.workers); ++w) envs.push_back(make_env());
  while (!state.budget_exhausted) {
    run_episode(state, hp, envs);
    if (options.on_episode_end && !options.on_episode_end(state)) break;
  }
  return state;
}

inline TrainingState run_training(const Hyperparams& hp, const EnvFactory& make_env,
                                  const TrainingOptions& options = {}) {
  return continue_training(bootstrap_training(hp, make_env, options.demonstration), hp, make_env, options);
}

}  // namespace esi
