#pragma once

#include <algorithm>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "esi/net.hpp"
#include "esi/rng.hpp"
#include "esi/types.hpp"

namespace esi {

struct StepResult {
  Vector state;
  double reward = 0.0;
  bool done = false;
};

// Gym-style environment. Public entry points validate and forward to the
// do_* hooks; subclasses only implement dynamics.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual const EnvSpec& spec() const = 0;

  Vector reset(std::uint64_t seed) {
    steps_ = 0;
    done_ = false;
    return do_reset(seed);
  }

  StepResult step(const Vector& action) {
    if (done_) throw EnvError(name() + ": step() called on a finished episode; call reset()");
    if (action.size() != spec().action_dim()) {
      throw EnvError(name() + ": action has length " + std::to_string(action.size()) + ", expected " +
                     std::to_string(spec().action_dim()));
    }
    StepResult r = do_step(action);
    ++steps_;
    if (steps_ >= spec().max_steps) r.done = true;
    done_ = r.done;
    return r;
  }

  bool done() const { return done_; }
  int steps() const { return steps_; }

 protected:
  virtual Vector do_reset(std::uint64_t seed) = 0;
  virtual StepResult do_step(const Vector& action) = 0;

 private:
  int steps_ = 0;
  bool done_ = true;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

// Index of the largest entry; ties go to the lowest index.
inline int argmax(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline Vector one_hot(int index, int n) {
  Vector v = Vector::Zero(n);
  v[index] = 1.0;
  return v;
}

// Maps a raw network output to the action actually applied and recorded.
inline Vector to_env_action(const EnvSpec& spec, const Vector& output) {
  if (spec.discrete()) return one_hot(argmax(output), spec.action_count);
  return output.cwiseMax(-1.0).cwiseMin(1.0);
}

inline void check_policy_fits(const EnvSpec& spec, const net::MlpPolicy& policy) {
  if (policy.input_dim() != spec.state_dim || policy.output_dim() != spec.action_dim()) {
    throw DimensionError("policy shape (" + std::to_string(policy.input_dim()) + " -> " +
                         std::to_string(policy.output_dim()) + ") does not match environment (" +
                         std::to_string(spec.state_dim) + " -> " + std::to_string(spec.action_dim()) + ")");
  }
}

// Greedy rollout of `policy`. Each recorded sample holds the observation
// before the action, the applied action and the reward it earned.
inline Trajectory execute_policy(Environment& env, const net::MlpPolicy& policy, std::uint64_t seed,
                                 int max_steps = 0) {
  const EnvSpec& spec = env.spec();
  check_policy_fits(spec, policy);
  const int limit = max_steps > 0 ? std::min(max_steps, spec.max_steps) : spec.max_steps;
  Trajectory traj;
  traj.env_seed = seed;
  Vector state = env.reset(seed);
  for (int t = 0; t < limit; ++t) {
    Vector action = to_env_action(spec, net::forward(policy, state));
    StepResult r = env.step(action);
    traj.push({std::move(state), std::move(action), r.reward});
    state = std::move(r.state);
    if (r.done) break;
  }
  return traj;
}

struct RandomPolicyShape {
  int hidden_dim = 40;
  double init_scale = 0.1;
  net::Activation activation = net::Activation::kTanh;
};

// Rollout of a freshly initialized, untrained policy.
inline Trajectory random_trajectory(Environment& env, std::uint64_t seed, const RandomPolicyShape& shape = {}) {
  const EnvSpec& spec = env.spec();
  net::TrainerConfig init;
  init.init_scale = shape.init_scale;
  init.seed = derive_seed(seed, {stream::kPolicy});
  auto policy = net::init_policy(spec.state_dim, shape.hidden_dim, spec.action_dim(), init, shape.activation);
  return execute_policy(env, policy, seed);
}

// Rollout with actions drawn uniformly: U[-1,1]^d or a uniform discrete index.
// `action_seed` drives the action draws and defaults to a hash of `seed`.
inline Trajectory random_action_trajectory(Environment& env, std::uint64_t seed,
                                           std::optional<std::uint64_t> action_seed = std::nullopt) {
  const EnvSpec& spec = env.spec();
  Rng rng(action_seed ? *action_seed : derive_seed(seed, {stream::kBootstrap}));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Trajectory traj;
  traj.env_seed = seed;
  Vector state = env.reset(seed);
  for (int t = 0; t < spec.max_steps; ++t) {
    Vector action(spec.action_dim());
    if (spec.discrete()) {
      action = one_hot(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec.action_count))),
                       spec.action_count);
    } else {
      for (Eigen::Index i = 0; i < action.size(); ++i) action[i] = unit(rng);
    }
    StepResult r = env.step(action);
    traj.push({std::move(state), std::move(action), r.reward});
    state = std::move(r.state);
    if (r.done) break;
  }
  return traj;
}

// ---------------------------------------------------------------------------
// JSON helpers shared by trajectory dumps, checkpoints and inspect output.

inline nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline nlohmann::json to_json(const Sample& s) {
  return {{"state", vector_to_json(s.state)}, {"action", vector_to_json(s.action)}, {"reward", s.reward}};
}

inline Sample sample_from_json(const nlohmann::json& j) {
  return {vector_from_json(j.at("state")), vector_from_json(j.at("action")), j.at("reward").get<double>()};
}

inline nlohmann::json to_json(const Trajectory& t) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : t.samples) samples.push_back(to_json(s));
  return {{"env_seed", t.env_seed}, {"total_reward", t.total_reward}, {"samples", std::move(samples)}};
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  t.env_seed = j.at("env_seed").get<std::uint64_t>();
  for (const auto& s : j.at("samples")) t.samples.push_back(sample_from_json(s));
  t.total_reward = j.at("total_reward").get<double>();
  return t;
}

// JSON-lines dump: one header line, then one line per step.
inline void write_trajectory_jsonl(std::ostream& out, const Trajectory& t, const std::string& env_name) {
  out << nlohmann::json{{"env", env_name},
                        {"seed", t.env_seed},
                        {"total_reward", t.total_reward},
                        {"length", t.size()}}
             .dump()
      << '\n';
  for (std::size_t j = 0; j < t.size(); ++j) {
    const Sample& s = t.samples[j];
    out << nlohmann::json{{"step", j},
                          {"state", vector_to_json(s.state)},
                          {"action", vector_to_json(s.action)},
                          {"reward", s.reward}}
               .dump()
        << '\n';
  }
}

struct TrajectoryDump {
  std::string env_name;
  Trajectory trajectory;
};

inline TrajectoryDump read_trajectory_jsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trajectory dump: missing header line");
  const auto header = nlohmann::json::parse(line);
  TrajectoryDump dump;
  dump.env_name = header.at("env").get<std::string>();
  dump.trajectory.env_seed = header.at("seed").get<std::uint64_t>();
  std::size_t expected_step = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.at("step").get<std::size_t>() != expected_step++)
      throw std::invalid_argument("trajectory dump: steps out of order");
    dump.trajectory.push(sample_from_json(j));
  }
  return dump;
}

}  // namespace esi
