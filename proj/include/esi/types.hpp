#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace esi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Thrown for shape mismatches between policies, samples and environments.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Environment-side failure: acting on a finished episode, bad action shape,
// or a remote environment that stopped answering.
class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One (state, action, reward) triple. `state` is the observation seen before
// the action was taken; discrete actions are stored one-hot.
struct Sample {
  Vector state;
  Vector action;
  double reward = 0.0;

  friend bool operator==(const Sample& a, const Sample& b) {
    return a.reward == b.reward && a.state.size() == b.state.size() &&
           a.action.size() == b.action.size() && a.state == b.state &&
           a.action == b.action;
  }
};

struct Trajectory {
  std::vector<Sample> samples;
  double total_reward = 0.0;
  std::uint64_t env_seed = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  void push(Sample s) {
    total_reward += s.reward;
    samples.push_back(std::move(s));
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class ActionKind { kContinuous, kDiscrete };

struct EnvSpec {
  int state_dim = 1;
  ActionKind action_kind = ActionKind::kContinuous;
  // Continuous: action vector length. Discrete: number of actions.
  int action_count = 1;
  int max_steps = 1;
  std::optional<double> reward_bound;

  // Length of the action vector the policy must emit (one-hot for discrete).
  int action_dim() const { return action_count; }
  bool discrete() const { return action_kind == ActionKind::kDiscrete; }

  void validate() const {
    if (state_dim < 1) throw std::invalid_argument("EnvSpec: state_dim must be >= 1");
    if (max_steps < 1) throw std::invalid_argument("EnvSpec: max_steps must be >= 1");
    if (discrete() && action_count < 2)
      throw std::invalid_argument("EnvSpec: discrete environments need >= 2 actions");
    if (!discrete() && action_count < 1)
      throw std::invalid_argument("EnvSpec: continuous action dim must be >= 1");
  }

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

}  // namespace esi
