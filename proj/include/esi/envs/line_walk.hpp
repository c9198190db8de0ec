#pragma once

#include <algorithm>
#include <cmath>

#include "esi/env.hpp"

namespace esi::envs {

// 1-D point mass. State is (position, velocity); the single continuous
// action is a throttle in [-1, 1]:
//   v' = clamp(v + accel * a, -1, 1),  x' = x + v'
//   reward = (x' - x) - torque_cost * |a|, plus finish_bonus once x' >= goal.
class LineWalk final : public Environment {
 public:
  struct Params {
    int max_steps = 25;
    double goal = 10.0;
    double accel = 0.1;
    double torque_cost = 0.01;
    double finish_bonus = 100.0;
  };

  LineWalk() : LineWalk(Params{}) {}
  explicit LineWalk(Params params) : params_(params) {
    spec_.state_dim = 2;
    spec_.action_kind = ActionKind::kContinuous;
    spec_.action_count = 1;
    spec_.max_steps = params_.max_steps;
    spec_.reward_bound = full_throttle_reward(params_);
    spec_.validate();
  }

  std::string name() const override { return "linewalk"; }
  const EnvSpec& spec() const override { return spec_; }
  const Params& params() const { return params_; }
  Vector state() const { return Vector{{x_, v_}}; }

  // Reward of always pushing a = +1, the reference optimum for this task.
  static double full_throttle_reward(const Params& p) {
    double x = 0.0, v = 0.0, total = 0.0;
    for (int t = 0; t < p.max_steps; ++t) {
      v = std::clamp(v + p.accel, -1.0, 1.0);
      const double nx = x + v;
      total += (nx - x) - p.torque_cost;
      x = nx;
      if (x >= p.goal) return total + p.finish_bonus;
    }
    return total;
  }

 protected:
  Vector do_reset(std::uint64_t) override {
    x_ = 0.0;
    v_ = 0.0;
    return state();
  }

  StepResult do_step(const Vector& action) override {
    const double a = std::clamp(action[0], -1.0, 1.0);
    v_ = std::clamp(v_ + params_.accel * a, -1.0, 1.0);
    const double nx = x_ + v_;
    double reward = (nx - x_) - params_.torque_cost * std::abs(a);
    x_ = nx;
    bool done = false;
    if (x_ >= params_.goal) {
      reward += params_.finish_bonus;
      done = true;
    }
    return {state(), reward, done};
  }

 private:

  Params params_;
  EnvSpec spec_;
  double x_ = 0.0;
  double v_ = 0.0;
};

}  // namespace esi::envs
