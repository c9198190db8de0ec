#pragma once

#include <vector>

#include "esi/env.hpp"

namespace esi::envs {

// Scripted oracle task. The episode walks through `length` checkpoints in
// order; checkpoint k is observed as the one-hot vector e_k and has one
// planted correct action. Choosing it earns +1, anything else earns 0, and
// every checkpoint is visited exactly once. The total reward therefore counts
// the checkpoints at which the policy reproduces the planted action, i.e. how
// many of the planted (e_k, action) samples it has learned to imitate.
class Checklist final : public Environment {
 public:
  struct Params {
    int length = 12;
    int actions = 4;
    std::uint64_t plant_seed = 0;
  };

  Checklist() : Checklist(Params{}) {}
  explicit Checklist(Params params) : params_(params) {
    if (params_.length < 1) throw std::invalid_argument("Checklist: length must be >= 1");
    spec_.state_dim = params_.length;
    spec_.action_kind = ActionKind::kDiscrete;
    spec_.action_count = params_.actions;
    spec_.max_steps = params_.length;
    spec_.reward_bound = params_.length;
    spec_.validate();
    Rng rng(derive_seed(params_.plant_seed, {0x434b4cULL}));
    for (int k = 0; k < params_.length; ++k)
      planted_.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(params_.actions))));
  }

  std::string name() const override { return "checklist"; }
  const EnvSpec& spec() const override { return spec_; }
  const Params& params() const { return params_; }

  int planted_action(int checkpoint) const { return planted_.at(static_cast<std::size_t>(checkpoint)); }

  // The planted sample for a checkpoint, as it appears in a trajectory.
  Sample planted_sample(int checkpoint) const {
    return {one_hot(checkpoint, params_.length), one_hot(planted_action(checkpoint), params_.actions), 1.0};
  }

  // True when `s` is one of the planted samples.
  bool is_planted(const Sample& s) const {
    if (s.state.size() != params_.length || s.action.size() != params_.actions) return false;
    const int k = argmax(s.state);
    return s.state == one_hot(k, params_.length) && s.action == one_hot(planted_action(k), params_.actions);
  }

 protected:
  Vector do_reset(std::uint64_t) override {
    index_ = 0;
    return one_hot(0, params_.length);
  }

  StepResult do_step(const Vector& action) override {
    const double reward = argmax(action) == planted_action(index_) ? 1.0 : 0.0;
    ++index_;
    const bool done = index_ >= params_.length;
    return {done ? Vector::Zero(params_.length).eval() : one_hot(index_, params_.length), reward, done};
  }

 private:
  Params params_;
  EnvSpec spec_;
  std::vector<int> planted_;
  int index_ = 0;
};

}  // namespace esi::envs
