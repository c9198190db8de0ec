#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <sstream>
#include <string>
#include <vector>

#include "esi/env.hpp"

namespace esi::envs {

// Procedurally generated grid navigation. Each level seed fixes the wall
// layout, the start cell and the goal cell. A reset seed selects the level
// `level_start + seed % num_levels`, so disjoint level ranges give a
// train/test split.
//
// Observation (6 values): sign of the goal offset (dx, dy), then one flag
// per direction (up, down, left, right) that is 1 when moving that
// way is blocked by a wall or the border.
// Actions: 0 up, 1 down, 2 left, 3 right. Reward is -1 per step and +50 on
// the step that reaches the goal.
class GridNav final : public Environment {
 public:
  static constexpr int kActions = 4;
  static constexpr double kStepReward = -1.0;
  static constexpr double kGoalReward = 50.0;
  static constexpr int kDefaultSize = 7;

  struct Params {
    int size = kDefaultSize;
    int walls = 2;
    int max_steps = 20;
    std::uint64_t level_start = 0;
    std::uint64_t num_levels = 200;  // 0 = every seed is its own level
  };

  struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
  };

  struct Level {
    int size = 0;
    std::vector<char> wall;  // row-major, size*size
    Cell start;
    Cell goal;

    bool blocked(int x, int y) const {
      return x < 0 || y < 0 || x >= size || y >= size || wall[static_cast<std::size_t>(y * size + x)];
    }
  };

  static constexpr std::array<Cell, kActions> kMoves{{{0, -1}, {0, 1}, {-1, 0}, {1, 0}}};

  GridNav() : GridNav(Params{}) {}
  explicit GridNav(Params params) : params_(params) {
    if (params_.size < 2) throw std::invalid_argument("GridNav: size must be >= 2");
    if (params_.walls < 0 || params_.walls > params_.size * params_.size - 2)
      throw std::invalid_argument("GridNav: wall count does not fit the grid");
    spec_.state_dim = 6;
    spec_.action_kind = ActionKind::kDiscrete;
    spec_.action_count = kActions;
    spec_.max_steps = params_.max_steps;
    spec_.reward_bound = kGoalReward + kStepReward;
    spec_.validate();
  }

  std::string name() const override { return "gridnav"; }
  const EnvSpec& spec() const override { return spec_; }
  const Params& params() const { return params_; }

  std::uint64_t level_id(std::uint64_t seed) const {
    return params_.level_start + (params_.num_levels ? seed % params_.num_levels : seed);
  }

  Level level_for_seed(std::uint64_t seed) const { return generate(params_, level_id(seed)); }

  static Level generate(const Params& p, std::uint64_t level) {
    Rng rng(derive_seed(level, {0x47524944ULL}));
    const auto cells = static_cast<std::size_t>(p.size * p.size);
    auto random_cell = [&] {
      const auto c = static_cast<int>(uniform_index(rng, cells));
      return Cell{c % p.size, c / p.size};
    };
    for (;;) {
      Level lv;
      lv.size = p.size;
      lv.wall.assign(cells, 0);
      for (int placed = 0; placed < p.walls;) {
        const Cell c = random_cell();
        char& w = lv.wall[static_cast<std::size_t>(c.y * p.size + c.x)];
        if (!w) {
          w = 1;
          ++placed;
        }
      }
      do lv.start = random_cell();
      while (lv.blocked(lv.start.x, lv.start.y));
      do lv.goal = random_cell();
      while (lv.blocked(lv.goal.x, lv.goal.y) || lv.goal == lv.start);
      if (shortest_path(lv) > 0) return lv;
    }
  }

  // Number of moves on a shortest start->goal path, or -1 if unreachable.
  static int shortest_path(const Level& lv) {
    std::vector<int> dist(lv.wall.size(), -1);
    auto at = [&](Cell c) -> int& { return dist[static_cast<std::size_t>(c.y * lv.size + c.x)]; };
    std::deque<Cell> queue{lv.start};
    at(lv.start) = 0;
    while (!queue.empty()) {
      const Cell c = queue.front();
      queue.pop_front();
      if (c == lv.goal) return at(c);
      for (const Cell& m : kMoves) {
        const Cell n{c.x + m.x, c.y + m.y};
        if (lv.blocked(n.x, n.y) || at(n) >= 0) continue;
        at(n) = at(c) + 1;
        queue.push_back(n);
      }
    }
    return -1;
  }

  // Best achievable episode reward on the level selected by `seed`.
  double optimal_reward(std::uint64_t seed) const {
    return kGoalReward + kStepReward * shortest_path(level_for_seed(seed));
  }

  const Level& level() const { return level_; }
  Cell position() const { return pos_; }

  // 3x3 ASCII view of an observation: '@' agent, '#' blocked neighbour, '*'
  // the neighbouring cell in the goal's direction. The observation only
  // carries the direction of the goal, so it is drawn adjacent to the agent.
  static std::string render_observation(const Vector& obs) {
    if (obs.size() != 6) throw DimensionError("GridNav observation must have 6 entries");
    std::array<std::string, 3> rows{"...", "...", "..."};
    auto put = [&](int x, int y, char ch) { rows[static_cast<std::size_t>(y + 1)][static_cast<std::size_t>(x + 1)] = ch; };
    const int sx = static_cast<int>(std::lround(obs[0]));
    const int sy = static_cast<int>(std::lround(obs[1]));
    if (sx != 0 || sy != 0) put(sx, sy, '*');
    for (int a = 0; a < kActions; ++a)
      if (obs[2 + a] > 0.5) put(kMoves[static_cast<std::size_t>(a)].x, kMoves[static_cast<std::size_t>(a)].y, '#');
    put(0, 0, '@');
    std::ostringstream os;
    for (const auto& r : rows) os << r << '\n';
    return os.str();
  }

 protected:
  Vector do_reset(std::uint64_t seed) override {
    level_ = level_for_seed(seed);
    pos_ = level_.start;
    return observe();
  }

  StepResult do_step(const Vector& action) override {
    int a = -1;
    for (int i = 0; i < kActions; ++i) {
      if (action[i] == 1.0) {
        if (a >= 0) a = -2;
        else a = i;
      } else if (action[i] != 0.0) {
        a = -2;
      }
    }
    if (a < 0) throw EnvError("gridnav: action must be one-hot");
    const Cell m = kMoves[static_cast<std::size_t>(a)];
    if (!level_.blocked(pos_.x + m.x, pos_.y + m.y)) pos_ = {pos_.x + m.x, pos_.y + m.y};
    double reward = kStepReward;
    bool done = false;
    if (pos_ == level_.goal) {
      reward += kGoalReward;
      done = true;
    }
    return {observe(), reward, done};
  }

 private:
  static double sign(int v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

  Vector observe() const {
    Vector obs(6);
    obs[0] = sign(level_.goal.x - pos_.x);
    obs[1] = sign(level_.goal.y - pos_.y);
    for (int a = 0; a < kActions; ++a) {
      const Cell m = kMoves[static_cast<std::size_t>(a)];
      obs[2 + a] = level_.blocked(pos_.x + m.x, pos_.y + m.y) ? 1.0 : 0.0;
    }
    return obs;
  }

  Params params_;
  EnvSpec spec_;
  Level level_;
  Cell pos_;
};

}  // namespace esi::envs
