#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "esi/envs/registry.hpp"
#include "oracles.hpp"

using namespace esi;
using namespace esi::envs;

namespace {

net::MlpPolicy zero_policy(int in, int out) {
  net::TrainerConfig c;
  c.init_scale = 0.0;
  return net::init_policy(in, 4, out, c);
}

}  // namespace

TEST(LineWalk, StartsAtRest) {
  LineWalk env;
  for (std::uint64_t seed : {0ULL, 5ULL, 123456789ULL}) EXPECT_EQ(env.reset(seed), Vector::Zero(2));
}

TEST(LineWalk, ZeroActionAtRest) {
  LineWalk env;
  env.reset(0);
  const auto r = env.step(Vector::Zero(1));
  EXPECT_EQ(r.state, Vector::Zero(2));
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.done);
}

TEST(LineWalk, HandSimulatedThreeSteps) {
  LineWalk env;
  env.reset(0);
  // a = 1: v 0.1, x 0.1, r 0.1 - 0.01
  auto r = env.step(Vector::Constant(1, 1.0));
  EXPECT_NEAR(r.state[0], 0.1, 1e-12);
  EXPECT_NEAR(r.state[1], 0.1, 1e-12);
  EXPECT_NEAR(r.reward, 0.09, 1e-12);
  // a = 0.5: v 0.15, x 0.25, r 0.15 - 0.005
  r = env.step(Vector::Constant(1, 0.5));
  EXPECT_NEAR(r.state[0], 0.25, 1e-12);
  EXPECT_NEAR(r.state[1], 0.15, 1e-12);
  EXPECT_NEAR(r.reward, 0.145, 1e-12);
  // a = -1: v 0.05, x 0.3, r 0.05 - 0.01
  r = env.step(Vector::Constant(1, -1.0));
  EXPECT_NEAR(r.state[0], 0.30, 1e-12);
  EXPECT_NEAR(r.state[1], 0.05, 1e-12);
  EXPECT_NEAR(r.reward, 0.04, 1e-12);
  EXPECT_FALSE(r.done);
}

TEST(LineWalk, ActionsAreClamped) {
  LineWalk env;
  env.reset(0);
  const auto r = env.step(Vector::Constant(1, 7.0));
  EXPECT_NEAR(r.state[1], 0.1, 1e-12);
}

TEST(LineWalk, FullThrottleReachesGoalWithBonus) {
  const double ref = oracle::linewalk_full_throttle();
  EXPECT_NEAR(LineWalk::full_throttle_reward({}), ref, 1e-9);
  EXPECT_GT(ref, 100.0);
  LineWalk env;
  env.reset(0);
  double total = 0;
  bool done = false;
  while (!done) {
    const auto r = env.step(Vector::Constant(1, 1.0));
    total += r.reward;
    done = r.done;
  }
  EXPECT_NEAR(total, ref, 1e-9);
  EXPECT_GE(env.state()[0], 10.0);
}

TEST(LineWalk, ZeroPolicyRolloutIsStill) {
  LineWalk env;
  const auto t = execute_policy(env, zero_policy(2, 1), 3);
  EXPECT_EQ(t.size(), static_cast<std::size_t>(env.spec().max_steps));
  EXPECT_EQ(t.total_reward, 0.0);
  for (const auto& s : t.samples) EXPECT_EQ(s.action[0], 0.0);
}

TEST(Environment, StepAfterDoneThrows) {
  LineWalk env({.max_steps = 2});
  env.reset(0);
  env.step(Vector::Zero(1));
  EXPECT_TRUE(env.step(Vector::Zero(1)).done);
  EXPECT_THROW(env.step(Vector::Zero(1)), EnvError);
}

TEST(Environment, StepBeforeResetThrows) {
  LineWalk env;
  EXPECT_THROW(env.step(Vector::Zero(1)), EnvError);
}

TEST(Environment, WrongActionShapeThrows) {
  GridNav env;
  env.reset(0);
  EXPECT_THROW(env.step(Vector::Zero(3)), EnvError);
  EXPECT_THROW(env.step(Vector::Constant(4, 0.25)), EnvError);
}

TEST(Environment, PolicyShapeMismatchThrows) {
  GridNav env;
  EXPECT_THROW(execute_policy(env, zero_policy(2, 1), 0), DimensionError);
}

TEST(GridNav, SameSeedSameLevel) {
  GridNav a, b;
  a.reset(1);
  b.reset(1);
  EXPECT_EQ(a.position(), b.position());
  EXPECT_EQ(a.level().goal, b.level().goal);
  EXPECT_EQ(a.level().wall, b.level().wall);
}

TEST(GridNav, GeneratorOutputsForFirstTenSeeds) {
  GridNav env;
  std::set<std::pair<int, int>> goals;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    env.reset(seed);
    const auto lv = GridNav::generate(env.params(), env.level_id(seed));
    EXPECT_EQ(env.position(), lv.start);
    EXPECT_EQ(env.level().goal, lv.goal);
    EXPECT_FALSE(lv.start == lv.goal);
    EXPECT_FALSE(lv.blocked(lv.goal.x, lv.goal.y));
    EXPECT_EQ(std::count(lv.wall.begin(), lv.wall.end(), 1), env.params().walls);
    EXPECT_GT(oracle::bfs(lv), 0);
    goals.insert({lv.goal.x, lv.goal.y});
  }
  EXPECT_GE(goals.size(), 2u);
}

TEST(GridNav, LevelRangeSelectsLevel) {
  GridNav train({.level_start = 0, .num_levels = 200});
  GridNav test({.level_start = 10000, .num_levels = 1000});
  EXPECT_EQ(train.level_id(205), 5u);
  EXPECT_EQ(test.level_id(3), 10003u);
  EXPECT_EQ(test.level_id(1003), 10003u);
}

TEST(GridNav, ShortestPathMatchesBfsOracle) {
  GridNav env;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto lv = env.level_for_seed(seed);
    EXPECT_EQ(GridNav::shortest_path(lv), oracle::bfs(lv));
    EXPECT_EQ(env.optimal_reward(seed), 50.0 - oracle::bfs(lv));
  }
}

TEST(GridNav, ScriptedOptimalPolicyEarnsBfsOptimum) {
  GridNav env({.num_levels = 0});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    env.reset(seed);
    const auto moves = oracle::optimal_moves(env.level());
    double total = 0;
    bool done = false;
    for (int m : moves) {
      ASSERT_FALSE(done);
      const auto r = env.step(one_hot(m, 4));
      total += r.reward;
      done = r.done;
    }
    EXPECT_TRUE(done);
    EXPECT_EQ(total, 50.0 - oracle::bfs(env.level()));
  }
}

TEST(GridNav, NoTrajectoryBeatsOptimum) {
  GridNav env;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = random_action_trajectory(env, seed);
    EXPECT_LE(t.total_reward, env.optimal_reward(seed));
  }
}

TEST(GridNav, ObservationEncodesGoalDirectionAndWalls) {
  GridNav env;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vector obs = env.reset(seed);
    const auto& lv = env.level();
    const auto p = env.position();
    EXPECT_EQ(obs[0], (lv.goal.x > p.x) - (lv.goal.x < p.x));
    EXPECT_EQ(obs[1], (lv.goal.y > p.y) - (lv.goal.y < p.y));
    EXPECT_EQ(obs[2], lv.blocked(p.x, p.y - 1) ? 1.0 : 0.0);
    EXPECT_EQ(obs[3], lv.blocked(p.x, p.y + 1) ? 1.0 : 0.0);
    EXPECT_EQ(obs[4], lv.blocked(p.x - 1, p.y) ? 1.0 : 0.0);
    EXPECT_EQ(obs[5], lv.blocked(p.x + 1, p.y) ? 1.0 : 0.0);
  }
}

TEST(GridNav, RenderShowsAgentWallsAndGoalDirection) {
  Vector obs{{1, -1, 1, 0, 0, 0}};
  EXPECT_EQ(GridNav::render_observation(obs), ".#*\n.@.\n...\n");
}

TEST(RandomTrajectory, NonEmptyAndDeterministic) {
  LineWalk lw;
  const auto a = random_trajectory(lw, 4);
  EXPECT_GE(a.size(), 1u);
  EXPECT_EQ(a.samples, random_trajectory(lw, 4).samples);
}

TEST(RandomTrajectory, GridNavRewardsVaryAcrossSeeds) {
  GridNav env;
  std::set<double> rewards;
  for (std::uint64_t seed = 0; seed < 100; ++seed) rewards.insert(random_trajectory(env, seed).total_reward);
  EXPECT_GE(rewards.size(), 2u);
}

TEST(RandomActionTrajectory, DiscreteActionsAreOneHot) {
  GridNav env;
  const auto t = random_action_trajectory(env, 2);
  for (const auto& s : t.samples) {
    EXPECT_EQ(s.action.sum(), 1.0);
    EXPECT_EQ(s.action.maxCoeff(), 1.0);
  }
}

TEST(Trajectory, TotalEqualsSumOfRewards) {
  GridNav env;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = random_action_trajectory(env, seed);
    double sum = 0;
    for (const auto& s : t.samples) sum += s.reward;
    EXPECT_NEAR(t.total_reward, sum, 1e-9);
    EXPECT_LE(t.size(), static_cast<std::size_t>(env.spec().max_steps));
  }
}

TEST(Trajectory, JsonLinesRoundTrip) {
  LineWalk env;
  const auto t = random_action_trajectory(env, 9);
  std::stringstream ss;
  write_trajectory_jsonl(ss, t, env.name());
  const auto back = read_trajectory_jsonl(ss);
  EXPECT_EQ(back.env_name, "linewalk");
  EXPECT_EQ(back.trajectory.samples, t.samples);
  EXPECT_EQ(back.trajectory.env_seed, t.env_seed);
}

TEST(Checklist, RewardCountsPlantedActions) {
  Checklist env({.length = 6, .actions = 3, .plant_seed = 4});
  env.reset(0);
  double total = 0;
  for (int k = 0; k < 6; ++k) {
    const int a = k % 2 ? env.planted_action(k) : (env.planted_action(k) + 1) % 3;
    const auto r = env.step(one_hot(a, 3));
    total += r.reward;
    EXPECT_EQ(r.done, k == 5);
  }
  EXPECT_EQ(total, 3.0);
}

TEST(Checklist, PlantedSamplesAreRecognised) {
  Checklist env;
  for (int k = 0; k < env.params().length; ++k) {
    EXPECT_TRUE(env.is_planted(env.planted_sample(k)));
    Sample wrong = env.planted_sample(k);
    wrong.action = one_hot((env.planted_action(k) + 1) % env.params().actions, env.params().actions);
    EXPECT_FALSE(env.is_planted(wrong));
  }
}

TEST(Registry, BuildsEveryBuiltin) {
  for (const char* name : {"linewalk", "gridnav", "checklist"}) {
    EnvConfig c;
    c.name = name;
    auto env = make_env(c);
    EXPECT_EQ(env->name(), name);
    EXPECT_EQ(env_config_from_json(to_json(c)), c);
  }
  EnvConfig bad;
  bad.name = "pong";
  EXPECT_THROW(make_env_factory(bad), std::invalid_argument);
}
