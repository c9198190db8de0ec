#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "esi/runner.hpp"

using namespace esi;
using namespace esi::runner;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("esi_runner_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig quick(const std::string& env, const fs::path& out) {
  return parse_config(json{{"env", env},
                           {"M", 6},
                           {"N", 5},
                           {"L0", 3},
                           {"hidden", 8},
                           {"train_iters", 25},
                           {"budget", 800},
                           {"bootstrap", "random_actions"},
                           {"output_dir", out.string()}});
}

}  // namespace

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config(json{{"env", "linewalk"}, {"lamda", 0.3}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "lamda");
    EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos);
  }
}

TEST(Config, BadValuesAreNamed) {
  auto key_of = [](const json& j) {
    try {
      parse_config(j);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(key_of(json{{"M", -1}}), "M");
  EXPECT_EQ(key_of(json{{"M", 0}}), "M");
  EXPECT_EQ(key_of(json{{"lambda", 1.5}}), "lambda");
  EXPECT_EQ(key_of(json{{"lambda", "half"}}), "lambda");
  EXPECT_EQ(key_of(json{{"env", "pong"}}), "env");
  EXPECT_EQ(key_of(json{{"profile", "walker"}}), "profile");
  EXPECT_EQ(key_of(json{{"activation", "sigmoid"}}), "activation");
  EXPECT_EQ(key_of(json{{"workers", 0}}), "workers");
  EXPECT_EQ(key_of(json::array()), "<document>");
}

TEST(Config, ProfilesSetReferenceValuesAndKeysOverrideThem) {
  const auto biped = parse_config(json{{"profile", "biped-like"}});
  EXPECT_EQ(biped.env.name, "linewalk");
  EXPECT_EQ(biped.hyperparams.active_set_size, 25u);
  EXPECT_EQ(biped.hyperparams.iterations_per_episode, 125u);
  EXPECT_EQ(biped.hyperparams.initial_scope, 5u);
  EXPECT_EQ(biped.hyperparams.mutation_strength, 0.5);
  EXPECT_EQ(biped.hyperparams.trainer.batch_size, 15);
  EXPECT_EQ(biped.hyperparams.trainer.learning_rate, 0.005);
  EXPECT_EQ(biped.hyperparams.trainer.train_iters, 200);

  const auto plunder = parse_config(json{{"M", 40}, {"profile", "plunder-like"}});
  EXPECT_EQ(plunder.env.name, "gridnav");
  EXPECT_EQ(plunder.hyperparams.active_set_size, 40u);
  EXPECT_EQ(plunder.hyperparams.iterations_per_episode, 30u);
  EXPECT_EQ(plunder.hyperparams.initial_scope, 20u);
}

TEST(Config, LoadsFromFile) {
  const auto dir = scratch("load");
  std::ofstream(dir / "c.json") << R"({"env": "checklist", "seed": 12, "lambda": 0.25})";
  const auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.env.name, "checklist");
  EXPECT_EQ(c.hyperparams.master_seed, 12u);
  EXPECT_EQ(c.hyperparams.mutation_strength, 0.25);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

TEST(Train, WritesCheckpointAndHistory) {
  const auto dir = scratch("train");
  const auto out = train(quick("gridnav", dir));
  EXPECT_TRUE(fs::exists(dir / "checkpoint.json"));
  EXPECT_TRUE(fs::exists(dir / "best_trajectory.jsonl"));
  const auto history = slurp(dir / "history.csv");
  EXPECT_EQ(history.substr(0, history.find('\n')), "env_steps,episode,iteration,reward,is_new_best");
  EXPECT_EQ(static_cast<std::size_t>(std::count(history.begin(), history.end(), '\n')), out.state.history.size() + 1);
  EXPECT_EQ(load_checkpoint(dir / "checkpoint.json").state, out.state);
}

TEST(Train, WorkerCountGivesByteIdenticalFiles) {
  for (const char* env : {"linewalk", "gridnav", "checklist"}) {
    auto a = quick(env, scratch(std::string("w1_") + env));
    auto b = quick(env, scratch(std::string("w8_") + env));
    b.workers = 8;
    train(a);
    train(b);
    EXPECT_EQ(slurp(fs::path(a.output_dir) / "checkpoint.json"), slurp(fs::path(b.output_dir) / "checkpoint.json")) << env;
    EXPECT_EQ(slurp(fs::path(a.output_dir) / "history.csv"), slurp(fs::path(b.output_dir) / "history.csv")) << env;
  }
}

TEST(Train, ResumeEqualsUninterruptedRun) {
  const auto full_dir = scratch("full");
  const auto part_dir = scratch("part");
  train(quick("linewalk", full_dir));
  auto first = quick("linewalk", part_dir);
  first.max_episodes = 2;
  const auto partial = train(first);
  EXPECT_EQ(partial.state.episode.episode, 2);
  EXPECT_FALSE(partial.state.budget_exhausted);
  RunConfig second = first;
  second.max_episodes = 0;
  second.resume_from = (part_dir / "checkpoint.json").string();
  train(second);
  EXPECT_EQ(slurp(part_dir / "checkpoint.json"), slurp(full_dir / "checkpoint.json"));
  EXPECT_EQ(slurp(part_dir / "history.csv"), slurp(full_dir / "history.csv"));
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const auto dir = scratch("corrupt");
  train(quick("checklist", dir));
  const std::string text = slurp(dir / "checkpoint.json");
  std::ofstream(dir / "truncated.json") << text.substr(0, text.size() / 2);
  EXPECT_THROW(load_checkpoint(dir / "truncated.json"), CheckpointError);

  auto j = json::parse(text);
  j["active_set"].erase(0);
  std::ofstream(dir / "short.json") << j.dump();
  EXPECT_THROW(load_checkpoint(dir / "short.json"), CheckpointError);

  j = json::parse(text);
  j["format_version"] = 99;
  std::ofstream(dir / "version.json") << j.dump();
  EXPECT_THROW(load_checkpoint(dir / "version.json"), CheckpointError);
}

TEST(Inspect, RowsSortedByStepAndRoundTrip) {
  const auto dir = scratch("inspect");
  const auto out = train(quick("gridnav", dir));
  const auto rows = inspect_rows(out.state.active);
  ASSERT_EQ(rows.size(), out.state.active.size());
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LE(rows[k - 1].sample.source.step, rows[k].sample.source.step);
  std::stringstream ss;
  write_inspect_jsonl(ss, rows);
  EXPECT_EQ(parse_inspect_jsonl(ss), out.state.active);
}

TEST(Inspect, TableMarksPlantedChecklistSamples) {
  const auto dir = scratch("inspect_cl");
  auto cfg = quick("checklist", dir);
  cfg.hyperparams.total_step_budget = 3000;
  const auto out = train(cfg);
  const Checkpoint ck = load_checkpoint(dir / "checkpoint.json");
  std::ostringstream os;
  print_inspect_table(os, ck, inspect_rows(ck.state.active));
  envs::Checklist env;
  std::size_t planted = 0;
  for (const auto& s : ck.state.active.samples) planted += env.is_planted(s.sample);
  const std::string table = os.str();
  std::size_t marks = 0;
  for (auto pos = table.find("planted"); pos != std::string::npos; pos = table.find("planted", pos + 1)) ++marks;
  EXPECT_EQ(marks, planted);
}

TEST(Eval, DeterministicEnvHasZeroSpread) {
  const auto dir = scratch("eval");
  auto cfg = quick("linewalk", dir);
  train(cfg);
  const auto rows = evaluate_checkpoint(load_checkpoint(dir / "checkpoint.json"), 3, 0);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].split, "train");
  EXPECT_EQ(rows[0].std, 0.0);
  EXPECT_EQ(rows[0].min, rows[0].max);
}

TEST(Eval, GridNavReportsTrainAndTestRows) {
  const auto dir = scratch("eval_grid");
  auto cfg = quick("gridnav", dir);
  cfg.hyperparams.bootstrap = Bootstrap::kPolicy;  // guarantees a policy to evaluate
  train(cfg);
  const auto rows = evaluate_checkpoint(load_checkpoint(dir / "checkpoint.json"), 10, 0);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].split, "train");
  EXPECT_EQ(rows[1].split, "test");
  EXPECT_TRUE(rows[1].optimal_fraction.has_value());
  std::ostringstream os;
  print_eval(os, rows);
  EXPECT_NE(os.str().find("test"), std::string::npos);
}

TEST(Sweep, OneRowPerValueAndRepetition) {
  auto cfg = quick("checklist", scratch("sweep"));
  cfg.hyperparams.total_step_budget = 200;
  cfg.eval_episodes = 2;
  const auto rows = sweep(cfg, SweepAxis::kMutationStrength, {0.0, 1.0}, 2);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3].value, 1.0);
  EXPECT_EQ(rows[3].repetition, 1);
  std::ostringstream os;
  write_sweep_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "axis,value,repetition,train_reward,test_reward");
  EXPECT_THROW(sweep(cfg, SweepAxis::kActiveSetSize, {2.5}, 1), ConfigError);
  EXPECT_THROW(sweep_axis_from_string("depth"), ConfigError);
}
