// Command-line front end: train, eval, inspect and sweep.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "esi/runner.hpp"

namespace {

using namespace esi;
namespace rn = esi::runner;

struct Overrides {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::string demo;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> episodes;
};

rn::RunConfig resolve(const Overrides& o) {
  rn::RunConfig cfg = o.config.empty() ? rn::RunConfig{} : rn::load_config(o.config);
  if (!o.checkpoint.empty()) {
    cfg.resume_from = o.checkpoint;
    if (o.out.empty() && o.config.empty()) cfg.output_dir = std::filesystem::path(o.checkpoint).parent_path().string();
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.demo.empty()) cfg.demo = o.demo;
  if (o.workers) cfg.workers = *o.workers;
  if (o.seed) cfg.hyperparams.master_seed = *o.seed;
  if (o.episodes) cfg.max_episodes = *o.episodes;
  if (cfg.resume_from && cfg.output_dir.empty()) cfg.output_dir = ".";
  rn::validate(cfg);
  return cfg;
}

int cmd_train(const Overrides& o) {
  if (o.config.empty() && o.checkpoint.empty()) throw rn::ConfigError("config", "train needs --config or --checkpoint");
  const rn::RunConfig cfg = resolve(o);
  const auto outcome = rn::train(cfg);
  const auto& ep = outcome.state.episode;
  std::cout << "episodes " << ep.episode << "  env_steps " << ep.steps_consumed << "  initial_reward "
            << outcome.state.initial_reward << "  best_reward " << ep.best_fitness << '\n'
            << "checkpoint " << outcome.checkpoint_path.string() << '\n'
            << "history " << outcome.history_path.string() << '\n';
  return rn::kExitOk;
}

int cmd_eval(const std::string& checkpoint, std::size_t episodes, std::uint64_t seed_start, const std::string& split) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  rn::print_eval(std::cout, rn::evaluate_checkpoint(ck, episodes, seed_start, split));
  return rn::kExitOk;
}

int cmd_inspect(const std::string& checkpoint, const std::string& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const auto rows = rn::inspect_rows(ck.state.active);
  rn::print_inspect_table(std::cout, ck, rows);
  if (out.empty()) {
    std::cout << "\n# json-lines\n";
    rn::write_inspect_jsonl(std::cout, rows);
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out);
    rn::write_inspect_jsonl(f, rows);
    std::cout << "json-lines written to " << out << '\n';
  }
  return rn::kExitOk;
}

int cmd_sweep(const Overrides& o, const std::string& axis, const std::vector<double>& values, int reps) {
  if (o.config.empty()) throw rn::ConfigError("config", "sweep needs --config");
  const rn::RunConfig cfg = resolve(o);
  const auto ax = rn::sweep_axis_from_string(axis);
  std::filesystem::create_directories(cfg.output_dir);
  const auto rows = rn::sweep(cfg, ax, values, reps, [](const rn::SweepRow& r) {
    std::cout << rn::to_string(r.axis) << '=' << r.value << " rep " << r.repetition << "  train " << r.train_reward
              << "  test " << r.test_reward << std::endl;
  });
  const auto path = std::filesystem::path(cfg.output_dir) / "sweep.csv";
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  rn::write_sweep_csv(f, rows);
  std::cout << "sweep written to " << path.string() << '\n';
  return rn::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary selective imitation trainer"};
  app.require_subcommand(1);

  Overrides train_o;
  auto* train = app.add_subcommand("train", "train a policy, writing checkpoint.json and history.csv");
  train->add_option("--config", train_o.config, "JSON config file");
  train->add_option("--checkpoint", train_o.checkpoint, "resume from this checkpoint");
  train->add_option("--workers", train_o.workers, "parallel iterations")->check(CLI::PositiveNumber);
  train->add_option("--seed", train_o.seed, "master seed");
  train->add_option("--out", train_o.out, "output directory");
  train->add_option("--demo", train_o.demo, "demonstration trajectory (JSON-lines)");
  train->add_option("--episodes", train_o.episodes, "stop after this many episodes");

  std::string eval_ckpt, split = "both";
  std::size_t eval_n = 100;
  std::uint64_t seed_start = 0;
  auto* eval = app.add_subcommand("eval", "evaluate the best policy of a checkpoint");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();
  eval->add_option("--episodes", eval_n, "episodes per split")->capture_default_str();
  eval->add_option("--seed", seed_start, "first environment seed")->capture_default_str();
  eval->add_option("--split", split, "train, test or both")->check(CLI::IsMember({"train", "test", "both"}))->capture_default_str();

  std::string insp_ckpt, insp_out;
  auto* inspect = app.add_subcommand("inspect", "print the active set of a checkpoint");
  inspect->add_option("--checkpoint", insp_ckpt, "checkpoint to inspect")->required();
  inspect->add_option("--out", insp_out, "write the JSON-lines dump here instead of stdout");

  Overrides sweep_o;
  std::string axis;
  std::vector<double> values;
  int reps = 10;
  auto* sweep = app.add_subcommand("sweep", "train once per (value, repetition) and write sweep.csv");
  sweep->add_option("--config", sweep_o.config, "JSON config file for every run")->required();
  sweep->add_option("--axis", axis, "active_set_size or mutation_strength")->required();
  sweep->add_option("--values", values, "comma-separated axis values")->required()->delimiter(',');
  sweep->add_option("--reps", reps, "repetitions per value")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--workers", sweep_o.workers, "parallel iterations")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_o.seed, "master seed of repetition 0");
  sweep->add_option("--out", sweep_o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rn::kExitBadConfig;
  }

  try {
    if (*train) return cmd_train(train_o);
    if (*eval) return cmd_eval(eval_ckpt, eval_n, seed_start, split);
    if (*inspect) return cmd_inspect(insp_ckpt, insp_out);
    if (*sweep) return cmd_sweep(sweep_o, axis, values, reps);
  } catch (const rn::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rn::kExitBadConfig;
  } catch (const EnvError& e) {
    std::cerr << "environment error: " << e.what() << '\n';
    return rn::kExitEnvFailure;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rn::kExitBadCheckpoint;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rn::kExitFailure;
  }
  return rn::kExitFailure;
}
