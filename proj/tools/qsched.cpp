#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>

#include "qsched/harness.hpp"
#include "qsched/util.hpp"

namespace fs = std::filesystem;
using namespace qsched;

namespace {

ExperimentConfig load_base_config(const std::string& config_path) {
  if (config_path.empty()) return default_config();
  return load_config_file(config_path);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  return out;
}

std::unique_ptr<Policy> make_policy(const std::string& name, const std::string& checkpoint_path,
                                    std::unique_ptr<Checkpoint>& ck_out) {
  if (name == "drlq") {
    if (checkpoint_path.empty())
      throw ParseError("--policy drlq requires --checkpoint <file>");
    ck_out = std::make_unique<Checkpoint>(load_checkpoint_file(checkpoint_path));
    return std::make_unique<GreedyNetPolicy>(net_from_checkpoint(*ck_out));
  }
  return std::make_unique<HeuristicPolicy>(baseline_kind_from_name(name));
}

int cmd_train(const std::string& config_path, std::uint64_t seed, bool seed_set,
              const std::string& out_dir, int iterations, int steps) {
  ExperimentConfig cfg = load_base_config(config_path);
  if (seed_set) cfg.train_seed = seed;
  if (iterations > 0) cfg.train_iterations = iterations;
  if (steps > 0) cfg.steps_per_iteration = steps;
  cfg.validate();

  fs::create_directories(out_dir);
  SchedulingEnv env = make_env(cfg);
  RainbowAgent agent(env.state_dim(), env.num_actions(), cfg.agent,
                     derive_seed(cfg.train_seed, SeedStream::NetInit));

  auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train_agent(agent, env, cfg, [&](const IterationStats& st) {
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "iter " << st.iteration << "/" << cfg.train_iterations
              << "  steps=" << st.env_steps << "  ep_reward=" << st.mean_episode_reward
              << "  ep_len=" << st.mean_episode_length << "  loss=" << st.mean_loss << "  ["
              << static_cast<long>(dt) << "s]\n";
  });

  std::string log_path = out_dir + "/training_log.jsonl";
  {
    auto out = open_out(log_path);
    write_training_log(result.log, out);
  }
  Checkpoint ck = make_checkpoint(agent, env.norm(), cfg.train_seed, result.episodes_started);
  std::string ck_path = out_dir + "/checkpoint.json";
  save_checkpoint_file(ck, ck_path);
  {
    auto out = open_out(out_dir + "/config.ini");
    write_config(cfg, out);
  }
  std::cout << "checkpoint: " << ck_path << "\n" << "training log: " << log_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& policy_name,
                 const std::string& checkpoint_path, std::uint64_t seed, bool seed_set,
                 int episodes, const std::string& out_path, const std::string& workload_path,
                 bool allow_overlap, const std::string& tasks_out,
                 const std::string& trace_out) {
  ExperimentConfig cfg = load_base_config(config_path);
  if (seed_set) cfg.eval_seed = seed;
  if (episodes > 0) cfg.eval_episodes = episodes;
  cfg.validate();

  std::unique_ptr<Checkpoint> ck;
  auto policy = make_policy(policy_name, checkpoint_path, ck);

  SchedulingEnv env = ck ? make_env(cfg, ck->norm) : make_env(cfg);

  EvalSummary summary;
  if (!workload_path.empty()) {
    EpisodeWorkload w = load_workload_file(workload_path);
    summary = evaluate_policy_on_workload(*policy, env, w);
  } else {
    auto seeds = episode_seed_sequence(cfg.eval_seed, cfg.eval_episodes);
    if (ck) check_seed_disjointness(*ck, seeds, allow_overlap);
    summary = evaluate_policy(*policy, env, seeds);
  }

  if (out_path.empty()) {
    write_eval_csv(summary, std::cout);
  } else {
    auto out = open_out(out_path);
    write_eval_csv(summary, out);
    std::cerr << summary.policy << ": mean_total=" << summary.mean_total
              << " mean_reschedules=" << summary.mean_reschedules << " -> " << out_path << "\n";
  }
  if (!tasks_out.empty()) {
    auto out = open_out(tasks_out);
    write_task_csv(summary, out);
  }
  if (!trace_out.empty()) {
    auto out = open_out(trace_out);
    env.write_trace(out);  // last episode's step trace
  }
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& policies_arg,
                const std::string& checkpoint_path, std::uint64_t seed, bool seed_set,
                int episodes, const std::string& out_dir, bool allow_overlap) {
  ExperimentConfig cfg = load_base_config(config_path);
  if (seed_set) cfg.eval_seed = seed;
  if (episodes > 0) cfg.eval_episodes = episodes;
  cfg.validate();

  auto names = split(policies_arg, ',');
  if (names.size() < 2) throw ParseError("compare: need at least 2 policies");

  auto seeds = episode_seed_sequence(cfg.eval_seed, cfg.eval_episodes);
  fs::create_directories(out_dir);

  CompareResult result;
  for (const auto& raw : names) {
    std::string name = trim(raw);
    std::unique_ptr<Checkpoint> ck;
    auto policy = make_policy(name, checkpoint_path, ck);
    SchedulingEnv env = ck ? make_env(cfg, ck->norm) : make_env(cfg);
    if (ck) check_seed_disjointness(*ck, seeds, allow_overlap);
    EvalSummary s = evaluate_policy(*policy, env, seeds);
    auto out = open_out(out_dir + "/eval_" + name + ".csv");
    write_eval_csv(s, out);
    result.policies.push_back(std::move(s));
  }

  {
    auto out = open_out(out_dir + "/compare_summary.csv");
    write_compare_csv(result, out);
  }
  write_compare_table(result, std::cout);
  return 0;
}

int cmd_tune(const std::string& config_path, const std::string& grid_spec, std::uint64_t seed,
             bool seed_set, const std::string& out_dir, int jobs, int iterations) {
  ExperimentConfig cfg = load_base_config(config_path);
  if (seed_set) cfg.train_seed = seed;
  if (iterations > 0) cfg.tune_iterations = iterations;
  cfg.validate();

  auto axes = parse_grid(grid_spec);
  fs::create_directories(out_dir);
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());

  TuneResult result = run_tune(cfg, axes, jobs, [&](const TuneTrial& t) {
    std::cerr << "trial " << t.index << " score=" << t.score << "\n";
  });

  {
    auto out = open_out(out_dir + "/tune_trials.csv");
    write_tune_csv(result, out);
  }
  {
    auto out = open_out(out_dir + "/best_config.ini");
    write_config(result.best, out);
  }
  std::cout << "best trial " << result.ranked.front().index << " score "
            << result.ranked.front().score << "; config written to " << out_dir
            << "/best_config.ini\n";
  return 0;
}

int cmd_workload_gen(const std::string& config_path, std::uint64_t seed, int n, double window,
                     const std::string& out_path) {
  ExperimentConfig cfg = load_base_config(config_path);
  if (n <= 0) n = cfg.env.n_tasks;
  if (window <= 0) window = cfg.env.window;
  auto records = load_circuit_records(cfg.circuits_path);
  EpisodeWorkload w = generate_episode_workload(records, seed, n, window);
  dump_workload_file(w, out_path);
  std::cout << "wrote " << w.tasks.size() << " tasks to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsched: scheduling testbed for heterogeneous quantum clouds"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, workload_path, tasks_out, trace_out;
  std::string train_out = "runs/train", eval_out, compare_out = "runs/compare",
              tune_out = "runs/tune", wgen_out;
  std::string policy_name = "greedy", policies_arg = "drlq,greedy,roundrobin,random";
  std::string grid_spec;
  std::uint64_t seed = 0;
  int episodes = 0, iterations = 0, steps = 0, n_tasks = 0, jobs = 0;
  double window = 0.0;
  bool allow_overlap = false;

  auto* train = app.add_subcommand("train", "Train the placement agent");
  train->add_option("--config", config_path, "Experiment config file (INI)");
  auto* train_seed_opt = train->add_option("--seed", seed, "Training seed");
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--iterations", iterations, "Override train_iterations");
  train->add_option("--steps", steps, "Override steps_per_iteration");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a policy over episodes");
  eval->add_option("--config", config_path, "Experiment config file (INI)");
  eval->add_option("--policy", policy_name, "drlq|greedy|roundrobin|random");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint for --policy drlq");
  auto* eval_seed_opt = eval->add_option("--seed", seed, "Evaluation seed");
  eval->add_option("--episodes", episodes, "Number of evaluation episodes");
  eval->add_option("--out", eval_out, "Per-episode CSV path (stdout if omitted)");
  eval->add_option("--workload", workload_path, "Replay a workload dump instead of generating");
  eval->add_flag("--allow-overlap", allow_overlap, "Permit eval seeds seen in training");
  eval->add_option("--tasks-out", tasks_out, "Per-task CSV path");
  eval->add_option("--trace-out", trace_out, "Episode step trace (JSON lines)");

  auto* compare = app.add_subcommand("compare", "Evaluate several policies on shared workloads");
  compare->add_option("--config", config_path, "Experiment config file (INI)");
  compare->add_option("--policies", policies_arg, "Comma list of policies");
  compare->add_option("--checkpoint", checkpoint_path, "Checkpoint for drlq");
  auto* cmp_seed_opt = compare->add_option("--seed", seed, "Evaluation seed");
  compare->add_option("--episodes", episodes, "Number of evaluation episodes");
  compare->add_option("--out", compare_out, "Output directory");
  compare->add_flag("--allow-overlap", allow_overlap, "Permit eval seeds seen in training");

  auto* tune = app.add_subcommand("tune", "Grid-search hyperparameters at a reduced budget");
  tune->add_option("--config", config_path, "Experiment config file (INI)");
  tune->add_option("--grid", grid_spec, "e.g. \"agent.lr=0.01,0.001;agent.n_step=1,3\"")
      ->required();
  auto* tune_seed_opt = tune->add_option("--seed", seed, "Training seed");
  tune->add_option("--out", tune_out, "Output directory");
  tune->add_option("--jobs", jobs, "Parallel trial workers (default: hardware)");
  tune->add_option("--iterations", iterations, "Override tune_iterations");

  auto* wgen = app.add_subcommand("workload-gen", "Generate a replayable workload dump");
  wgen->add_option("--config", config_path, "Experiment config file (INI)");
  wgen->add_option("--seed", seed, "Workload seed")->required();
  wgen->add_option("--n", n_tasks, "Task count (default: env.n_tasks)");
  wgen->add_option("--window", window, "Arrival window seconds (default: env.window)");
  wgen->add_option("--out", wgen_out, "Output JSONL path")->required();

  auto* defaults = app.add_subcommand("defaults", "Print the default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train))
      return cmd_train(config_path, seed, !train_seed_opt->empty(), train_out, iterations, steps);
    if (app.got_subcommand(eval))
      return cmd_evaluate(config_path, policy_name, checkpoint_path, seed,
                          !eval_seed_opt->empty(), episodes, eval_out, workload_path,
                          allow_overlap, tasks_out, trace_out);
    if (app.got_subcommand(compare))
      return cmd_compare(config_path, policies_arg, checkpoint_path, seed,
                         !cmp_seed_opt->empty(), episodes, compare_out, allow_overlap);
    if (app.got_subcommand(tune))
      return cmd_tune(config_path, grid_spec, seed, !tune_seed_opt->empty(), tune_out, jobs,
                      iterations);
    if (app.got_subcommand(wgen))
      return cmd_workload_gen(config_path, seed, n_tasks, window, wgen_out);
    if (app.got_subcommand(defaults)) {
      write_config(default_config(), std::cout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
