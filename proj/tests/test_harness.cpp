#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qsched/harness.hpp"
#include "qsched/util.hpp"
#include "test_support.hpp"

using namespace qsched;
using namespace qsched::test;

namespace {

// Small but non-trivial experiment that trains in well under a second.
ExperimentConfig smoke_config() {
  ExperimentConfig cfg;
  cfg.env.n_tasks = 6;
  cfg.env.window = 10.0;
  cfg.agent.batch_size = 16;
  cfg.agent.warmup = 32;
  cfg.agent.replay_capacity = 4096;
  cfg.agent.hidden = {16, 16};
  cfg.agent.target_sync_period = 50;
  cfg.agent.per_beta_anneal_steps = 300;
  cfg.train_iterations = 2;
  cfg.steps_per_iteration = 200;
  cfg.eval_episodes = 4;
  cfg.tune_iterations = 1;
  return cfg;
}

SchedulingEnv smoke_env(const ExperimentConfig& cfg) {
  auto records =
      make_records({{"small", 3, 12}, {"mid", 20, 40}, {"big", 28, 90}});
  return SchedulingEnv(two_node_registry(), records, cfg.env);
}

RainbowAgent smoke_agent(const SchedulingEnv& env, const ExperimentConfig& cfg) {
  return RainbowAgent(env.state_dim(), env.num_actions(), cfg.agent,
                      derive_seed(cfg.train_seed, SeedStream::NetInit));
}

}  // namespace

TEST_CASE("default config round-trips through its text form") {
  ExperimentConfig cfg = default_config();
  std::string text = config_to_string(cfg);
  std::istringstream in(text);
  ExperimentConfig parsed = parse_config(in, "<mem>");
  CHECK(config_to_string(parsed) == text);
  CHECK(parsed.agent.lr == 0.01);
  CHECK(parsed.agent.batch_size == 180);
  CHECK(parsed.agent.n_step == 3);
  CHECK(parsed.agent.n_atoms == 10);
  CHECK(parsed.agent.v_min == -10.0);
  CHECK(parsed.agent.v_max == 10.0);
  CHECK(parsed.env.failure_penalty == -10.0);
  CHECK(parsed.env.penalty_factor == 0.1);
  CHECK(parsed.env.n_tasks == 60);
  CHECK(parsed.env.window == 60.0);
  CHECK(parsed.train_iterations == 100);
  CHECK(parsed.steps_per_iteration == 1000);
  CHECK(parsed.eval_episodes == 100);
}

TEST_CASE("config errors: unknown keys and malformed lines") {
  std::istringstream bad_key("[agent]\nlearning = 5\n");
  CHECK_THROWS_AS(parse_config(bad_key, "<t>"), ParseError);
  std::istringstream bad_line("[agent]\nthis is not a pair\n");
  CHECK_THROWS_AS(parse_config(bad_line, "<t>"), ParseError);
  std::istringstream bad_num("[agent]\nlr = fast\n");
  CHECK_THROWS_AS(parse_config(bad_num, "<t>"), ParseError);
  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_config_value(cfg, "nope.key", "1"), ParseError);
}

TEST_CASE("gamma stays in sync between agent and env sections") {
  ExperimentConfig cfg;
  apply_config_value(cfg, "agent.discount", "0.5");
  CHECK(cfg.agent.discount == 0.5);
  CHECK(cfg.env.discount == 0.5);
}

TEST_CASE("episode seeds: deterministic stream, distinct bases diverge") {
  auto a = episode_seed_sequence(1, 50);
  auto b = episode_seed_sequence(1, 50);
  CHECK(a == b);
  auto c = episode_seed_sequence(2, 50);
  int collisions = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == c[i]) ++collisions;
  CHECK(collisions == 0);
}

TEST_CASE("smoke training: log shape, checkpoint round-trip, determinism") {
  ExperimentConfig cfg = smoke_config();
  auto run = [&]() {
    SchedulingEnv env = smoke_env(cfg);
    RainbowAgent agent = smoke_agent(env, cfg);
    TrainResult tr = train_agent(agent, env, cfg);
    std::ostringstream log;
    write_training_log(tr.log, log);
    Checkpoint ck = make_checkpoint(agent, env.norm(), cfg.train_seed, tr.episodes_started);
    return std::pair<std::string, Checkpoint>(log.str(), std::move(ck));
  };

  auto [log1, ck1] = run();
  auto [log2, ck2] = run();
  CHECK(log1 == log2);  // bit-identical seed-fixed runs

  auto parsed = [&] {
    std::istringstream in(log1);
    return read_training_log(in, "<mem>");
  }();
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].iteration == 1);
  CHECK(parsed[1].env_steps == 400);
  CHECK(parsed[1].learn_steps > 0);
  CHECK(parsed[1].episodes > 0);

  // checkpoint: save -> load -> identical policy behavior and bytes
  std::string path = "/tmp/qsched_test_ck.json";
  save_checkpoint_file(ck1, path);
  Checkpoint loaded = load_checkpoint_file(path);
  CHECK(loaded.train_seed == ck1.train_seed);
  CHECK(loaded.train_episodes == ck1.train_episodes);
  CHECK(loaded.params.dump() == ck1.params.dump());

  CategoricalQNet net1 = net_from_checkpoint(ck1);
  CategoricalQNet net2 = net_from_checkpoint(loaded);
  SchedulingEnv env = smoke_env(cfg);
  auto s = env.reset(123);
  CHECK(net1.greedy_action(s) == net2.greedy_action(s));
  CHECK((net1.forward(s.transpose()) - net2.forward(s.transpose())).norm() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("trainer syncs the target every period learn steps") {
  ExperimentConfig cfg = smoke_config();
  cfg.agent.target_sync_period = 25;
  cfg.train_iterations = 1;
  cfg.steps_per_iteration = 150;
  SchedulingEnv env = smoke_env(cfg);
  RainbowAgent agent = smoke_agent(env, cfg);
  TrainResult tr = train_agent(agent, env, cfg);
  long learns = tr.log.back().learn_steps;
  // learning starts once the buffer holds warmup transitions; the n-step
  // stage can delay that by at most n_step-1 raw steps
  CHECK(learns <= 150 - cfg.agent.warmup + 1);
  CHECK(learns >= 150 - cfg.agent.warmup + 1 - (cfg.agent.n_step - 1));
  CHECK(agent.sync_count() == 1 + learns / cfg.agent.target_sync_period);
}

TEST_CASE("policy interchangeability: every policy drives the same env loop") {
  ExperimentConfig cfg = smoke_config();
  auto seeds = episode_seed_sequence(cfg.eval_seed, 3);

  std::vector<std::unique_ptr<Policy>> policies;
  policies.push_back(std::make_unique<HeuristicPolicy>(BaselinePolicy::Kind::Greedy));
  policies.push_back(std::make_unique<HeuristicPolicy>(BaselinePolicy::Kind::RoundRobin));
  policies.push_back(std::make_unique<HeuristicPolicy>(BaselinePolicy::Kind::Random));
  {
    SchedulingEnv env = smoke_env(cfg);
    RainbowAgent agent = smoke_agent(env, cfg);
    agent.sync_target();
    Checkpoint ck = make_checkpoint(agent, env.norm(), cfg.train_seed, 0);
    policies.push_back(std::make_unique<GreedyNetPolicy>(net_from_checkpoint(ck)));
  }

  std::vector<EvalSummary> summaries;
  for (auto& p : policies) {
    SchedulingEnv env = smoke_env(cfg);
    summaries.push_back(evaluate_policy(*p, env, seeds));
  }
  for (const auto& s : summaries) {
    REQUIRE(s.episodes.size() == 3);
    for (std::size_t i = 0; i < s.episodes.size(); ++i) {
      CHECK(s.episodes[i].seed == seeds[i]);  // shared workloads across policies
      CHECK(s.episodes[i].steps >= cfg.env.n_tasks);
      double task_sum = 0.0;  // episode total equals the sum of its task rows
      for (const auto& row : s.episodes[i].tasks)
        if (row.status == "completed") task_sum += row.total;
      CHECK(s.episodes[i].total_completion == doctest::Approx(task_sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("one episode with one task reports exactly that task's time") {
  ExperimentConfig cfg = smoke_config();
  cfg.env.n_tasks = 1;
  SchedulingEnv env = smoke_env(cfg);
  HeuristicPolicy greedy(BaselinePolicy::Kind::Greedy);
  auto summary = evaluate_policy(greedy, env, {42});
  REQUIRE(summary.episodes.size() == 1);
  const auto& ep = summary.episodes[0];
  double task_total = 0.0;
  for (const auto& row : ep.tasks)
    if (row.status == "completed") task_total += row.total;
  CHECK(ep.total_completion == doctest::Approx(task_total).epsilon(1e-12));
  CHECK(summary.mean_total == doctest::Approx(ep.total_completion));
}

TEST_CASE("eval CSV: row count, summary recomputability") {
  ExperimentConfig cfg = smoke_config();
  SchedulingEnv env = smoke_env(cfg);
  HeuristicPolicy greedy(BaselinePolicy::Kind::Greedy);
  auto summary = evaluate_policy(greedy, env, episode_seed_sequence(cfg.eval_seed, 4));
  std::ostringstream out;
  write_eval_csv(summary, out);

  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);  // header
  int rows = 0;
  double total_sum = 0.0;
  std::string summary_line;
  while (std::getline(in, line)) {
    if (line.rfind("summary", 0) == 0) {
      summary_line = line;
      continue;
    }
    ++rows;
    total_sum += std::stod(split(line, ',')[2]);
  }
  CHECK(rows == 4);
  REQUIRE(!summary_line.empty());
  double reported_mean = std::stod(split(summary_line, ',')[2]);
  CHECK(reported_mean == doctest::Approx(total_sum / 4.0).epsilon(1e-12));
}

TEST_CASE("dump/replay: an exported workload reproduces the live episode") {
  ExperimentConfig cfg = smoke_config();
  std::uint64_t seed = episode_seed(cfg.eval_seed, 0);

  SchedulingEnv live_env = smoke_env(cfg);
  HeuristicPolicy p1(BaselinePolicy::Kind::Greedy);
  EvalSummary live = evaluate_policy(p1, live_env, {seed});

  auto records = make_records({{"small", 3, 12}, {"mid", 20, 40}, {"big", 28, 90}});
  EpisodeWorkload w = generate_episode_workload(records, seed, cfg.env.n_tasks, cfg.env.window);
  std::ostringstream dumped;
  dump_workload(w, dumped);
  std::istringstream in(dumped.str());
  EpisodeWorkload replayed = load_workload(in, "<mem>");

  SchedulingEnv replay_env = smoke_env(cfg);
  HeuristicPolicy p2(BaselinePolicy::Kind::Greedy);
  EvalSummary rep = evaluate_policy_on_workload(p2, replay_env, replayed);

  std::ostringstream live_csv, replay_csv;
  write_eval_csv(live, live_csv);
  write_eval_csv(rep, replay_csv);
  CHECK(live_csv.str() == replay_csv.str());
}

TEST_CASE("seed disjointness: overlap refused unless explicitly allowed") {
  Checkpoint ck;
  ck.train_seed = 7;
  ck.train_episodes = 100;
  auto overlapping = episode_seed_sequence(7, 5);  // same base -> same stream
  CHECK_THROWS_AS(check_seed_disjointness(ck, overlapping, false), UsageError);
  CHECK_NOTHROW(check_seed_disjointness(ck, overlapping, true));
  auto disjoint = episode_seed_sequence(8, 5);
  CHECK_NOTHROW(check_seed_disjointness(ck, disjoint, false));
}

TEST_CASE("percent reduction matches the reported comparison arithmetic") {
  CHECK(percent_reduction(160.8, 100.0) == doctest::Approx(37.81).epsilon(1e-3));
  CHECK(percent_reduction(123.4, 123.4) == 0.0);
}

TEST_CASE("compare CSV carries reductions against every policy") {
  CompareResult r;
  EvalSummary a;
  a.policy = "greedy";
  a.mean_total = 160.8;
  EvalSummary b;
  b.policy = "drlq";
  b.mean_total = 100.0;
  r.policies = {a, b};
  std::ostringstream out;
  write_compare_csv(r, out);
  std::istringstream in(out.str());
  std::string header, row_greedy, row_drlq;
  std::getline(in, header);
  std::getline(in, row_greedy);
  std::getline(in, row_drlq);
  CHECK(header == "policy,mean_total,stdev_total,mean_reschedules,mean_failed,"
                  "red_vs_greedy,red_vs_drlq");
  auto fields = split(row_drlq, ',');
  CHECK(fields[0] == "drlq");
  CHECK(std::stod(fields[5]) == doctest::Approx(37.81).epsilon(1e-3));
  auto self = split(row_greedy, ',');
  CHECK(std::stod(self[5]) == 0.0);
}

TEST_CASE("grid parsing and cartesian expansion") {
  auto axes = parse_grid("agent.lr=0.01,0.001;agent.n_step=1,3");
  REQUIRE(axes.size() == 2);
  CHECK(axes[0].key == "agent.lr");
  CHECK(axes[0].values == std::vector<std::string>{"0.01", "0.001"});
  auto points = grid_points(axes);
  CHECK(points.size() == 4);
  CHECK_THROWS_AS(parse_grid(""), ParseError);
  CHECK_THROWS_AS(parse_grid("agent.lr"), ParseError);
}

TEST_CASE("tune: single point wins; two points rank deterministically") {
  ExperimentConfig cfg = smoke_config();
  cfg.backends_path = "";  // run_tune uses make_env; give it real paths below
  cfg.circuits_path = "";

  // write tiny data files for make_env
  std::string bpath = "/tmp/qsched_tune_backends.csv";
  std::string cpath = "/tmp/qsched_tune_circuits.csv";
  {
    std::ofstream b(bpath);
    b << "name,qubits,qv,d1cps,gates,topology,overhead\n"
         "alpha,5,32,1000,cx,line,1.0\n"
         "beta,30,64,400,cx,line,1.0\n";
    std::ofstream c(cpath);
    c << "app,qubits,base_depth,gates,shots\n"
         "small,3,12,cx,\n"
         "mid,20,40,cx,\n";
  }
  cfg.backends_path = bpath;
  cfg.circuits_path = cpath;
  cfg.tune_iterations = 1;
  cfg.steps_per_iteration = 120;

  auto one = run_tune(cfg, parse_grid("agent.lr=0.01"), 1);
  REQUIRE(one.ranked.size() == 1);
  CHECK(one.best.agent.lr == 0.01);

  auto two_a = run_tune(cfg, parse_grid("agent.lr=0.01,0.001"), 2);
  auto two_b = run_tune(cfg, parse_grid("agent.lr=0.01,0.001"), 1);
  REQUIRE(two_a.ranked.size() == 2);
  CHECK(two_a.ranked[0].index == two_b.ranked[0].index);  // rank order reproducible
  CHECK(two_a.ranked[0].score == two_b.ranked[0].score);
  CHECK(two_a.ranked[0].score >= two_a.ranked[1].score);
  CHECK(two_a.best.agent.lr == two_b.best.agent.lr);

  std::ostringstream csv;
  write_tune_csv(two_a, csv);
  int lines = 0;
  std::istringstream in(csv.str());
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 3);  // header + 2 ranked rows
  std::remove(bpath.c_str());
  std::remove(cpath.c_str());
}
