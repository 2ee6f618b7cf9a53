#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qsched/env.hpp"
#include "qsched/util.hpp"
#include "test_support.hpp"

using namespace qsched;
using namespace qsched::test;

namespace {

SchedulingEnv small_env(EnvConfig cfg = EnvConfig{}) {
  auto records = make_records({{"a", 3, 10}, {"b", 4, 50}, {"c", 20, 200}});
  return SchedulingEnv(two_node_registry(), records, cfg);
}

EpisodeWorkload one_task_workload(QTask t) {
  EpisodeWorkload w;
  w.window = 60.0;
  t.id = 0;
  w.tasks.push_back(std::move(t));
  return w;
}

}  // namespace

TEST_CASE("reward formula: direct substitutions") {
  EnvConfig cfg;
  CHECK(placement_reward(true, 4.0, 0, cfg) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(placement_reward(false, 0.0, 1, cfg) == doctest::Approx(-11.0).epsilon(1e-15));
  CHECK(placement_reward(true, 4.0, 1, cfg) == doctest::Approx(0.225).epsilon(1e-15));
}

TEST_CASE("reward sign and monotonicity invariants") {
  EnvConfig cfg;
  for (int kappa = 0; kappa <= 9; ++kappa) {
    for (double t : {0.5, 2.0, 40.0, 500.0}) {
      double r = placement_reward(true, t, kappa, cfg);
      if (cfg.penalty_factor * kappa < 1.0) CHECK(r > 0.0);
    }
    CHECK(placement_reward(false, 0.0, kappa, cfg) <= cfg.failure_penalty);
  }
  // strictly decreasing in total time for fixed kappa
  for (int kappa : {0, 1, 3}) {
    double prev = placement_reward(true, 0.25, kappa, cfg);
    for (double t : {0.5, 1.0, 3.0, 10.0, 100.0}) {
      double r = placement_reward(true, t, kappa, cfg);
      CHECK(r < prev);
      prev = r;
    }
  }
}

TEST_CASE("state length is m*4+3") {
  std::vector<std::string> rows;
  for (int i = 0; i < 10; ++i)
    rows.push_back("n" + std::to_string(i) + ",16,32,1000,cx,line,1.0");
  auto records = make_records({{"a", 3, 10}});
  SchedulingEnv env(make_registry(rows), records, EnvConfig{});
  CHECK(env.state_dim() == 43);
  CHECK(env.reset(1).size() == 43);
}

TEST_CASE("reset: deterministic and shows exactly the first task") {
  auto env1 = small_env();
  auto env2 = small_env();
  auto s1 = env1.reset(99);
  auto s2 = env2.reset(99);
  CHECK(s1 == s2);
  CHECK(env1.current_task().id == 0);
  CHECK(env1.clock() == env1.current_task().arrival);

  double arrival_99 = env2.current_task().arrival;
  env1.reset(100);
  CHECK(env1.current_task().arrival != arrival_99);
}

TEST_CASE("encode_state: hand-computed two-node fixture") {
  EnvConfig cfg;
  cfg.n_tasks = 1;
  auto records = make_records({{"a", 3, 10}, {"b", 4, 200}});
  SchedulingEnv env(two_node_registry(), records, cfg);
  auto s = env.reset_with_workload(one_task_workload(make_task(0, 4, 50, 1024, 0.0)));

  REQUIRE(s.size() == 11);
  // node alpha: 5 qubits, qv 32, d1cps 1000 (registry max), idle
  CHECK(s[0] == doctest::Approx(5.0 / 128.0).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(5.0 / 8.0).epsilon(1e-15));
  CHECK(s[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s[3] == 0.0);
  // node beta: 30 qubits, qv 64, d1cps 400
  CHECK(s[4] == doctest::Approx(30.0 / 128.0).epsilon(1e-15));
  CHECK(s[5] == doctest::Approx(6.0 / 8.0).epsilon(1e-15));
  CHECK(s[6] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s[7] == 0.0);
  // task: 4 qubits, depth 50 of max 200, 1024 shots
  CHECK(s[8] == doctest::Approx(4.0 / 128.0).epsilon(1e-15));
  CHECK(s[9] == doctest::Approx(50.0 / 200.0).epsilon(1e-15));
  CHECK(s[10] == doctest::Approx(1024.0 / 8192.0).epsilon(1e-15));
}

TEST_CASE("a 128-qubit node saturates the qubit feature") {
  auto records = make_records({{"a", 3, 10}});
  SchedulingEnv env(make_registry({"big,128,32,1000,cx,line,1.0"}), records, EnvConfig{});
  auto s = env.reset(1);
  CHECK(s[0] == 1.0);
}

TEST_CASE("backlog feature reflects queued work; idle nodes read zero") {
  EnvConfig cfg;
  cfg.n_tasks = 2;
  auto records = make_records({{"a", 3, 10}});
  SchedulingEnv env(two_node_registry(), records, cfg);
  EpisodeWorkload w;
  w.window = 60.0;
  w.tasks = {make_task(0, 2, 100, 1000, 0.0),  // exec on alpha: 100 s
             make_task(1, 2, 10, 100, 10.0)};
  env.reset_with_workload(w);
  auto r = env.step(0);  // place first on alpha; clock moves to 10
  // alpha busy until t=100 -> backlog (100-10)/60; beta idle
  CHECK(r.next_state[3] == doctest::Approx(90.0 / 60.0).epsilon(1e-12));
  CHECK(r.next_state[7] == 0.0);
}

TEST_CASE("step: success, rescheduling, permanent failure") {
  EnvConfig cfg;
  cfg.n_tasks = 2;
  cfg.max_reschedules = 2;
  auto records = make_records({{"a", 3, 10}});
  SchedulingEnv env(two_node_registry(), records, cfg);  // alpha: 5 qubits
  EpisodeWorkload w;
  w.window = 60.0;
  w.tasks = {make_task(0, 20, 10, 100, 0.0),  // only fits beta (30q)
             make_task(1, 2, 10, 100, 1.0)};
  env.reset_with_workload(w);

  auto r1 = env.step(0);  // too small -> reject, kappa=1
  CHECK_FALSE(r1.task_done);
  CHECK(r1.placed_node == -1);
  CHECK(r1.replacement_count == 1);
  CHECK(r1.reward == doctest::Approx(-11.0));
  CHECK(env.current_task().id == 0);  // same task re-presented
  CHECK(env.clock() == 0.0);          // at the same clock

  auto r2 = env.step(1);  // fits; kappa stays 1, success discount applies
  CHECK(r2.task_done);
  CHECK(r2.placed_node == 1);
  double t_theta = 10.0 * 100 / 400.0;  // 2.5 s on beta
  CHECK(r2.total_time.value() == doctest::Approx(t_theta));
  CHECK(r2.reward == doctest::Approx((1.0 / t_theta) * 0.9));

  CHECK(env.current_task().qubits == 2);  // episode advanced to the next task
  auto r3 = env.step(0);                   // 2-qubit task fits alpha fine
  CHECK(r3.task_done);
  CHECK(r3.episode_done);
}

TEST_CASE("max_reschedules exceeded marks the task failed and moves on") {
  EnvConfig cfg;
  cfg.n_tasks = 1;
  cfg.max_reschedules = 2;
  auto records = make_records({{"a", 3, 10}});
  SchedulingEnv env(make_registry({"tiny,4,32,1000,cx,line,1.0"}), records, cfg);
  env.reset_with_workload(one_task_workload(make_task(0, 9, 10, 100, 0.0)));

  auto r1 = env.step(0);
  CHECK(r1.replacement_count == 1);
  CHECK_FALSE(r1.task_done);
  auto r2 = env.step(0);
  CHECK(r2.replacement_count == 2);
  CHECK_FALSE(r2.task_done);
  auto r3 = env.step(0);  // kappa=3 > 2 -> permanent failure
  CHECK(r3.task_done);
  CHECK(r3.episode_done);
  CHECK(r3.reward == doctest::Approx(-10.0 * (1.0 + 0.1 * 3)));
  CHECK(env.sim().failed_count() == 1);
  CHECK(env.sim().episode_total_completion() == 0.0);
}

TEST_CASE("step usage errors") {
  EnvConfig cfg;
  cfg.n_tasks = 1;
  auto env = small_env(cfg);
  env.reset(3);
  CHECK_THROWS_AS(env.step(-1), UsageError);
  CHECK_THROWS_AS(env.step(2), UsageError);
  auto r = env.step(1);  // beta fits everything in the record set
  CHECK(r.episode_done);
  CHECK_THROWS_AS(env.step(0), UsageError);
}

TEST_CASE("episode length >= n_tasks with equality iff no reschedules") {
  EnvConfig cfg;
  cfg.n_tasks = 4;
  auto records = make_records({{"a", 3, 10}});
  SchedulingEnv env(two_node_registry(), records, cfg);
  EpisodeWorkload w;
  w.window = 60.0;
  w.tasks = {make_task(0, 2, 10, 100, 0.0), make_task(1, 20, 10, 100, 1.0),
             make_task(2, 3, 10, 100, 2.0), make_task(3, 25, 10, 100, 3.0)};

  env.reset_with_workload(w);
  while (!env.episode_done()) env.step(1);  // beta (30q) always feasible
  CHECK(env.steps_taken() == cfg.n_tasks);

  env.reset_with_workload(w);
  int reschedules = 0;
  while (!env.episode_done()) {
    // try alpha first; on rejection the env re-presents and we fall to beta
    auto r = env.step(0);
    if (!r.task_done) {
      ++reschedules;
      env.step(1);
    }
  }
  CHECK(reschedules == 2);  // the two 20+ qubit tasks bounce off alpha once
  CHECK(env.steps_taken() == cfg.n_tasks + reschedules);
}

TEST_CASE("sum of kappa equals steps minus n_tasks when nothing fails hard") {
  EnvConfig cfg;
  cfg.n_tasks = 20;
  auto env = small_env(cfg);
  env.reset(11);
  Rng rng(3);
  while (!env.episode_done()) env.step(rng.uniform_int(2));
  int kappa_sum = 0;
  for (int i = 0; i < env.sim().num_tasks(); ++i)
    kappa_sum += env.sim().task(i).replacement_count;
  CHECK(env.sim().failed_count() == 0);
  CHECK(kappa_sum == env.steps_taken() - cfg.n_tasks);
}

TEST_CASE("encoding ignores tasks that have not arrived yet") {
  EnvConfig cfg;
  cfg.n_tasks = 2;
  auto records = make_records({{"a", 3, 10}});
  SchedulingEnv env(two_node_registry(), records, cfg);

  EpisodeWorkload w1, w2;
  w1.window = w2.window = 60.0;
  w1.tasks = {make_task(0, 3, 25, 512, 1.0), make_task(1, 2, 10, 100, 30.0)};
  w2.tasks = {make_task(0, 3, 25, 512, 1.0), make_task(1, 22, 999, 4096, 55.0)};
  auto s1 = env.reset_with_workload(w1);
  auto s2 = env.reset_with_workload(w2);
  CHECK((s1 - s2).norm() == 0.0);
}

TEST_CASE("episode trace records one line per step") {
  EnvConfig cfg;
  cfg.n_tasks = 3;
  auto env = small_env(cfg);
  env.reset(8);
  while (!env.episode_done()) env.step(1);
  CHECK(env.trace().size() == static_cast<std::size_t>(env.steps_taken()));
  std::ostringstream out;
  env.write_trace(out);
  int lines = 0;
  std::istringstream in(out.str());
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == env.steps_taken());
}

TEST_CASE("config validation") {
  EnvConfig bad;
  bad.failure_penalty = 1.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = EnvConfig{};
  bad.penalty_factor = -0.1;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = EnvConfig{};
  bad.n_tasks = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}
