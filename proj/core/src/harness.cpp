#include "qsched/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "qsched/util.hpp"

namespace qsched {

std::uint64_t episode_seed(std::uint64_t base, long index) {
  return derive_seed(base, SeedStream::Workload, static_cast<std::uint64_t>(index));
}

std::vector<std::uint64_t> episode_seed_sequence(std::uint64_t base, int count) {
  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(episode_seed(base, i));
  return out;
}

namespace {

EpisodeReport collect_report(const SchedulingEnv& env, int index, std::uint64_t seed) {
  const DataCenterSim& sim = env.sim();
  EpisodeReport rep;
  rep.index = index;
  rep.seed = seed;
  rep.total_completion = sim.episode_total_completion();
  rep.failed = sim.failed_count();
  rep.steps = env.steps_taken();
  rep.reward_sum = env.reward_sum();
  for (int i = 0; i < sim.num_tasks(); ++i) {
    const QTask& t = sim.task(i);
    const auto& tl = sim.timeline(i);
    TaskReportRow row;
    row.task_id = t.id;
    row.app = t.app;
    row.qubits = t.qubits;
    row.base_depth = t.base_depth;
    row.shots = t.shots;
    row.arrival = t.arrival;
    row.status = to_string(t.status);
    row.replacement_count = t.replacement_count;
    rep.reschedules += t.replacement_count;
    if (t.status == TaskStatus::Completed) {
      row.node_id = tl.node_id;
      row.start = tl.start;
      row.exec = tl.exec;
      row.total = tl.total;
    }
    rep.tasks.push_back(std::move(row));
  }
  return rep;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stdev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

EpisodeReport run_episode(SchedulingEnv& env, Policy& policy, int index, std::uint64_t seed) {
  policy.begin_episode(seed);
  while (!env.episode_done()) {
    int a = policy.select(env);
    env.step(a);
  }
  return collect_report(env, index, seed);
}

// ---------------------------------------------------------------------------
// Training

TrainResult train_agent(RainbowAgent& agent, SchedulingEnv& env, const ExperimentConfig& cfg,
                        const IterationCallback& on_iteration) {
  cfg.validate();
  agent.sync_target();

  TrainResult result;
  long total_steps = 0;
  long episodes = 0;
  bool episode_open = false;
  Eigen::VectorXd s;
  double ep_reward = 0.0;
  int ep_len = 0;
  double carry_reward = 0.0;
  double carry_length = 0.0;
  bool have_carry = false;

  for (int iter = 1; iter <= cfg.train_iterations; ++iter) {
    std::vector<double> ep_rewards, ep_lengths;
    double loss_sum = 0.0;
    long loss_count = 0;

    for (int step = 0; step < cfg.steps_per_iteration; ++step) {
      if (!episode_open) {
        s = env.reset(episode_seed(cfg.train_seed, episodes));
        agent.begin_episode();
        episode_open = true;
        ep_reward = 0.0;
        ep_len = 0;
      }
      int a = agent.act(s);
      StepResult r = env.step(a);
      agent.observe(s, a, r.reward, r.next_state, r.task_done);
      s = r.next_state;
      ep_reward += r.reward;
      ep_len += 1;
      if (r.episode_done) {
        agent.end_episode();
        episodes += 1;
        episode_open = false;
        ep_rewards.push_back(ep_reward);
        ep_lengths.push_back(static_cast<double>(ep_len));
      }
      if (agent.ready_to_learn()) {
        loss_sum += agent.learn();
        loss_count += 1;
        if (agent.learn_steps() % cfg.agent.target_sync_period == 0) agent.sync_target();
      } else {
        agent.resample_noise();  // keep exploring while the buffer warms up
      }
      total_steps += 1;
    }

    IterationStats st;
    st.iteration = iter;
    st.env_steps = total_steps;
    st.episodes = static_cast<int>(ep_rewards.size());
    if (!ep_rewards.empty()) {
      st.mean_episode_reward = mean_of(ep_rewards);
      st.mean_episode_length = mean_of(ep_lengths);
      carry_reward = st.mean_episode_reward;
      carry_length = st.mean_episode_length;
      have_carry = true;
    } else if (have_carry) {
      st.mean_episode_reward = carry_reward;
      st.mean_episode_length = carry_length;
    }
    st.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    st.learn_steps = agent.learn_steps();
    result.log.push_back(st);
    if (on_iteration) on_iteration(st);
  }

  result.episodes_started = episodes + (episode_open ? 1 : 0);
  if (episode_open) agent.end_episode();  // flush staging
  result.episodes_played = episodes;
  return result;
}

void write_training_log(const std::vector<IterationStats>& log, std::ostream& out) {
  for (const auto& st : log) {
    nlohmann::json j;
    j["iter"] = st.iteration;
    j["env_steps"] = st.env_steps;
    j["episodes"] = st.episodes;
    j["mean_episode_reward"] = st.mean_episode_reward;
    j["mean_episode_length"] = st.mean_episode_length;
    j["mean_loss"] = st.mean_loss;
    j["learn_steps"] = st.learn_steps;
    out << j.dump() << "\n";
  }
}

std::vector<IterationStats> read_training_log(std::istream& in, const std::string& origin) {
  std::vector<IterationStats> log;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(origin + ":" + std::to_string(row) + ": " + e.what());
    }
    IterationStats st;
    st.iteration = j.at("iter").get<int>();
    st.env_steps = j.at("env_steps").get<long>();
    st.episodes = j.at("episodes").get<int>();
    st.mean_episode_reward = j.at("mean_episode_reward").get<double>();
    st.mean_episode_length = j.at("mean_episode_length").get<double>();
    st.mean_loss = j.at("mean_loss").get<double>();
    st.learn_steps = j.at("learn_steps").get<long>();
    log.push_back(st);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json agent_config_to_json(const AgentConfig& a) {
  nlohmann::json j;
  j["discount"] = a.discount;
  j["n_step"] = a.n_step;
  j["batch_size"] = a.batch_size;
  j["n_atoms"] = a.n_atoms;
  j["v_min"] = a.v_min;
  j["v_max"] = a.v_max;
  j["lr"] = a.lr;
  j["target_sync_period"] = a.target_sync_period;
  j["per_alpha"] = a.per_alpha;
  j["per_beta0"] = a.per_beta0;
  j["per_beta1"] = a.per_beta1;
  j["per_beta_anneal_steps"] = a.per_beta_anneal_steps;
  j["replay_capacity"] = a.replay_capacity;
  j["warmup"] = a.warmup;
  j["priority_floor"] = a.priority_floor;
  j["hidden"] = a.hidden;
  return j;
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig a;
  a.discount = j.at("discount").get<double>();
  a.n_step = j.at("n_step").get<int>();
  a.batch_size = j.at("batch_size").get<int>();
  a.n_atoms = j.at("n_atoms").get<int>();
  a.v_min = j.at("v_min").get<double>();
  a.v_max = j.at("v_max").get<double>();
  a.lr = j.at("lr").get<double>();
  a.target_sync_period = j.at("target_sync_period").get<int>();
  a.per_alpha = j.at("per_alpha").get<double>();
  a.per_beta0 = j.at("per_beta0").get<double>();
  a.per_beta1 = j.at("per_beta1").get<double>();
  a.per_beta_anneal_steps = j.at("per_beta_anneal_steps").get<long>();
  a.replay_capacity = j.at("replay_capacity").get<int>();
  a.warmup = j.at("warmup").get<int>();
  a.priority_floor = j.at("priority_floor").get<double>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  return a;
}

nlohmann::json norm_to_json(const NormConstants& n) {
  nlohmann::json j;
  j["qubit_scale"] = n.qubit_scale;
  j["qv_log_scale"] = n.qv_log_scale;
  j["shots_scale"] = n.shots_scale;
  j["max_d1cps"] = n.max_d1cps;
  j["max_depth"] = n.max_depth;
  return j;
}

NormConstants norm_from_json(const nlohmann::json& j) {
  NormConstants n;
  n.qubit_scale = j.at("qubit_scale").get<double>();
  n.qv_log_scale = j.at("qv_log_scale").get<double>();
  n.shots_scale = j.at("shots_scale").get<double>();
  n.max_d1cps = j.at("max_d1cps").get<double>();
  n.max_depth = j.at("max_depth").get<double>();
  return n;
}

Checkpoint make_checkpoint(RainbowAgent& agent, const NormConstants& norm,
                           std::uint64_t train_seed, long train_episodes) {
  Checkpoint ck;
  ck.agent = agent.config();
  ck.norm = norm;
  ck.state_dim = agent.state_dim();
  ck.n_actions = agent.num_actions();
  ck.train_seed = train_seed;
  ck.train_episodes = train_episodes;
  ck.params = params_to_json(agent.online_net().params());
  return ck;
}

void save_checkpoint_file(const Checkpoint& ck, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["agent_config"] = agent_config_to_json(ck.agent);
  j["normalization"] = norm_to_json(ck.norm);
  j["state_dim"] = ck.state_dim;
  j["n_actions"] = ck.n_actions;
  j["train_seed"] = ck.train_seed;
  j["train_episodes"] = ck.train_episodes;
  j["params"] = ck.params;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw ParseError("write failed: " + path);
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.value("format_version", -1) != 1)
    throw ParseError(path + ": unsupported checkpoint format_version");
  Checkpoint ck;
  ck.agent = agent_config_from_json(j.at("agent_config"));
  ck.norm = norm_from_json(j.at("normalization"));
  ck.state_dim = j.at("state_dim").get<int>();
  ck.n_actions = j.at("n_actions").get<int>();
  ck.train_seed = j.at("train_seed").get<std::uint64_t>();
  ck.train_episodes = j.at("train_episodes").get<long>();
  ck.params = j.at("params");
  return ck;
}

CategoricalQNet net_from_checkpoint(const Checkpoint& ck) {
  QNetConfig n;
  n.input_dim = ck.state_dim;
  n.n_actions = ck.n_actions;
  n.n_atoms = ck.agent.n_atoms;
  n.v_min = ck.agent.v_min;
  n.v_max = ck.agent.v_max;
  n.hidden = ck.agent.hidden;
  Rng rng(1);  // initialization is immediately overwritten
  CategoricalQNet net(n, rng);
  params_from_json(ck.params, net.params());
  net.zero_noise();
  return net;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

void summarize(EvalSummary& s) {
  std::vector<double> totals, resched, failed;
  for (const auto& e : s.episodes) {
    totals.push_back(e.total_completion);
    resched.push_back(static_cast<double>(e.reschedules));
    failed.push_back(static_cast<double>(e.failed));
  }
  s.mean_total = mean_of(totals);
  s.stdev_total = stdev_of(totals);
  s.mean_reschedules = mean_of(resched);
  s.mean_failed = mean_of(failed);
}

}  // namespace

EvalSummary evaluate_policy(Policy& policy, SchedulingEnv& env,
                            const std::vector<std::uint64_t>& seeds) {
  EvalSummary s;
  s.policy = policy.name();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    env.reset(seeds[i]);
    s.episodes.push_back(run_episode(env, policy, static_cast<int>(i), seeds[i]));
  }
  summarize(s);
  return s;
}

EvalSummary evaluate_policy_on_workload(Policy& policy, SchedulingEnv& env,
                                        const EpisodeWorkload& workload) {
  EvalSummary s;
  s.policy = policy.name();
  env.reset_with_workload(workload);
  s.episodes.push_back(run_episode(env, policy, 0, workload.seed));
  summarize(s);
  return s;
}

void check_seed_disjointness(const Checkpoint& ck, const std::vector<std::uint64_t>& eval_seeds,
                             bool allow_overlap) {
  std::unordered_set<std::uint64_t> train_set;
  train_set.reserve(static_cast<std::size_t>(ck.train_episodes));
  for (long i = 0; i < ck.train_episodes; ++i) train_set.insert(episode_seed(ck.train_seed, i));
  for (std::uint64_t s : eval_seeds) {
    if (train_set.count(s)) {
      if (allow_overlap) return;  // explicitly waived
      throw UsageError(
          "evaluation seed overlaps the training workload stream; rerun with a "
          "different eval seed or pass --allow-overlap");
    }
  }
}

void write_eval_csv(const EvalSummary& s, std::ostream& out) {
  out.precision(17);  // summary stays exactly recomputable from the rows
  out << "episode,seed,total_completion_time,reschedule_count,failed_count,steps,total_stdev\n";
  for (const auto& e : s.episodes) {
    out << e.index << "," << e.seed << "," << e.total_completion << "," << e.reschedules << ","
        << e.failed << "," << e.steps << ",\n";
  }
  out << "summary," << "," << s.mean_total << "," << s.mean_reschedules << "," << s.mean_failed
      << "," << "," << s.stdev_total << "\n";
}

void write_task_csv(const EvalSummary& s, std::ostream& out) {
  out.precision(17);
  out << "episode,task_id,app,qubits,base_depth,shots,arrival,status,node_id,start,exec,total,"
         "kappa\n";
  for (const auto& e : s.episodes) {
    for (const auto& t : e.tasks) {
      out << e.index << "," << t.task_id << "," << t.app << "," << t.qubits << ","
          << t.base_depth << "," << t.shots << "," << t.arrival << "," << t.status << ","
          << t.node_id << "," << t.start << "," << t.exec << "," << t.total << ","
          << t.replacement_count << "\n";
    }
  }
}

double percent_reduction(double baseline, double candidate) {
  return (baseline - candidate) / baseline * 100.0;
}

void write_compare_csv(const CompareResult& r, std::ostream& out) {
  out.precision(17);
  out << "policy,mean_total,stdev_total,mean_reschedules,mean_failed";
  for (const auto& p : r.policies) out << ",red_vs_" << p.policy;
  out << "\n";
  for (const auto& p : r.policies) {
    out << p.policy << "," << p.mean_total << "," << p.stdev_total << "," << p.mean_reschedules
        << "," << p.mean_failed;
    for (const auto& base : r.policies)
      out << "," << percent_reduction(base.mean_total, p.mean_total);
    out << "\n";
  }
}

void write_compare_table(const CompareResult& r, std::ostream& out) {
  out << "policy          mean_total   stdev     mean_resched  mean_failed\n";
  char buf[160];
  for (const auto& p : r.policies) {
    std::snprintf(buf, sizeof(buf), "%-15s %-12.3f %-9.3f %-13.3f %-11.3f\n", p.policy.c_str(),
                  p.mean_total, p.stdev_total, p.mean_reschedules, p.mean_failed);
    out << buf;
  }
  out << "\npercent reduction of <row> vs <column> ((col-row)/col*100):\n";
  out << "policy         ";
  for (const auto& p : r.policies) {
    std::snprintf(buf, sizeof(buf), " %12s", p.policy.c_str());
    out << buf;
  }
  out << "\n";
  for (const auto& p : r.policies) {
    std::snprintf(buf, sizeof(buf), "%-15s", p.policy.c_str());
    out << buf;
    for (const auto& base : r.policies) {
      std::snprintf(buf, sizeof(buf), " %12.2f", percent_reduction(base.mean_total, p.mean_total));
      out << buf;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Tuning

std::vector<GridAxis> parse_grid(const std::string& spec) {
  std::vector<GridAxis> axes;
  for (const auto& part : split(spec, ';')) {
    std::string t = trim(part);
    if (t.empty()) continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("grid: expected key=v1,v2 in '" + t + "'");
    GridAxis axis;
    axis.key = trim(t.substr(0, eq));
    for (const auto& v : split(t.substr(eq + 1), ',')) {
      std::string tv = trim(v);
      if (!tv.empty()) axis.values.push_back(tv);
    }
    if (axis.key.empty() || axis.values.empty())
      throw ParseError("grid: empty key or value list in '" + t + "'");
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw ParseError("grid: empty specification");
  return axes;
}

std::vector<std::map<std::string, std::string>> grid_points(const std::vector<GridAxis>& axes) {
  std::vector<std::map<std::string, std::string>> points{{}};
  for (const auto& axis : axes) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& p : points) {
      for (const auto& v : axis.values) {
        auto q = p;
        q[axis.key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

namespace {

double final_quarter_reward(const std::vector<IterationStats>& log) {
  if (log.empty()) return 0.0;
  std::size_t quarter = std::max<std::size_t>(1, log.size() / 4);
  double sum = 0.0;
  for (std::size_t i = log.size() - quarter; i < log.size(); ++i)
    sum += log[i].mean_episode_reward;
  return sum / static_cast<double>(quarter);
}

}  // namespace

TuneResult run_tune(const ExperimentConfig& base, const std::vector<GridAxis>& axes, int jobs,
                    const std::function<void(const TuneTrial&)>& on_trial) {
  auto points = grid_points(axes);
  std::vector<TuneTrial> trials(points.size());
  std::vector<ExperimentConfig> configs(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    ExperimentConfig cfg = base;
    for (const auto& [k, v] : points[i]) apply_config_value(cfg, k, v);
    cfg.train_iterations = cfg.tune_iterations;  // reduced budget
    cfg.validate();
    configs[i] = std::move(cfg);
    trials[i].index = static_cast<int>(i);
    trials[i].overrides = points[i];
  }

  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= points.size()) return;
      const ExperimentConfig& cfg = configs[i];
      SchedulingEnv env = make_env(cfg);
      RainbowAgent agent(env.state_dim(), env.num_actions(), cfg.agent,
                         derive_seed(cfg.train_seed, SeedStream::NetInit, i));
      TrainResult tr = train_agent(agent, env, cfg);
      trials[i].log = tr.log;
      trials[i].score = final_quarter_reward(tr.log);
    }
  };

  int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  TuneResult result;
  result.ranked = trials;
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const TuneTrial& a, const TuneTrial& b) { return a.score > b.score; });
  if (on_trial)
    for (const auto& t : result.ranked) on_trial(t);

  result.best = base;
  for (const auto& [k, v] : result.ranked.front().overrides)
    apply_config_value(result.best, k, v);
  return result;
}

void write_tune_csv(const TuneResult& r, std::ostream& out) {
  out << "rank,trial,score,overrides\n";
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    const auto& t = r.ranked[i];
    out << i << "," << t.index << "," << t.score << ",";
    bool first = true;
    for (const auto& [k, v] : t.overrides) {
      if (!first) out << ";";
      out << k << "=" << v;
      first = false;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------

SchedulingEnv make_env(const ExperimentConfig& cfg) {
  return SchedulingEnv(load_backend_registry(cfg.backends_path),
                       load_circuit_records(cfg.circuits_path), cfg.env);
}

SchedulingEnv make_env(const ExperimentConfig& cfg, const NormConstants& norm) {
  return SchedulingEnv(load_backend_registry(cfg.backends_path),
                       load_circuit_records(cfg.circuits_path), cfg.env, norm);
}

}  // namespace qsched
