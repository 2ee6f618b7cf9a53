#include "qsched/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "qsched/util.hpp"

namespace qsched {

void ExperimentConfig::validate() const {
  env.validate();
  agent.validate();
  if (train_iterations < 1) throw UsageError("config: train_iterations must be >= 1");
  if (steps_per_iteration < 1) throw UsageError("config: steps_per_iteration must be >= 1");
  if (eval_episodes < 1) throw UsageError("config: eval_episodes must be >= 1");
  if (tune_iterations < 1) throw UsageError("config: tune_iterations must be >= 1");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

namespace {

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    double v = std::stod(trim(s), &pos);
    if (pos != trim(s).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("config: invalid number for " + key + ": '" + s + "'");
  }
}

long long to_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(trim(s), &pos);
    if (pos != trim(s).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("config: invalid integer for " + key + ": '" + s + "'");
  }
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(trim(s), &pos);
    if (pos != trim(s).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("config: invalid seed for " + key + ": '" + s + "'");
  }
}

std::vector<int> to_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const auto& part : split(s, ',')) {
    std::string t = trim(part);
    if (t.empty()) continue;
    out.push_back(static_cast<int>(to_int(t, key)));
  }
  if (out.empty()) throw ParseError("config: empty list for " + key);
  return out;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (int x : v) {
    if (!out.empty()) out += ",";
    out += std::to_string(x);
  }
  return out;
}

const std::vector<Field>& field_table() {
  static const std::vector<Field> table = {
      {"paths.backends", [](const ExperimentConfig& c) { return c.backends_path; },
       [](ExperimentConfig& c, const std::string& v) { c.backends_path = trim(v); }},
      {"paths.circuits", [](const ExperimentConfig& c) { return c.circuits_path; },
       [](ExperimentConfig& c, const std::string& v) { c.circuits_path = trim(v); }},

      {"env.n_tasks", [](const ExperimentConfig& c) { return std::to_string(c.env.n_tasks); },
       [](ExperimentConfig& c, const std::string& v) {
         c.env.n_tasks = static_cast<int>(to_int(v, "env.n_tasks"));
       }},
      {"env.window", [](const ExperimentConfig& c) { return fmt_double(c.env.window); },
       [](ExperimentConfig& c, const std::string& v) {
         c.env.window = to_double(v, "env.window");
       }},
      {"env.failure_penalty",
       [](const ExperimentConfig& c) { return fmt_double(c.env.failure_penalty); },
       [](ExperimentConfig& c, const std::string& v) {
         c.env.failure_penalty = to_double(v, "env.failure_penalty");
       }},
      {"env.penalty_factor",
       [](const ExperimentConfig& c) { return fmt_double(c.env.penalty_factor); },
       [](ExperimentConfig& c, const std::string& v) {
         c.env.penalty_factor = to_double(v, "env.penalty_factor");
       }},
      {"env.max_reschedules",
       [](const ExperimentConfig& c) { return std::to_string(c.env.max_reschedules); },
       [](ExperimentConfig& c, const std::string& v) {
         c.env.max_reschedules = static_cast<int>(to_int(v, "env.max_reschedules"));
       }},

      {"agent.discount", [](const ExperimentConfig& c) { return fmt_double(c.agent.discount); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.discount = to_double(v, "agent.discount");
         c.env.discount = c.agent.discount;  // single source for gamma
       }},
      {"agent.n_step", [](const ExperimentConfig& c) { return std::to_string(c.agent.n_step); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.n_step = static_cast<int>(to_int(v, "agent.n_step"));
       }},
      {"agent.batch_size",
       [](const ExperimentConfig& c) { return std::to_string(c.agent.batch_size); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.batch_size = static_cast<int>(to_int(v, "agent.batch_size"));
       }},
      {"agent.n_atoms", [](const ExperimentConfig& c) { return std::to_string(c.agent.n_atoms); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.n_atoms = static_cast<int>(to_int(v, "agent.n_atoms"));
       }},
      {"agent.v_min", [](const ExperimentConfig& c) { return fmt_double(c.agent.v_min); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.v_min = to_double(v, "agent.v_min");
       }},
      {"agent.v_max", [](const ExperimentConfig& c) { return fmt_double(c.agent.v_max); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.v_max = to_double(v, "agent.v_max");
       }},
      {"agent.lr", [](const ExperimentConfig& c) { return fmt_double(c.agent.lr); },
       [](ExperimentConfig& c, const std::string& v) { c.agent.lr = to_double(v, "agent.lr"); }},
      {"agent.target_sync_period",
       [](const ExperimentConfig& c) { return std::to_string(c.agent.target_sync_period); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.target_sync_period = static_cast<int>(to_int(v, "agent.target_sync_period"));
       }},
      {"agent.per_alpha", [](const ExperimentConfig& c) { return fmt_double(c.agent.per_alpha); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.per_alpha = to_double(v, "agent.per_alpha");
       }},
      {"agent.per_beta0", [](const ExperimentConfig& c) { return fmt_double(c.agent.per_beta0); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.per_beta0 = to_double(v, "agent.per_beta0");
       }},
      {"agent.per_beta1", [](const ExperimentConfig& c) { return fmt_double(c.agent.per_beta1); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.per_beta1 = to_double(v, "agent.per_beta1");
       }},
      {"agent.per_beta_anneal_steps",
       [](const ExperimentConfig& c) { return std::to_string(c.agent.per_beta_anneal_steps); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.per_beta_anneal_steps = to_int(v, "agent.per_beta_anneal_steps");
       }},
      {"agent.replay_capacity",
       [](const ExperimentConfig& c) { return std::to_string(c.agent.replay_capacity); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.replay_capacity = static_cast<int>(to_int(v, "agent.replay_capacity"));
       }},
      {"agent.warmup", [](const ExperimentConfig& c) { return std::to_string(c.agent.warmup); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.warmup = static_cast<int>(to_int(v, "agent.warmup"));
       }},
      {"agent.priority_floor",
       [](const ExperimentConfig& c) { return fmt_double(c.agent.priority_floor); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.priority_floor = to_double(v, "agent.priority_floor");
       }},
      {"agent.hidden", [](const ExperimentConfig& c) { return fmt_int_list(c.agent.hidden); },
       [](ExperimentConfig& c, const std::string& v) {
         c.agent.hidden = to_int_list(v, "agent.hidden");
       }},

      {"run.train_iterations",
       [](const ExperimentConfig& c) { return std::to_string(c.train_iterations); },
       [](ExperimentConfig& c, const std::string& v) {
         c.train_iterations = static_cast<int>(to_int(v, "run.train_iterations"));
       }},
      {"run.steps_per_iteration",
       [](const ExperimentConfig& c) { return std::to_string(c.steps_per_iteration); },
       [](ExperimentConfig& c, const std::string& v) {
         c.steps_per_iteration = static_cast<int>(to_int(v, "run.steps_per_iteration"));
       }},
      {"run.eval_episodes",
       [](const ExperimentConfig& c) { return std::to_string(c.eval_episodes); },
       [](ExperimentConfig& c, const std::string& v) {
         c.eval_episodes = static_cast<int>(to_int(v, "run.eval_episodes"));
       }},
      {"run.train_seed", [](const ExperimentConfig& c) { return std::to_string(c.train_seed); },
       [](ExperimentConfig& c, const std::string& v) {
         c.train_seed = to_u64(v, "run.train_seed");
       }},
      {"run.eval_seed", [](const ExperimentConfig& c) { return std::to_string(c.eval_seed); },
       [](ExperimentConfig& c, const std::string& v) {
         c.eval_seed = to_u64(v, "run.eval_seed");
       }},
      {"run.tune_iterations",
       [](const ExperimentConfig& c) { return std::to_string(c.tune_iterations); },
       [](ExperimentConfig& c, const std::string& v) {
         c.tune_iterations = static_cast<int>(to_int(v, "run.tune_iterations"));
       }},
  };
  return table;
}

}  // namespace

void apply_config_value(ExperimentConfig& cfg, const std::string& dotted_key,
                        const std::string& value) {
  for (const auto& f : field_table()) {
    if (f.key == dotted_key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ParseError("config: unknown key '" + dotted_key + "'");
}

ExperimentConfig parse_config(std::istream& in, const std::string& origin,
                              ExperimentConfig base) {
  ExperimentConfig cfg = std::move(base);
  std::string line;
  std::string section;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(row) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    std::string dotted = section.empty() ? key : section + "." + key;
    try {
      apply_config_value(cfg, dotted, value);
    } catch (const ParseError& e) {
      throw ParseError(origin + ":" + std::to_string(row) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  return parse_config(in, path, std::move(base));
}

void write_config(const ExperimentConfig& cfg, std::ostream& out) {
  std::string current_section;
  for (const auto& f : field_table()) {
    auto dot = f.key.find('.');
    std::string section = f.key.substr(0, dot);
    std::string key = f.key.substr(dot + 1);
    if (section != current_section) {
      if (!current_section.empty()) out << "\n";
      out << "[" << section << "]\n";
      current_section = section;
    }
    out << key << " = " << f.get(cfg) << "\n";
  }
}

std::string config_to_string(const ExperimentConfig& cfg) {
  std::ostringstream os;
  write_config(cfg, os);
  return os.str();
}

}  // namespace qsched
