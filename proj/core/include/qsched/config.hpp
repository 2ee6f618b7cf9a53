#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "qsched/agent.hpp"
#include "qsched/env.hpp"

namespace qsched {

/// Everything one experiment needs. Serialized as sectioned key=value text;
/// `qsched defaults` prints the default instance.
struct ExperimentConfig {
  std::string backends_path = "data/backends.csv";
  std::string circuits_path = "data/circuits.csv";
  EnvConfig env;
  AgentConfig agent;
  int train_iterations = 100;
  int steps_per_iteration = 1000;
  int eval_episodes = 100;
  std::uint64_t train_seed = 1;
  std::uint64_t eval_seed = 101;
  int tune_iterations = 20;

  void validate() const;
};

ExperimentConfig default_config();

/// "section.key" -> value assignment; used by both the INI loader and tune's
/// grid overrides. Throws ParseError on unknown keys or bad values.
void apply_config_value(ExperimentConfig& cfg, const std::string& dotted_key,
                        const std::string& value);

ExperimentConfig parse_config(std::istream& in, const std::string& origin,
                              ExperimentConfig base = default_config());
ExperimentConfig load_config_file(const std::string& path,
                                  ExperimentConfig base = default_config());

void write_config(const ExperimentConfig& cfg, std::ostream& out);
std::string config_to_string(const ExperimentConfig& cfg);

}  // namespace qsched
