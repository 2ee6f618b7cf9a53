#include "qsched/workload.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qsched/rng.hpp"
#include "qsched/util.hpp"

namespace qsched {

namespace {

std::set<std::string> parse_gate_list(const std::string& field) {
  std::set<std::string> gates;
  for (const auto& g : split(field, ';')) {
    std::string t = trim(g);
    if (!t.empty()) gates.insert(t);
  }
  return gates;
}

std::string join_gates(const std::set<std::string>& gates) {
  std::string out;
  for (const auto& g : gates) {
    if (!out.empty()) out += ';';
    out += g;
  }
  return out;
}

[[noreturn]] void row_error(const std::string& origin, int row, const std::string& what) {
  throw ParseError(origin + ":" + std::to_string(row) + ": " + what);
}

long parse_long(const std::string& s, const std::string& origin, int row,
                const std::string& field) {
  try {
    std::size_t pos = 0;
    long v = std::stol(trim(s), &pos);
    if (pos != trim(s).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    row_error(origin, row, "invalid integer for " + field + ": '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& origin, int row,
                    const std::string& field) {
  try {
    std::size_t pos = 0;
    double v = std::stod(trim(s), &pos);
    if (pos != trim(s).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    row_error(origin, row, "invalid number for " + field + ": '" + s + "'");
  }
}

}  // namespace

DepthOverhead parse_overhead(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) throw ParseError("empty overhead value");
  std::size_t dot = t.find('.');
  std::string int_part = dot == std::string::npos ? t : t.substr(0, dot);
  std::string frac_part = dot == std::string::npos ? "" : t.substr(dot + 1);
  if (int_part.empty() && frac_part.empty())
    throw ParseError("invalid overhead value: '" + text + "'");
  for (char c : int_part)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw ParseError("invalid overhead value: '" + text + "'");
  for (char c : frac_part)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw ParseError("invalid overhead value: '" + text + "'");
  if (frac_part.size() > 9) throw ParseError("overhead has too many digits: '" + text + "'");

  DepthOverhead o;
  o.den = 1;
  for (std::size_t i = 0; i < frac_part.size(); ++i) o.den *= 10;
  o.num = (int_part.empty() ? 0 : std::stoll(int_part)) * o.den +
          (frac_part.empty() ? 0 : std::stoll(frac_part));
  return o;
}

int effective_depth(int base_depth, const DepthOverhead& overhead) {
  // ceil(base_depth * num / den) with an exact wide intermediate.
  __int128 prod = static_cast<__int128>(base_depth) * overhead.num;
  __int128 q = (prod + overhead.den - 1) / overhead.den;
  return static_cast<int>(q);
}

BackendRegistry::BackendRegistry(std::vector<QNodeSpec> nodes,
                                 std::vector<DepthOverhead> overheads)
    : nodes_(std::move(nodes)), overheads_(std::move(overheads)) {
  if (nodes_.size() != overheads_.size())
    throw UsageError("registry nodes/overheads size mismatch");
}

const QNodeSpec& BackendRegistry::node(int id) const {
  if (id < 0 || id >= size()) throw UsageError("unknown node id " + std::to_string(id));
  return nodes_[static_cast<std::size_t>(id)];
}

const DepthOverhead& BackendRegistry::overhead(int id) const {
  if (id < 0 || id >= size()) throw UsageError("unknown node id " + std::to_string(id));
  return overheads_[static_cast<std::size_t>(id)];
}

double BackendRegistry::max_d1cps() const {
  double m = 0.0;
  for (const auto& n : nodes_) m = std::max(m, n.d1cps);
  return m;
}

int BackendRegistry::max_qubits() const {
  int m = 0;
  for (const auto& n : nodes_) m = std::max(m, n.qubits);
  return m;
}

int BackendRegistry::min_qubits() const {
  int m = std::numeric_limits<int>::max();
  for (const auto& n : nodes_) m = std::min(m, n.qubits);
  return m;
}

BackendRegistry parse_backend_registry(std::istream& in, const std::string& origin) {
  std::vector<QNodeSpec> nodes;
  std::vector<DepthOverhead> overheads;
  std::set<std::string> seen_names;

  std::string line;
  int row = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++row;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header_done) {  // first non-comment line is the header
      header_done = true;
      continue;
    }
    auto fields = split(t, ',');
    if (fields.size() != 7)
      row_error(origin, row, "expected 7 columns, got " + std::to_string(fields.size()));

    QNodeSpec spec;
    spec.id = static_cast<int>(nodes.size());
    spec.name = trim(fields[0]);
    if (spec.name.empty()) row_error(origin, row, "empty backend name");
    if (!seen_names.insert(spec.name).second)
      row_error(origin, row, "duplicate backend name '" + spec.name + "'");
    spec.qubits = static_cast<int>(parse_long(fields[1], origin, row, "qubits"));
    if (spec.qubits < 1) row_error(origin, row, "qubits must be >= 1");
    spec.quantum_volume = static_cast<int>(parse_long(fields[2], origin, row, "qv"));
    if (spec.quantum_volume < 2 ||
        !is_power_of_two(static_cast<std::uint64_t>(spec.quantum_volume)))
      row_error(origin, row, "qv must be a power of two >= 2");
    spec.d1cps = parse_double(fields[3], origin, row, "d1cps");
    if (!(spec.d1cps > 0.0)) row_error(origin, row, "d1cps must be > 0");
    spec.gate_set = parse_gate_list(fields[4]);
    spec.topology = trim(fields[5]);
    DepthOverhead overhead;
    try {
      overhead = parse_overhead(fields[6]);
    } catch (const ParseError& e) {
      row_error(origin, row, e.what());
    }
    if (overhead.num < overhead.den) row_error(origin, row, "overhead must be >= 1.0");

    nodes.push_back(std::move(spec));
    overheads.push_back(overhead);
  }
  if (nodes.empty()) throw ParseError(origin + ": no backend rows");
  return BackendRegistry(std::move(nodes), std::move(overheads));
}

BackendRegistry load_backend_registry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open backends file: " + path);
  return parse_backend_registry(in, path);
}

std::vector<CircuitRecord> parse_circuit_records(std::istream& in, const std::string& origin) {
  std::vector<CircuitRecord> records;
  std::string line;
  int row = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++row;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header_done) {
      header_done = true;
      continue;
    }
    auto fields = split(t, ',');
    if (fields.size() != 5)
      row_error(origin, row, "expected 5 columns, got " + std::to_string(fields.size()));

    CircuitRecord rec;
    rec.app = trim(fields[0]);
    if (rec.app.empty()) row_error(origin, row, "empty app name");
    rec.qubits = static_cast<int>(parse_long(fields[1], origin, row, "qubits"));
    if (rec.qubits < 1) row_error(origin, row, "qubits must be >= 1");
    rec.base_depth = static_cast<int>(parse_long(fields[2], origin, row, "base_depth"));
    if (rec.base_depth < 1) row_error(origin, row, "base_depth must be >= 1");
    rec.gates = parse_gate_list(fields[3]);
    std::string shots = trim(fields[4]);
    rec.default_shots = shots.empty()
                            ? 1024
                            : static_cast<int>(parse_long(shots, origin, row, "shots"));
    if (rec.default_shots < 1) row_error(origin, row, "shots must be >= 1");
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ParseError(origin + ": no circuit rows");
  return records;
}

std::vector<CircuitRecord> load_circuit_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open circuits file: " + path);
  return parse_circuit_records(in, path);
}

int max_record_depth(const std::vector<CircuitRecord>& records) {
  int m = 1;
  for (const auto& r : records) m = std::max(m, r.base_depth);
  return m;
}

EpisodeWorkload generate_episode_workload(const std::vector<CircuitRecord>& records,
                                          std::uint64_t seed, int n, double window) {
  if (records.empty()) throw UsageError("generate_episode_workload: empty record set");
  if (n < 1) throw UsageError("generate_episode_workload: n must be >= 1");
  if (!(window > 0.0)) throw UsageError("generate_episode_workload: window must be > 0");

  Rng rng(derive_seed(seed, SeedStream::EpisodeWorkload));

  struct Draw {
    int record_index;
    double arrival;
  };
  std::vector<Draw> draws;
  draws.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int idx = rng.uniform_int(static_cast<int>(records.size()));
    double arrival = rng.uniform() * window;
    draws.push_back({idx, arrival});
  }
  std::stable_sort(draws.begin(), draws.end(),
                   [](const Draw& a, const Draw& b) { return a.arrival < b.arrival; });

  EpisodeWorkload w;
  w.window = window;
  w.seed = seed;
  w.tasks.reserve(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const CircuitRecord& rec = records[static_cast<std::size_t>(draws[i].record_index)];
    QTask task;
    task.id = static_cast<int>(i);
    task.app = rec.app;
    task.qubits = rec.qubits;
    task.base_depth = rec.base_depth;
    task.gates = rec.gates;
    task.shots = rec.default_shots;
    task.topology = "";
    task.arrival = draws[i].arrival;
    w.tasks.push_back(std::move(task));
  }
  return w;
}

void dump_workload(const EpisodeWorkload& workload, std::ostream& out) {
  nlohmann::json header;
  header["kind"] = "workload";
  header["format_version"] = 1;
  header["count"] = workload.tasks.size();
  header["window"] = workload.window;
  header["seed"] = workload.seed;
  out << header.dump() << "\n";
  for (const auto& t : workload.tasks) {
    nlohmann::json j;
    j["id"] = t.id;
    j["app"] = t.app;
    j["qubits"] = t.qubits;
    j["base_depth"] = t.base_depth;
    j["gates"] = t.gates;
    j["shots"] = t.shots;
    j["topology"] = t.topology;
    j["arrival"] = t.arrival;
    out << j.dump() << "\n";
  }
}

void dump_workload_file(const EpisodeWorkload& workload, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  dump_workload(workload, out);
  if (!out) throw ParseError("write failed: " + path);
}

EpisodeWorkload load_workload(std::istream& in, const std::string& origin) {
  EpisodeWorkload w;
  std::string line;
  int row = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(origin + ":" + std::to_string(row) + ": " + e.what());
    }
    if (!header_done) {
      if (j.value("kind", "") != "workload")
        throw ParseError(origin + ": first line must be a workload header");
      w.window = j.at("window").get<double>();
      w.seed = j.at("seed").get<std::uint64_t>();
      header_done = true;
      continue;
    }
    QTask t;
    t.id = j.at("id").get<int>();
    t.app = j.at("app").get<std::string>();
    t.qubits = j.at("qubits").get<int>();
    t.base_depth = j.at("base_depth").get<int>();
    t.gates = j.at("gates").get<std::set<std::string>>();
    t.shots = j.at("shots").get<int>();
    t.topology = j.at("topology").get<std::string>();
    t.arrival = j.at("arrival").get<double>();
    w.tasks.push_back(std::move(t));
  }
  if (!header_done) throw ParseError(origin + ": empty workload file");
  return w;
}

EpisodeWorkload load_workload_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open workload file: " + path);
  return load_workload(in, path);
}

}  // namespace qsched
