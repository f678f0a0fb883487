#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dp2g/baselines.hpp"
#include "dp2g/graph.hpp"
#include "dp2g/objectives.hpp"
#include "dp2g/solver.hpp"

namespace dp2g {

// One experiment: a problem, one or more topologies, and a list of
// algorithms sharing the same data. Parsed from a JSON file with strict key
// checking; defaults follow the benchmark protocol.
struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec problem;
  std::vector<TopologySpec> topologies;
  std::vector<std::string> algorithms = {"dp2g"};

  Schedules schedules;
  StoppingMode stopping = StoppingMode::Hybrid;
  double sigma_fraction = 0.9;
  int inner_cap = 2000;
  long round_cap = 5000;

  double comm_sigma = 0.0;
  uint64_t master_seed = 12345;
  int repeats = 1;

  std::string output_dir = "out";
  bool plots = false;
  std::vector<std::string> require_converged = {"dp2g"};
  // Baseline stopping targets; filled from the dp2g run when absent, scaled
  // by target_fraction.
  std::optional<double> target_consensus;
  std::optional<double> target_optimality;
  double target_fraction = 1.0;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
std::string serialize_config(const ExperimentConfig& cfg);

// Built-in benchmark suites: "table1" (ridge), "table2" (logistic),
// "elastic_net".
ExperimentConfig builtin_suite(const std::string& name);

std::string topology_label(const TopologySpec& t);

}  // namespace dp2g
