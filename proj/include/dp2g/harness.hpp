#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "dp2g/config.hpp"
#include "dp2g/diagnostics.hpp"

namespace dp2g {

// message <- message + N(0, comm_sigma^2 I); comm_sigma = 0 is the identity.
void inject_noise(Eigen::VectorXd& message, double comm_sigma, std::mt19937_64& rng);

// Stateful corruptor sharing one seeded stream across all messages of a run;
// returns an empty function when comm_sigma == 0.
MessageCorruptor make_corruptor(double comm_sigma, uint64_t seed);

struct RunRecord {
  std::string experiment;
  std::string algorithm;
  std::string topology;
  int repeat = 0;
  uint64_t data_seed = 0;
  std::string fingerprint;
  std::vector<MetricsSample> metrics;
  bool converged = false;
  long rounds = 0;
  long max_consensus_rounds = 0;
  double wall_time_s = 0;
  Stacked final_x;
  Eigen::VectorXd x_avg;
  double final_consensus = 0;
  double final_optimality = 0;
};

struct SupportReport {
  double precision = 0;
  double recall = 0;
  double l2_error = 0;
  std::vector<int> recovered;
};

// Recovered support = {j : |x_j| > threshold}; precision convention 1 on an
// empty recovered set.
SupportReport support_recovery_report(const Eigen::VectorXd& x_final, const GroundTruth& truth,
                                      double threshold = 1e-4);

// Executes every (topology, algorithm, repeat) cell of the experiment:
// deterministic seed expansion, shared data per repeat, dp2g first so its
// final accuracy defines the baseline stopping targets. Does not write
// files.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

// One metrics CSV per run plus one summary CSV; values printed with 17
// significant digits so re-parsing reproduces the doubles exactly.
void emit_csv(const std::vector<RunRecord>& records, const std::string& dir);

// Log-scale SVG convergence figures (one per metric, one curve per
// algorithm) plus plain-text data files; elastic-net runs additionally get a
// support-recovery figure when `truth` is supplied. Rendering problems
// degrade to the data files with a warning on stderr.
void emit_plots(const std::vector<RunRecord>& records, const std::string& dir,
                const GroundTruth* truth = nullptr);

// Persists record metadata (summary + final averaged iterate) as JSON.
void save_records(const std::vector<RunRecord>& records, const std::string& dir);

// Reads summary.csv files under `dir` and renders a per-cell round-count
// table with mean/min/max over repeats.
std::string report_from_dir(const std::string& dir);

}  // namespace dp2g
