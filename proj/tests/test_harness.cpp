#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dp2g/harness.hpp"

using namespace dp2g;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Tiny, fast experiment used by the pipeline tests.
ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.name = "tiny";
  cfg.problem.kind = ProblemKind::Ridge;
  cfg.problem.agents = 5;
  cfg.problem.samples_per_agent = 30;
  cfg.problem.dim = 4;
  TopologySpec ring;
  ring.kind = TopologySpec::Kind::Ring;
  ring.n = 5;
  cfg.topologies = {ring};
  cfg.algorithms = {"dp2g", "extra"};
  cfg.schedules.hybrid.eps_rel = 0.0;
  cfg.schedules.stabilization_tol = 1e-5;
  cfg.round_cap = 1500;
  cfg.master_seed = 71;
  return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("minimal config fills defaults") {
    ExperimentConfig cfg = parse_config_text(R"({
      "problem": {"kind": "ridge"},
      "topologies": [{"kind": "ring", "n": 20}],
      "algorithms": ["dp2g"]
    })");
    CHECK(cfg.problem.agents == 20);
    CHECK(cfg.problem.samples_per_agent == 500);
    CHECK(cfg.problem.dim == 50);
    CHECK(cfg.schedules.rho0 == doctest::Approx(1e-2));
    CHECK(cfg.schedules.beta == doctest::Approx(1.2));
    CHECK(cfg.schedules.rho_max == doctest::Approx(1e2));
    CHECK(cfg.schedules.hybrid.eps_abs == doctest::Approx(1e-4));
    CHECK(cfg.schedules.hybrid.eps_rel == doctest::Approx(0.02));
    CHECK(cfg.round_cap == 5000);
    CHECK(cfg.stopping == StoppingMode::Hybrid);
  }
  SUBCASE("invariant violations are rejected") {
    CHECK_THROWS_WITH_AS(parse_config_text(R"({"noise": {"comm_sigma": -1.0}})"),
                         doctest::Contains("comm_sigma"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config_text(R"({"algorithms": []})"),
                         doctest::Contains("algorithm"), std::runtime_error);
  }
  SUBCASE("unknown keys fail with their path") {
    CHECK_THROWS_WITH_AS(parse_config_text(R"({"problem": {"kid": "ridge"}})"),
                         doctest::Contains("kid"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config_text(R"({"rho_zero": 1})"),
                         doctest::Contains("rho_zero"), std::runtime_error);
  }
  SUBCASE("serialize/parse round trip is exact") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.comm_sigma = 1e-3;
    cfg.target_consensus = 0.25;
    cfg.target_optimality = 0.125;
    std::string text = serialize_config(cfg);
    ExperimentConfig back = parse_config_text(text);
    CHECK(serialize_config(back) == text);
  }
  SUBCASE("builtin suites are valid") {
    for (const char* s : {"table1", "table2", "elastic_net"}) {
      ExperimentConfig cfg = builtin_suite(s);
      CHECK_NOTHROW(cfg.validate());
    }
    CHECK_THROWS(builtin_suite("table9"));
  }
}

TEST_CASE("noise injection") {
  std::mt19937_64 rng(5);
  Eigen::VectorXd msg = Eigen::VectorXd::Ones(4);
  Eigen::VectorXd before = msg;
  inject_noise(msg, 0.0, rng);
  CHECK(msg == before);

  // Empirical variance over 1e5 draws within 5%.
  std::mt19937_64 rng2(9);
  double sum = 0, sumsq = 0;
  const int draws = 100000;
  Eigen::VectorXd z(1);
  for (int i = 0; i < draws; ++i) {
    z(0) = 0.0;
    inject_noise(z, 1.0, rng2);
    sum += z(0);
    sumsq += z(0) * z(0);
  }
  double var = sumsq / draws - (sum / draws) * (sum / draws);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));

  // Deterministic under a fixed stream.
  auto c1 = make_corruptor(0.5, 1234);
  auto c2 = make_corruptor(0.5, 1234);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(8), b = Eigen::VectorXd::Zero(8);
  c1(a);
  c2(b);
  CHECK(a == b);
  CHECK(!make_corruptor(0.0, 1));
}

TEST_CASE("support recovery report") {
  GroundTruth truth;
  truth.x_true = Eigen::VectorXd::Zero(6);
  truth.x_true(1) = 1.0;
  truth.x_true(4) = -2.0;
  truth.support = {1, 4};

  SUBCASE("exact recovery") {
    SupportReport r = support_recovery_report(truth.x_true, truth);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.l2_error == 0.0);
  }
  SUBCASE("zero estimate: empty support convention") {
    SupportReport r = support_recovery_report(Eigen::VectorXd::Zero(6), truth);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 0.0);
  }
  SUBCASE("spurious coordinate lowers precision") {
    Eigen::VectorXd x = truth.x_true;
    x(0) = 0.3;
    SupportReport r = support_recovery_report(x, truth);
    CHECK(r.precision == doctest::Approx(2.0 / 3));
    CHECK(r.recall == 1.0);
  }
}

TEST_CASE("experiment pipeline") {
  ExperimentConfig cfg = tiny_experiment();
  auto records = run_experiment(cfg);
  REQUIRE(records.size() == 2);
  CHECK(records[0].algorithm == "dp2g");  // dp2g ordered first for targets
  CHECK(records[1].algorithm == "extra");
  for (const auto& r : records) {
    REQUIRE(!r.metrics.empty());
    long prev = -1;
    for (const auto& m : r.metrics) {
      CHECK(m.round > prev);
      prev = m.round;
      CHECK(m.objective_residual >= 0);
      CHECK(m.consensus_violation >= 0);
      CHECK(m.optimality_residual >= 0);
      CHECK(m.penalty >= 0);
    }
  }

  SUBCASE("determinism: identical seeds give identical records") {
    auto again = run_experiment(cfg);
    REQUIRE(again.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
      CHECK(again[i].rounds == records[i].rounds);
      CHECK(again[i].final_x.blocks == records[i].final_x.blocks);
    }
  }

  SUBCASE("csv emission and round trip at 17 digits") {
    fs::path dir = fs::temp_directory_path() / "dp2g_csv_test";
    fs::remove_all(dir);
    emit_csv(records, dir.string());
    fs::path metrics = dir / "tiny_dp2g_ring_rep0_metrics.csv";
    REQUIRE(fs::exists(metrics));
    std::ifstream in(metrics);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "round,objective_residual,consensus_violation,optimality_residual,penalty,rho,"
          "stationarity_bound");
    std::string line;
    size_t row = 0;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ls, field, ',')) fields.push_back(field);
      REQUIRE(fields.size() == 7);
      const MetricsSample& m = records[0].metrics.at(row);
      CHECK(std::stod(fields[1]) == m.objective_residual);
      CHECK(std::stod(fields[2]) == m.consensus_violation);
      CHECK(std::stod(fields[6]) == m.stationarity_bound);
      ++row;
    }
    CHECK(row == records[0].metrics.size());

    // Summary exists with one line per run.
    std::ifstream sum(dir / "tiny_summary.csv");
    std::string sheader;
    std::getline(sum, sheader);
    CHECK(sheader == "algorithm,topology,seed,rounds,converged,max_consensus_rounds");
    int lines = 0;
    while (std::getline(sum, line)) ++lines;
    CHECK(lines == 2);
    fs::remove_all(dir);
  }

  SUBCASE("empty record list still writes the summary header") {
    fs::path dir = fs::temp_directory_path() / "dp2g_csv_empty";
    fs::remove_all(dir);
    emit_csv({}, dir.string());
    std::string content = slurp(dir / "experiment_summary.csv");
    CHECK(content == "algorithm,topology,seed,rounds,converged,max_consensus_rounds\n");
    fs::remove_all(dir);
  }

  SUBCASE("golden pipeline determinism at the byte level") {
    fs::path d1 = fs::temp_directory_path() / "dp2g_golden1";
    fs::path d2 = fs::temp_directory_path() / "dp2g_golden2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    emit_csv(run_experiment(cfg), d1.string());
    emit_csv(run_experiment(cfg), d2.string());
    for (const auto& entry : fs::directory_iterator(d1)) {
      CHECK(slurp(entry.path()) == slurp(d2 / entry.path().filename()));
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
  }
}

TEST_CASE("plots degrade gracefully and write data files") {
  ExperimentConfig cfg = tiny_experiment();
  cfg.algorithms = {"dp2g"};
  auto records = run_experiment(cfg);
  fs::path dir = fs::temp_directory_path() / "dp2g_plots";
  fs::remove_all(dir);
  emit_plots(records, dir.string());
  CHECK(fs::exists(dir / "tiny_ring_rep0_objective_residual.svg"));
  CHECK(fs::exists(dir / "tiny_dp2g_ring_rep0_objective_residual.dat"));
  CHECK(fs::exists(dir / "tiny_ring_rep0_consensus_violation.svg"));
  fs::remove_all(dir);
}

TEST_CASE("baselines without targets are rejected") {
  ExperimentConfig cfg = tiny_experiment();
  cfg.algorithms = {"extra"};
  CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("targets"), std::runtime_error);
  cfg.target_consensus = 1e-2;
  cfg.target_optimality = 1e-2;
  CHECK_NOTHROW(run_experiment(cfg));
}

TEST_CASE("repeats produce one record per (algorithm, repeat)") {
  ExperimentConfig cfg = tiny_experiment();
  cfg.algorithms = {"dp2g"};
  cfg.repeats = 3;
  cfg.round_cap = 800;
  auto records = run_experiment(cfg);
  CHECK(records.size() == 3);
  // Different repeats draw different data.
  CHECK(records[0].data_seed != records[1].data_seed);
}
