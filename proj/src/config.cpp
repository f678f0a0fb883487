#include "dp2g/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dp2g {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& origin, const std::string& what) {
  throw std::runtime_error("config " + origin + ": " + what);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& origin,
                const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      parse_fail(origin, "unknown key \"" + it.key() + "\" in " + section);
  }
}

TopologySpec topology_from_json(const json& j, const std::string& origin) {
  check_keys(j, {"kind", "n", "rows", "cols", "radius", "seed"}, origin, "topology");
  TopologySpec t;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "ring") t.kind = TopologySpec::Kind::Ring;
  else if (kind == "grid") t.kind = TopologySpec::Kind::Grid;
  else if (kind == "random_geometric") t.kind = TopologySpec::Kind::RandomGeometric;
  else parse_fail(origin, "unknown topology kind \"" + kind + "\"");
  t.n = j.value("n", 20);
  t.rows = j.value("rows", 0);
  t.cols = j.value("cols", 0);
  t.radius = j.value("radius", 0.35);
  t.seed = j.value("seed", uint64_t{0});
  if (t.kind == TopologySpec::Kind::Grid) {
    if (t.rows <= 0 || t.cols <= 0) parse_fail(origin, "grid topology needs rows and cols");
    t.n = t.rows * t.cols;
  }
  return t;
}

json topology_to_json(const TopologySpec& t) {
  json j;
  switch (t.kind) {
    case TopologySpec::Kind::Ring: j["kind"] = "ring"; break;
    case TopologySpec::Kind::Grid: j["kind"] = "grid"; break;
    case TopologySpec::Kind::RandomGeometric: j["kind"] = "random_geometric"; break;
  }
  j["n"] = t.n;
  if (t.kind == TopologySpec::Kind::Grid) {
    j["rows"] = t.rows;
    j["cols"] = t.cols;
  }
  if (t.kind == TopologySpec::Kind::RandomGeometric) {
    j["radius"] = t.radius;
    j["seed"] = t.seed;
  }
  return j;
}

}  // namespace

std::string topology_label(const TopologySpec& t) {
  switch (t.kind) {
    case TopologySpec::Kind::Ring: return "ring";
    case TopologySpec::Kind::Grid: return "grid";
    case TopologySpec::Kind::RandomGeometric: return "rg";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (algorithms.empty()) throw std::runtime_error("config: at least one algorithm required");
  if (topologies.empty()) throw std::runtime_error("config: at least one topology required");
  if (round_cap <= 0) throw std::runtime_error("config: round_cap must be positive");
  if (inner_cap <= 0) throw std::runtime_error("config: inner_cap must be positive");
  if (comm_sigma < 0) throw std::runtime_error("config: comm_sigma must be nonnegative");
  if (repeats < 1) throw std::runtime_error("config: repeats must be >= 1");
  schedules.validate();
  for (const auto& a : algorithms) {
    if (a != "dp2g") baseline_from_string(a);  // throws on unknown names
  }
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    parse_fail(origin, e.what());
  }

  check_keys(j,
             {"name", "problem", "topologies", "algorithms", "schedules", "stationarity",
              "termination", "stopping_mode", "sigma_fraction", "noise", "seeds", "output_dir",
              "plots", "require_converged", "baseline_targets"},
             origin, "top level");

  ExperimentConfig cfg;
  cfg.name = j.value("name", cfg.name);

  if (j.contains("problem")) {
    const json& p = j["problem"];
    check_keys(p,
               {"kind", "agents", "samples_per_agent", "dimension", "lambda", "lambda1", "lambda2",
                "sparsity", "noise_sigma", "label_noise", "xtrue_scale"},
               origin, "problem");
    cfg.problem.kind = problem_kind_from_string(p.value("kind", std::string("ridge")));
    cfg.problem.agents = p.value("agents", cfg.problem.agents);
    cfg.problem.samples_per_agent = p.value("samples_per_agent", cfg.problem.samples_per_agent);
    cfg.problem.dim = p.value("dimension", cfg.problem.dim);
    cfg.problem.lambda = p.value("lambda", cfg.problem.lambda);
    cfg.problem.lambda1 = p.value("lambda1", cfg.problem.lambda1);
    cfg.problem.lambda2 = p.value("lambda2", cfg.problem.lambda2);
    cfg.problem.sparsity = p.value("sparsity", cfg.problem.sparsity);
    cfg.problem.noise_sigma = p.value("noise_sigma", cfg.problem.noise_sigma);
    cfg.problem.label_noise = p.value("label_noise", cfg.problem.label_noise);
    cfg.problem.xtrue_scale = p.value("xtrue_scale", cfg.problem.xtrue_scale);
  }

  if (j.contains("topologies")) {
    for (const auto& t : j["topologies"]) cfg.topologies.push_back(topology_from_json(t, origin));
  } else {
    TopologySpec t;
    t.kind = TopologySpec::Kind::Ring;
    t.n = cfg.problem.agents;
    cfg.topologies.push_back(t);
  }

  if (j.contains("algorithms")) cfg.algorithms = j["algorithms"].get<std::vector<std::string>>();

  if (j.contains("schedules")) {
    const json& s = j["schedules"];
    check_keys(s, {"rho0", "beta", "rho_max", "eps0", "delta0"}, origin, "schedules");
    cfg.schedules.rho0 = s.value("rho0", cfg.schedules.rho0);
    cfg.schedules.beta = s.value("beta", cfg.schedules.beta);
    cfg.schedules.rho_max = s.value("rho_max", cfg.schedules.rho_max);
    cfg.schedules.eps0 = s.value("eps0", cfg.schedules.eps0);
    cfg.schedules.delta0 = s.value("delta0", cfg.schedules.delta0);
  }
  if (j.contains("stationarity")) {
    const json& s = j["stationarity"];
    check_keys(s, {"eps_abs", "eps_rel", "beta_pen", "quorum", "worst_slack"}, origin,
               "stationarity");
    auto& h = cfg.schedules.hybrid;
    h.eps_abs = s.value("eps_abs", h.eps_abs);
    h.eps_rel = s.value("eps_rel", h.eps_rel);
    h.beta_pen = s.value("beta_pen", h.beta_pen);
    h.quorum = s.value("quorum", h.quorum);
    h.worst_slack = s.value("worst_slack", h.worst_slack);
  }
  if (j.contains("termination")) {
    const json& t = j["termination"];
    check_keys(t, {"stabilization_tol", "round_cap", "inner_cap"}, origin, "termination");
    cfg.schedules.stabilization_tol = t.value("stabilization_tol", cfg.schedules.stabilization_tol);
    cfg.round_cap = t.value("round_cap", cfg.round_cap);
    cfg.inner_cap = t.value("inner_cap", cfg.inner_cap);
  }
  if (j.contains("stopping_mode")) {
    std::string m = j["stopping_mode"].get<std::string>();
    if (m == "strict") cfg.stopping = StoppingMode::Strict;
    else if (m == "hybrid") cfg.stopping = StoppingMode::Hybrid;
    else parse_fail(origin, "stopping_mode must be \"strict\" or \"hybrid\"");
  }
  cfg.sigma_fraction = j.value("sigma_fraction", cfg.sigma_fraction);
  if (j.contains("noise")) {
    const json& noise = j["noise"];
    check_keys(noise, {"comm_sigma"}, origin, "noise");
    cfg.comm_sigma = noise.value("comm_sigma", 0.0);
  }
  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    check_keys(s, {"master", "repeats"}, origin, "seeds");
    cfg.master_seed = s.value("master", cfg.master_seed);
    cfg.repeats = s.value("repeats", cfg.repeats);
  }
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.plots = j.value("plots", cfg.plots);
  if (j.contains("require_converged"))
    cfg.require_converged = j["require_converged"].get<std::vector<std::string>>();
  if (j.contains("baseline_targets")) {
    const json& t = j["baseline_targets"];
    check_keys(t, {"consensus", "optimality", "fraction"}, origin, "baseline_targets");
    if (t.contains("consensus")) cfg.target_consensus = t["consensus"].get<double>();
    if (t.contains("optimality")) cfg.target_optimality = t["optimality"].get<double>();
    cfg.target_fraction = t.value("fraction", cfg.target_fraction);
  }

  try {
    cfg.validate();
  } catch (const std::exception& e) {
    parse_fail(origin, e.what());
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["problem"] = {{"kind", to_string(cfg.problem.kind)},
                  {"agents", cfg.problem.agents},
                  {"samples_per_agent", cfg.problem.samples_per_agent},
                  {"dimension", cfg.problem.dim},
                  {"lambda", cfg.problem.lambda},
                  {"lambda1", cfg.problem.lambda1},
                  {"lambda2", cfg.problem.lambda2},
                  {"sparsity", cfg.problem.sparsity},
                  {"noise_sigma", cfg.problem.noise_sigma},
                  {"label_noise", cfg.problem.label_noise},
                  {"xtrue_scale", cfg.problem.xtrue_scale}};
  j["topologies"] = json::array();
  for (const auto& t : cfg.topologies) j["topologies"].push_back(topology_to_json(t));
  j["algorithms"] = cfg.algorithms;
  j["schedules"] = {{"rho0", cfg.schedules.rho0},
                    {"beta", cfg.schedules.beta},
                    {"rho_max", cfg.schedules.rho_max},
                    {"eps0", cfg.schedules.eps0},
                    {"delta0", cfg.schedules.delta0}};
  j["stationarity"] = {{"eps_abs", cfg.schedules.hybrid.eps_abs},
                       {"eps_rel", cfg.schedules.hybrid.eps_rel},
                       {"beta_pen", cfg.schedules.hybrid.beta_pen},
                       {"quorum", cfg.schedules.hybrid.quorum},
                       {"worst_slack", cfg.schedules.hybrid.worst_slack}};
  j["termination"] = {{"stabilization_tol", cfg.schedules.stabilization_tol},
                      {"round_cap", cfg.round_cap},
                      {"inner_cap", cfg.inner_cap}};
  j["stopping_mode"] = cfg.stopping == StoppingMode::Strict ? "strict" : "hybrid";
  j["sigma_fraction"] = cfg.sigma_fraction;
  j["noise"] = {{"comm_sigma", cfg.comm_sigma}};
  j["seeds"] = {{"master", cfg.master_seed}, {"repeats", cfg.repeats}};
  j["output_dir"] = cfg.output_dir;
  j["plots"] = cfg.plots;
  j["require_converged"] = cfg.require_converged;
  {
    json t;
    if (cfg.target_consensus) t["consensus"] = *cfg.target_consensus;
    if (cfg.target_optimality) t["optimality"] = *cfg.target_optimality;
    t["fraction"] = cfg.target_fraction;
    j["baseline_targets"] = t;
  }
  return j.dump(2);
}

ExperimentConfig builtin_suite(const std::string& name) {
  ExperimentConfig cfg;
  cfg.problem.agents = 20;
  cfg.problem.samples_per_agent = 500;
  cfg.problem.dim = 50;

  TopologySpec ring{TopologySpec::Kind::Ring, 20, 0, 0, 0.0, 0};
  TopologySpec grid{TopologySpec::Kind::Grid, 20, 4, 5, 0.0, 0};
  TopologySpec rg{TopologySpec::Kind::RandomGeometric, 20, 0, 0, 0.35, 0};
  cfg.topologies = {ring, grid, rg};
  cfg.algorithms = {"dp2g", "extra", "nids", "dgd_fixed", "dgd_diminishing"};

  if (name == "table1") {
    cfg.name = "table1_ridge";
    cfg.problem.kind = ProblemKind::Ridge;
    cfg.problem.lambda = 1e-2;
    // Benchmark stationarity constants for the strongly convex smooth case;
    // see the README's parameter notes.
    cfg.schedules.hybrid.eps_rel = 0.0;
    cfg.schedules.stabilization_tol = 2.5e-6;
    cfg.target_fraction = 0.4;
  } else if (name == "table2") {
    cfg.name = "table2_logistic";
    cfg.problem.kind = ProblemKind::Logistic;
    cfg.problem.xtrue_scale = 1.0 / std::sqrt(50.0);
    cfg.schedules.stabilization_tol = 1e-3;
    cfg.target_fraction = 0.08;
  } else if (name == "elastic_net") {
    cfg.name = "elastic_net";
    cfg.problem.kind = ProblemKind::ElasticNet;
    cfg.problem.lambda1 = 5e-3;
    cfg.problem.lambda2 = 1e-2;
    cfg.problem.sparsity = 15;
    cfg.topologies = {rg};
    cfg.algorithms = {"dp2g"};
    cfg.sigma_fraction = 0.8;
    cfg.problem.noise_sigma = 0.01;
    cfg.schedules.hybrid.eps_abs = 1e-5;
    cfg.schedules.hybrid.eps_rel = 0.0;
    cfg.schedules.stabilization_tol = 1e-5;
  } else {
    throw std::invalid_argument("unknown suite \"" + name + "\" (table1, table2, elastic_net)");
  }
  return cfg;
}

}  // namespace dp2g
