#include "dp2g/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dp2g/rng.hpp"

namespace dp2g {

namespace fs = std::filesystem;
using nlohmann::json;

void inject_noise(Eigen::VectorXd& message, double comm_sigma, std::mt19937_64& rng) {
  if (comm_sigma < 0) throw std::invalid_argument("inject_noise: comm_sigma must be nonnegative");
  if (comm_sigma == 0) return;
  std::normal_distribution<double> normal(0.0, comm_sigma);
  for (int j = 0; j < message.size(); ++j) message(j) += normal(rng);
}

MessageCorruptor make_corruptor(double comm_sigma, uint64_t seed) {
  if (comm_sigma == 0) return {};
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [comm_sigma, rng](Eigen::VectorXd& msg) { inject_noise(msg, comm_sigma, *rng); };
}

SupportReport support_recovery_report(const Eigen::VectorXd& x_final, const GroundTruth& truth,
                                      double threshold) {
  SupportReport rep;
  for (int j = 0; j < x_final.size(); ++j)
    if (std::abs(x_final(j)) > threshold) rep.recovered.push_back(j);
  std::vector<int> truth_support = truth.support;
  std::sort(truth_support.begin(), truth_support.end());
  int hits = 0;
  for (int j : rep.recovered)
    if (std::binary_search(truth_support.begin(), truth_support.end(), j)) ++hits;
  rep.precision = rep.recovered.empty() ? 1.0 : double(hits) / rep.recovered.size();
  rep.recall = truth_support.empty() ? 1.0 : double(hits) / truth_support.size();
  rep.l2_error = (x_final - truth.x_true).norm();
  return rep;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string run_stem(const RunRecord& r) {
  std::ostringstream os;
  os << r.experiment << "_" << r.algorithm << "_" << r.topology << "_rep" << r.repeat;
  return os.str();
}

std::pair<double, double> final_metrics(const Problem& p, const Stacked& x) {
  Eigen::VectorXd x_avg = x.average();
  double cons = 0;
  for (int i = 0; i < x.agents(); ++i) cons += (x.block(i) - x_avg).norm();
  cons /= x.agents();
  Eigen::VectorXd gsum = Eigen::VectorXd::Zero(p.dim);
  for (int i = 0; i < p.agents(); ++i) gsum += smooth_gradient(p, i, x_avg);
  double opt = composite_gradient_norm(x_avg, gsum,
                                       p.kind == ProblemKind::ElasticNet ? p.agents() * p.lambda1 : 0.0);
  return {cons, opt};
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunRecord> records;
  const std::string cfg_json = serialize_config(cfg);

  // dp2g runs first within each cell so its final accuracy can set the
  // baseline stopping targets.
  std::vector<std::string> algos = cfg.algorithms;
  std::stable_sort(algos.begin(), algos.end(), [](const std::string& a, const std::string& b) {
    return (a == "dp2g") > (b == "dp2g");
  });

  for (int rep = 0; rep < cfg.repeats; ++rep) {
    DatasetSpec dspec = cfg.problem;
    dspec.seed = derive_seed(cfg.master_seed, "data", rep);
    auto [problem, truth] = generate_dataset(dspec);
    OracleResult oracle = centralized_oracle(problem);

    for (const auto& tspec_base : cfg.topologies) {
      TopologySpec tspec = tspec_base;
      if (tspec.kind == TopologySpec::Kind::RandomGeometric && tspec.seed == 0)
        tspec.seed = derive_seed(cfg.master_seed, "topology", rep);
      MixingMatrix w = metropolis_weights(build_topology(tspec));
      const std::string topo = topology_label(tspec);

      double target_cons = cfg.target_consensus.value_or(0.0);
      double target_opt = cfg.target_optimality.value_or(0.0);
      bool have_targets = cfg.target_consensus && cfg.target_optimality;

      for (const auto& algo : algos) {
        RunRecord rec;
        rec.experiment = cfg.name;
        rec.algorithm = algo;
        rec.topology = topo;
        rec.repeat = rep;
        rec.data_seed = dspec.seed;
        rec.fingerprint = std::to_string(
            splitmix64(fnv1a(cfg_json) ^ fnv1a(algo) ^ fnv1a(topo) ^ uint64_t(rep)));
        MessageCorruptor corrupt =
            make_corruptor(cfg.comm_sigma, derive_seed(cfg.master_seed, "noise/" + algo + "/" + topo, rep));

        auto t0 = std::chrono::steady_clock::now();
        if (algo == "dp2g") {
          SolverOptions opts;
          opts.sigma_fraction = cfg.sigma_fraction;
          opts.schedules = cfg.schedules;
          opts.stopping = cfg.stopping;
          opts.inner_cap = cfg.inner_cap;
          opts.round_cap = cfg.round_cap;
          opts.corrupt = corrupt;
          auto observer = [&](const InnerEvent& ev) {
            Stacked x = primal_stack(ev.states);
            Stacked y = dual_stack(ev.states);
            rec.metrics.push_back(compute_metrics(x, y, problem, w, oracle, ev.round, ev.rho));
          };
          SolveSummary sum = run(problem, w, opts, observer);
          rec.converged = sum.converged;
          rec.rounds = sum.rounds;
          rec.max_consensus_rounds = sum.max_consensus_rounds;
          rec.final_x = sum.x;
          rec.x_avg = sum.x_avg;
          auto [fc, fo] = final_metrics(problem, sum.x);
          rec.final_consensus = fc;
          rec.final_optimality = fo;
          if (!have_targets) {
            target_cons = cfg.target_fraction * fc;
            target_opt = cfg.target_fraction * fo;
            have_targets = true;
          }
        } else {
          if (!have_targets)
            throw std::runtime_error(
                "run_experiment: baseline \"" + algo +
                "\" needs stopping targets; run dp2g in the same experiment or set baseline_targets");
          BaselineConfig bcfg;
          bcfg.algorithm = baseline_from_string(algo);
          bcfg.round_cap = cfg.round_cap;
          bcfg.target_consensus = target_cons;
          bcfg.target_optimality = target_opt;
          bcfg.corrupt = corrupt;
          auto observer = [&](const BaselineRoundEvent& ev) {
            Stacked y_zero(problem.dim, problem.agents());
            rec.metrics.push_back(compute_metrics(ev.x, y_zero, problem, w, oracle, ev.round, 0.0));
          };
          BaselineSummary sum = run_baseline(bcfg, problem, w, observer);
          rec.converged = sum.converged;
          rec.rounds = sum.rounds;
          rec.final_x = sum.x;
          rec.x_avg = sum.x_avg;
          auto [fc, fo] = final_metrics(problem, sum.x);
          rec.final_consensus = fc;
          rec.final_optimality = fo;
        }
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

void emit_csv(const std::vector<RunRecord>& records, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& r : records) {
    fs::path path = fs::path(dir) / (run_stem(r) + "_metrics.csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_csv: cannot write " + path.string());
    out << "round,objective_residual,consensus_violation,optimality_residual,penalty,rho,"
           "stationarity_bound\n";
    for (const auto& m : r.metrics) {
      out << m.round << ',' << fmt17(m.objective_residual) << ',' << fmt17(m.consensus_violation)
          << ',' << fmt17(m.optimality_residual) << ',' << fmt17(m.penalty) << ',' << fmt17(m.rho)
          << ',' << fmt17(m.stationarity_bound) << '\n';
    }
  }
  std::string experiment = records.empty() ? "experiment" : records.front().experiment;
  fs::path spath = fs::path(dir) / (experiment + "_summary.csv");
  std::ofstream out(spath);
  if (!out) throw std::runtime_error("emit_csv: cannot write " + spath.string());
  out << "algorithm,topology,seed,rounds,converged,max_consensus_rounds\n";
  for (const auto& r : records) {
    out << r.algorithm << ',' << r.topology << ',' << r.data_seed << ',' << r.rounds << ','
        << (r.converged ? 1 : 0) << ',' << r.max_consensus_rounds << '\n';
  }
}

void save_records(const std::vector<RunRecord>& records, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& r : records) {
    json j;
    j["experiment"] = r.experiment;
    j["algorithm"] = r.algorithm;
    j["topology"] = r.topology;
    j["repeat"] = r.repeat;
    j["data_seed"] = r.data_seed;
    j["fingerprint"] = r.fingerprint;
    j["converged"] = r.converged;
    j["rounds"] = r.rounds;
    j["max_consensus_rounds"] = r.max_consensus_rounds;
    j["wall_time_s"] = r.wall_time_s;
    j["final_consensus"] = r.final_consensus;
    j["final_optimality"] = r.final_optimality;
    std::vector<double> xa(r.x_avg.data(), r.x_avg.data() + r.x_avg.size());
    j["x_avg"] = xa;
    std::ofstream out(fs::path(dir) / (run_stem(r) + "_record.json"));
    out << j.dump(2) << "\n";
  }
}

namespace {

// Minimal log-y SVG line plot; enough for convergence figures without a
// rendering dependency.
struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> pts;  // (round, value)
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

void write_svg_logplot(const fs::path& path, const std::string& title,
                       const std::vector<SvgSeries>& series) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.pts) {
      if (y <= 0) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!(xmax > xmin) || !(ymax > ymin)) throw std::runtime_error("empty or degenerate plot data");
  double ly0 = std::log10(ymin), ly1 = std::log10(ymax);
  if (ly1 - ly0 < 1e-9) ly1 = ly0 + 1;

  const double W = 760, H = 480, L = 70, R = 20, T = 36, B = 46;
  auto X = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto Y = [&](double y) { return H - B - (std::log10(y) - ly0) / (ly1 - ly0) * (H - T - B); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
  // Axes + decade gridlines.
  out << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B
      << "' stroke='black'/>\n";
  out << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
      << "' stroke='black'/>\n";
  for (int e = static_cast<int>(std::ceil(ly0)); e <= static_cast<int>(std::floor(ly1)); ++e) {
    double y = Y(std::pow(10.0, e));
    out << "<line x1='" << L << "' y1='" << y << "' x2='" << W - R << "' y2='" << y
        << "' stroke='#dddddd'/>\n";
    out << "<text x='" << L - 6 << "' y='" << y + 4
        << "' text-anchor='end' font-size='11'>1e" << e << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    double x = xmin + i * (xmax - xmin) / 4;
    out << "<text x='" << X(x) << "' y='" << H - B + 18
        << "' text-anchor='middle' font-size='11'>" << static_cast<long>(x) << "</text>\n";
  }
  out << "<text x='" << (L + W - R) / 2 << "' y='" << H - 8
      << "' text-anchor='middle' font-size='12'>communication rounds</text>\n";

  int ci = 0;
  double legend_y = T + 14;
  for (const auto& s : series) {
    const char* color = kPalette[ci % 6];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (auto [x, y] : s.pts)
      if (y > 0) out << X(x) << ',' << Y(y) << ' ';
    out << "'/>\n";
    out << "<text x='" << W - R - 170 << "' y='" << legend_y << "' font-size='12' fill='" << color
        << "'>" << s.label << "</text>\n";
    legend_y += 16;
    ++ci;
  }
  out << "</svg>\n";
}

}  // namespace

void emit_plots(const std::vector<RunRecord>& records, const std::string& dir,
                const GroundTruth* truth) {
  fs::create_directories(dir);

  // Group runs by (experiment, topology, repeat); one figure per metric.
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : records)
    groups[r.experiment + "_" + r.topology + "_rep" + std::to_string(r.repeat)].push_back(&r);

  struct MetricDef {
    const char* name;
    double MetricsSample::*field;
  };
  const MetricDef defs[] = {{"objective_residual", &MetricsSample::objective_residual},
                            {"consensus_violation", &MetricsSample::consensus_violation},
                            {"optimality_residual", &MetricsSample::optimality_residual}};

  for (const auto& [group, runs] : groups) {
    for (const auto& def : defs) {
      std::vector<SvgSeries> series;
      for (const RunRecord* r : runs) {
        SvgSeries s;
        s.label = r->algorithm;
        for (const auto& m : r->metrics) s.pts.emplace_back(double(m.round), m.*def.field);
        series.push_back(std::move(s));
        // Plain data file alongside the figure.
        std::ofstream dat(fs::path(dir) / (run_stem(*r) + "_" + def.name + ".dat"));
        for (const auto& m : r->metrics) dat << m.round << ' ' << fmt17(m.*def.field) << '\n';
      }
      fs::path svg = fs::path(dir) / (group + "_" + def.name + ".svg");
      try {
        write_svg_logplot(svg, group + ": " + def.name, series);
      } catch (const std::exception& e) {
        std::cerr << "plot rendering failed for " << svg.string() << " (" << e.what()
                  << "); data files kept\n";
      }
    }
  }

  if (truth && !truth->support.empty()) {
    for (const auto& r : records) {
      if (r.x_avg.size() == 0) continue;
      fs::path path = fs::path(dir) / (run_stem(r) + "_support.svg");
      std::ofstream out(path);
      const int m = static_cast<int>(r.x_avg.size());
      const double W = 760, H = 300, L = 50, B = 40;
      double vmax = std::max(truth->x_true.cwiseAbs().maxCoeff(), r.x_avg.cwiseAbs().maxCoeff());
      if (vmax <= 0) vmax = 1;
      out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n"
          << "<rect width='100%' height='100%' fill='white'/>\n"
          << "<text x='" << W / 2
          << "' y='16' text-anchor='middle' font-size='14'>recovered vs true support</text>\n";
      double mid = H / 2 + 10;
      out << "<line x1='" << L << "' y1='" << mid << "' x2='" << W - 10 << "' y2='" << mid
          << "' stroke='black'/>\n";
      for (int j = 0; j < m; ++j) {
        double x = L + (W - L - 20) * j / std::max(1, m - 1);
        double ht = (mid - 30 - B) * std::abs(truth->x_true(j)) / vmax;
        double hr = (mid - 30 - B) * std::abs(r.x_avg(j)) / vmax;
        if (truth->x_true(j) != 0)
          out << "<rect x='" << x - 3 << "' y='" << mid - ht << "' width='6' height='" << ht
              << "' fill='#bbbbbb'/>\n";
        if (std::abs(r.x_avg(j)) > 1e-4)
          out << "<rect x='" << x - 1.5 << "' y='" << mid - hr << "' width='3' height='" << hr
              << "' fill='#d62728'/>\n";
      }
      out << "<text x='" << L << "' y='" << H - 8
          << "' font-size='11' fill='#bbbbbb'>true (wide) / recovered (narrow)</text>\n";
      out << "</svg>\n";
    }
  }
}

std::string report_from_dir(const std::string& dir) {
  struct Cell {
    std::vector<long> rounds;
    int converged = 0;
    int total = 0;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename().string().find("_summary.csv") == std::string::npos)
      continue;
    std::ifstream in(entry.path());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string algo, topo, seed, rounds, conv, mc;
      std::getline(ls, algo, ',');
      std::getline(ls, topo, ',');
      std::getline(ls, seed, ',');
      std::getline(ls, rounds, ',');
      std::getline(ls, conv, ',');
      std::getline(ls, mc, ',');
      auto& c = cells[{algo, topo}];
      c.rounds.push_back(std::stol(rounds));
      c.converged += (conv == "1");
      c.total += 1;
    }
  }
  std::ostringstream os;
  os << "communication rounds to reach the stopping tolerance\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-18s %-6s %10s %10s %10s %10s\n", "algorithm", "topo", "mean",
                "min", "max", "conv");
  os << buf;
  for (const auto& [key, c] : cells) {
    double mean = 0;
    long mn = c.rounds.front(), mx = c.rounds.front();
    for (long r : c.rounds) {
      mean += r;
      mn = std::min(mn, r);
      mx = std::max(mx, r);
    }
    mean /= c.rounds.size();
    std::snprintf(buf, sizeof(buf), "%-18s %-6s %10.1f %10ld %10ld %6d/%d%s\n", key.first.c_str(),
                  key.second.c_str(), mean, mn, mx, c.converged, c.total,
                  c.converged < c.total ? "  (cap hit)" : "");
    os << buf;
  }
  return os.str();
}

}  // namespace dp2g
