#include "dp2g/objectives.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dp2g/rng.hpp"

namespace dp2g {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Ridge: return "ridge";
    case ProblemKind::Logistic: return "logistic";
    case ProblemKind::ElasticNet: return "elastic_net";
  }
  return "?";
}

ProblemKind problem_kind_from_string(const std::string& s) {
  if (s == "ridge") return ProblemKind::Ridge;
  if (s == "logistic") return ProblemKind::Logistic;
  if (s == "elastic_net") return ProblemKind::ElasticNet;
  throw std::invalid_argument("unknown problem kind: " + s);
}

namespace {

double spectral_norm_squared(const Eigen::MatrixXd& a) {
  if (a.cols() <= 200) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    double s = svd.singularValues()(0);
    return s * s;
  }
  // Power iteration on A'A to 1e-8 relative.
  Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.cols()).normalized();
  double lambda = 0.0, prev = -1.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = ata * v;
    lambda = v.dot(w);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (std::abs(lambda - prev) <= 1e-8 * std::abs(lambda)) break;
    prev = lambda;
  }
  return lambda;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// log(1 + exp(t)) without overflow
double log1pexp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

void write_doubles(std::ofstream& out, const double* data, size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* data, size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("dataset shard truncated");
}

}  // namespace

std::pair<Problem, GroundTruth> generate_dataset(const DatasetSpec& spec) {
  if (spec.agents < 1 || spec.samples_per_agent < 1 || spec.dim < 1)
    throw std::invalid_argument("generate_dataset: agents, samples and dimension must be >= 1");
  if (spec.kind == ProblemKind::ElasticNet && spec.sparsity > spec.dim)
    throw std::invalid_argument("generate_dataset: sparsity exceeds dimension");
  if (spec.kind == ProblemKind::ElasticNet && (spec.lambda1 <= 0 || spec.lambda2 <= 0))
    throw std::invalid_argument("generate_dataset: elastic net needs lambda1, lambda2 > 0");

  auto rng = make_rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  GroundTruth truth;
  truth.noise_sigma = spec.noise_sigma;
  truth.x_true = Eigen::VectorXd::Zero(spec.dim);
  if (spec.kind == ProblemKind::ElasticNet && spec.sparsity >= 0) {
    // Partial Fisher-Yates picks the support, then values drawn N(0,1).
    std::vector<int> idx(spec.dim);
    for (int i = 0; i < spec.dim; ++i) idx[i] = i;
    for (int i = 0; i < spec.sparsity; ++i) {
      std::uniform_int_distribution<int> pick(i, spec.dim - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    truth.support.assign(idx.begin(), idx.begin() + spec.sparsity);
    std::sort(truth.support.begin(), truth.support.end());
    for (int j : truth.support) truth.x_true(j) = normal(rng);
  } else {
    for (int j = 0; j < spec.dim; ++j) truth.x_true(j) = normal(rng);
  }
  truth.x_true *= spec.xtrue_scale;

  Problem p;
  p.kind = spec.kind;
  p.dim = spec.dim;
  p.lambda = spec.lambda;
  p.lambda1 = spec.lambda1;
  p.lambda2 = spec.lambda2;
  p.shards.resize(spec.agents);
  for (int i = 0; i < spec.agents; ++i) {
    Shard& s = p.shards[i];
    s.features.resize(spec.samples_per_agent, spec.dim);
    for (int r = 0; r < spec.samples_per_agent; ++r)
      for (int c = 0; c < spec.dim; ++c) s.features(r, c) = normal(rng);
    s.responses.resize(spec.samples_per_agent);
    Eigen::VectorXd signal = s.features * truth.x_true;
    if (spec.kind == ProblemKind::Logistic) {
      for (int r = 0; r < spec.samples_per_agent; ++r) {
        double z = signal(r) + spec.label_noise * normal(rng);
        s.responses(r) = z >= 0 ? 1.0 : -1.0;
      }
    } else {
      for (int r = 0; r < spec.samples_per_agent; ++r)
        s.responses(r) = signal(r) + spec.noise_sigma * normal(rng);
    }
  }

  lipschitz_constants(p);
  return {scale_to_unit_lipschitz(std::move(p)), std::move(truth)};
}

void lipschitz_constants(Problem& p) {
  const int n = p.agents();
  p.lipschitz.assign(n, 0.0);
  p.strong_convexity.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const Shard& s = p.shards[i];
    double d = static_cast<double>(s.features.rows());
    double smax2 = spectral_norm_squared(s.features);
    double l = 0.0, mu = 0.0;
    switch (p.kind) {
      case ProblemKind::Ridge:
        l = smax2 / d + p.lambda;
        mu = p.lambda;
        break;
      case ProblemKind::Logistic:
        l = smax2 / (4.0 * d);
        mu = 0.0;
        break;
      case ProblemKind::ElasticNet:
        l = smax2 / d + p.lambda2;
        mu = p.lambda2;
        break;
    }
    p.lipschitz[i] = p.loss_scale * l;
    p.strong_convexity[i] = p.loss_scale * mu;
  }
  p.l_max = *std::max_element(p.lipschitz.begin(), p.lipschitz.end());
}

Problem scale_to_unit_lipschitz(Problem p) {
  if (p.l_max <= 1.0) return p;
  double c = 1.0 / p.l_max;
  p.loss_scale *= c;
  for (auto& l : p.lipschitz) l *= c;
  for (auto& mu : p.strong_convexity) mu *= c;
  p.l_max = 1.0;
  return p;
}

Eigen::VectorXd smooth_gradient(const Problem& p, int agent, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw std::runtime_error("smooth_gradient: non-finite input");
  const Shard& s = p.shards[agent];
  const double d = static_cast<double>(s.features.rows());
  Eigen::VectorXd g;
  switch (p.kind) {
    case ProblemKind::Ridge:
      g = (s.features.transpose() * (s.features * x - s.responses)) / d + p.lambda * x;
      break;
    case ProblemKind::Logistic: {
      Eigen::VectorXd t = s.responses.cwiseProduct(s.features * x);
      Eigen::VectorXd w(t.size());
      for (int r = 0; r < t.size(); ++r) w(r) = s.responses(r) * sigmoid(-t(r));
      g = -(s.features.transpose() * w) / d;
      break;
    }
    case ProblemKind::ElasticNet:
      g = (s.features.transpose() * (s.features * x - s.responses)) / d + p.lambda2 * x;
      break;
  }
  return p.loss_scale * g;
}

Eigen::VectorXd local_prox(const Problem& p, double step, const Eigen::VectorXd& v) {
  if (step <= 0.0) throw std::invalid_argument("local_prox: step must be positive");
  if (p.kind != ProblemKind::ElasticNet) return v;
  const double thr = step * p.lambda1;
  Eigen::VectorXd out(v.size());
  for (int j = 0; j < v.size(); ++j) {
    double a = std::abs(v(j)) - thr;
    out(j) = a > 0 ? (v(j) > 0 ? a : -a) : 0.0;
  }
  return out;
}

double agent_objective(const Problem& p, int agent, const Eigen::VectorXd& x) {
  const Shard& s = p.shards[agent];
  const double d = static_cast<double>(s.features.rows());
  double v = 0.0;
  switch (p.kind) {
    case ProblemKind::Ridge:
      v = p.loss_scale * (0.5 * (s.features * x - s.responses).squaredNorm() / d +
                          0.5 * p.lambda * x.squaredNorm());
      break;
    case ProblemKind::Logistic: {
      Eigen::VectorXd t = s.responses.cwiseProduct(s.features * x);
      double sum = 0.0;
      for (int r = 0; r < t.size(); ++r) sum += log1pexp(-t(r));
      v = p.loss_scale * sum / d;
      break;
    }
    case ProblemKind::ElasticNet:
      v = p.loss_scale * (0.5 * (s.features * x - s.responses).squaredNorm() / d +
                          0.5 * p.lambda2 * x.squaredNorm()) +
          p.lambda1 * x.lpNorm<1>();
      break;
  }
  return v;
}

double objective_value(const Problem& p, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw std::runtime_error("objective_value: non-finite input");
  double v = 0.0;
  for (int i = 0; i < p.agents(); ++i) v += agent_objective(p, i, x);
  return v;
}

double composite_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                               double l1_weight) {
  if (l1_weight == 0.0) return grad.norm();
  double acc = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    double r;
    if (x(j) != 0.0) {
      r = grad(j) + l1_weight * (x(j) > 0 ? 1.0 : -1.0);
    } else {
      r = std::max(std::abs(grad(j)) - l1_weight, 0.0);
    }
    acc += r * r;
  }
  return std::sqrt(acc);
}

double composite_residual_norm(const Problem& p, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& grad_plus_v) {
  double l1 = p.kind == ProblemKind::ElasticNet ? p.lambda1 : 0.0;
  return composite_gradient_norm(x, grad_plus_v, l1);
}

void save_dataset(const Problem& p, const GroundTruth& truth, const DatasetSpec& spec,
                  const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["kind"] = to_string(p.kind);
  manifest["agents"] = p.agents();
  manifest["dim"] = p.dim;
  manifest["seed"] = spec.seed;
  manifest["lambda"] = p.lambda;
  manifest["lambda1"] = p.lambda1;
  manifest["lambda2"] = p.lambda2;
  manifest["loss_scale"] = p.loss_scale;
  manifest["noise_sigma"] = truth.noise_sigma;
  manifest["support"] = truth.support;
  json sizes = json::array();
  for (const auto& s : p.shards) sizes.push_back(s.features.rows());
  manifest["samples_per_agent"] = sizes;
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";

  {
    std::ofstream out(fs::path(dir) / "x_true.bin", std::ios::binary);
    write_doubles(out, truth.x_true.data(), truth.x_true.size());
  }
  for (int i = 0; i < p.agents(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "shard_%03d.bin", i);
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    const Shard& s = p.shards[i];
    write_doubles(out, s.features.data(), static_cast<size_t>(s.features.size()));
    write_doubles(out, s.responses.data(), static_cast<size_t>(s.responses.size()));
  }
}

std::pair<Problem, GroundTruth> load_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("load_dataset: missing manifest in " + dir);
  json manifest = json::parse(mf);

  Problem p;
  p.kind = problem_kind_from_string(manifest.at("kind").get<std::string>());
  p.dim = manifest.at("dim").get<int>();
  p.lambda = manifest.at("lambda").get<double>();
  p.lambda1 = manifest.at("lambda1").get<double>();
  p.lambda2 = manifest.at("lambda2").get<double>();
  p.loss_scale = manifest.at("loss_scale").get<double>();

  GroundTruth truth;
  truth.noise_sigma = manifest.at("noise_sigma").get<double>();
  truth.support = manifest.at("support").get<std::vector<int>>();

  const int agents = manifest.at("agents").get<int>();
  const auto sizes = manifest.at("samples_per_agent").get<std::vector<int>>();
  if (static_cast<int>(sizes.size()) != agents)
    throw std::runtime_error("load_dataset: manifest shard count mismatch");

  truth.x_true.resize(p.dim);
  {
    std::ifstream in(fs::path(dir) / "x_true.bin", std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: missing x_true.bin");
    read_doubles(in, truth.x_true.data(), static_cast<size_t>(p.dim));
  }
  p.shards.resize(agents);
  for (int i = 0; i < agents; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "shard_%03d.bin", i);
    std::ifstream in(fs::path(dir) / name, std::ios::binary);
    if (!in) throw std::runtime_error(std::string("load_dataset: missing ") + name);
    Shard& s = p.shards[i];
    s.features.resize(sizes[i], p.dim);
    s.responses.resize(sizes[i]);
    read_doubles(in, s.features.data(), static_cast<size_t>(s.features.size()));
    read_doubles(in, s.responses.data(), static_cast<size_t>(s.responses.size()));
  }

  // Constants are derived data; recompute at the stored scale.
  double scale = p.loss_scale;
  p.loss_scale = 1.0;
  lipschitz_constants(p);
  p.loss_scale = scale;
  for (auto& l : p.lipschitz) l *= scale;
  for (auto& mu : p.strong_convexity) mu *= scale;
  p.l_max *= scale;
  return {std::move(p), std::move(truth)};
}

}  // namespace dp2g
