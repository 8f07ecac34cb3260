#include "covsteer/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "covsteer/error.hpp"

namespace covsteer {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t path_seed(std::uint64_t seed, int path) {
  return splitmix64(splitmix64(seed) ^ splitmix64(0x5851f42d4c957f2dULL + static_cast<std::uint64_t>(path)));
}

struct RolloutPlan {
  const SteeringProblem& problem;
  const BlockOperators& ops;
  Eigen::MatrixXd K;
  Eigen::VectorXd feedforward;
  Eigen::VectorXd mean_states;  // stacked xbar
  Eigen::MatrixXd init_factor;
  double noise_scale;
};

void run_paths(const RolloutPlan& plan, std::uint64_t seed, int first, int last, RolloutBatch& out) {
  const int nx = plan.ops.nx;
  const int nu = plan.ops.nu;
  const int nw = plan.ops.nw;
  const int N = plan.ops.horizon;
  Eigen::VectorXd deviation(plan.ops.lifted_dim());
  Eigen::VectorXd z0(nx);
  Eigen::VectorXd w(nw);
  for (int p = first; p < last; ++p) {
    std::mt19937_64 gen(path_seed(seed, p));
    std::normal_distribution<double> normal;
    for (int i = 0; i < nx; ++i) z0(i) = normal(gen);
    Eigen::VectorXd x = plan.problem.init.mean() + plan.init_factor * z0;
    const Eigen::Index base = Eigen::Index(p) * (N + 1);
    for (int k = 0; k < N; ++k) {
      out.states.col(base + k) = x;
      deviation.segment(Eigen::Index(k) * nx, nx) = x - plan.mean_states.segment(Eigen::Index(k) * nx, nx);
      const Eigen::Index prefix = Eigen::Index(k + 1) * nx;
      const Eigen::VectorXd u = plan.K.block(Eigen::Index(k) * nu, 0, nu, prefix) * deviation.head(prefix) +
                                plan.feedforward.segment(Eigen::Index(k) * nu, nu);
      out.inputs.col(Eigen::Index(p) * N + k) = u;
      for (int i = 0; i < nw; ++i) w(i) = plan.noise_scale * normal(gen);
      const Stage& s = plan.problem.system.stage(k);
      x = s.A * x + s.B * u + s.G * w;
    }
    out.states.col(base + N) = x;
  }
}

}  // namespace

RolloutBatch rollout(const Policy& policy, const SteeringProblem& problem, const BlockOperators& ops,
                     std::uint64_t seed, int n_paths, unsigned threads) {
  if (n_paths <= 0) throw Error(ErrorKind::InvalidInput, "rollout: n_paths must be positive");
  problem.validate();
  if (problem.horizon() != ops.horizon || problem.state_dim() != ops.nx || problem.input_dim() != ops.nu) {
    throw Error(ErrorKind::DimMismatch, "rollout: operators do not match the problem");
  }
  RolloutPlan plan{problem, ops, history_gain(policy, ops), feedforward_of(policy), {}, {}, 0.0};
  if (plan.feedforward.size() != ops.mask.rows()) {
    throw Error(ErrorKind::DimMismatch, "rollout: feedforward has length " + std::to_string(plan.feedforward.size()) +
                                            ", expected " + std::to_string(ops.mask.rows()));
  }
  plan.mean_states = mean_trajectory(plan.feedforward, ops, problem);
  Eigen::LLT<Eigen::MatrixXd> llt(problem.init.cov());
  plan.init_factor = llt.matrixL();
  plan.noise_scale = std::sqrt(problem.gamma);

  RolloutBatch batch;
  batch.seed = seed;
  batch.n_paths = n_paths;
  batch.horizon = ops.horizon;
  batch.states.resize(ops.nx, Eigen::Index(n_paths) * (ops.horizon + 1));
  batch.inputs.resize(ops.nu, Eigen::Index(n_paths) * ops.horizon);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>((n_paths + 1023) / 1024));
  if (threads <= 1) {
    run_paths(plan, seed, 0, n_paths, batch);
    return batch;
  }
  std::vector<std::thread> pool;
  const int chunk = (n_paths + int(threads) - 1) / int(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const int first = int(t) * chunk;
    const int last = std::min(n_paths, first + chunk);
    if (first >= last) break;
    pool.emplace_back([&plan, seed, first, last, &batch] { run_paths(plan, seed, first, last, batch); });
  }
  for (auto& th : pool) th.join();
  return batch;
}

GaussianD empirical_moments(const RolloutBatch& batch, int stage) {
  if (batch.n_paths < 2) {
    throw Error(ErrorKind::InsufficientSamples,
                "empirical_moments: need at least 2 paths, got " + std::to_string(batch.n_paths));
  }
  if (stage < 0 || stage > batch.horizon) throw Error(ErrorKind::InvalidInput, "empirical_moments: stage out of range");
  const Eigen::Index nx = batch.states.rows();
  Eigen::MatrixXd samples(nx, batch.n_paths);
  for (int p = 0; p < batch.n_paths; ++p) samples.col(p) = batch.states.col(Eigen::Index(p) * (batch.horizon + 1) + stage);
  const Eigen::VectorXd mean = samples.rowwise().mean();
  samples.colwise() -= mean;
  const Eigen::MatrixXd cov = samples * samples.transpose() / double(batch.n_paths - 1);
  return GaussianD(mean, cov);
}

}  // namespace covsteer
