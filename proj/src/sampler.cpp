#include "qtraj/sampler.hpp"

#include <cmath>
#include <thread>

namespace qtraj {

Observable Observable::zero() { return Observable{}; }

Observable Observable::constant(double c) {
  Observable h;
  h.kind_ = Kind::Constant;
  h.constant_ = c;
  return h;
}

Observable Observable::quadratic(CMatrix a) {
  Observable h;
  h.kind_ = Kind::Quadratic;
  h.matrix_ = std::move(a);
  return h;
}

Observable Observable::generic(std::function<double(const ProjectivePoint&)> fn) {
  Observable h;
  h.kind_ = Kind::Generic;
  h.fn_ = std::move(fn);
  return h;
}

double Observable::eval_vec(const CVector& v) const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
      return constant_;
    case Kind::Quadratic:
      return v.dot(matrix_ * v).real() / v.squaredNorm();
    case Kind::Generic:
      return fn_(ProjectivePoint(v));
  }
  return 0.0;
}

TrajectoryState::TrajectoryState(ProjectivePoint x0, bool track_product)
    : point(std::move(x0)) {
  if (track_product) {
    product = CMatrix::Identity(point.dim(), point.dim());
  }
}

namespace {

// Raw-state transition shared by step() and the ensemble loop. `y` is kept
// unit norm but not phase-canonical; images are buffered in `scratch`.
struct Walker {
  const Instrument& ins;
  CVector y;
  double sum_h = 0.0;
  double log_norm = 0.0;
  double log_scale = 0.0;
  CMatrix product;
  bool track_product = false;
  std::vector<CVector> scratch;
  std::vector<double> probs;
  CMatrix product_tmp;

  Walker(const Instrument& instrument, CVector start, bool track)
      : ins(instrument), y(std::move(start)), track_product(track) {
    scratch.resize(ins.atoms.size(), CVector(ins.dim));
    probs.resize(ins.atoms.size());
    if (track_product) {
      product = CMatrix::Identity(ins.dim, ins.dim);
      product_tmp.resize(ins.dim, ins.dim);
    }
  }

  void advance(CounterRng& rng, const Observable& h) {
    double total = 0.0;
    for (size_t i = 0; i < ins.atoms.size(); ++i) {
      scratch[i].noalias() = ins.atoms[i].matrix * y;
      probs[i] = ins.atoms[i].weight * scratch[i].squaredNorm();
      total += probs[i];
    }
    if (!(total > 1e-14)) {
      throw DegenerateDistribution("step: all transition weights vanish");
    }
    double u = rng.uniform() * total;
    size_t pick = ins.atoms.size() - 1;
    double acc = 0.0;
    for (size_t i = 0; i < ins.atoms.size(); ++i) {
      acc += probs[i];
      if (u <= acc) {
        pick = i;
        break;
      }
    }
    double norm = std::sqrt(probs[pick] / ins.atoms[pick].weight);
    log_norm += std::log(norm);
    y = scratch[pick] / norm;
    if (!h.is_zero()) sum_h += h.eval_vec(y);
    if (track_product) {
      product_tmp.noalias() = ins.atoms[pick].matrix * product;
      double scale = product_tmp.cwiseAbs().maxCoeff();
      product = product_tmp / scale;
      log_scale += std::log(scale);
    }
  }

  double log_opnorm() const { return std::log(op_norm(product)) + log_scale; }
};

}  // namespace

void step(const Instrument& ins, TrajectoryState& state, CounterRng& rng,
          const Observable& h) {
  Walker walker(ins, state.point.vec(), state.product.has_value());
  if (state.product) walker.product = *state.product;
  walker.log_scale = state.log_scale;
  walker.advance(rng, h);
  state.point = ProjectivePoint(walker.y);
  state.sum_h += walker.sum_h;
  state.log_norm += walker.log_norm;
  state.log_scale = walker.log_scale;
  if (state.product) *state.product = walker.product;
  ++state.step;
}

namespace {

CVector initial_vector(const RunConfig& cfg, const Instrument& ins, int traj) {
  switch (cfg.initial) {
    case InitialKind::FixedPoint:
      if (!cfg.initial_point) {
        throw std::invalid_argument("run: FixedPoint initial requires initial_point");
      }
      return cfg.initial_point->vec();
    case InitialKind::SampleList: {
      if (cfg.initial_samples.empty()) {
        throw std::invalid_argument("run: SampleList initial requires samples");
      }
      return cfg.initial_samples[static_cast<size_t>(traj) % cfg.initial_samples.size()]
          .vec();
    }
    case InitialKind::Haar: {
      CounterRng rng(cfg.seed ^ 0x5851f42d4c957f2dull, static_cast<uint64_t>(traj));
      CVector v(ins.dim);
      for (int j = 0; j < ins.dim; ++j) {
        v[j] = Complex(rng.normal(), rng.normal());
      }
      return ProjectivePoint(v).vec();
    }
  }
  throw std::logic_error("run: unknown initial kind");
}

struct TrajectoryOutput {
  double sum_h = 0.0;
  double log_norm = 0.0;
  double log_opnorm = 0.0;
  std::vector<ProjectivePoint> occupation;
  std::vector<double> cp_sum_h, cp_log_norm, cp_log_opnorm;
};

TrajectoryOutput run_one(const Instrument& ins, const RunConfig& cfg, int traj,
                         int stride) {
  TrajectoryOutput out;
  CounterRng rng(cfg.seed, static_cast<uint64_t>(traj));
  Walker walker(ins, initial_vector(cfg, ins, traj), cfg.track_product);
  size_t next_cp = 0;
  bool collect = cfg.max_occupation > 0;
  for (int n = 1; n <= cfg.n_steps; ++n) {
    walker.advance(rng, cfg.h);
    if (collect && n > cfg.burn_in && (n - cfg.burn_in) % stride == 0) {
      out.occupation.emplace_back(walker.y);
    }
    if (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] == n) {
      out.cp_sum_h.push_back(walker.sum_h);
      out.cp_log_norm.push_back(walker.log_norm);
      if (cfg.track_product) out.cp_log_opnorm.push_back(walker.log_opnorm());
      ++next_cp;
    }
  }
  out.sum_h = walker.sum_h;
  out.log_norm = walker.log_norm;
  if (cfg.track_product) out.log_opnorm = walker.log_opnorm();
  return out;
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

EnsembleStats run(const Instrument& ins, const RunConfig& cfg) {
  if (cfg.n_steps < 1 || cfg.n_traj < 1) {
    throw std::invalid_argument("run: n_steps and n_traj must be >= 1");
  }
  std::vector<int> cps = cfg.checkpoints;
  std::sort(cps.begin(), cps.end());
  RunConfig local = cfg;
  local.checkpoints = cps;
  int stride = cfg.occupation_stride > 0 ? cfg.occupation_stride
                                         : std::max(1, cfg.n_steps / 1000);
  // occupation capped deterministically: only the first few trajectories collect
  int per_traj = std::max(0, (cfg.n_steps - cfg.burn_in) / stride);
  int collectors =
      per_traj > 0
          ? std::min<int>(cfg.n_traj,
                          static_cast<int>(cfg.max_occupation / static_cast<size_t>(per_traj)) + 1)
          : 0;

  std::vector<TrajectoryOutput> outputs(static_cast<size_t>(cfg.n_traj));
  parallel_for(cfg.n_traj, cfg.threads, [&](int t) {
    RunConfig traj_cfg = local;
    if (t >= collectors) traj_cfg.max_occupation = 0;
    outputs[static_cast<size_t>(t)] = run_one(ins, traj_cfg, t, stride);
  });

  EnsembleStats stats;
  for (auto& o : outputs) {
    stats.terminal_sum_h.push_back(o.sum_h);
    stats.terminal_log_norm.push_back(o.log_norm);
    if (cfg.track_product) stats.terminal_log_opnorm.push_back(o.log_opnorm);
    for (auto& p : o.occupation) {
      if (stats.occupation.size() < cfg.max_occupation) {
        stats.occupation.push_back(std::move(p));
      }
    }
    if (!cps.empty()) {
      stats.checkpoint_sum_h.push_back(std::move(o.cp_sum_h));
      stats.checkpoint_log_norm.push_back(std::move(o.cp_log_norm));
      if (cfg.track_product) {
        stats.checkpoint_log_opnorm.push_back(std::move(o.cp_log_opnorm));
      }
    }
  }
  auto summarize = [](const std::vector<double>& xs, double& mean, double& var) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var = xs.size() > 1 ? var / (static_cast<double>(xs.size()) - 1.0) : 0.0;
  };
  summarize(stats.terminal_sum_h, stats.mean_sum_h, stats.var_sum_h);
  summarize(stats.terminal_log_norm, stats.mean_log_norm, stats.var_log_norm);
  return stats;
}

namespace {

void enumerate_rec(const Instrument& ins, const Observable& h, const CVector& y,
                   double prob, double sum_h, double log_norm, int remaining,
                   std::vector<Outcome>& out) {
  if (remaining == 0) {
    out.push_back({prob, ProjectivePoint(y), sum_h, log_norm});
    return;
  }
  for (const auto& atom : ins.atoms) {
    CVector image = atom.matrix * y;
    double norm2 = image.squaredNorm();
    double branch = prob * atom.weight * norm2;
    if (!(branch > 0.0)) continue;  // zero-mass branch
    double norm = std::sqrt(norm2);
    image /= norm;
    double h_val = h.is_zero() ? 0.0 : h.eval_vec(image);
    enumerate_rec(ins, h, image, branch, sum_h + h_val, log_norm + std::log(norm),
                  remaining - 1, out);
  }
}

}  // namespace

std::vector<Outcome> enumerate_exact(const Instrument& ins, const ProjectivePoint& x0,
                                     int n, const Observable& h) {
  if (n < 1) throw std::invalid_argument("enumerate_exact: n must be >= 1");
  double budget = static_cast<double>(n) * std::log(static_cast<double>(ins.atoms.size()));
  if (budget > std::log(1e6)) {
    throw BudgetExceeded("enumerate_exact: |atoms|^n > 1e6");
  }
  std::vector<Outcome> out;
  enumerate_rec(ins, h, x0.vec(), 1.0, 0.0, 0.0, n, out);
  return out;
}

LyapunovEstimate lyapunov_estimate(const Instrument& ins, const RunConfig& cfg) {
  RunConfig local = cfg;
  local.checkpoints = {cfg.burn_in > 0 ? cfg.burn_in : 0, cfg.n_steps};
  if (cfg.burn_in <= 0) local.checkpoints = {cfg.n_steps};
  local.max_occupation = 0;
  EnsembleStats stats = run(ins, local);
  std::vector<double> rates(stats.terminal_log_norm.size());
  for (size_t t = 0; t < rates.size(); ++t) {
    double base = cfg.burn_in > 0 ? stats.checkpoint_log_norm[t][0] : 0.0;
    rates[t] = (stats.terminal_log_norm[t] - base) /
               static_cast<double>(cfg.n_steps - cfg.burn_in);
  }
  LyapunovEstimate est;
  for (double r : rates) est.gamma += r;
  est.gamma /= static_cast<double>(rates.size());
  double var = 0.0;
  for (double r : rates) var += (r - est.gamma) * (r - est.gamma);
  if (rates.size() > 1) {
    var /= static_cast<double>(rates.size() - 1);
    est.stderr_ = std::sqrt(var / static_cast<double>(rates.size()));
  }
  return est;
}

std::vector<std::vector<double>> op_norm_log(const Instrument& ins, const RunConfig& cfg) {
  if (!cfg.track_product) {
    throw std::invalid_argument("op_norm_log: cfg.track_product must be set");
  }
  RunConfig local = cfg;
  if (local.checkpoints.empty()) local.checkpoints = {cfg.n_steps};
  local.max_occupation = 0;
  EnsembleStats stats = run(ins, local);
  return stats.checkpoint_log_opnorm;
}

}  // namespace qtraj
