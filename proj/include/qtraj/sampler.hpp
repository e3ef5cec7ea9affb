#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "qtraj/instrument.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

/// Observable h on P(C^k). Quadratic and constant observables evaluate
/// directly off the unnormalized trajectory vector (phase/scale invariant),
/// keeping the hot loop free of canonicalization.
class Observable {
 public:
  static Observable zero();
  static Observable constant(double c);
  static Observable quadratic(CMatrix a);
  static Observable generic(std::function<double(const ProjectivePoint&)> fn);

  bool is_zero() const { return kind_ == Kind::Zero; }

  double eval_vec(const CVector& v) const;  // v need not be unit or canonical
  double eval(const ProjectivePoint& x) const { return eval_vec(x.vec()); }

 private:
  enum class Kind { Zero, Constant, Quadratic, Generic };
  Kind kind_ = Kind::Zero;
  double constant_ = 0.0;
  CMatrix matrix_;
  std::function<double(const ProjectivePoint&)> fn_;
};

struct TrajectoryState {
  int step = 0;
  ProjectivePoint point;
  double sum_h = 0.0;
  double log_norm = 0.0;   // log ||W_n x_0||
  double log_scale = 0.0;  // folded product rescaling
  std::optional<CMatrix> product;  // W_n / exp(log_scale)

  explicit TrajectoryState(ProjectivePoint x0, bool track_product = false);
};

struct DegenerateDistribution : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One transition: atom i drawn with probability w_i ||v_i x||^2.
void step(const Instrument& ins, TrajectoryState& state, CounterRng& rng,
          const Observable& h);

enum class InitialKind { FixedPoint, Haar, SampleList };

struct RunConfig {
  int n_steps = 1;
  int n_traj = 1;
  uint64_t seed = 0;
  InitialKind initial = InitialKind::Haar;
  std::optional<ProjectivePoint> initial_point;
  std::vector<ProjectivePoint> initial_samples;
  bool track_product = false;
  int burn_in = 0;
  Observable h = Observable::zero();
  int occupation_stride = 0;        // 0 = max(1, n_steps / 1000)
  size_t max_occupation = 100000;   // cap on collected occupation points
  std::vector<int> checkpoints;     // steps at which to record running values
  int threads = 1;
};

struct EnsembleStats {
  std::vector<double> terminal_sum_h;
  std::vector<double> terminal_log_norm;
  std::vector<double> terminal_log_opnorm;  // empty unless track_product
  std::vector<ProjectivePoint> occupation;  // uniform weights
  // [trajectory][checkpoint] running values at cfg.checkpoints
  std::vector<std::vector<double>> checkpoint_sum_h;
  std::vector<std::vector<double>> checkpoint_log_norm;
  std::vector<std::vector<double>> checkpoint_log_opnorm;
  double mean_sum_h = 0.0;
  double var_sum_h = 0.0;
  double mean_log_norm = 0.0;
  double var_log_norm = 0.0;
};

/// n_traj independent trajectories with RNG streams keyed by
/// (seed, trajectory index); bit-deterministic for a fixed config.
EnsembleStats run(const Instrument& ins, const RunConfig& cfg);

struct Outcome {
  double prob;
  ProjectivePoint point;
  double sum_h;
  double log_norm;
};

/// All atom index sequences of length n with prob = (prod w) ||W_n x0||^2;
/// zero-mass branches are pruned. Exact oracle for the Monte Carlo paths.
std::vector<Outcome> enumerate_exact(const Instrument& ins, const ProjectivePoint& x0,
                                     int n, const Observable& h = Observable::zero());

struct LyapunovEstimate {
  double gamma = 0.0;
  double stderr_ = 0.0;
};

/// Time-average of log-norm increments past burn-in, averaged across
/// trajectories.
LyapunovEstimate lyapunov_estimate(const Instrument& ins, const RunConfig& cfg);

/// log ||W_n|| per trajectory at cfg.checkpoints (terminal step when empty);
/// requires cfg.track_product.
std::vector<std::vector<double>> op_norm_log(const Instrument& ins, const RunConfig& cfg);

}  // namespace qtraj
