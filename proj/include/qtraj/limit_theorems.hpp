#pragma once

#include "qtraj/channel.hpp"
#include "qtraj/sampler.hpp"
#include "qtraj/transfer.hpp"

namespace qtraj {

struct CumulantCurve {
  std::vector<double> grid;
  std::vector<double> values;
  double d1_at0 = 0.0;  // mean (Lambda) or gamma (Upsilon)
  double d2_at0 = 0.0;  // sigma^2
};

/// SCGF along `grid` plus Richardson-extrapolated derivatives at 0 computed
/// on a separate 5-point stencil of width fd_step.
CumulantCurve cumulant_curve(const KernelPlan& plan, TiltFamily family,
                             const std::vector<double>& grid, double fd_step = 1e-3,
                             const TiltDomain& domain = TiltDomain{});

struct NonConvexCurve : std::domain_error {
  using std::domain_error::domain_error;
};

struct RateFunction {
  std::vector<double> x;
  std::vector<double> value;
  std::vector<double> theta_star;
  std::vector<bool> in_domain;  // inside the restricted slope interval
  double slope_lo = 0.0;
  double slope_hi = 0.0;

  double at(double query) const;  // value at the grid point nearest to query
};

/// I(x) = max over the curve grid of theta x - Lambda(theta); domain
/// restricted to the one-sided slopes at the curve ends.
RateFunction legendre_transform(const CumulantCurve& curve,
                                const std::vector<double>& x_grid,
                                double convexity_slack = 1e-8);

struct Sigma2Estimates {
  double batch = 0.0;
  double batch_stderr = 0.0;
  double spectral = 0.0;  // Lambda''(0)
  double mean_h = 0.0;    // centering constant subtracted from h
};

/// Batch variance of S_n(h - mean)/n across trajectories vs Lambda''(0).
Sigma2Estimates sigma2_estimates(const Instrument& ins, const Observable& h,
                                 const RunConfig& cfg, const CumulantCurve& curve);

struct GammaEstimates {
  double traj = 0.0;
  double traj_stderr = 0.0;
  double integral = 0.0;  // occupation-sample form of the gamma integral
  double slope = 0.0;     // Upsilon'(0)
};

GammaEstimates gamma_estimates(const Instrument& ins, const RunConfig& cfg,
                               const CumulantCurve& upsilon);

struct CltReport {
  int n = 0;
  int samples = 0;
  double sigma2 = 0.0;
  double ks_distance = 0.0;
  double threshold = 0.0;
  bool degenerate = false;
  bool pass = false;
};

/// Two-sided KS test of `samples` against N(0, sigma2) at level alpha;
/// sigma2 = 0 degrades to a point-mass test.
CltReport clt_check(const std::vector<double>& samples, double sigma2, int n,
                    double alpha = 0.01);

double normal_cdf(double u);
double ks_distance_to_normal(std::vector<double> samples, double sigma2);
/// Asymptotic critical value K_alpha / sqrt(m) of the two-sided KS statistic.
double ks_critical_value(double alpha, int m);

enum class StatMode { Observable, LogNormX, LogNormOp };

struct BerryEsseenRow {
  int n = 0;
  double dist = 0.0;
  double dist_sqrt_n = 0.0;
  double dist_n14 = 0.0;
};

struct BerryEsseenScan {
  std::vector<BerryEsseenRow> rows;
  bool bounded = true;  // no monotone growth of the scaled column
  double center = 0.0;
  double sigma = 0.0;
};

/// Empirical CDF distance to the standard normal at each n in n_list, using
/// the per-step centering `center` and scale `sigma` (both estimated at the
/// largest n when nonfinite values are passed).
BerryEsseenScan berry_esseen_scan(const Instrument& ins, StatMode mode,
                                  const Observable& h, std::vector<int> n_list,
                                  int m_traj, uint64_t seed, int threads = 1);

/// Calibration variant: i.i.d. centered coin flips instead of trajectories.
BerryEsseenScan berry_esseen_reference(const std::vector<int>& n_list, int m_traj,
                                       uint64_t seed);

struct LdpRow {
  int n = 0;
  double p_hat = 0.0;
  double rate = 0.0;  // -(1/n) log p_hat
  bool reachable = false;
};

struct LdpScan {
  std::vector<LdpRow> rows;
  double rate_target = 0.0;  // I(a)
  bool pass = false;         // last reachable rate within 15% of I(a)
};

LdpScan ldp_check(const Instrument& ins, StatMode mode, const Observable& h, double a,
                  const std::vector<int>& n_list, int m_traj, uint64_t seed,
                  const RateFunction& rate, int threads = 1,
                  double agreement = 0.15);

struct HyperplaneDegenerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IneqLogScan {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  CMatrix argmin_v;
  CMatrix argmax_v;
};

/// R_s(v) = int ||vx||^{s+2} dnu / (||v||^s int ||vx||^2 dnu) over random
/// unit-operator-norm matrices; throws HyperplaneDegenerate when the sample
/// concentrates near a hyperplane.
IneqLogScan ineqlog_scan(const std::vector<ProjectivePoint>& nu_sample, double s,
                         int trials, uint64_t seed, double hyper_tol = 1e-6);

/// F_{n,z}(t) = log^n(t) e^{z log t}, continued by 0 at t = 0.
Complex scalar_f(int n, Complex z, double t);

struct ScalarFCheck {
  std::string name;
  bool pass = true;
  double worst_margin = 0.0;  // min over the grid of (bound - value)
};

/// Grid verification of the sup bound, the derivative bound, the Holder
/// increment bound with exponent r, and the power-function Holder bound.
std::vector<ScalarFCheck> scalar_f_checks(int n_max, Complex z, double theta,
                                          const std::vector<double>& t_grid,
                                          double r = 0.0);

/// sum_i w_i |log ||v_i||| ||v_i||^2 (always finite for finite atoms).
double log_moment_report(const Instrument& ins);

}  // namespace qtraj
