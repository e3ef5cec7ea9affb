#include "qtraj/limit_theorems.hpp"

#include <algorithm>
#include <cmath>

namespace qtraj {

namespace {

double perron_log(const KernelPlan& plan, TiltFamily family, double param,
                  const TiltDomain& domain) {
  Tilt tilt = family == TiltFamily::Observable ? Tilt(TiltObservable{param})
                                               : Tilt(TiltLyapunov{param});
  DiscretizedKernel kernel(plan, tilt, domain);
  return std::log(perron_root(kernel));
}

}  // namespace

CumulantCurve cumulant_curve(const KernelPlan& plan, TiltFamily family,
                             const std::vector<double>& grid, double fd_step,
                             const TiltDomain& domain) {
  CumulantCurve curve;
  curve.grid = grid;
  curve.values.reserve(grid.size());
  for (double param : grid) {
    curve.values.push_back(perron_log(plan, family, param, domain));
  }
  // five-point stencil; the curves are analytic so Richardson is safe
  double h = fd_step;
  double f1 = perron_log(plan, family, h, domain);
  double fm1 = perron_log(plan, family, -h, domain);
  double f2 = perron_log(plan, family, 2.0 * h, domain);
  double fm2 = perron_log(plan, family, -2.0 * h, domain);
  curve.d1_at0 = (8.0 * (f1 - fm1) - (f2 - fm2)) / (12.0 * h);
  curve.d2_at0 = (16.0 * (f1 + fm1) - (f2 + fm2)) / (12.0 * h * h);
  return curve;
}

double RateFunction::at(double query) const {
  size_t best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < x.size(); ++i) {
    double d = std::abs(x[i] - query);
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return value[best];
}

RateFunction legendre_transform(const CumulantCurve& curve,
                                const std::vector<double>& x_grid,
                                double convexity_slack) {
  const size_t m = curve.grid.size();
  if (m < 3) throw std::invalid_argument("legendre_transform: need at least 3 grid points");
  for (size_t i = 0; i + 2 < m; ++i) {
    double left = (curve.values[i + 1] - curve.values[i]) / (curve.grid[i + 1] - curve.grid[i]);
    double right =
        (curve.values[i + 2] - curve.values[i + 1]) / (curve.grid[i + 2] - curve.grid[i + 1]);
    if (right - left < -convexity_slack) {
      throw NonConvexCurve("legendre_transform: curve fails midpoint convexity at index " +
                           std::to_string(i));
    }
  }
  RateFunction rate;
  rate.slope_lo = (curve.values[1] - curve.values[0]) / (curve.grid[1] - curve.grid[0]);
  rate.slope_hi = (curve.values[m - 1] - curve.values[m - 2]) /
                  (curve.grid[m - 1] - curve.grid[m - 2]);
  for (double x : x_grid) {
    double best = -std::numeric_limits<double>::infinity();
    double best_theta = curve.grid[0];
    for (size_t i = 0; i < m; ++i) {
      double v = curve.grid[i] * x - curve.values[i];
      if (v > best) {
        best = v;
        best_theta = curve.grid[i];
      }
    }
    rate.x.push_back(x);
    rate.value.push_back(best);
    rate.theta_star.push_back(best_theta);
    rate.in_domain.push_back(x > rate.slope_lo && x < rate.slope_hi);
  }
  return rate;
}

Sigma2Estimates sigma2_estimates(const Instrument& ins, const Observable& h,
                                 const RunConfig& cfg, const CumulantCurve& curve) {
  Sigma2Estimates est;
  est.spectral = curve.d2_at0;

  // centering pass: estimate E_{nu_inv}[h] from an occupation sample
  RunConfig calib = cfg;
  calib.n_traj = std::max(8, cfg.n_traj / 100);
  calib.h = Observable::zero();
  calib.burn_in = std::max(cfg.burn_in, cfg.n_steps / 10);
  EnsembleStats occ = run(ins, calib);
  double mean_h = 0.0;
  for (const auto& p : occ.occupation) mean_h += h.eval(p);
  mean_h /= static_cast<double>(occ.occupation.size());
  est.mean_h = mean_h;

  RunConfig main_cfg = cfg;
  main_cfg.h = Observable::generic(
      [h, mean_h](const ProjectivePoint& p) { return h.eval(p) - mean_h; });
  main_cfg.max_occupation = 0;
  EnsembleStats stats = run(ins, main_cfg);
  est.batch = stats.var_sum_h / static_cast<double>(cfg.n_steps);
  est.batch_stderr = est.batch * std::sqrt(2.0 / std::max(1, cfg.n_traj - 1));
  return est;
}

GammaEstimates gamma_estimates(const Instrument& ins, const RunConfig& cfg,
                               const CumulantCurve& upsilon) {
  GammaEstimates est;
  LyapunovEstimate traj = lyapunov_estimate(ins, cfg);
  est.traj = traj.gamma;
  est.traj_stderr = traj.stderr_;
  est.slope = upsilon.d1_at0;

  RunConfig occ_cfg = cfg;
  occ_cfg.n_traj = std::max(8, cfg.n_traj / 100);
  occ_cfg.h = Observable::zero();
  occ_cfg.burn_in = std::max(cfg.burn_in, cfg.n_steps / 10);
  occ_cfg.max_occupation = 100000;
  EnsembleStats occ = run(ins, occ_cfg);
  double acc = 0.0;
  for (const auto& p : occ.occupation) {
    for (const auto& atom : ins.atoms) {
      double norm2 = (atom.matrix * p.vec()).squaredNorm();
      if (norm2 > 0.0) acc += atom.weight * norm2 * 0.5 * std::log(norm2);
    }
  }
  est.integral = acc / static_cast<double>(occ.occupation.size());
  return est;
}

double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

double ks_distance_to_normal(std::vector<double> samples, double sigma2) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: empty sample");
  double sigma = std::sqrt(sigma2);
  std::sort(samples.begin(), samples.end());
  const double m = static_cast<double>(samples.size());
  double dist = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    double f = normal_cdf(samples[i] / sigma);
    double hi = (static_cast<double>(i) + 1.0) / m - f;
    double lo = f - static_cast<double>(i) / m;
    dist = std::max(dist, std::max(hi, lo));
  }
  return dist;
}

namespace {

// Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2), the asymptotic two-sided
// KS tail.
double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = std::exp(-2.0 * j * j * x * x);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

double ks_critical_value(double alpha, int m) {
  double lo = 0.2, hi = 4.0;
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (kolmogorov_tail(mid) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi) / std::sqrt(static_cast<double>(m));
}

CltReport clt_check(const std::vector<double>& samples, double sigma2, int n,
                    double alpha) {
  if (samples.empty()) throw std::invalid_argument("clt_check: empty sample");
  CltReport report;
  report.n = n;
  report.samples = static_cast<int>(samples.size());
  report.sigma2 = sigma2;
  if (!(sigma2 > 0.0)) {
    report.degenerate = true;
    double worst = 0.0;
    for (double x : samples) worst = std::max(worst, std::abs(x));
    report.ks_distance = worst;
    report.threshold = 1e-9;
    report.pass = worst <= report.threshold;
    return report;
  }
  report.ks_distance = ks_distance_to_normal(samples, sigma2);
  report.threshold = ks_critical_value(alpha, report.samples);
  report.pass = report.ks_distance < report.threshold;
  return report;
}

namespace {

struct CheckpointSamples {
  std::vector<int> n_list;
  // [checkpoint][trajectory] raw running statistic
  std::vector<std::vector<double>> values;
};

CheckpointSamples collect_checkpoints(const Instrument& ins, StatMode mode,
                                      const Observable& h, std::vector<int> n_list,
                                      int m_traj, uint64_t seed, int threads) {
  std::sort(n_list.begin(), n_list.end());
  RunConfig cfg;
  cfg.n_steps = n_list.back();
  cfg.n_traj = m_traj;
  cfg.seed = seed;
  cfg.h = mode == StatMode::Observable ? h : Observable::zero();
  cfg.track_product = mode == StatMode::LogNormOp;
  cfg.checkpoints = n_list;
  cfg.max_occupation = 0;
  cfg.threads = threads;
  EnsembleStats stats = run(ins, cfg);
  CheckpointSamples out;
  out.n_list = n_list;
  out.values.resize(n_list.size(), std::vector<double>(static_cast<size_t>(m_traj)));
  for (size_t t = 0; t < static_cast<size_t>(m_traj); ++t) {
    for (size_t c = 0; c < n_list.size(); ++c) {
      double v = 0.0;
      switch (mode) {
        case StatMode::Observable:
          v = stats.checkpoint_sum_h[t][c];
          break;
        case StatMode::LogNormX:
          v = stats.checkpoint_log_norm[t][c];
          break;
        case StatMode::LogNormOp:
          v = stats.checkpoint_log_opnorm[t][c];
          break;
      }
      out.values[c][t] = v;
    }
  }
  return out;
}

}  // namespace

BerryEsseenScan berry_esseen_scan(const Instrument& ins, StatMode mode,
                                  const Observable& h, std::vector<int> n_list,
                                  int m_traj, uint64_t seed, int threads) {
  CheckpointSamples samples =
      collect_checkpoints(ins, mode, h, std::move(n_list), m_traj, seed, threads);

  // center and sigma estimated at the largest n from an independent stream
  CheckpointSamples calib = collect_checkpoints(
      ins, mode, h, {samples.n_list.back()}, std::max(1000, m_traj / 4), seed ^ 0xabcdefull,
      threads);
  const auto& cal = calib.values[0];
  double mean = 0.0;
  for (double x : cal) mean += x;
  mean /= static_cast<double>(cal.size());
  double var = 0.0;
  for (double x : cal) var += (x - mean) * (x - mean);
  var /= static_cast<double>(cal.size() - 1);
  double n_big = static_cast<double>(samples.n_list.back());

  BerryEsseenScan scan;
  scan.center = mean / n_big;
  scan.sigma = std::sqrt(var / n_big);

  for (size_t c = 0; c < samples.n_list.size(); ++c) {
    int n = samples.n_list[c];
    std::vector<double> normalized(samples.values[c].size());
    for (size_t t = 0; t < normalized.size(); ++t) {
      normalized[t] = (samples.values[c][t] - scan.center * n) /
                      (scan.sigma * std::sqrt(static_cast<double>(n)));
    }
    BerryEsseenRow row;
    row.n = n;
    row.dist = ks_distance_to_normal(std::move(normalized), 1.0);
    row.dist_sqrt_n = row.dist * std::sqrt(static_cast<double>(n));
    row.dist_n14 = row.dist * std::pow(static_cast<double>(n), 0.25);
    scan.rows.push_back(row);
  }

  // monotone-growth heuristic on the scaled column
  bool increasing = true;
  for (size_t i = 0; i + 1 < scan.rows.size(); ++i) {
    if (scan.rows[i + 1].dist_sqrt_n <= scan.rows[i].dist_sqrt_n) increasing = false;
  }
  double first = scan.rows.front().dist_sqrt_n;
  double last = scan.rows.back().dist_sqrt_n;
  scan.bounded = !(increasing && last > 1.3 * first);
  return scan;
}

BerryEsseenScan berry_esseen_reference(const std::vector<int>& n_list, int m_traj,
                                       uint64_t seed) {
  std::vector<int> sorted = n_list;
  std::sort(sorted.begin(), sorted.end());
  BerryEsseenScan scan;
  scan.center = 0.0;
  scan.sigma = 1.0;
  for (int n : sorted) {
    std::vector<double> normalized(static_cast<size_t>(m_traj));
    for (int t = 0; t < m_traj; ++t) {
      CounterRng rng(seed, (static_cast<uint64_t>(n) << 32) | static_cast<uint64_t>(t));
      int sum = 0;
      for (int i = 0; i < n; ++i) sum += rng.uniform() < 0.5 ? -1 : 1;
      normalized[static_cast<size_t>(t)] = sum / std::sqrt(static_cast<double>(n));
    }
    BerryEsseenRow row;
    row.n = n;
    row.dist = ks_distance_to_normal(std::move(normalized), 1.0);
    row.dist_sqrt_n = row.dist * std::sqrt(static_cast<double>(n));
    row.dist_n14 = row.dist * std::pow(static_cast<double>(n), 0.25);
    scan.rows.push_back(row);
  }
  bool increasing = true;
  for (size_t i = 0; i + 1 < scan.rows.size(); ++i) {
    if (scan.rows[i + 1].dist_sqrt_n <= scan.rows[i].dist_sqrt_n) increasing = false;
  }
  scan.bounded = !(increasing && scan.rows.back().dist_sqrt_n > 1.3 * scan.rows.front().dist_sqrt_n);
  return scan;
}

LdpScan ldp_check(const Instrument& ins, StatMode mode, const Observable& h, double a,
                  const std::vector<int>& n_list, int m_traj, uint64_t seed,
                  const RateFunction& rate, int threads, double agreement) {
  CheckpointSamples samples = collect_checkpoints(ins, mode, h, n_list, m_traj, seed, threads);
  LdpScan scan;
  scan.rate_target = rate.at(a);
  double min_hits = 10.0;
  for (size_t c = 0; c < samples.n_list.size(); ++c) {
    LdpRow row;
    row.n = samples.n_list[c];
    int hits = 0;
    for (double v : samples.values[c]) {
      if (v / row.n >= a) ++hits;
    }
    row.p_hat = static_cast<double>(hits) / static_cast<double>(m_traj);
    row.reachable = hits >= min_hits;
    row.rate = row.p_hat > 0.0 ? -std::log(row.p_hat) / row.n
                               : std::numeric_limits<double>::infinity();
    scan.rows.push_back(row);
  }
  for (auto it = scan.rows.rbegin(); it != scan.rows.rend(); ++it) {
    if (it->reachable) {
      scan.pass = std::abs(it->rate - scan.rate_target) <=
                  agreement * std::max(std::abs(scan.rate_target), 1e-12);
      return scan;
    }
  }
  scan.pass = false;
  return scan;
}

IneqLogScan ineqlog_scan(const std::vector<ProjectivePoint>& nu_sample, double s,
                         int trials, uint64_t seed, double hyper_tol) {
  if (nu_sample.empty()) throw std::invalid_argument("ineqlog_scan: empty sample");
  if (!(s > -2.0)) throw std::invalid_argument("ineqlog_scan: need s > -2");
  const int k = nu_sample.front().dim();
  CMatrix second_moment = CMatrix::Zero(k, k);
  for (const auto& p : nu_sample) second_moment += projector(p);
  second_moment /= static_cast<double>(nu_sample.size());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(second_moment);
  if (es.eigenvalues().minCoeff() <= hyper_tol) {
    throw HyperplaneDegenerate("ineqlog_scan: nu sample is concentrated near a hyperplane");
  }

  IneqLogScan scan;
  scan.min_ratio = std::numeric_limits<double>::infinity();
  scan.max_ratio = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    CounterRng rng(seed, static_cast<uint64_t>(trial));
    CMatrix v(k, k);
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < k; ++c) v(r, c) = Complex(rng.normal(), rng.normal());
    }
    v /= op_norm(v);  // ||v|| = 1, so the ||v||^s factor drops out
    double num = 0.0, den = 0.0;
    for (const auto& p : nu_sample) {
      double norm2 = (v * p.vec()).squaredNorm();
      den += norm2;
      num += norm2 > 0.0 ? std::pow(norm2, 0.5 * (s + 2.0)) : 0.0;
    }
    double ratio = num / den;
    if (ratio < scan.min_ratio) {
      scan.min_ratio = ratio;
      scan.argmin_v = v;
    }
    if (ratio > scan.max_ratio) {
      scan.max_ratio = ratio;
      scan.argmax_v = v;
    }
  }
  return scan;
}

Complex scalar_f(int n, Complex z, double t) {
  if (t < 0.0) throw std::domain_error("scalar_f: t must be >= 0");
  if (t == 0.0) return 0.0;
  double lt = std::log(t);
  return std::pow(lt, static_cast<double>(n)) * std::exp(z * lt);
}

namespace {

// K(n, z, t, theta) from the derivative bound of F_{n,z}.
double scalar_k(int n, Complex z, double t, double theta) {
  double re = z.real();
  double a = 2.0 * std::abs(z) * std::pow(re - 1.0, -static_cast<double>(n));
  double b = (std::abs(z) + theta) * std::pow(t, re - 1.0 + theta) *
             std::pow(theta, -static_cast<double>(n));
  return std::pow(static_cast<double>(n), static_cast<double>(n)) *
         std::exp(-(static_cast<double>(n) - 1.0)) * std::max(a, b);
}

}  // namespace

std::vector<ScalarFCheck> scalar_f_checks(int n_max, Complex z, double theta,
                                          const std::vector<double>& t_grid,
                                          double r) {
  if (!(z.real() > 0.0)) throw std::domain_error("scalar_f_checks: need Re(z) > 0");
  if (!(theta > 0.0)) throw std::domain_error("scalar_f_checks: need theta > 0");
  if (t_grid.size() < 2) throw std::invalid_argument("scalar_f_checks: grid too small");
  std::vector<double> grid = t_grid;
  std::sort(grid.begin(), grid.end());
  if (!(grid.front() > 0.0)) throw std::domain_error("scalar_f_checks: grid must be positive");
  if (r <= 0.0) r = std::min(1.0, 0.75 * z.real());
  double t_max = grid.back();

  ScalarFCheck bounded{"bounded", true, std::numeric_limits<double>::infinity()};
  for (int n = 1; n <= n_max; ++n) {
    double en = std::exp(-static_cast<double>(n));
    double head = en * std::pow(n / z.real(), n);
    double running_sup = 0.0;
    for (double t : grid) {
      running_sup = std::max(running_sup, std::abs(scalar_f(n, z, t)));
      double bound = std::max(head, en * std::pow(n / theta, n) * std::pow(t, z.real() + theta));
      double margin = bound - running_sup;
      bounded.worst_margin = std::min(bounded.worst_margin, margin);
      if (margin < 0.0) bounded.pass = false;
    }
  }

  ScalarFCheck derivative{"derivative", true, std::numeric_limits<double>::infinity()};
  if (z.real() > 1.0) {
    for (int n = 1; n <= n_max; ++n) {
      double bound = scalar_k(n, z, t_max, theta);
      for (double t : grid) {
        if (!(t < t_max)) continue;
        double lt = std::log(t);
        Complex deriv = std::pow(lt, static_cast<double>(n - 1)) *
                        std::exp((z - 1.0) * lt) * (z * lt + static_cast<double>(n));
        double margin = bound - std::abs(deriv);
        derivative.worst_margin = std::min(derivative.worst_margin, margin);
        if (margin < 0.0) derivative.pass = false;
      }
    }
  } else {
    derivative.name = "derivative (skipped: Re(z) <= 1)";
  }

  ScalarFCheck holder{"holder_increment", true, std::numeric_limits<double>::infinity()};
  if (z.real() > r) {
    for (int n = 1; n <= n_max; ++n) {
      double k_const = std::pow(r, -static_cast<double>(n)) *
                       scalar_k(n, z / r, std::pow(t_max, r), theta);
      for (size_t i = 0; i < grid.size(); ++i) {
        for (size_t j = i + 1; j < grid.size(); ++j) {
          double diff = std::abs(scalar_f(n, z, grid[j]) - scalar_f(n, z, grid[i]));
          double bound = k_const * std::pow(grid[j] - grid[i], r);
          double margin = bound - diff;
          holder.worst_margin = std::min(holder.worst_margin, margin);
          if (margin < 0.0) holder.pass = false;
        }
      }
    }
  } else {
    holder.name = "holder_increment (skipped: Re(z) <= r)";
  }

  ScalarFCheck power{"power_holder", true, std::numeric_limits<double>::infinity()};
  {
    double alpha_star = std::min(1.0, z.real());
    double beta = std::max(1.0, z.real());
    double coeff = std::abs(z) / alpha_star *
                   (beta > 1.0 ? std::pow(t_max, beta - 1.0) : 1.0);
    for (size_t i = 0; i < grid.size(); ++i) {
      for (size_t j = i + 1; j < grid.size(); ++j) {
        double diff = std::abs(std::exp(z * std::log(grid[j])) -
                               std::exp(z * std::log(grid[i])));
        double bound = coeff * std::pow(grid[j] - grid[i], alpha_star);
        double margin = bound - diff;
        power.worst_margin = std::min(power.worst_margin, margin);
        if (margin < 0.0) power.pass = false;
      }
    }
  }

  return {bounded, derivative, holder, power};
}

double log_moment_report(const Instrument& ins) {
  double acc = 0.0;
  for (const auto& atom : ins.atoms) {
    double norm = op_norm(atom.matrix);
    if (norm > 0.0) acc += atom.weight * std::abs(std::log(norm)) * norm * norm;
  }
  return acc;
}

}  // namespace qtraj
