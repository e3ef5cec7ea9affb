#include "qtraj/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qtraj {

Mesh build_mesh(int k, int n, MeshKind kind, uint64_t seed) {
  if (n < 16) throw std::invalid_argument("build_mesh: N must be >= 16");
  Mesh mesh;
  mesh.dim = k;
  mesh.kind = kind;
  mesh.seed = seed;
  mesh.points.reserve(static_cast<size_t>(n));
  if (kind == MeshKind::Fibonacci) {
    if (k != 2) throw std::invalid_argument("build_mesh: fibonacci mesh requires k = 2");
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      double zc = 1.0 - (2.0 * i + 1.0) / n;
      double theta = std::acos(std::clamp(zc, -1.0, 1.0));
      double phi = golden_angle * i;
      CVector v(2);
      v[0] = std::cos(theta / 2.0);
      v[1] = std::polar(std::sin(theta / 2.0), phi);
      mesh.points.emplace_back(std::move(v));
    }
  } else {
    for (int i = 0; i < n; ++i) {
      CounterRng rng(seed, static_cast<uint64_t>(i));
      CVector v(k);
      for (int j = 0; j < k; ++j) v[j] = Complex(rng.normal(), rng.normal());
      mesh.points.emplace_back(std::move(v));
    }
  }
  // distinctness guard; collisions signal a too-fine mesh for the RNG draw
  for (size_t a = 0; a < mesh.points.size(); ++a) {
    for (size_t b = a + 1; b < mesh.points.size(); ++b) {
      if (metric_d(mesh.points[a], mesh.points[b]) <= 1e-9) {
        throw std::runtime_error("build_mesh: coincident mesh nodes " + std::to_string(a) +
                                 ", " + std::to_string(b));
      }
    }
  }
  return mesh;
}

int nearest_node(const Mesh& mesh, const CVector& v) {
  double vnorm2 = v.squaredNorm();
  double best = -1.0;
  int best_idx = 0;
  for (size_t b = 0; b < mesh.points.size(); ++b) {
    double overlap = std::norm(mesh.points[b].vec().dot(v)) / vnorm2;
    if (overlap > best) {
      best = overlap;
      best_idx = static_cast<int>(b);
    }
  }
  return best_idx;
}

KernelPlan build_plan(const Instrument& ins, const Mesh& mesh, const Observable& h) {
  if (mesh.points.empty()) throw std::invalid_argument("build_plan: empty mesh");
  if (mesh.dim != ins.dim) throw DimensionMismatch("build_plan: mesh/instrument dim mismatch");
  KernelPlan plan;
  plan.n_nodes = static_cast<int>(mesh.points.size());
  plan.n_atoms = static_cast<int>(ins.atoms.size());
  plan.entries.resize(static_cast<size_t>(plan.n_nodes) * plan.n_atoms);
  for (int a = 0; a < plan.n_nodes; ++a) {
    for (int i = 0; i < plan.n_atoms; ++i) {
      KernelPlan::Entry entry;
      CVector image = ins.atoms[static_cast<size_t>(i)].matrix * mesh.points[static_cast<size_t>(a)].vec();
      double norm = image.norm();
      if (norm > 1e-300) {
        entry.target = nearest_node(mesh, image);
        entry.base_weight = ins.atoms[static_cast<size_t>(i)].weight * norm * norm;
        entry.log_norm = std::log(norm);
        entry.h_val = h.is_zero() ? 0.0 : h.eval_vec(image);
      }
      plan.entries[static_cast<size_t>(a) * plan.n_atoms + i] = entry;
    }
  }
  return plan;
}

namespace {

double tilt_factor(const KernelPlan::Entry& e, const Tilt& tilt) {
  if (std::holds_alternative<TiltNone>(tilt)) return 1.0;
  if (const auto* obs = std::get_if<TiltObservable>(&tilt)) {
    return std::exp(obs->theta * e.h_val);
  }
  const auto& lyap = std::get<TiltLyapunov>(tilt);
  return std::exp(lyap.s * e.log_norm);
}

void check_tilt_domain(const Tilt& tilt, const TiltDomain& domain) {
  if (const auto* lyap = std::get_if<TiltLyapunov>(&tilt)) {
    if (!(lyap->s > domain.s_min && lyap->s < domain.s_max)) {
      throw std::invalid_argument("tilt parameter s outside (" +
                                  std::to_string(domain.s_min) + ", " +
                                  std::to_string(domain.s_max) + ")");
    }
  }
}

}  // namespace

DiscretizedKernel::DiscretizedKernel(const KernelPlan& plan, const Tilt& tilt,
                                     const TiltDomain& domain)
    : n_(plan.n_nodes), n_atoms_(plan.n_atoms), tilt_(tilt) {
  check_tilt_domain(tilt, domain);
  targets_.resize(plan.entries.size());
  weights_.resize(plan.entries.size());
  for (size_t idx = 0; idx < plan.entries.size(); ++idx) {
    const auto& e = plan.entries[idx];
    targets_[idx] = e.target;
    weights_[idx] = e.target >= 0 ? e.base_weight * tilt_factor(e, tilt) : 0.0;
  }
}

void DiscretizedKernel::apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  out.resize(n_);
  size_t idx = 0;
  for (int a = 0; a < n_; ++a) {
    double acc = 0.0;
    for (int i = 0; i < n_atoms_; ++i, ++idx) {
      if (targets_[idx] >= 0) acc += weights_[idx] * in[targets_[idx]];
    }
    out[a] = acc;
  }
}

Eigen::VectorXd DiscretizedKernel::row_sums() const {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(n_);
  size_t idx = 0;
  for (int a = 0; a < n_; ++a) {
    for (int i = 0; i < n_atoms_; ++i, ++idx) {
      if (targets_[idx] >= 0) sums[a] += weights_[idx];
    }
  }
  return sums;
}

Eigen::MatrixXd DiscretizedKernel::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
  size_t idx = 0;
  for (int a = 0; a < n_; ++a) {
    for (int i = 0; i < n_atoms_; ++i, ++idx) {
      if (targets_[idx] >= 0) m(a, targets_[idx]) += weights_[idx];
    }
  }
  return m;
}

DiscretizedKernel discretize(const Instrument& ins, const Mesh& mesh, const Tilt& tilt,
                             const Observable& h, const TiltDomain& domain) {
  return DiscretizedKernel(build_plan(ins, mesh, h), tilt, domain);
}

namespace {

std::vector<Complex> sorted_by_modulus(const Eigen::VectorXcd& values) {
  std::vector<Complex> out(values.data(), values.data() + values.size());
  std::sort(out.begin(), out.end(),
            [](const Complex& a, const Complex& b) { return std::abs(a) > std::abs(b); });
  return out;
}

SpectrumReport report_from(const std::vector<Complex>& sorted, int count, double gap_tol) {
  SpectrumReport report;
  for (int i = 0; i < count && i < static_cast<int>(sorted.size()); ++i) {
    report.eigenvalues.push_back(sorted[static_cast<size_t>(i)]);
  }
  double top = std::abs(sorted[0]);
  report.spectral_gap = sorted.size() > 1 ? 1.0 - std::abs(sorted[1]) / top : 1.0;
  for (const Complex& ev : sorted) {
    if (std::abs(ev) > (1.0 - gap_tol) * top) ++report.period_estimate;
  }
  return report;
}

// Block subspace iteration with Rayleigh-Ritz extraction; handles complex
// pairs through the small projected eigenproblem.
std::vector<Complex> subspace_eigenvalues(const DiscretizedKernel& kernel, int count) {
  const int n = kernel.size();
  const int block = std::min(n, std::max(count + 5, 8));
  CounterRng rng(0x1905u, 7);
  Eigen::MatrixXd x(n, block);
  for (int j = 0; j < block; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal();
  }
  x.col(0).setOnes();  // seed the Perron direction
  Eigen::VectorXd in(n), out(n);
  std::vector<Complex> previous(static_cast<size_t>(count), Complex(0.0, 0.0));
  const int max_iters = 20000;
  for (int iter = 0; iter < max_iters; ++iter) {
    for (int j = 0; j < block; ++j) {
      in = x.col(j);
      kernel.apply(in, out);
      x.col(j) = out;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    x = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    if (iter % 5 != 4) continue;
    Eigen::MatrixXd kx(n, block);
    for (int j = 0; j < block; ++j) {
      in = x.col(j);
      kernel.apply(in, out);
      kx.col(j) = out;
    }
    Eigen::MatrixXd small = x.transpose() * kx;
    Eigen::EigenSolver<Eigen::MatrixXd> es(small);
    auto ritz = sorted_by_modulus(es.eigenvalues());
    double drift = 0.0;
    for (int i = 0; i < count && i < static_cast<int>(ritz.size()); ++i) {
      drift = std::max(drift, std::abs(ritz[static_cast<size_t>(i)] -
                                       previous[static_cast<size_t>(i)]));
      previous[static_cast<size_t>(i)] = ritz[static_cast<size_t>(i)];
    }
    double scale = std::max(1e-30, std::abs(ritz[0]));
    if (drift < 1e-10 * scale) return ritz;
  }
  throw IterationFailure("leading_spectrum: subspace iteration did not converge");
}

}  // namespace

SpectrumReport leading_spectrum(const DiscretizedKernel& kernel, int count,
                                double gap_tol, int dense_cutoff) {
  if (count < 1 || count > 10) {
    throw std::invalid_argument("leading_spectrum: count must lie in [1, 10]");
  }
  if (kernel.size() <= dense_cutoff) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(kernel.dense());
    if (es.info() != Eigen::Success) {
      throw IterationFailure("leading_spectrum: dense eigensolver failed");
    }
    return report_from(sorted_by_modulus(es.eigenvalues()), count, gap_tol);
  }
  return report_from(subspace_eigenvalues(kernel, count), count, gap_tol);
}

double perron_root(const DiscretizedKernel& kernel, double tol) {
  const int n = kernel.size();
  // shift kills peripheral rotation so the Perron direction dominates strictly
  double shift = kernel.row_sums().maxCoeff();
  if (!(shift > 0.0)) return 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd kx(n);
  double rayleigh = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    kernel.apply(x, kx);
    kx += shift * x;
    double next = x.dot(kx);  // x is unit
    double norm = kx.norm();
    if (!(norm > 0.0)) return 0.0;
    x = kx / norm;
    if (iter > 0 && std::abs(next - rayleigh) <= tol * std::abs(next)) {
      return next - shift;
    }
    rayleigh = next;
  }
  throw IterationFailure("perron_root: power iteration did not converge");
}

std::vector<std::pair<double, double>> scgf_curve(const KernelPlan& plan,
                                                  TiltFamily family,
                                                  const std::vector<double>& grid,
                                                  const TiltDomain& domain) {
  std::vector<std::pair<double, double>> curve;
  curve.reserve(grid.size());
  for (double param : grid) {
    Tilt tilt = family == TiltFamily::Observable ? Tilt(TiltObservable{param})
                                                 : Tilt(TiltLyapunov{param});
    DiscretizedKernel kernel(plan, tilt, domain);
    curve.emplace_back(param, std::log(perron_root(kernel)));
  }
  return curve;
}

double holder_seminorm(const Mesh& mesh, const Eigen::VectorXd& f, double alpha) {
  const int n = static_cast<int>(mesh.points.size());
  if (f.size() != n) throw DimensionMismatch("holder_seminorm: size mismatch");
  if (n < 2) throw std::invalid_argument("holder_seminorm: need at least two nodes");
  double best = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      double d = metric_d(mesh.points[static_cast<size_t>(a)], mesh.points[static_cast<size_t>(b)]);
      if (d <= 0.0) continue;
      best = std::max(best, std::abs(f[a] - f[b]) / std::pow(d, alpha));
    }
  }
  return best;
}

GammaSeriesResult gamma_series_check(const KernelPlan& plan, Complex z, Complex w,
                                     int n_terms, const Eigen::VectorXcd& f,
                                     const TiltDomain& domain) {
  auto in_strip = [&](Complex value) {
    return value.real() > domain.s_min && value.real() < domain.s_max;
  };
  if (!in_strip(z) || !in_strip(z + w)) {
    throw std::invalid_argument("gamma_series_check: Re(z), Re(z+w) must stay in the strip");
  }
  if (f.size() != plan.n_nodes) {
    throw DimensionMismatch("gamma_series_check: f size mismatch");
  }
  const int n_nodes = plan.n_nodes;
  GammaSeriesResult result;
  result.direct.resize(n_nodes);
  result.truncated = Eigen::VectorXcd::Zero(n_nodes);

  // direct: Gamma_{z+w} f
  for (int a = 0; a < n_nodes; ++a) {
    Complex acc = 0.0;
    for (int i = 0; i < plan.n_atoms; ++i) {
      const auto& e = plan.at(a, i);
      if (e.target < 0) continue;
      acc += e.base_weight * std::exp((z + w) * e.log_norm) * f[e.target];
    }
    result.direct[a] = acc;
  }

  // partial sums of sum_n w^n/n! Gamma_n^z f
  Complex coeff = 1.0;
  for (int term = 0; term <= n_terms; ++term) {
    if (term > 0) coeff *= w / static_cast<double>(term);
    for (int a = 0; a < n_nodes; ++a) {
      Complex acc = 0.0;
      for (int i = 0; i < plan.n_atoms; ++i) {
        const auto& e = plan.at(a, i);
        if (e.target < 0) continue;
        acc += e.base_weight * std::pow(e.log_norm, static_cast<double>(term)) *
               std::exp(z * e.log_norm) * f[e.target];
      }
      result.truncated[a] += coeff * acc;
    }
    result.errors.push_back((result.direct - result.truncated).cwiseAbs().maxCoeff());
  }
  return result;
}

}  // namespace qtraj
