#pragma once

#include <cstdint>
#include <variant>

#include "qtraj/instrument.hpp"
#include "qtraj/sampler.hpp"

namespace qtraj {

enum class MeshKind { Fibonacci, Haar };

/// Collocation nodes on P(C^k). Fibonacci is the spherical Fibonacci lattice
/// pulled back to P(C^2) through the Bloch parametrization (k = 2 only);
/// Haar draws canonicalized complex-normal directions for general k.
struct Mesh {
  int dim = 0;
  MeshKind kind = MeshKind::Haar;
  uint64_t seed = 0;
  std::vector<ProjectivePoint> points;
};

Mesh build_mesh(int k, int n, MeshKind kind, uint64_t seed = 0);

/// Index of the node closest to the class of v (not necessarily unit).
int nearest_node(const Mesh& mesh, const CVector& v);

struct TiltNone {};
struct TiltObservable {
  double theta = 0.0;
};
struct TiltLyapunov {
  double s = 0.0;
};
using Tilt = std::variant<TiltNone, TiltObservable, TiltLyapunov>;

/// Lyapunov tilt domain: variance of near-kernel branches blows up toward
/// s = -2, so the default cap stays inside the strip.
struct TiltDomain {
  double s_min = -1.5;
  double s_max = 50.0;
};

/// Tilt-independent assembly data: image node, base weight w ||vx||^2,
/// log ||vx|| and h at the image, per (node, atom). target < 0 marks a null
/// image (zero contribution).
struct KernelPlan {
  int n_nodes = 0;
  int n_atoms = 0;
  struct Entry {
    int32_t target = -1;
    double base_weight = 0.0;
    double log_norm = 0.0;
    double h_val = 0.0;
  };
  std::vector<Entry> entries;  // entry (a, i) at a * n_atoms + i

  const Entry& at(int a, int i) const {
    return entries[static_cast<size_t>(a) * static_cast<size_t>(n_atoms) +
                   static_cast<size_t>(i)];
  }
};

KernelPlan build_plan(const Instrument& ins, const Mesh& mesh,
                      const Observable& h = Observable::zero());

/// Row-sparse nonnegative kernel on the mesh (at most n_atoms entries per
/// row). dense() materializes the N x N matrix.
class DiscretizedKernel {
 public:
  DiscretizedKernel(const KernelPlan& plan, const Tilt& tilt,
                    const TiltDomain& domain = TiltDomain{});

  int size() const { return n_; }
  const Tilt& tilt() const { return tilt_; }

  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;
  Eigen::VectorXd row_sums() const;
  Eigen::MatrixXd dense() const;

 private:
  int n_ = 0;
  int n_atoms_ = 0;
  Tilt tilt_;
  std::vector<int32_t> targets_;
  std::vector<double> weights_;
};

DiscretizedKernel discretize(const Instrument& ins, const Mesh& mesh, const Tilt& tilt,
                             const Observable& h = Observable::zero(),
                             const TiltDomain& domain = TiltDomain{});

struct SpectrumReport {
  std::vector<Complex> eigenvalues;  // sorted by decreasing modulus
  double spectral_gap = 0.0;         // 1 - |lambda_2| / |lambda_1|
  int period_estimate = 0;           // count of |lambda| > 1 - gap_tol
};

struct IterationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense eigensolve for small kernels, block subspace iteration above the
/// cutoff. gap_tol feeds the period estimate.
SpectrumReport leading_spectrum(const DiscretizedKernel& kernel, int count,
                                double gap_tol = 1e-3, int dense_cutoff = 800);

/// Perron root of a nonnegative kernel by shifted power iteration with
/// Rayleigh-quotient stopping at 1e-12 relative change.
double perron_root(const DiscretizedKernel& kernel, double tol = 1e-12);

enum class TiltFamily { Observable, Lyapunov };

/// (parameter, log Perron root) along the grid: Lambda or Upsilon values.
std::vector<std::pair<double, double>> scgf_curve(const KernelPlan& plan,
                                                  TiltFamily family,
                                                  const std::vector<double>& grid,
                                                  const TiltDomain& domain = TiltDomain{});

/// max over node pairs of |f(a) - f(b)| / d(a,b)^alpha.
double holder_seminorm(const Mesh& mesh, const Eigen::VectorXd& f, double alpha);

struct GammaSeriesResult {
  Eigen::VectorXcd direct;     // Gamma_{z+w} f on the mesh
  Eigen::VectorXcd truncated;  // sum_{n<=N} w^n/n! Gamma_n^z f
  std::vector<double> errors;  // sup-norm error after 0..N terms
};

/// Series expansion check: Gamma_{z+w} against the log-moment series in w.
GammaSeriesResult gamma_series_check(const KernelPlan& plan, Complex z, Complex w,
                                     int n_terms, const Eigen::VectorXcd& f,
                                     const TiltDomain& domain = TiltDomain{});

}  // namespace qtraj
