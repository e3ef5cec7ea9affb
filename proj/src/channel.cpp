#include "qtraj/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qtraj/rng.hpp"

namespace qtraj {

CMatrix phi_apply(const Instrument& ins, const CMatrix& x, bool adjoint) {
  if (x.rows() != ins.dim || x.cols() != ins.dim) {
    throw DimensionMismatch("phi_apply: dimension mismatch");
  }
  CMatrix out = CMatrix::Zero(ins.dim, ins.dim);
  for (const auto& atom : ins.atoms) {
    if (adjoint) {
      out += atom.weight * (atom.matrix * x * atom.matrix.adjoint());
    } else {
      out += atom.weight * (atom.matrix.adjoint() * x * atom.matrix);
    }
  }
  return out;
}

CVector vec_matrix(const CMatrix& x) {
  return Eigen::Map<const CVector>(x.data(), x.size());
}

CMatrix unvec_matrix(const CVector& v, int k) {
  return Eigen::Map<const CMatrix>(v.data(), k, k);
}

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace

Superoperator superoperator_matrix(const Instrument& ins, bool adjoint) {
  const int k = ins.dim;
  if (k * k > 256) {
    throw std::invalid_argument("superoperator_matrix: k^2 > 256 exceeds desk scale");
  }
  Superoperator s;
  s.dim = k;
  s.adjoint = adjoint;
  s.mat = CMatrix::Zero(k * k, k * k);
  // vec(A X B) = (B^T kron A) vec(X), column-major
  for (const auto& atom : ins.atoms) {
    const CMatrix& v = atom.matrix;
    if (adjoint) {
      s.mat += atom.weight * kron(v.conjugate(), v);
    } else {
      s.mat += atom.weight * kron(v.transpose(), v.adjoint());
    }
  }
  return s;
}

namespace {

// Hermitian part, trace-normalized to 1 with sign fixed by the trace.
CMatrix state_from_eigenvector(const CVector& z, int k) {
  CMatrix m = unvec_matrix(z, k);
  CMatrix h = 0.5 * (m + m.adjoint());
  CMatrix a = Complex(0.0, 0.5) * (m - m.adjoint());
  if (a.norm() > h.norm()) h = a;
  double tr = h.trace().real();
  if (std::abs(tr) < 1e-14) {
    throw std::runtime_error("invariant state extraction: traceless fixed point");
  }
  return h / tr;
}

// Orthonormal basis of the eigenspace above cutoff * (largest eigenvalue).
CMatrix support_basis(const CMatrix& rho, double cutoff) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
  const auto& vals = es.eigenvalues();
  double top = vals.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] > cutoff * top) keep.push_back(i);
  }
  CMatrix basis(rho.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t c = 0; c < keep.size(); ++c) {
    basis.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]);
  }
  return basis;
}

}  // namespace

ErgReport erg_check(const Instrument& ins, double tol) {
  Superoperator s = superoperator_matrix(ins, /*adjoint=*/true);
  Eigen::ComplexEigenSolver<CMatrix> es(s.mat);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("erg_check: eigensolver failed");
  }
  ErgReport report;
  std::vector<Eigen::Index> fixed;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()[i] - 1.0) <= 10.0 * tol) fixed.push_back(i);
  }
  report.fixed_space_dim = static_cast<int>(fixed.size());
  report.holds = report.fixed_space_dim == 1;
  if (report.holds) {
    report.invariant_state = state_from_eigenvector(es.eigenvectors().col(fixed[0]), ins.dim);
    report.e_basis = support_basis(report.invariant_state, tol);
  }
  return report;
}

namespace {

struct Peripheral {
  std::vector<Complex> values;
  std::vector<CVector> vectors;
};

Peripheral peripheral_eigenpairs(const CMatrix& superop, double tol) {
  Eigen::ComplexEigenSolver<CMatrix> es(superop);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("period_and_cycles: eigensolver failed");
  }
  Peripheral p;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()[i]) > 1.0 - 10.0 * tol) {
      p.values.push_back(es.eigenvalues()[i]);
      p.vectors.push_back(es.eigenvectors().col(i));
    }
  }
  return p;
}

void check_roots_of_unity(const std::vector<Complex>& values, double tol) {
  const int m = static_cast<int>(values.size());
  double match_tol = std::max(1e4 * tol, 1e-8);
  std::vector<bool> used(m, false);
  for (int l = 0; l < m; ++l) {
    Complex root = std::polar(1.0, 2.0 * std::numbers::pi * l / m);
    int hits = 0;
    for (int i = 0; i < m; ++i) {
      if (std::abs(values[i] - root) < match_tol) {
        if (used[i]) {
          throw NonSimplePeripheral("period_and_cycles: repeated peripheral eigenvalue near root " +
                                    std::to_string(l));
        }
        used[i] = true;
        ++hits;
      }
    }
    if (hits == 0) {
      throw PeripheralNotRoots("period_and_cycles: peripheral eigenvalues are not the " +
                               std::to_string(m) + "-th roots of unity");
    }
    if (hits > 1) {
      throw NonSimplePeripheral("period_and_cycles: peripheral root of unity is not simple");
    }
  }
}

// Riesz projector onto the span of the listed eigenvectors, via left rows of
// the full eigenvector inverse.
CMatrix riesz_projector(const CMatrix& superop, double tol) {
  Eigen::ComplexEigenSolver<CMatrix> es(superop);
  const CMatrix& v = es.eigenvectors();
  CMatrix vinv = v.inverse();
  CMatrix proj = CMatrix::Zero(superop.rows(), superop.cols());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()[i]) > 1.0 - 10.0 * tol) {
      proj += v.col(i) * vinv.row(i);
    }
  }
  return proj;
}

// lim_j T^{2^j} by repeated squaring with a stagnation stop.
CMatrix power_limit(CMatrix t, double tol) {
  for (int iter = 0; iter < 64; ++iter) {
    CMatrix next = t * t;
    double diff = (next - t).cwiseAbs().maxCoeff();
    t = std::move(next);
    if (diff < tol) return t;
  }
  throw std::runtime_error("period_and_cycles: power limit did not converge");
}

}  // namespace

CycleDecomposition period_and_cycles(const Instrument& ins, double tol) {
  ErgReport erg = erg_check(ins, tol);
  if (!erg.holds) {
    throw std::runtime_error("period_and_cycles: (Erg) does not hold (fixed space dim " +
                             std::to_string(erg.fixed_space_dim) + ")");
  }
  const int k = ins.dim;
  Superoperator s_adj = superoperator_matrix(ins, /*adjoint=*/true);
  Peripheral per = peripheral_eigenpairs(s_adj.mat, tol);
  const int m = static_cast<int>(per.values.size());
  check_roots_of_unity(per.values, tol);

  CycleDecomposition cd;
  cd.period = m;

  // Random Hermitian element of span{rho_r}: its eigenvectors lie inside
  // single cyclic subspaces, which seeds the extraction of one rho_r.
  CounterRng rng(0x9d2c5680u, 0);
  CVector combo = CVector::Zero(k * k);
  for (int l = 0; l < m; ++l) {
    combo += Complex(rng.normal(), rng.normal()) * per.vectors[static_cast<size_t>(l)];
  }
  CMatrix h = unvec_matrix(combo, k);
  h = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> hes(h);
  Eigen::Index seed_idx = 0;
  hes.eigenvalues().cwiseAbs().maxCoeff(&seed_idx);
  CVector u = hes.eigenvectors().col(seed_idx);

  CMatrix proj = riesz_projector(s_adj.mat, tol);
  CMatrix seed = u * u.adjoint();
  CMatrix rho0 = unvec_matrix(proj * vec_matrix(seed), k);
  rho0 = 0.5 * (rho0 + rho0.adjoint());
  double tr = rho0.trace().real();
  if (!(std::abs(tr) > 1e-10)) {
    throw std::runtime_error("period_and_cycles: degenerate cycle seed");
  }
  rho0 /= tr;

  cd.rho.resize(static_cast<size_t>(m));
  cd.rho[0] = rho0;
  for (int r = 1; r < m; ++r) {
    cd.rho[static_cast<size_t>(r)] = phi_apply(ins, cd.rho[static_cast<size_t>(r - 1)], true);
  }

  // Start the cycle at the subspace closest to e_0, keeping the cyclic order.
  int start = 0;
  double best = -1.0;
  for (int r = 0; r < m; ++r) {
    double overlap = cd.rho[static_cast<size_t>(r)](0, 0).real();
    if (overlap > best) {
      best = overlap;
      start = r;
    }
  }
  std::rotate(cd.rho.begin(), cd.rho.begin() + start, cd.rho.end());

  cd.e_bases.resize(static_cast<size_t>(m));
  for (int r = 0; r < m; ++r) {
    cd.e_bases[static_cast<size_t>(r)] = support_basis(cd.rho[static_cast<size_t>(r)], tol);
  }

  // M_r = lim Phi^{mn}(P_{E_r}) through the power limit of the Phi^m matrix.
  Superoperator s_phi = superoperator_matrix(ins, /*adjoint=*/false);
  CMatrix phi_m = CMatrix::Identity(k * k, k * k);
  for (int i = 0; i < m; ++i) phi_m = s_phi.mat * phi_m;
  CMatrix phi_limit = power_limit(phi_m, tol);

  cd.m_ops.resize(static_cast<size_t>(m));
  for (int r = 0; r < m; ++r) {
    const CMatrix& basis = cd.e_bases[static_cast<size_t>(r)];
    CMatrix p_er = basis * basis.adjoint();
    CMatrix mr = unvec_matrix(phi_limit * vec_matrix(p_er), k);
    cd.m_ops[static_cast<size_t>(r)] = 0.5 * (mr + mr.adjoint());
  }
  return cd;
}

QuadraticObservable peripheral_eigenfunction(const CycleDecomposition& cd, int l) {
  if (l < 0 || l >= cd.period) {
    throw std::out_of_range("peripheral_eigenfunction: l out of range");
  }
  const int m = cd.period;
  CMatrix a = CMatrix::Zero(cd.m_ops[0].rows(), cd.m_ops[0].cols());
  for (int r = 0; r < m; ++r) {
    // one-based r in the phase, matching f_l = sum_r e^{i 2 pi r l / m} <x, M_r x>
    a += std::polar(1.0, 2.0 * std::numbers::pi * l * (r + 1) / m) *
         cd.m_ops[static_cast<size_t>(r)];
  }
  return QuadraticObservable{std::move(a)};
}

CMatrix pi_on_quadratic(const Instrument& ins, const CMatrix& a) {
  return phi_apply(ins, a, /*adjoint=*/false);
}

}  // namespace qtraj
