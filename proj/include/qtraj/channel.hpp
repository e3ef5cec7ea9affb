#pragma once

#include "qtraj/instrument.hpp"

namespace qtraj {

/// Phi(X) = sum w v* X v (unital); adjoint Phi*(X) = sum w v X v*
/// (trace-preserving, acts on states).
CMatrix phi_apply(const Instrument& ins, const CMatrix& x, bool adjoint);

/// Dense k^2 x k^2 matrix acting on column-major vec(X).
struct Superoperator {
  int dim = 0;  // k
  bool adjoint = false;
  CMatrix mat;  // k^2 x k^2
};

Superoperator superoperator_matrix(const Instrument& ins, bool adjoint);

CVector vec_matrix(const CMatrix& x);
CMatrix unvec_matrix(const CVector& v, int k);

struct ErgReport {
  bool holds = false;
  int fixed_space_dim = 0;
  CMatrix e_basis;          // orthonormal columns spanning E (when holds)
  CMatrix invariant_state;  // rho_inf (when holds)
};

/// Decides (Erg) via dim fix(Phi*) = 1; when it holds, also extracts the
/// invariant state and the support E.
ErgReport erg_check(const Instrument& ins, double tol = 1e-9);

struct PeripheralNotRoots : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonSimplePeripheral : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Peripheral structure of the channel: period m, cyclic subspaces E_r,
/// limit operators M_r = lim Phi^{mn}(P_{E_r}) and cycling states rho_r.
/// Indices are zero-based; r and r+1 are understood mod m. Contracts:
///   sum_r m_ops[r] = Id,        Phi(m_ops[r]) = m_ops[r-1],
///   m_ops[r] P_{E_r} = P_{E_r}, m_ops[r] P_{E_r'} = 0 (r' != r),
///   Phi*(rho[r]) = rho[r+1],    supports of rho[r] pairwise orthogonal.
struct CycleDecomposition {
  int period = 1;
  std::vector<CMatrix> e_bases;
  std::vector<CMatrix> m_ops;
  std::vector<CMatrix> rho;
};

CycleDecomposition period_and_cycles(const Instrument& ins, double tol = 1e-9);

/// f_A(x) = <x, A x>; phase-gauge invariant. Complex-valued for
/// non-Hermitian A (the peripheral eigenfunctions use complex combinations).
struct QuadraticObservable {
  CMatrix matrix;

  Complex eval(const ProjectivePoint& x) const {
    return x.vec().dot(matrix * x.vec());
  }
  double eval_real(const ProjectivePoint& x) const { return eval(x).real(); }
};

/// f_l(x) = sum_r e^{i 2 pi r l / m} <x, M_r x>; satisfies
/// Pi f_l = e^{i 2 pi l / m} f_l exactly.
QuadraticObservable peripheral_eigenfunction(const CycleDecomposition& cd, int l);

/// Pi maps f_A to f_{Phi(A)} exactly; this returns Phi(A).
CMatrix pi_on_quadratic(const Instrument& ins, const CMatrix& a);

}  // namespace qtraj
