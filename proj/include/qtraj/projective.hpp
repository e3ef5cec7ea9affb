#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <stdexcept>

namespace qtraj {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A point of P(C^k), stored as the unit representative whose first
/// coordinate of modulus > 1e-12 is real positive. The canonical form makes
/// equality and mesh hashing well defined.
class ProjectivePoint {
 public:
  static constexpr double kPhaseThreshold = 1e-12;

  explicit ProjectivePoint(CVector v);

  int dim() const { return static_cast<int>(rep_.size()); }
  const CVector& vec() const { return rep_; }

  /// Standard basis class e_j.
  static ProjectivePoint basis(int k, int j);

 private:
  CVector rep_;
};

/// d(x,y) = sqrt(1 - |<x,y>|^2). Equals ||x^y|| and (1/2)||pi_x - pi_y||_1.
double metric_d(const ProjectivePoint& a, const ProjectivePoint& b);

struct ActResult {
  ProjectivePoint point;
  double norm;  // ||A x|| for the unit representative x
};

/// Class of A x, canonicalized. Null image (||Ax|| <= 1e-300) yields nullopt;
/// kernel integrands treat that branch as a zero contribution.
std::optional<ActResult> act(const CMatrix& a, const ProjectivePoint& x);

/// Rank-one orthogonal projector x x*.
CMatrix projector(const ProjectivePoint& x);

/// Largest singular value.
double op_norm(const CMatrix& a);

/// Pairs (i,j), i<j, in lexicographic order: the wedge basis e_i^e_j.
std::vector<std::pair<int, int>> wedge_pairs(int k);

/// Second compound matrix: entries are 2x2 minors of A, so that
/// wedge2(A) * wedge_vec(x, y) == wedge_vec(A x, A y).
CMatrix wedge2(const CMatrix& a);

/// Coordinates of x^y in the lexicographic basis: x_i y_j - x_j y_i.
CVector wedge_vec(const CVector& x, const CVector& y);

}  // namespace qtraj
