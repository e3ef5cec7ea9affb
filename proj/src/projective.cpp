#include "qtraj/projective.hpp"

#include <cmath>

namespace qtraj {

namespace {

void canonicalize(CVector& v) {
  double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("ProjectivePoint: zero or non-finite vector");
  }
  v /= n;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    double m = std::abs(v[j]);
    if (m > ProjectivePoint::kPhaseThreshold) {
      v *= std::conj(v[j]) / m;
      // renormalize once more so ||x|| = 1 holds to machine precision
      v /= v.norm();
      return;
    }
  }
  throw std::invalid_argument("ProjectivePoint: all coordinates below phase threshold");
}

}  // namespace

ProjectivePoint::ProjectivePoint(CVector v) : rep_(std::move(v)) {
  canonicalize(rep_);
}

ProjectivePoint ProjectivePoint::basis(int k, int j) {
  CVector v = CVector::Zero(k);
  v[j] = 1.0;
  return ProjectivePoint(std::move(v));
}

double metric_d(const ProjectivePoint& a, const ProjectivePoint& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("metric_d: dimension mismatch");
  }
  double overlap = std::norm(a.vec().dot(b.vec()));
  double d2 = 1.0 - overlap;
  if (d2 < 0.0) d2 = 0.0;
  if (d2 > 1.0) d2 = 1.0;
  return std::sqrt(d2);
}

std::optional<ActResult> act(const CMatrix& a, const ProjectivePoint& x) {
  if (a.cols() != x.dim()) {
    throw DimensionMismatch("act: dimension mismatch");
  }
  CVector image = a * x.vec();
  double n = image.norm();
  if (!(n > 1e-300)) {
    return std::nullopt;
  }
  return ActResult{ProjectivePoint(std::move(image)), n};
}

CMatrix projector(const ProjectivePoint& x) {
  return x.vec() * x.vec().adjoint();
}

double op_norm(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  return a.jacobiSvd().singularValues()(0);
}

std::vector<std::pair<int, int>> wedge_pairs(int k) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<size_t>(k) * (k - 1) / 2);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

CMatrix wedge2(const CMatrix& a) {
  const int k = static_cast<int>(a.rows());
  if (k < 2 || a.cols() != k) {
    throw std::invalid_argument("wedge2: need a square matrix with k >= 2");
  }
  auto pairs = wedge_pairs(k);
  const int kw = static_cast<int>(pairs.size());
  CMatrix w(kw, kw);
  for (int row = 0; row < kw; ++row) {
    auto [p, q] = pairs[row];
    for (int col = 0; col < kw; ++col) {
      auto [i, j] = pairs[col];
      w(row, col) = a(p, i) * a(q, j) - a(p, j) * a(q, i);
    }
  }
  return w;
}

CVector wedge_vec(const CVector& x, const CVector& y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("wedge_vec: dimension mismatch");
  }
  auto pairs = wedge_pairs(static_cast<int>(x.size()));
  CVector w(static_cast<Eigen::Index>(pairs.size()));
  for (size_t idx = 0; idx < pairs.size(); ++idx) {
    auto [i, j] = pairs[idx];
    w[static_cast<Eigen::Index>(idx)] = x[i] * y[j] - x[j] * y[i];
  }
  return w;
}

}  // namespace qtraj
