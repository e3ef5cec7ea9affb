#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qtraj/projective.hpp"
#include "qtraj/rng.hpp"

using namespace qtraj;

namespace {

CVector random_vector(CounterRng& rng, int k) {
  CVector v(k);
  for (int i = 0; i < k; ++i) v[i] = Complex(rng.normal(), rng.normal());
  return v;
}

CMatrix random_matrix(CounterRng& rng, int k) {
  CMatrix m(k, k);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) m(r, c) = Complex(rng.normal(), rng.normal());
  }
  return m;
}

double trace_norm(const CMatrix& m) {
  return m.jacobiSvd().singularValues().sum();
}

}  // namespace

TEST_CASE("canonical representative") {
  CVector v(2);
  v << Complex(0.0, 0.0), Complex(0.0, -3.0);
  ProjectivePoint p(v);
  CHECK(std::abs(p.vec()[1].imag()) < 1e-14);
  CHECK(p.vec()[1].real() == doctest::Approx(1.0));
  CHECK(p.vec().norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(ProjectivePoint(CVector::Zero(3)), std::invalid_argument);
}

TEST_CASE("metric examples") {
  auto e0 = ProjectivePoint::basis(2, 0);
  auto e1 = ProjectivePoint::basis(2, 1);
  CHECK(metric_d(e0, e0) == doctest::Approx(0.0));
  CHECK(metric_d(e0, e1) == doctest::Approx(1.0));
  CVector mid(2);
  mid << 1.0, 1.0;
  CHECK(metric_d(e0, ProjectivePoint(mid)) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(metric_d(e0, ProjectivePoint::basis(3, 0)), DimensionMismatch);
}

TEST_CASE("metric is phase invariant") {
  CounterRng rng(11, 0);
  for (int trial = 0; trial < 50; ++trial) {
    CVector v = random_vector(rng, 3);
    CVector w = v * std::polar(2.5, rng.uniform() * 6.28);
    // sqrt(1 - |<x,y>|^2) resolves same-class pairs only to sqrt(eps)
    CHECK(metric_d(ProjectivePoint(v), ProjectivePoint(w)) < 1e-7);
  }
}

TEST_CASE("act examples") {
  auto e0 = ProjectivePoint::basis(2, 0);
  auto e1 = ProjectivePoint::basis(2, 1);
  auto r = act(CMatrix::Identity(2, 2), e0);
  REQUIRE(r.has_value());
  CHECK(metric_d(r->point, e0) == doctest::Approx(0.0));
  CHECK(r->norm == doctest::Approx(1.0));

  CMatrix projector01(2, 2);
  projector01 << 1.0, 0.0, 0.0, 0.0;
  CHECK_FALSE(act(projector01, e1).has_value());

  CMatrix flip(2, 2);
  flip << 0.0, 1.0, 1.0, 0.0;
  auto flipped = act(flip, e0);
  REQUIRE(flipped.has_value());
  CHECK(metric_d(flipped->point, e1) == doctest::Approx(0.0));
}

TEST_CASE("wedge2 small cases") {
  CHECK(wedge2(CMatrix::Identity(2, 2))(0, 0) == Complex(1.0, 0.0));
  CMatrix d(2, 2);
  d << Complex(2.0, 1.0), 0.0, 0.0, Complex(0.0, 3.0);
  CHECK(wedge2(d)(0, 0) == Complex(2.0, 1.0) * Complex(0.0, 3.0));
  CHECK_THROWS_AS(wedge2(CMatrix::Identity(1, 1)), std::invalid_argument);
}

TEST_CASE("wedge2 functorial on random 3x3") {
  CounterRng rng(7, 0);
  for (int trial = 0; trial < 30; ++trial) {
    CMatrix a = random_matrix(rng, 3);
    CVector x = random_vector(rng, 3);
    CVector y = random_vector(rng, 3);
    CVector lhs = wedge2(a) * wedge_vec(x, y);
    CVector rhs = wedge_vec(a * x, a * y);
    CHECK((lhs - rhs).norm() < 1e-10 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("wedge norm bound") {
  CounterRng rng(8, 0);
  for (int trial = 0; trial < 20; ++trial) {
    CMatrix a = random_matrix(rng, 4);
    CHECK(op_norm(wedge2(a)) <= op_norm(a) * op_norm(a) * (1.0 + 1e-12));
  }
}

TEST_CASE("projector examples") {
  auto e0 = ProjectivePoint::basis(3, 0);
  CMatrix p = projector(e0);
  CHECK((p - CMatrix::Identity(3, 3).col(0) * CMatrix::Identity(3, 3).col(0).adjoint())
            .norm() == doctest::Approx(0.0));
  CounterRng rng(9, 0);
  for (int trial = 0; trial < 20; ++trial) {
    CVector v = random_vector(rng, 3);
    CMatrix q = projector(ProjectivePoint(v));
    CHECK(q.trace().real() == doctest::Approx(1.0));
    CHECK((q * q - q).norm() < 1e-12);
    CHECK((q - q.adjoint()).norm() < 1e-12);
    // gauge invariance
    CMatrix q2 = projector(ProjectivePoint(v * std::polar(1.7, 2.0)));
    CHECK((q - q2).norm() < 1e-12);
  }
}

TEST_CASE("op_norm examples") {
  CHECK(op_norm(CMatrix::Identity(4, 4)) == doctest::Approx(1.0));
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  CHECK(op_norm(d) == doctest::Approx(3.0));
  CounterRng rng(10, 0);
  for (int trial = 0; trial < 30; ++trial) {
    CMatrix a = random_matrix(rng, 3);
    CMatrix b = random_matrix(rng, 3);
    CHECK(op_norm(a * b) <= op_norm(a) * op_norm(b) * (1.0 + 1e-12));
  }
}

TEST_CASE("metric consistency across the three formulas") {
  CounterRng rng(12, 0);
  for (int trial = 0; trial < 100; ++trial) {
    int k = 2 + static_cast<int>(rng.uniform() * 3);
    ProjectivePoint a(random_vector(rng, k));
    ProjectivePoint b(random_vector(rng, k));
    double d = metric_d(a, b);
    double wedge_norm = wedge_vec(a.vec(), b.vec()).norm();
    double tn = 0.5 * trace_norm(projector(a) - projector(b));
    CHECK(std::abs(d - wedge_norm) < 1e-10);
    CHECK(std::abs(d - tn) < 1e-10);
  }
}

TEST_CASE("squared norm is 2||A||^2 Lipschitz") {
  CounterRng rng(13, 0);
  for (int trial = 0; trial < 100; ++trial) {
    CMatrix a = random_matrix(rng, 3);
    ProjectivePoint x(random_vector(rng, 3));
    ProjectivePoint y(random_vector(rng, 3));
    double lhs = std::abs((a * x.vec()).squaredNorm() - (a * y.vec()).squaredNorm());
    double bound = 2.0 * op_norm(a) * op_norm(a) * metric_d(x, y);
    CHECK(lhs <= bound * (1.0 + 1e-10) + 1e-12);
  }
}

TEST_CASE("contraction identity under the action") {
  CounterRng rng(14, 0);
  for (int trial = 0; trial < 100; ++trial) {
    CMatrix a = random_matrix(rng, 3);
    ProjectivePoint x(random_vector(rng, 3));
    ProjectivePoint y(random_vector(rng, 3));
    auto ax = act(a, x);
    auto ay = act(a, y);
    REQUIRE(ax.has_value());
    REQUIRE(ay.has_value());
    double lhs = metric_d(ax->point, ay->point);
    double rhs = (wedge2(a) * wedge_vec(x.vec(), y.vec())).norm() / (ax->norm * ay->norm);
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}
