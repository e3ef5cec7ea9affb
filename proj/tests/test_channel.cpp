#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "qtraj/channel.hpp"
#include "qtraj/rng.hpp"

using namespace qtraj;

namespace {

ProjectivePoint random_point(CounterRng& rng, int k) {
  CVector v(k);
  for (int i = 0; i < k; ++i) v[i] = Complex(rng.normal(), rng.normal());
  return ProjectivePoint(v);
}

CMatrix random_hermitian(CounterRng& rng, int k) {
  CMatrix m(k, k);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) m(r, c) = Complex(rng.normal(), rng.normal());
  }
  return 0.5 * (m + m.adjoint());
}

// direct kernel sum: (Pi f_A)(x) = sum_i w_i ||v_i x||^2 f_A(v_i . x)
Complex kernel_sum_quadratic(const Instrument& ins, const CMatrix& a,
                             const ProjectivePoint& x) {
  Complex acc = 0.0;
  for (const auto& atom : ins.atoms) {
    CVector image = atom.matrix * x.vec();
    double norm2 = image.squaredNorm();
    if (norm2 <= 0.0) continue;
    QuadraticObservable f{a};
    acc += atom.weight * norm2 * f.eval(ProjectivePoint(image));
  }
  return acc;
}

}  // namespace

TEST_CASE("phi is unital, phi* is trace preserving") {
  CounterRng rng(31, 0);
  for (const auto& spec : {"ad(0.36)", "pndm(0.3)", "dr(0.3,1.0)"}) {
    Instrument ins = builtin(spec);
    CHECK((phi_apply(ins, CMatrix::Identity(2, 2), false) - CMatrix::Identity(2, 2)).norm() <
          1e-12);
    for (int trial = 0; trial < 20; ++trial) {
      CMatrix x = random_hermitian(rng, 2);
      CMatrix y = phi_apply(ins, x, true);
      CHECK(std::abs((y.trace() - x.trace()).real()) < 1e-12);
    }
  }
}

TEST_CASE("phi* hand values") {
  Instrument pndm = make_pndm(0.3);
  CMatrix diag = CMatrix::Zero(2, 2);
  diag(0, 0) = 2.0;
  diag(1, 1) = 5.0;
  CMatrix swapped = phi_apply(pndm, diag, true);
  CHECK(swapped(0, 0).real() == doctest::Approx(5.0));
  CHECK(swapped(1, 1).real() == doctest::Approx(2.0));

  Instrument ad = make_ad(0.36);
  CMatrix e11 = CMatrix::Zero(2, 2);
  e11(1, 1) = 1.0;
  CMatrix out = phi_apply(ad, e11, true);
  CHECK(out(0, 0).real() == doctest::Approx(0.36));
  CHECK(out(1, 1).real() == doctest::Approx(0.64));
}

TEST_CASE("superoperator matrix consistent with phi_apply") {
  CounterRng rng(32, 0);
  Instrument uni = make_uni(CMatrix::Identity(2, 2));
  CHECK((superoperator_matrix(uni, false).mat - CMatrix::Identity(4, 4)).norm() < 1e-14);

  for (const auto& spec : {"ad(0.36)", "dr(0.3,1.0)"}) {
    Instrument ins = builtin(spec);
    for (bool adjoint : {false, true}) {
      Superoperator s = superoperator_matrix(ins, adjoint);
      for (int trial = 0; trial < 100; ++trial) {
        CMatrix x(2, 2);
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c) x(r, c) = Complex(rng.normal(), rng.normal());
        CMatrix via_matrix = unvec_matrix(s.mat * vec_matrix(x), 2);
        CHECK((via_matrix - phi_apply(ins, x, adjoint)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("phi* spectral radius is one") {
  for (const auto& spec : {"ad(0.36)", "ndm(0.3)", "pndm(0.3)", "dr(0.3,1.0)"}) {
    Superoperator s = superoperator_matrix(builtin(spec), true);
    Eigen::ComplexEigenSolver<CMatrix> es(s.mat);
    CHECK(es.eigenvalues().cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("erg check on the built-ins") {
  ErgReport ndm = erg_check(make_ndm(0.3));
  CHECK_FALSE(ndm.holds);
  CHECK(ndm.fixed_space_dim == 2);

  ErgReport ad = erg_check(make_ad(0.36));
  CHECK(ad.holds);
  CHECK(ad.fixed_space_dim == 1);
  CHECK(ad.e_basis.cols() == 1);
  CHECK(std::abs(ad.invariant_state(0, 0) - Complex(1.0, 0.0)) < 1e-10);
  CHECK(std::abs(ad.invariant_state(1, 1)) < 1e-10);

  ErgReport dr = erg_check(make_dr(0.3, 1.0));
  CHECK(dr.holds);
  CHECK(dr.e_basis.cols() == 2);  // full-rank invariant state
}

TEST_CASE("period and cycles: AD has period 1 with M = Id") {
  CycleDecomposition cd = period_and_cycles(make_ad(0.36));
  CHECK(cd.period == 1);
  CHECK((cd.m_ops[0] - CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(cd.e_bases[0].cols() == 1);
  CHECK(std::abs(cd.e_bases[0](0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("period and cycles: DR has period 1") {
  CHECK(period_and_cycles(make_dr(0.3, 1.0)).period == 1);
}

TEST_CASE("period and cycles: PNDM has period 2 with diagonal projectors") {
  CycleDecomposition cd = period_and_cycles(make_pndm(0.3));
  REQUIRE(cd.period == 2);
  CMatrix p0 = CMatrix::Zero(2, 2), p1 = CMatrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  CHECK((cd.m_ops[0] - p0).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((cd.m_ops[1] - p1).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((cd.rho[0] - p0).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((cd.rho[1] - p1).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("cycle decomposition invariants") {
  for (const auto& spec : {"ad(0.36)", "pndm(0.3)", "dr(0.3,1.0)"}) {
    INFO(spec);
    Instrument ins = builtin(spec);
    CycleDecomposition cd = period_and_cycles(ins);
    const int m = cd.period;
    const int k = ins.dim;

    CMatrix sum = CMatrix::Zero(k, k);
    for (const auto& mr : cd.m_ops) sum += mr;
    CHECK((sum - CMatrix::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);

    for (int r = 0; r < m; ++r) {
      CMatrix prev = cd.m_ops[static_cast<size_t>((r - 1 + m) % m)];
      CHECK((phi_apply(ins, cd.m_ops[static_cast<size_t>(r)], false) - prev)
                .cwiseAbs()
                .maxCoeff() < 1e-8);
      CMatrix next_rho = cd.rho[static_cast<size_t>((r + 1) % m)];
      CHECK((phi_apply(ins, cd.rho[static_cast<size_t>(r)], true) - next_rho)
                .cwiseAbs()
                .maxCoeff() < 1e-8);
      // M_r acts as identity on E_r and kills E_r'
      for (int rp = 0; rp < m; ++rp) {
        CMatrix p = cd.e_bases[static_cast<size_t>(rp)] *
                    cd.e_bases[static_cast<size_t>(rp)].adjoint();
        CMatrix expected = rp == r ? p : CMatrix::Zero(k, k);
        CHECK((cd.m_ops[static_cast<size_t>(r)] * p - expected).cwiseAbs().maxCoeff() < 1e-8);
      }
      // orthogonal supports
      for (int rp = r + 1; rp < m; ++rp) {
        CHECK((cd.e_bases[static_cast<size_t>(r)].adjoint() *
               cd.e_bases[static_cast<size_t>(rp)])
                  .cwiseAbs()
                  .maxCoeff() < 1e-8);
      }
      // rho_r is a state
      CHECK(cd.rho[static_cast<size_t>(r)].trace().real() == doctest::Approx(1.0));
      Eigen::SelfAdjointEigenSolver<CMatrix> es(cd.rho[static_cast<size_t>(r)]);
      CHECK(es.eigenvalues().minCoeff() > -1e-10);
    }
  }
}

TEST_CASE("period_and_cycles refuses non-ergodic input") {
  CHECK_THROWS(period_and_cycles(make_ndm(0.3)));
}

TEST_CASE("peripheral eigenfunctions") {
  CycleDecomposition pndm = period_and_cycles(make_pndm(0.3));
  QuadraticObservable f0 = peripheral_eigenfunction(pndm, 0);
  CHECK((f0.matrix - CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);

  QuadraticObservable f1 = peripheral_eigenfunction(pndm, 1);
  CMatrix expected(2, 2);
  expected << -1.0, 0.0, 0.0, 1.0;
  CHECK((f1.matrix - expected).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(peripheral_eigenfunction(pndm, 2), std::out_of_range);

  CycleDecomposition ad = period_and_cycles(make_ad(0.36));
  CHECK((peripheral_eigenfunction(ad, 0).matrix - CMatrix::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("pi acts on quadratic observables as Phi") {
  Instrument pndm = make_pndm(0.3);
  CMatrix a(2, 2);
  a << -1.0, 0.0, 0.0, 1.0;
  CHECK((pi_on_quadratic(pndm, a) + a).cwiseAbs().maxCoeff() < 1e-12);  // eigenvalue -1

  CHECK((pi_on_quadratic(pndm, CMatrix::Identity(2, 2)) - CMatrix::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  // pointwise identity (Pi f_A)(x) = <x, Phi(A) x> against the kernel sum
  CounterRng rng(33, 0);
  for (const auto& spec : {"ad(0.36)", "pndm(0.3)", "dr(0.3,1.0)"}) {
    Instrument ins = builtin(spec);
    for (int trial = 0; trial < 10; ++trial) {
      CMatrix h = random_hermitian(rng, 2);
      CMatrix phi_h = pi_on_quadratic(ins, h);
      for (int pt = 0; pt < 50; ++pt) {
        ProjectivePoint x = random_point(rng, 2);
        Complex lhs = kernel_sum_quadratic(ins, h, x);
        Complex rhs = QuadraticObservable{phi_h}.eval(x);
        CHECK(std::abs(lhs - rhs) < 1e-10);
      }
    }
  }
}

TEST_CASE("peripheral spectrum property via the kernel sum") {
  CounterRng rng(34, 0);
  Instrument pndm = make_pndm(0.3);
  CycleDecomposition cd = period_and_cycles(pndm);
  for (int l = 0; l < cd.period; ++l) {
    QuadraticObservable fl = peripheral_eigenfunction(cd, l);
    Complex eigenvalue = std::polar(1.0, 2.0 * std::numbers::pi * l / cd.period);
    double worst = 0.0;
    for (int pt = 0; pt < 1000; ++pt) {
      ProjectivePoint x = random_point(rng, 2);
      Complex lhs = kernel_sum_quadratic(pndm, fl.matrix, x);
      Complex rhs = eigenvalue * fl.eval(x);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    CHECK(worst < 1e-8);
  }
}
