#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qtraj/purification.hpp"

using namespace qtraj;

TEST_CASE("g is one for unitary instruments") {
  Instrument uni = builtin("uni(0.7)");
  for (int n = 1; n <= 6; ++n) {
    CHECK(g_exact(uni, n) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("g closed form for amplitude damping") {
  Instrument ad = make_ad(0.36);
  for (int n = 1; n <= 12; ++n) {
    CHECK(std::abs(g_exact(ad, n) - std::pow(0.8, n)) < 1e-12);
  }
}

TEST_CASE("g budget") {
  CHECK_THROWS_AS(g_exact(make_ad(0.36), 40), BudgetExceeded);
}

TEST_CASE("g sub-multiplicativity on the built-ins") {
  for (const auto& spec : {"ad(0.36)", "ndm(0.3)", "pndm(0.3)", "dr(0.3,1.0)"}) {
    INFO(spec);
    Instrument ins = builtin(spec);
    std::vector<double> g(9, 0.0);
    for (int n = 1; n <= 8; ++n) g[static_cast<size_t>(n)] = g_exact(ins, n);
    for (int m = 1; m <= 7; ++m) {
      for (int n = 1; m + n <= 8; ++n) {
        CHECK(g[static_cast<size_t>(m + n)] <=
              g[static_cast<size_t>(m)] * g[static_cast<size_t>(n)] + 1e-10);
      }
    }
  }
}

TEST_CASE("g bounded by the second moment power") {
  for (const auto& spec : {"ad(0.36)", "pndm(0.3)", "dr(0.3,1.0)"}) {
    Instrument ins = builtin(spec);
    double moment = 0.0;
    for (const auto& atom : ins.atoms) {
      moment += atom.weight * op_norm(atom.matrix) * op_norm(atom.matrix);
    }
    for (int n = 1; n <= 8; ++n) {
      CHECK(g_exact(ins, n) <= std::pow(moment, n) + 1e-10);
    }
  }
}

TEST_CASE("monte carlo estimator of g") {
  // zero variance for a unitary instrument
  McEstimate uni = g_mc(builtin("uni(0.7)"), 5, 200, 42);
  CHECK(uni.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(uni.stderr_ == doctest::Approx(0.0).epsilon(1e-12));

  McEstimate ad = g_mc(make_ad(0.36), 10, 10000, 42);
  double exact = std::pow(0.8, 10);
  CHECK(std::abs(ad.value - exact) <= 3.0 * ad.stderr_ + 1e-12);
  CHECK(ad.stderr_ > 0.0);

  McEstimate pndm = g_mc(make_pndm(0.3), 6, 10000, 7);
  CHECK(std::abs(pndm.value - g_exact(make_pndm(0.3), 6)) <= 3.0 * pndm.stderr_);

  McEstimate dr = g_mc(make_dr(0.3, 1.0), 6, 10000, 9);
  CHECK(std::abs(dr.value - g_exact(make_dr(0.3, 1.0), 6)) <= 3.0 * dr.stderr_);

  CHECK_THROWS_AS(g_mc(make_ad(0.36), 5, 10, 1), std::invalid_argument);
}

TEST_CASE("mc reproducibility") {
  McEstimate a = g_mc(make_dr(0.3, 1.0), 8, 500, 123);
  McEstimate b = g_mc(make_dr(0.3, 1.0), 8, 500, 123);
  CHECK(a.value == b.value);
  CHECK(a.stderr_ == b.stderr_);
}

TEST_CASE("pur diagnostic on closed forms") {
  std::vector<double> ad;
  for (int n = 1; n <= 12; ++n) ad.push_back(std::pow(0.8, n));
  PurDiagnostic diag = pur_diagnostic(ad);
  CHECK(diag.decaying);
  CHECK(diag.lambda_hat == doctest::Approx(0.8).epsilon(0.01));

  std::vector<double> flat(12, 1.0);
  PurDiagnostic uni = pur_diagnostic(flat);
  CHECK_FALSE(uni.decaying);
  CHECK(uni.lambda_hat == doctest::Approx(1.0));

  CHECK_THROWS_AS(pur_diagnostic({1.0, 0.5, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(pur_diagnostic({1.0, 0.5, 0.2, 0.1, 0.0, -0.1}), std::domain_error);
}

TEST_CASE("pur necessary check") {
  PurReport uni = pur_necessary_check(builtin("uni(0.7)"));
  CHECK(uni.verdict == PurVerdict::Fails);
  CHECK_FALSE(uni.heuristic);
  CHECK((uni.witness - CMatrix::Identity(2, 2)).norm() < 1e-12);

  PurReport ad = pur_necessary_check(make_ad(0.36));
  CHECK(ad.verdict == PurVerdict::Holds);
  CHECK(ad.heuristic);
  CHECK(ad.lambda_hat == doctest::Approx(0.8).epsilon(0.01));

  PurReport pndm = pur_necessary_check(make_pndm(0.3));
  CHECK(pndm.verdict == PurVerdict::Holds);

  // two rank-one projectors scaled to stochasticity: g(n) = 0 for n >= 1
  CMatrix p0 = CMatrix::Zero(2, 2), p1 = CMatrix::Zero(2, 2);
  p0(0, 0) = std::sqrt(2.0);
  p1(1, 1) = std::sqrt(2.0);
  Instrument projectors;
  projectors.dim = 2;
  projectors.atoms = {{0.5, p0}, {0.5, p1}};
  projectors.label = "projective";
  CHECK(validate(projectors, 1e-12).passed);
  PurReport rank1 = pur_necessary_check(projectors);
  CHECK(rank1.verdict == PurVerdict::Holds);
  CHECK_FALSE(rank1.heuristic);
}
