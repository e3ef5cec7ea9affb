#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "qtraj/instrument.hpp"
#include "qtraj/rng.hpp"

using namespace qtraj;

namespace {

ProjectivePoint random_point(CounterRng& rng, int k) {
  CVector v(k);
  for (int i = 0; i < k; ++i) v[i] = Complex(rng.normal(), rng.normal());
  return ProjectivePoint(v);
}

}  // namespace

TEST_CASE("validate identity and scaled identity") {
  Instrument id = make_uni(CMatrix::Identity(2, 2));
  auto ok = validate(id, 1e-10);
  CHECK(ok.defect == doctest::Approx(0.0));
  CHECK(ok.passed);

  Instrument bad = make_uni(2.0 * CMatrix::Identity(2, 2));
  auto report = validate(bad, 1e-10);
  CHECK(report.defect == doctest::Approx(3.0));
  CHECK_FALSE(report.passed);
}

TEST_CASE("built-ins satisfy stochasticity exactly") {
  for (const auto& spec : {"uni(0.7)", "ad(0.36)", "ndm(0.3)", "pndm(0.3)", "dr(0.3,1.0)"}) {
    Instrument ins = builtin(spec);
    auto report = validate(ins, 1e-12);
    INFO(spec);
    CHECK(report.passed);
  }
}

TEST_CASE("builtin errors") {
  CHECK_THROWS_AS(builtin("frobnicate(1)"), std::invalid_argument);
  CHECK_THROWS_AS(builtin("ad(1.5)"), std::invalid_argument);
  CHECK_THROWS_AS(builtin("ndm(0.0)"), std::invalid_argument);
  CHECK_THROWS_AS(builtin("dr(0.3)"), std::invalid_argument);
}

TEST_CASE("transition weights") {
  auto e0 = ProjectivePoint::basis(2, 0);
  auto e1 = ProjectivePoint::basis(2, 1);

  Instrument uni = builtin("uni(0.7)");
  auto p = transition_weights(uni, e0);
  CHECK(p.size() == 1);
  CHECK(p[0] == doctest::Approx(1.0));

  Instrument ad = make_ad(0.36);
  auto p0 = transition_weights(ad, e0);
  CHECK(p0[0] == doctest::Approx(1.0));
  CHECK(p0[1] == doctest::Approx(0.0));
  auto p1 = transition_weights(ad, e1);
  CHECK(p1[0] == doctest::Approx(0.64));
  CHECK(p1[1] == doctest::Approx(0.36));
}

TEST_CASE("transition weights sum to one everywhere") {
  CounterRng rng(21, 0);
  for (const auto& spec : {"ad(0.36)", "ndm(0.3)", "pndm(0.3)", "dr(0.3,1.0)"}) {
    Instrument ins = builtin(spec);
    for (int trial = 0; trial < 1000; ++trial) {
      auto p = transition_weights(ins, random_point(rng, ins.dim));
      CHECK(std::abs(p.sum() - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("validate invariant under reordering and atom splitting") {
  Instrument ins = make_dr(0.3, 1.0);
  auto base = validate(ins, 1e-9);

  Instrument reordered = ins;
  std::swap(reordered.atoms[0], reordered.atoms[1]);
  CHECK(validate(reordered, 1e-9).defect == doctest::Approx(base.defect));

  Instrument split = ins;
  KrausAtom half = split.atoms[0];
  half.weight /= 2.0;
  split.atoms[0] = half;
  split.atoms.push_back(half);
  CHECK(validate(split, 1e-9).defect == doctest::Approx(base.defect).epsilon(1e-12));
}

TEST_CASE("json round trip is bit exact") {
  Instrument ins = make_dr(0.3, 1.0);
  std::string path = "test_instrument_roundtrip.json";
  save_instrument(ins, path);
  auto loaded = load_instrument(path, 1e-9);
  CHECK(loaded.validation.passed);
  CHECK(loaded.instrument.dim == ins.dim);
  CHECK(loaded.instrument.label == ins.label);
  REQUIRE(loaded.instrument.atoms.size() == ins.atoms.size());
  for (size_t i = 0; i < ins.atoms.size(); ++i) {
    CHECK(loaded.instrument.atoms[i].weight == ins.atoms[i].weight);
    CHECK((loaded.instrument.atoms[i].matrix - ins.atoms[i].matrix).cwiseAbs().maxCoeff() ==
          0.0);
  }
  std::remove(path.c_str());
}

TEST_CASE("load rejects malformed files") {
  CHECK_THROWS_AS(instrument_from_json("{not json"), ParseError);
  // header dim disagrees with the matrix shape
  CHECK_THROWS_AS(
      instrument_from_json(R"({"label":"x","dim":3,"atoms":[{"weight":1.0,
        "matrix":[[[1,0],[0,0]],[[0,0],[1,0]]]}]})"),
      ParseError);
  CHECK_THROWS_AS(
      instrument_from_json(R"({"label":"x","dim":2,"atoms":[{"weight":-1.0,
        "matrix":[[[1,0],[0,0]],[[0,0],[1,0]]]}]})"),
      ParseError);
  CHECK_THROWS_AS(load_instrument("no_such_file_qtraj.json"), ParseError);
}

TEST_CASE("load reports stochasticity defect without throwing") {
  auto result = instrument_from_json(
      R"({"label":"bad","dim":1,"atoms":[{"weight":1.0,"matrix":[[[2,0]]]}]})", 1e-9);
  CHECK_FALSE(result.validation.passed);
  CHECK(result.validation.defect == doctest::Approx(3.0));
}
