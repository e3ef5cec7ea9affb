#pragma once

#include <string>
#include <vector>

#include "qtraj/projective.hpp"

namespace qtraj {

struct KrausAtom {
  double weight;
  CMatrix matrix;
};

/// The measure mu as a finite weighted family of Kraus atoms. An atom
/// (w, v) stands for the point mass w * delta_v; stochasticity demands
/// sum_i w_i v_i* v_i = Id.
struct Instrument {
  int dim = 0;
  std::vector<KrausAtom> atoms;
  std::string label;
};

struct ValidationReport {
  double defect = 0.0;  // ||sum w v*v - Id||
  double tolerance = 0.0;
  bool passed = false;
};

/// Never throws; reports the stochasticity defect against tol.
ValidationReport validate(const Instrument& ins, double tol);

/// p_i = w_i ||v_i x||^2; sums to 1 for a valid instrument.
Eigen::VectorXd transition_weights(const Instrument& ins, const ProjectivePoint& x);

Instrument make_uni(CMatrix u, std::string label = "uni");
Instrument make_ad(double p);
Instrument make_ndm(double q);
Instrument make_pndm(double q);
Instrument make_dr(double q, double phi);

/// Planar rotation [[cos, -sin], [sin, cos]].
CMatrix rotation2(double phi);

/// Parses "ad(0.36)", "pndm(0.3)", "dr(0.3,1.0)", "ndm(0.2)", "uni" (identity)
/// or "uni(phi)" (planar rotation by phi). Throws std::invalid_argument on
/// unknown names or out-of-range parameters.
Instrument builtin(const std::string& spec);

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadResult {
  Instrument instrument;
  ValidationReport validation;
};

/// JSON schema: {"label": str, "dim": k, "atoms": [{"weight": w,
/// "matrix": [[[re, im], ...], ...]}]} with matrices row-major.
LoadResult load_instrument(const std::string& path, double tol = 1e-9);
void save_instrument(const Instrument& ins, const std::string& path);

std::string instrument_to_json(const Instrument& ins);
LoadResult instrument_from_json(const std::string& text, double tol = 1e-9);

}  // namespace qtraj
