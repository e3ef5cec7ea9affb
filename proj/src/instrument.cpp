#include "qtraj/instrument.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qtraj {

ValidationReport validate(const Instrument& ins, double tol) {
  ValidationReport report;
  report.tolerance = tol;
  if (ins.dim <= 0 || ins.atoms.empty()) {
    report.defect = std::numeric_limits<double>::infinity();
    report.passed = false;
    return report;
  }
  CMatrix sum = CMatrix::Zero(ins.dim, ins.dim);
  for (const auto& atom : ins.atoms) {
    if (!(atom.weight > 0.0) || atom.matrix.rows() != ins.dim ||
        atom.matrix.cols() != ins.dim) {
      report.defect = std::numeric_limits<double>::infinity();
      report.passed = false;
      return report;
    }
    sum += atom.weight * (atom.matrix.adjoint() * atom.matrix);
  }
  sum -= CMatrix::Identity(ins.dim, ins.dim);
  report.defect = op_norm(sum);
  report.passed = report.defect <= tol;
  return report;
}

Eigen::VectorXd transition_weights(const Instrument& ins, const ProjectivePoint& x) {
  if (x.dim() != ins.dim) {
    throw DimensionMismatch("transition_weights: dimension mismatch");
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(ins.atoms.size()));
  for (size_t i = 0; i < ins.atoms.size(); ++i) {
    p[static_cast<Eigen::Index>(i)] =
        ins.atoms[i].weight * (ins.atoms[i].matrix * x.vec()).squaredNorm();
  }
  return p;
}

Instrument make_uni(CMatrix u, std::string label) {
  Instrument ins;
  ins.dim = static_cast<int>(u.rows());
  ins.atoms.push_back({1.0, std::move(u)});
  ins.label = std::move(label);
  return ins;
}

Instrument make_ad(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("make_ad: p must lie in (0,1)");
  }
  CMatrix v1(2, 2), v2(2, 2);
  v1 << 1.0, 0.0, 0.0, std::sqrt(1.0 - p);
  v2 << 0.0, std::sqrt(p), 0.0, 0.0;
  Instrument ins;
  ins.dim = 2;
  ins.atoms = {{1.0, v1}, {1.0, v2}};
  ins.label = "ad(" + std::to_string(p) + ")";
  return ins;
}

Instrument make_ndm(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("make_ndm: q must lie in (0,1)");
  }
  CMatrix v1 = CMatrix::Zero(2, 2), v2 = CMatrix::Zero(2, 2);
  v1(0, 0) = std::sqrt(q);
  v1(1, 1) = std::sqrt(1.0 - q);
  v2(0, 0) = std::sqrt(1.0 - q);
  v2(1, 1) = std::sqrt(q);
  Instrument ins;
  ins.dim = 2;
  ins.atoms = {{1.0, v1}, {1.0, v2}};
  ins.label = "ndm(" + std::to_string(q) + ")";
  return ins;
}

Instrument make_pndm(double q) {
  Instrument ins = make_ndm(q);
  CMatrix flip(2, 2);
  flip << 0.0, 1.0, 1.0, 0.0;
  for (auto& atom : ins.atoms) {
    atom.matrix = flip * atom.matrix;
  }
  ins.label = "pndm(" + std::to_string(q) + ")";
  return ins;
}

CMatrix rotation2(double phi) {
  CMatrix r(2, 2);
  r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
  return r;
}

Instrument make_dr(double q, double phi) {
  Instrument ins = make_ndm(q);
  CMatrix r = rotation2(phi);
  for (auto& atom : ins.atoms) {
    atom.matrix = r * atom.matrix;
  }
  ins.label = "dr(" + std::to_string(q) + "," + std::to_string(phi) + ")";
  return ins;
}

namespace {

std::vector<double> parse_args(const std::string& spec, size_t open) {
  if (spec.back() != ')') {
    throw std::invalid_argument("builtin: malformed spec '" + spec + "'");
  }
  std::vector<double> args;
  std::string inner = spec.substr(open + 1, spec.size() - open - 2);
  std::stringstream ss(inner);
  std::string token;
  while (std::getline(ss, token, ',')) {
    size_t pos = 0;
    double value = std::stod(token, &pos);
    args.push_back(value);
  }
  return args;
}

}  // namespace

Instrument builtin(const std::string& spec) {
  size_t open = spec.find('(');
  std::string name = spec.substr(0, open);
  for (auto& c : name) c = static_cast<char>(std::tolower(c));
  std::vector<double> args;
  if (open != std::string::npos) {
    args = parse_args(spec, open);
  }
  auto expect = [&](size_t n) {
    if (args.size() != n) {
      throw std::invalid_argument("builtin: '" + name + "' expects " +
                                  std::to_string(n) + " parameter(s)");
    }
  };
  if (name == "uni") {
    if (args.empty()) return make_uni(CMatrix::Identity(2, 2));
    expect(1);
    return make_uni(rotation2(args[0]), "uni(" + std::to_string(args[0]) + ")");
  }
  if (name == "ad") {
    expect(1);
    return make_ad(args[0]);
  }
  if (name == "ndm") {
    expect(1);
    return make_ndm(args[0]);
  }
  if (name == "pndm") {
    expect(1);
    return make_pndm(args[0]);
  }
  if (name == "dr") {
    expect(2);
    return make_dr(args[0], args[1]);
  }
  throw std::invalid_argument("builtin: unknown instrument '" + name + "'");
}

namespace {

nlohmann::json matrix_to_json(const CMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back({m(r, c).real(), m(r, c).imag()});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const nlohmann::json& rows, int dim, size_t atom_index) {
  auto fail = [&](const std::string& what) {
    throw ParseError("atom " + std::to_string(atom_index) + ": " + what);
  };
  if (!rows.is_array() || static_cast<int>(rows.size()) != dim) {
    fail("matrix row count does not match dim");
  }
  CMatrix m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const auto& row = rows[r];
    if (!row.is_array() || static_cast<int>(row.size()) != dim) {
      fail("matrix column count does not match dim in row " + std::to_string(r));
    }
    for (int c = 0; c < dim; ++c) {
      const auto& entry = row[c];
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
          !entry[1].is_number()) {
        fail("entry (" + std::to_string(r) + "," + std::to_string(c) +
             ") is not a [re, im] pair");
      }
      m(r, c) = Complex(entry[0].get<double>(), entry[1].get<double>());
    }
  }
  return m;
}

}  // namespace

std::string instrument_to_json(const Instrument& ins) {
  nlohmann::json j;
  j["label"] = ins.label;
  j["dim"] = ins.dim;
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& atom : ins.atoms) {
    atoms.push_back({{"weight", atom.weight}, {"matrix", matrix_to_json(atom.matrix)}});
  }
  j["atoms"] = std::move(atoms);
  return j.dump(2);
}

LoadResult instrument_from_json(const std::string& text, double tol) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("instrument JSON: ") + e.what());
  }
  if (!j.contains("dim") || !j["dim"].is_number_integer()) {
    throw ParseError("instrument JSON: missing integer field 'dim'");
  }
  Instrument ins;
  ins.dim = j["dim"].get<int>();
  if (ins.dim <= 0) {
    throw ParseError("instrument JSON: 'dim' must be positive");
  }
  ins.label = j.value("label", std::string{});
  if (!j.contains("atoms") || !j["atoms"].is_array() || j["atoms"].empty()) {
    throw ParseError("instrument JSON: 'atoms' must be a non-empty array");
  }
  size_t index = 0;
  for (const auto& entry : j["atoms"]) {
    if (!entry.contains("weight") || !entry["weight"].is_number()) {
      throw ParseError("atom " + std::to_string(index) + ": missing numeric 'weight'");
    }
    double w = entry["weight"].get<double>();
    if (!(w > 0.0)) {
      throw ParseError("atom " + std::to_string(index) + ": weight must be > 0");
    }
    if (!entry.contains("matrix")) {
      throw ParseError("atom " + std::to_string(index) + ": missing 'matrix'");
    }
    ins.atoms.push_back({w, matrix_from_json(entry["matrix"], ins.dim, index)});
    ++index;
  }
  LoadResult result{std::move(ins), {}};
  result.validation = validate(result.instrument, tol);
  return result;
}

LoadResult load_instrument(const std::string& path, double tol) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open instrument file '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return instrument_from_json(buffer.str(), tol);
}

void save_instrument(const Instrument& ins, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ParseError("cannot write instrument file '" + path + "'");
  }
  out << instrument_to_json(ins) << "\n";
}

}  // namespace qtraj
