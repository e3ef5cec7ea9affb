#include "qtraj/purification.hpp"

#include <cmath>

#include "qtraj/rng.hpp"

namespace qtraj {

namespace {

void check_budget(size_t n_atoms, int n, double budget) {
  if (n < 1) throw std::invalid_argument("g series: n must be >= 1");
  if (static_cast<double>(n) * std::log(static_cast<double>(n_atoms)) > std::log(budget)) {
    throw BudgetExceeded("combinatorial budget exceeded: |atoms|^n > " + std::to_string(budget));
  }
}

double sum_over_sequences(const std::vector<CMatrix>& wedges,
                          const std::vector<double>& weights, const CMatrix& prefix,
                          double prefix_weight, int remaining) {
  if (remaining == 0) {
    return prefix_weight * op_norm(prefix);
  }
  double total = 0.0;
  for (size_t i = 0; i < wedges.size(); ++i) {
    total += sum_over_sequences(wedges, weights, wedges[i] * prefix,
                                prefix_weight * weights[i], remaining - 1);
  }
  return total;
}

}  // namespace

double g_exact(const Instrument& ins, int n) {
  check_budget(ins.atoms.size(), n, 1e7);
  const int kw = ins.dim * (ins.dim - 1) / 2;
  std::vector<CMatrix> wedges;
  std::vector<double> weights;
  for (const auto& atom : ins.atoms) {
    wedges.push_back(wedge2(atom.matrix));
    weights.push_back(atom.weight);
  }
  return sum_over_sequences(wedges, weights, CMatrix::Identity(kw, kw), 1.0, n);
}

McEstimate g_mc(const Instrument& ins, int n, int samples, uint64_t seed) {
  if (samples < 100) throw std::invalid_argument("g_mc: samples must be >= 100");
  const int k = ins.dim;
  const int kw = k * (k - 1) / 2;
  std::vector<CMatrix> wedges;
  for (const auto& atom : ins.atoms) wedges.push_back(wedge2(atom.matrix));

  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> probs(ins.atoms.size());
  for (int s = 0; s < samples; ++s) {
    CounterRng rng(seed, static_cast<uint64_t>(s));
    CMatrix state = CMatrix::Identity(k, k) / static_cast<double>(k);  // W W* / tr
    CMatrix wedge = CMatrix::Identity(kw, kw);
    double log_tr = std::log(static_cast<double>(k));
    double log_wedge = 0.0;
    for (int step = 0; step < n; ++step) {
      double total = 0.0;
      for (size_t i = 0; i < ins.atoms.size(); ++i) {
        probs[i] = ins.atoms[i].weight *
                   (ins.atoms[i].matrix * state * ins.atoms[i].matrix.adjoint())
                       .trace()
                       .real();
        if (probs[i] < 0.0) probs[i] = 0.0;
        total += probs[i];
      }
      if (!(total > 1e-14)) {
        throw std::runtime_error("g_mc: degenerate propagation, all branch weights vanish");
      }
      double u = rng.uniform() * total;
      size_t pick = 0;
      double acc = 0.0;
      for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u <= acc) {
          pick = i;
          break;
        }
        pick = i;
      }
      const CMatrix& v = ins.atoms[pick].matrix;
      CMatrix next = v * state * v.adjoint();
      double tr = next.trace().real();
      state = next / tr;
      log_tr += std::log(tr);
      wedge = wedges[pick] * wedge;
      double scale = wedge.cwiseAbs().maxCoeff();
      if (scale > 0.0) {
        wedge /= scale;
        log_wedge += std::log(scale);
      } else {
        log_wedge = -std::numeric_limits<double>::infinity();
      }
    }
    double value = std::isinf(log_wedge)
                       ? 0.0
                       : k * op_norm(wedge) * std::exp(log_wedge - log_tr);
    sum += value;
    sum_sq += value * value;
  }
  McEstimate est;
  est.value = sum / samples;
  double var = (sum_sq / samples - est.value * est.value) * samples / (samples - 1.0);
  if (var < 0.0) var = 0.0;
  est.stderr_ = std::sqrt(var / samples);
  return est;
}

PurDiagnostic pur_diagnostic(const std::vector<double>& g_values) {
  const int n_total = static_cast<int>(g_values.size());
  if (n_total < 6) throw std::invalid_argument("pur_diagnostic: need g(1..N) with N >= 6");
  for (double g : g_values) {
    if (!(g > 0.0)) {
      throw std::domain_error("pur_diagnostic: nonpositive g value");
    }
  }
  // fit log g(n) = a + b n on the tail half; the Lemma only promises decay
  // beyond some n_0
  int start = n_total / 2;
  int m = n_total - start;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = start; i < n_total; ++i) {
    double x = i + 1.0;
    double y = std::log(g_values[static_cast<size_t>(i)]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = m * sxx - sx * sx;
  double slope = (m * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / m;
  double ss_res = 0.0;
  for (int i = start; i < n_total; ++i) {
    double x = i + 1.0;
    double y = std::log(g_values[static_cast<size_t>(i)]);
    double r = y - (intercept + slope * x);
    ss_res += r * r;
  }
  double se_slope = m > 2 ? std::sqrt(ss_res / (m - 2.0) / (sxx - sx * sx / m)) : 0.0;
  PurDiagnostic diag;
  diag.lambda_hat = std::exp(slope);
  diag.lambda_stderr = diag.lambda_hat * se_slope;
  diag.decaying = diag.lambda_hat < 1.0 - 3.0 * diag.lambda_stderr;
  return diag;
}

PurReport pur_necessary_check(const Instrument& ins) {
  PurReport report;
  const int k = ins.dim;
  // exact failure test at n = 1: every atom conformal on C^k forces all
  // products conformal, so pi = Id violates (Pur) whenever k >= 2
  bool all_conformal = k >= 2;
  for (const auto& atom : ins.atoms) {
    CMatrix gram = atom.weight * (atom.matrix.adjoint() * atom.matrix);
    Complex c = gram.trace() / static_cast<double>(k);
    double defect = op_norm(gram - c * CMatrix::Identity(k, k));
    if (defect > 1e-12 * std::max(1.0, std::abs(c))) {
      all_conformal = false;
      break;
    }
  }
  if (all_conformal) {
    report.verdict = PurVerdict::Fails;
    report.witness = CMatrix::Identity(k, k);
    report.heuristic = false;
    report.lambda_hat = 1.0;
    return report;
  }

  int length = 8;
  std::vector<double> series;
  try {
    for (int n = 1; n <= length; ++n) series.push_back(g_exact(ins, n));
  } catch (const BudgetExceeded&) {
    report.verdict = PurVerdict::Inconclusive;
    return report;
  }
  // g(n) = 0 exactly: all n-fold products have rank <= 1, and under
  // stochasticity no projector can be annihilated a.e., so (Pur) holds
  for (double g : series) {
    if (g <= 1e-300) {
      report.verdict = PurVerdict::Holds;
      report.heuristic = false;
      report.lambda_hat = 0.0;
      return report;
    }
  }
  PurDiagnostic diag = pur_diagnostic(series);
  report.lambda_hat = diag.lambda_hat;
  if (diag.decaying) {
    report.verdict = PurVerdict::Holds;
    report.heuristic = true;  // decay => (Pur) direction is not proved in general
  } else {
    report.verdict = PurVerdict::Inconclusive;
  }
  return report;
}

}  // namespace qtraj
