#pragma once

#include <cstdint>

#include "qtraj/instrument.hpp"

namespace qtraj {

/// g(n) = sum over atom sequences of (prod w) * ||wedge2(W_n)||, the exact
/// contraction diagnostic. Throws BudgetExceeded when |atoms|^n > 10^7.
double g_exact(const Instrument& ins, int n);

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Unbiased estimator of g(n) under the trace-tilted sequence measure
/// (1/k) tr(W_n* W_n) d mu^(x)n; reproducible for a fixed seed.
McEstimate g_mc(const Instrument& ins, int n, int samples, uint64_t seed);

struct PurDiagnostic {
  bool decaying = false;
  double lambda_hat = 1.0;
  double lambda_stderr = 0.0;
};

/// Log-linear fit of the tail half of g(1..N); N >= 6, all values positive.
PurDiagnostic pur_diagnostic(const std::vector<double>& g_values);

enum class PurVerdict { Holds, Fails, Inconclusive };

struct PurReport {
  PurVerdict verdict = PurVerdict::Inconclusive;
  CMatrix witness;      // violating projector when verdict == Fails
  bool heuristic = false;  // verdict inferred from g-decay, not an exact test
  double lambda_hat = 1.0;
};

/// Exact n=1 conformality test for failure, exact rank-collapse test for
/// success, g-decay heuristic otherwise.
PurReport pur_necessary_check(const Instrument& ins);

}  // namespace qtraj
