#include "icsim/analytic.hpp"

#include <cmath>

#include "icsim/error.hpp"

namespace icsim::analytic {

void validate(const DistParams& p) {
  if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) {
    throw ConfigError("lambda must be > 0");
  }
  if (!(p.b >= 0.0) || !std::isfinite(p.b)) throw ConfigError("b must be >= 0");
}

double pdf_shifted_exp(double y, const DistParams& p) {
  validate(p);
  if (y < p.b) return 0.0;
  return std::exp(-(y - p.b) / p.lambda) / p.lambda;
}

double mean_shifted_exp(const DistParams& p) {
  validate(p);
  return p.lambda + p.b;
}

double pdf_trunc_exp(double y, const DistParams& p) {
  validate(p);
  if (p.b == 0.0) throw ConfigError("truncated exponential needs b > 0");
  if (y < 0.0 || y > p.b) return 0.0;
  return std::exp(-y / p.lambda) / (p.lambda * -std::expm1(-p.k_ratio()));
}

double mean_trunc_exp(const DistParams& p) {
  validate(p);
  if (p.b == 0.0) throw ConfigError("truncated exponential needs b > 0");
  const double k = p.k_ratio();
  return p.lambda * (1.0 - (k + 1.0) * std::exp(-k)) / -std::expm1(-k);
}

double pdf_erlang_shifted(double y, int order, const DistParams& p) {
  validate(p);
  if (order < 1) throw ConfigError("erlang order must be >= 1");
  if (y < p.b) return 0.0;
  const double x = (y - p.b) / p.lambda;
  if (order == 1) return std::exp(-x) / p.lambda;
  if (x == 0.0) return 0.0;
  const int n = order - 1;
  if (order <= 20) {
    double term = std::exp(-x) / p.lambda;
    for (int j = 1; j <= n; ++j) term *= x / j;
    return term;
  }
  // x^n e^{-x} / n! evaluated in log space
  return std::exp(n * std::log(x) - x - std::lgamma(n + 1.0)) / p.lambda;
}

double mixture_density(double y, int max_order, const DistParams& p) {
  validate(p);
  if (max_order < 1) throw ConfigError("mixture order must be >= 1");
  double sum = 0.0;
  for (int i = 1; i <= max_order; ++i) sum += pdf_erlang_shifted(y, i, p);
  return sum;
}

LambdaEstimate estimate_lambda_single_pairs(std::span<const MeasurementRecord> ms,
                                            Nanos t_pack) {
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t n = 1; n < ms.size(); ++n) {
    if (ms[n].c == 1 && ms[n - 1].c == 1) {
      sum += static_cast<double>(ms[n].m - ms[n - 1].m);
      ++count;
    }
  }
  if (count == 0) {
    throw InsufficientDataError("no consecutive single-packet measurements");
  }
  return {sum / static_cast<double>(count) - static_cast<double>(t_pack),
          EstimatorMethod::single_pair_shift_corrected, count};
}

LambdaEstimate estimate_lambda_ratio(std::span<const MeasurementRecord> ms) {
  if (ms.size() < 2) {
    throw InsufficientDataError("ratio estimator needs at least 2 measurements");
  }
  // The gap sum telescopes, so only the endpoints matter for the numerator.
  const auto gaps = static_cast<std::int64_t>(ms.size() - 1);
  std::int64_t packets = 0;
  for (std::size_t i = 1; i < ms.size(); ++i) packets += ms[i].c;
  const double mean_gap = static_cast<double>(ms.back().m - ms.front().m) / gaps;
  const double mean_count = static_cast<double>(packets) / gaps;
  return {mean_gap / mean_count, EstimatorMethod::erlang_ratio, gaps};
}

const char* to_string(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::single_pair_shift_corrected:
      return "single_pair_shift_corrected";
    case EstimatorMethod::erlang_ratio:
      return "erlang_ratio";
  }
  return "unknown";
}

}  // namespace icsim::analytic
