#pragma once

#include <cstdint>
#include <span>

#include "icsim/types.hpp"

// Closed-form densities and rate estimators for Poisson input observed
// through hybrid interrupt coalescence. Time arguments are in nanoseconds
// (as doubles); densities are per nanosecond.
namespace icsim::analytic {

struct DistParams {
  double lambda = 1.0;  ///< exponential scale parameter
  double b = 0.0;       ///< shift (shifted exp) or truncation bound (truncated exp)

  double k_ratio() const { return b / lambda; }
};

void validate(const DistParams& p);

/// e^{-(y-b)/lambda} / lambda on [b, inf).
double pdf_shifted_exp(double y, const DistParams& p);
double mean_shifted_exp(const DistParams& p);

/// e^{-y/lambda} / (lambda (1 - e^{-k})) on [0, b]. Throws ConfigError if b == 0.
double pdf_trunc_exp(double y, const DistParams& p);
double mean_trunc_exp(const DistParams& p);

/// Density of the inter-arrival preceding a measurement carrying i packets:
/// an i-Erlang shifted by T_pack (= p.b). Order 1 is the shifted exponential.
double pdf_erlang_shifted(double y, int order, const DistParams& p);

/// Sum of pdf_erlang_shifted over orders 1..max_order. Tends to 1/lambda for
/// y > T_pack as max_order grows.
double mixture_density(double y, int max_order, const DistParams& p);

enum class EstimatorMethod { single_pair_shift_corrected, erlang_ratio };

struct LambdaEstimate {
  double value = 0.0;  ///< ns
  EstimatorMethod method = EstimatorMethod::erlang_ratio;
  std::int64_t sample_count = 0;
};

/// Mean gap between consecutive single-packet measurements, minus T_pack.
/// Throws InsufficientDataError when no such pair exists.
LambdaEstimate estimate_lambda_single_pairs(std::span<const MeasurementRecord> ms,
                                            Nanos t_pack);

/// Mean first-order measurement gap divided by the mean packet count of the
/// measurements closing those gaps. Needs at least two measurements.
LambdaEstimate estimate_lambda_ratio(std::span<const MeasurementRecord> ms);

const char* to_string(EstimatorMethod m);

}  // namespace icsim::analytic
