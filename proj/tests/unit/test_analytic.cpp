#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <limits>

#include "icsim/analytic.hpp"
#include "icsim/error.hpp"
#include "icsim/meassim.hpp"
#include "icsim/trafficgen.hpp"

using namespace icsim;
using namespace icsim::analytic;

namespace {

constexpr double us = 1000.0;
const DistParams kP{10 * us, 30 * us};  // lambda = 10 us, T_pack = 30 us

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

// Density of T + X_1 + ... + X_i with X_j ~ Exp(lambda), built by repeated
// numerical convolution rather than from the closed form.
double convolution_oracle(double y, int order, double lambda, double shift) {
  if (order == 1) return y < shift ? 0.0 : std::exp(-(y - shift) / lambda) / lambda;
  if (y <= shift) return 0.0;
  auto integrand = [&](double x) {
    return convolution_oracle(y - x, order - 1, lambda, shift) * std::exp(-x / lambda) / lambda;
  };
  return boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.0, y - shift);
}

}  // namespace

TEST(ShiftedExp, Basics) {
  EXPECT_DOUBLE_EQ(pdf_shifted_exp(kP.b, kP), 1.0 / kP.lambda);
  EXPECT_EQ(pdf_shifted_exp(kP.b - 1, kP), 0.0);
  EXPECT_DOUBLE_EQ(mean_shifted_exp(kP), 40 * us);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_NEAR(integrate([](double y) { return pdf_shifted_exp(y, kP); }, kP.b, inf), 1.0, 1e-9);
}

TEST(TruncExp, NormalizedAndMean) {
  EXPECT_NEAR(integrate([](double y) { return pdf_trunc_exp(y, kP); }, 0.0, kP.b), 1.0, 1e-12);
  const double oracle_mean =
      integrate([](double y) { return y * pdf_trunc_exp(y, kP); }, 0.0, kP.b);
  EXPECT_NEAR(mean_trunc_exp(kP), oracle_mean, 1e-9 * us);
  EXPECT_NEAR(mean_trunc_exp(kP) / us, 8.428, 5e-4);
  EXPECT_EQ(pdf_trunc_exp(kP.b + 1, kP), 0.0);
  EXPECT_EQ(pdf_trunc_exp(-1, kP), 0.0);
}

TEST(TruncExp, LargeRatioApproachesLambda) {
  const DistParams wide{10 * us, 400 * us};
  EXPECT_NEAR(mean_trunc_exp(wide), wide.lambda, 1e-9 * wide.lambda);
  EXPECT_LT(mean_trunc_exp(DistParams{10 * us, 5 * us}), 2.5 * us + 1e-9);
}

TEST(TruncExp, DegenerateSupportRejected) {
  EXPECT_THROW(pdf_trunc_exp(0, DistParams{10, 0}), ConfigError);
  EXPECT_THROW(mean_trunc_exp(DistParams{10, 0}), ConfigError);
  EXPECT_THROW(pdf_shifted_exp(0, DistParams{0, 1}), ConfigError);
  EXPECT_THROW(pdf_shifted_exp(0, DistParams{1, -1}), ConfigError);
}

TEST(ErlangShifted, OrderOneIsShiftedExp) {
  for (double y : {0.0, 29 * us, 30 * us, 31 * us, 100 * us, 500 * us}) {
    EXPECT_DOUBLE_EQ(pdf_erlang_shifted(y, 1, kP), pdf_shifted_exp(y, kP));
  }
  EXPECT_EQ(pdf_erlang_shifted(kP.b, 2, kP), 0.0);
  EXPECT_THROW(pdf_erlang_shifted(1, 0, kP), ConfigError);
}

TEST(ErlangShifted, IntegratesToOne) {
  for (int i : {1, 2, 4, 10, 25, 60}) {
    // Finite upper limit: the mass sits near i * lambda, far from the
    // infinite-interval mapping's sample points for large i.
    const double area = integrate([i](double y) { return pdf_erlang_shifted(y, i, kP); }, kP.b,
                                  kP.b + (i + 40) * 4 * kP.lambda);
    EXPECT_NEAR(area, 1.0, 1e-6) << "order " << i;
  }
}

TEST(ErlangShifted, MatchesConvolutionOracle) {
  for (int i = 1; i <= 5; ++i) {
    for (double y : {35 * us, 45 * us, 60 * us, 90 * us, 150 * us}) {
      const double oracle = convolution_oracle(y, i, kP.lambda, kP.b);
      // Compare in per-microsecond units.
      EXPECT_NEAR(pdf_erlang_shifted(y, i, kP) * us, oracle * us, 1e-6) << "i=" << i << " y=" << y;
    }
  }
}

TEST(ErlangShifted, LogSpaceBranchIsContinuous) {
  // Orders above 20 switch evaluation paths; the two must agree on the
  // recurrence f_{i+1}(y) = f_i(y) * x / i.
  const double y = kP.b + 200 * us;
  const double x = (y - kP.b) / kP.lambda;
  EXPECT_NEAR(pdf_erlang_shifted(y, 21, kP), pdf_erlang_shifted(y, 20, kP) * x / 20, 1e-12 / us);
  EXPECT_GT(pdf_erlang_shifted(kP.b + 5000 * us, 400, kP), 0.0);
}

TEST(Mixture, ConvergesToInverseLambda) {
  for (double y : {40 * us, 100 * us, 300 * us}) {
    EXPECT_NEAR(mixture_density(y, 50, kP) * us, us / kP.lambda, 1e-4) << y;
  }
  EXPECT_EQ(mixture_density(kP.b - 1, 50, kP), 0.0);
  EXPECT_DOUBLE_EQ(mixture_density(70 * us, 1, kP), pdf_shifted_exp(70 * us, kP));
}

TEST(Mixture, MonotoneInOrderAndBounded) {
  for (double y : {31 * us, 80 * us, 250 * us, 900 * us}) {
    double prev = 0.0;
    for (int n = 1; n <= 120; ++n) {
      const double v = mixture_density(y, n, kP);
      EXPECT_GE(v, prev);
      EXPECT_LE(v, 1.0 / kP.lambda * (1 + 1e-12));
      prev = v;
    }
  }
}

TEST(SinglePairEstimator, ShiftCorrectedMean) {
  const std::vector<MeasurementRecord> ms{{0, 1}, {40'000, 1}, {80'000, 1}, {120'000, 1}};
  const auto e = estimate_lambda_single_pairs(ms, 30'000);
  EXPECT_DOUBLE_EQ(e.value, 10'000);
  EXPECT_EQ(e.sample_count, 3);
  EXPECT_EQ(e.method, EstimatorMethod::single_pair_shift_corrected);
}

TEST(SinglePairEstimator, NeedsConsecutiveSingles) {
  const std::vector<MeasurementRecord> ms{{0, 2}, {40'000, 1}, {80'000, 3}, {90'000, 1}};
  EXPECT_THROW(estimate_lambda_single_pairs(ms, 30'000), InsufficientDataError);
  EXPECT_THROW(estimate_lambda_single_pairs({}, 30'000), InsufficientDataError);
}

TEST(RatioEstimator, Examples) {
  const std::vector<MeasurementRecord> ones{{0, 1}, {7, 1}, {14, 1}, {21, 1}};
  EXPECT_DOUBLE_EQ(estimate_lambda_ratio(ones).value, 7.0);
  const std::vector<MeasurementRecord> fours{{0, 4}, {100'000, 4}, {200'000, 4}};
  EXPECT_DOUBLE_EQ(estimate_lambda_ratio(fours).value, 25'000.0);
  EXPECT_THROW(estimate_lambda_ratio(std::vector<MeasurementRecord>{{0, 1}}), InsufficientDataError);
  EXPECT_STREQ(to_string(EstimatorMethod::erlang_ratio), "erlang_ratio");
}

TEST(RatioEstimator, ShiftInvariant) {
  std::vector<MeasurementRecord> ms{{3, 2}, {50'000, 5}, {90'001, 1}, {200'000, 7}};
  const double base = estimate_lambda_ratio(ms).value;
  for (auto& r : ms) r.m += 123'456'789;
  EXPECT_EQ(estimate_lambda_ratio(ms).value, base);
}

// A two-packet group is an exponential wait for its first packet, one
// intra-group gap shorter than T_pack, then T_pack. So its mean gap is
// lambda + mean_trunc_exp + T_pack, which is measurably below 2 lambda + T_pack
// when T_pack / lambda is small.
TEST(TwoPacketGap, MeanIsExpPlusTruncatedExpPlusTPack) {
  trafficgen::PoissonConfig p;
  p.lambda_ns = 12'500;
  p.duration = 20 * kSecond;
  p.seed = 11;
  const auto ms = meassim::coalesce(trafficgen::gen_poisson(p),
                                    meassim::Hic{30 * kMicrosecond, 300 * kMicrosecond});
  double sum = 0, sum2 = 0;
  double n = 0;
  for (std::size_t i = 1; i < ms.records.size(); ++i) {
    if (ms.records[i].c != 2) continue;
    const double g = static_cast<double>(ms.records[i].m - ms.records[i - 1].m);
    sum += g;
    sum2 += g * g;
    ++n;
  }
  ASSERT_GT(n, 1000);
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  const DistParams d{p.lambda_ns, 30'000};
  const double exact = p.lambda_ns + mean_trunc_exp(d) + 30'000;
  const double naive = 2 * p.lambda_ns + 30'000;
  EXPECT_LT(std::abs(mean - exact), 3 * se);
  EXPECT_GT(std::abs(mean - naive), 3 * se);
  // With a large T_pack / lambda the two agree.
  EXPECT_NEAR(mean_trunc_exp(DistParams{1'000, 30'000}), 1'000, 1e-6);
}
