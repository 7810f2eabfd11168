#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "icsim/types.hpp"

// Periodic detection over multi-order measurement inter-arrivals.
//
// Background traffic seen through interrupt coalescence yields an
// approximately flat histogram of M[n] - M[n-i] once orders 1..N are pooled;
// a periodic component piles up mass at its period and harmonics. The
// detector tests the pooled histogram for uniformity with Pearson's
// chi-square statistic, one block of L measurements at a time.
namespace icsim::pdmm {

struct PdmmConfig {
  // Orders have to reach `upper` or the pooled histogram is not flat; the
  // per-measurement loop stops early once differences leave the range, so a
  // large N is cheap. K = 470 gives 10 us sub-bins over [300 us, 5 ms).
  int max_order = 150;                   ///< N
  std::int64_t block_length = 5000;      ///< L, measurements per block
  int sub_bins = 470;                    ///< K
  double false_alarm = 0.05;             ///< T; detect when p > 1 - T
  Nanos lower = 300 * kMicrosecond;      ///< T_abs of the measuring system
  Nanos upper = 5 * kMillisecond;        ///< T_max, exclusive
  Nanos bin_width = kMicrosecond;        ///< raw histogram quantization
  Nanos guard = 0;                       ///< extra exclusion above `lower`
  int window_blocks = 0;                 ///< 0 keeps every block's counts

  /// First counted inter-arrival value.
  Nanos range_begin() const { return lower + guard; }
};

void validate(const PdmmConfig& cfg);

/// Counts of quantized inter-arrival values over [begin, end).
class InterArrivalHistogram {
 public:
  InterArrivalHistogram(Nanos begin, Nanos end, Nanos bin_width);
  explicit InterArrivalHistogram(const PdmmConfig& cfg)
      : InterArrivalHistogram(cfg.range_begin(), cfg.upper, cfg.bin_width) {}

  /// Counts `diff` if it lies in range; returns whether it did.
  bool add(Nanos diff);
  void add(const InterArrivalHistogram& other);
  void subtract(const InterArrivalHistogram& other);
  void clear();

  std::span<const std::uint64_t> counts() const { return counts_; }
  std::uint64_t total() const { return total_; }
  Nanos begin() const { return begin_; }
  Nanos end() const { return end_; }
  Nanos bin_width() const { return bin_width_; }

 private:
  Nanos begin_;
  Nanos end_;
  Nanos bin_width_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Adds M[n] - M[n-i] for every n in `block` and i in 1..max_order, reaching
/// back into `history` (the measurements preceding the block) where needed.
/// Returns the number of differences that fell in range.
std::uint64_t accumulate_block(InterArrivalHistogram& hist,
                               std::span<const MeasurementRecord> history,
                               std::span<const MeasurementRecord> block, int max_order);

struct ChiSquareResult {
  double chi_square = 0.0;
  double p = 0.0;  ///< chi-square CDF with K-1 dof at chi_square
};

/// Pearson uniformity test over `sub_bins` equal-width groups of raw bins.
/// Returns nullopt while total < 5 * sub_bins (expected count below 5).
std::optional<ChiSquareResult> pearson_chi_square(const InterArrivalHistogram& hist,
                                                  int sub_bins);
/// Same test over counts already grouped into sub-bins.
std::optional<ChiSquareResult> pearson_chi_square(std::span<const std::uint64_t> sub_bin_counts);
ChiSquareResult pearson_chi_square(std::span<const double> sub_bin_counts);

/// Chi-square produced by one sub-bin exceeding its uniform share by S*O
/// (the rest sharing the deficit): S^2 O (K + K/(K-1)).
double chi_square_for_deviation(double deviation, int sub_bins, double total);

/// Smallest deviation S whose chi_square_for_deviation reaches the
/// 1 - false_alarm quantile of chi-square with K-1 dof.
double min_detectable_deviation(int sub_bins, double total, double false_alarm);

/// Streaming detector. Feed measurements in time order; the first block
/// only populates the histogram, each later block is accumulated and tested.
class PdmmDetector {
 public:
  explicit PdmmDetector(PdmmConfig cfg);

  /// Returns the verdict of the block this measurement completes, if that
  /// block was tested.
  std::optional<ChiSquareResult> push(const MeasurementRecord& record);

  bool detected() const { return report_.detected; }
  const DetectionReport& report() const { return report_; }
  const InterArrivalHistogram& histogram() const { return hist_; }
  const PdmmConfig& config() const { return cfg_; }

 private:
  std::optional<ChiSquareResult> close_block();

  PdmmConfig cfg_;
  InterArrivalHistogram hist_;
  std::deque<InterArrivalHistogram> window_;
  std::vector<MeasurementRecord> history_;
  std::vector<MeasurementRecord> block_;
  DetectionReport report_;
};

/// Runs a PdmmDetector over `ms`, stopping at the first detection. Streams
/// shorter than two blocks produce a report with insufficient_data set.
DetectionReport detect_stream(std::span<const MeasurementRecord> ms, const PdmmConfig& cfg);

}  // namespace icsim::pdmm
