#include "icsim/pdmm.hpp"

#include <algorithm>
#include <cmath>

#include "icsim/chi_square.hpp"
#include "icsim/error.hpp"

namespace icsim::pdmm {

void validate(const PdmmConfig& cfg) {
  if (cfg.max_order < 1) throw ConfigError("pdmm max_order (N) must be >= 1");
  if (cfg.block_length < 2) throw ConfigError("pdmm block_length (L) must be >= 2");
  if (cfg.sub_bins < 2) throw ConfigError("pdmm sub_bins (K) must be >= 2");
  if (!(cfg.false_alarm > 0.0 && cfg.false_alarm < 1.0)) {
    throw ConfigError("pdmm false_alarm (T) must lie in (0, 1)");
  }
  if (cfg.lower < 0 || cfg.guard < 0) throw ConfigError("pdmm lower/guard must be >= 0");
  if (cfg.bin_width <= 0) throw ConfigError("pdmm bin_width must be > 0");
  if (cfg.upper <= cfg.range_begin()) {
    throw ConfigError("pdmm upper (T_max) must exceed lower + guard");
  }
  if ((cfg.upper - cfg.range_begin()) % (cfg.sub_bins * cfg.bin_width) != 0) {
    throw ConfigError("pdmm range width must be divisible by sub_bins * bin_width");
  }
  if (cfg.window_blocks < 0) throw ConfigError("pdmm window_blocks must be >= 0");
}

InterArrivalHistogram::InterArrivalHistogram(Nanos begin, Nanos end, Nanos bin_width)
    : begin_(begin), end_(end), bin_width_(bin_width) {
  if (bin_width <= 0 || end <= begin) throw ConfigError("histogram range is empty");
  counts_.assign(static_cast<std::size_t>((end - begin + bin_width - 1) / bin_width), 0);
}

bool InterArrivalHistogram::add(Nanos diff) {
  if (diff < begin_ || diff >= end_) return false;
  ++counts_[static_cast<std::size_t>((diff - begin_) / bin_width_)];
  ++total_;
  return true;
}

void InterArrivalHistogram::add(const InterArrivalHistogram& other) {
  if (other.counts_.size() != counts_.size()) throw ConfigError("histogram shape mismatch");
  std::ranges::transform(counts_, other.counts_, counts_.begin(), std::plus<>{});
  total_ += other.total_;
}

void InterArrivalHistogram::subtract(const InterArrivalHistogram& other) {
  if (other.counts_.size() != counts_.size()) throw ConfigError("histogram shape mismatch");
  std::ranges::transform(counts_, other.counts_, counts_.begin(), std::minus<>{});
  total_ -= other.total_;
}

void InterArrivalHistogram::clear() {
  std::ranges::fill(counts_, 0);
  total_ = 0;
}

std::uint64_t accumulate_block(InterArrivalHistogram& hist,
                               std::span<const MeasurementRecord> history,
                               std::span<const MeasurementRecord> block, int max_order) {
  const auto h = static_cast<std::int64_t>(history.size());
  auto at = [&](std::int64_t idx) {
    return idx < 0 ? history[static_cast<std::size_t>(h + idx)].m
                   : block[static_cast<std::size_t>(idx)].m;
  };
  std::uint64_t counted = 0;
  for (std::int64_t n = 0; n < static_cast<std::int64_t>(block.size()); ++n) {
    const Nanos current = block[static_cast<std::size_t>(n)].m;
    const std::int64_t reach = std::min<std::int64_t>(max_order, n + h);
    for (std::int64_t i = 1; i <= reach; ++i) {
      const Nanos diff = current - at(n - i);
      // Differences grow with the order; nothing further can be in range.
      if (diff >= hist.end()) break;
      counted += hist.add(diff) ? 1 : 0;
    }
  }
  return counted;
}

std::optional<ChiSquareResult> pearson_chi_square(const InterArrivalHistogram& hist,
                                                  int sub_bins) {
  if (sub_bins < 2) throw ConfigError("pearson test needs >= 2 sub-bins");
  const auto counts = hist.counts();
  if (counts.size() % static_cast<std::size_t>(sub_bins) != 0) {
    throw ConfigError("raw bin count must be divisible by sub_bins");
  }
  const std::size_t width = counts.size() / static_cast<std::size_t>(sub_bins);
  std::vector<std::uint64_t> grouped(static_cast<std::size_t>(sub_bins), 0);
  for (std::size_t j = 0; j < counts.size(); ++j) grouped[j / width] += counts[j];
  return pearson_chi_square(grouped);
}

std::optional<ChiSquareResult> pearson_chi_square(
    std::span<const std::uint64_t> sub_bin_counts) {
  std::uint64_t total = 0;
  for (auto c : sub_bin_counts) total += c;
  if (sub_bin_counts.size() < 2) throw ConfigError("pearson test needs >= 2 sub-bins");
  if (total < 5 * sub_bin_counts.size()) return std::nullopt;
  std::vector<double> as_double(sub_bin_counts.begin(), sub_bin_counts.end());
  return pearson_chi_square(std::span<const double>(as_double));
}

ChiSquareResult pearson_chi_square(std::span<const double> sub_bin_counts) {
  const auto k = static_cast<double>(sub_bin_counts.size());
  if (sub_bin_counts.size() < 2) throw ConfigError("pearson test needs >= 2 sub-bins");
  double total = 0.0;
  for (double c : sub_bin_counts) total += c;
  if (!(total > 0.0)) throw InsufficientDataError("pearson test on an empty histogram");
  const double expected = total / k;
  double chi2 = 0.0;
  for (double c : sub_bin_counts) chi2 += (c - expected) * (c - expected);
  chi2 /= expected;
  return {chi2, chi_square_cdf(chi2, k - 1.0)};
}

double chi_square_for_deviation(double deviation, int sub_bins, double total) {
  const double k = sub_bins;
  return deviation * deviation * total * (k + k / (k - 1.0));
}

double min_detectable_deviation(int sub_bins, double total, double false_alarm) {
  if (sub_bins < 2) throw ConfigError("sub_bins must be >= 2");
  if (!(total >= 1.0)) throw ConfigError("histogram total must be >= 1");
  if (!(false_alarm > 0.0 && false_alarm < 1.0)) {
    throw ConfigError("false_alarm must lie in (0, 1)");
  }
  const double k = sub_bins;
  const double threshold = chi_square_quantile(1.0 - false_alarm, k - 1.0);
  return std::sqrt(threshold / (total * (k + k / (k - 1.0))));
}

PdmmDetector::PdmmDetector(PdmmConfig cfg) : cfg_(cfg), hist_((validate(cfg), cfg)) {
  report_.detector = "pdmm";
  block_.reserve(static_cast<std::size_t>(cfg_.block_length));
}

std::optional<ChiSquareResult> PdmmDetector::push(const MeasurementRecord& record) {
  if (report_.detected) return std::nullopt;
  block_.push_back(record);
  if (static_cast<std::int64_t>(block_.size()) < cfg_.block_length) return std::nullopt;
  return close_block();
}

std::optional<ChiSquareResult> PdmmDetector::close_block() {
  InterArrivalHistogram fresh(cfg_);
  accumulate_block(fresh, history_, block_, cfg_.max_order);
  hist_.add(fresh);
  if (cfg_.window_blocks > 0) {
    window_.push_back(std::move(fresh));
    if (static_cast<int>(window_.size()) > cfg_.window_blocks) {
      hist_.subtract(window_.front());
      window_.pop_front();
    }
  }
  const std::int64_t block_index = report_.blocks_processed++;

  // Keep the last N measurements as history for the next block.
  const auto keep = static_cast<std::size_t>(cfg_.max_order);
  history_.insert(history_.end(), block_.begin(), block_.end());
  if (history_.size() > keep) {
    history_.erase(history_.begin(),
                   history_.end() - static_cast<std::ptrdiff_t>(keep));
  }
  const Nanos block_end = block_.back().m;
  block_.clear();

  if (block_index == 0) return std::nullopt;
  const auto result = pearson_chi_square(hist_, cfg_.sub_bins);
  if (!result) return std::nullopt;
  report_.trajectory.push_back({block_index, result->chi_square, result->p});
  if (result->p > 1.0 - cfg_.false_alarm) {
    report_.detected = true;
    report_.detection_time = block_end;
  }
  return result;
}

DetectionReport detect_stream(std::span<const MeasurementRecord> ms, const PdmmConfig& cfg) {
  PdmmDetector detector(cfg);
  for (const auto& r : ms) {
    detector.push(r);
    if (detector.detected()) break;
  }
  DetectionReport report = detector.report();
  report.insufficient_data =
      static_cast<std::int64_t>(ms.size()) < 2 * cfg.block_length;
  return report;
}

}  // namespace icsim::pdmm
