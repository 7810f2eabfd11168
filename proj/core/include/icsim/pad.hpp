#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "icsim/types.hpp"

// Spectral baseline detector: packet counts on a uniform time grid, then a
// periodogram peak test per sliding window. It treats the measurement stream
// as if it were uniformly sampled, which is exactly what coalescence breaks.
namespace icsim::pad {

struct PadConfig {
  Nanos sample_interval = 100 * kMicrosecond;
  int window = 4096;          ///< samples per analysis window, power of two
  double peak_factor = 30.0;  ///< peak must exceed this x the noise floor
  double min_freq = 50.0;     ///< Hz
  double max_freq = 5000.0;   ///< Hz
  /// Half-width, in bins, of the running median used as the noise floor.
  /// Coalesced count series have a strongly coloured spectrum, so a single
  /// band-wide median over-rewards the upper band. 0 selects the band median.
  int noise_bins = 32;
};

void validate(const PadConfig& cfg);

/// series[j] = sum of c over measurements with m in [j*dt, (j+1)*dt). The
/// length defaults to just past the last measurement.
std::vector<double> rasterize(std::span<const MeasurementRecord> ms, Nanos sample_interval,
                              std::optional<std::size_t> length = std::nullopt);

/// One-sided periodogram |X_k|^2 / n, k = 0..n/2, of the mean-removed input.
std::vector<double> periodogram(std::span<const double> samples);

struct WindowPeak {
  std::size_t bin = 0;
  double frequency = 0.0;  ///< Hz
  double ratio = 0.0;      ///< peak / local noise floor
};

/// Peak-to-median ratio of one window's in-band periodogram.
WindowPeak analyze_window(std::span<const double> samples, const PadConfig& cfg);

/// Slides a window with hop window/2 and reports at the first window whose
/// in-band peak exceeds peak_factor x its noise floor. detection_time is
/// the end of that window. Shorter inputs give an insufficient_data report.
DetectionReport detect_psd(std::span<const double> series, const PadConfig& cfg);

}  // namespace icsim::pad
