#include "icsim/pad.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>

#include "icsim/error.hpp"

namespace icsim::pad {
namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n), in_(fftw_alloc_real(n)), out_(fftw_alloc_complex(n / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::vector<double> power(std::span<const double> samples) {
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) in_[i] = samples[i] - mean;
    fftw_execute(plan_);
    std::vector<double> psd(n_ / 2 + 1);
    for (std::size_t k = 0; k < psd.size(); ++k) {
      psd[k] = (out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]) / static_cast<double>(n_);
    }
    return psd;
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_ = nullptr;
};

struct Band {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
};

Band band_bins(const PadConfig& cfg) {
  const double df = 1e9 / (static_cast<double>(cfg.window) * cfg.sample_interval);
  const auto nyquist_bin = static_cast<std::size_t>(cfg.window / 2);
  Band b;
  b.first = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.min_freq / df)));
  b.last = std::min(nyquist_bin, static_cast<std::size_t>(std::floor(cfg.max_freq / df)));
  if (b.last < b.first + 2) throw ConfigError("pad frequency band holds fewer than 3 bins");
  return b;
}

double ratio_of(double value, double floor) {
  if (floor > 0.0) return value / floor;
  // A flat (all-zero) spectrum has no peak; an isolated line over a zero
  // floor is unbounded.
  return value > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0;
}

double median_of(std::vector<double>& v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

WindowPeak peak_of(const std::vector<double>& psd, const Band& band, double df, int noise_bins) {
  WindowPeak peak;
  if (noise_bins <= 0) {
    std::vector<double> in_band(psd.begin() + static_cast<std::ptrdiff_t>(band.first),
                                psd.begin() + static_cast<std::ptrdiff_t>(band.last) + 1);
    const auto max_it = std::ranges::max_element(in_band);
    peak.bin = band.first + static_cast<std::size_t>(max_it - in_band.begin());
    const double max_value = *max_it;
    peak.ratio = ratio_of(max_value, median_of(in_band));
  } else {
    // Neighbourhood excludes the bin under test and DC.
    const auto h = static_cast<std::size_t>(noise_bins);
    std::vector<double> scratch;
    scratch.reserve(2 * h);
    peak.ratio = -1.0;
    for (std::size_t k = band.first; k <= band.last; ++k) {
      scratch.clear();
      const std::size_t lo = std::max<std::size_t>(1, k > h ? k - h : 1);
      const std::size_t hi = std::min(psd.size() - 1, k + h);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j != k) scratch.push_back(psd[j]);
      }
      const double r = ratio_of(psd[k], median_of(scratch));
      if (r > peak.ratio) {
        peak.ratio = r;
        peak.bin = k;
      }
    }
  }
  peak.frequency = static_cast<double>(peak.bin) * df;
  return peak;
}

}  // namespace

void validate(const PadConfig& cfg) {
  if (cfg.sample_interval <= 0) throw ConfigError("pad sample_interval must be > 0");
  if (cfg.window < 64 || !std::has_single_bit(static_cast<unsigned>(cfg.window))) {
    throw ConfigError("pad window must be a power of two >= 64");
  }
  if (!(cfg.peak_factor > 1.0)) throw ConfigError("pad peak_factor must be > 1");
  if (!(cfg.min_freq >= 0.0) || !(cfg.max_freq > cfg.min_freq)) {
    throw ConfigError("pad frequency band is empty");
  }
  if (cfg.noise_bins < 0 || cfg.noise_bins >= cfg.window / 4) {
    throw ConfigError("pad noise_bins must lie in [0, window/4)");
  }
  band_bins(cfg);
}

std::vector<double> rasterize(std::span<const MeasurementRecord> ms, Nanos sample_interval,
                              std::optional<std::size_t> length) {
  if (sample_interval <= 0) throw ConfigError("sample_interval must be > 0");
  std::size_t n = length.value_or(
      ms.empty() ? 0 : static_cast<std::size_t>(ms.back().m / sample_interval) + 1);
  std::vector<double> series(n, 0.0);
  for (const auto& r : ms) {
    if (r.m < 0) throw PreconditionError("rasterize: negative timestamp");
    const auto j = static_cast<std::size_t>(r.m / sample_interval);
    if (j < n) series[j] += r.c;
  }
  return series;
}

std::vector<double> periodogram(std::span<const double> samples) {
  if (samples.size() < 2) throw InsufficientDataError("periodogram needs >= 2 samples");
  RealFft fft(samples.size());
  return fft.power(samples);
}

WindowPeak analyze_window(std::span<const double> samples, const PadConfig& cfg) {
  validate(cfg);
  if (samples.size() != static_cast<std::size_t>(cfg.window)) {
    throw PreconditionError("analyze_window: sample count must equal the window");
  }
  const double df = 1e9 / (static_cast<double>(cfg.window) * cfg.sample_interval);
  return peak_of(periodogram(samples), band_bins(cfg), df, cfg.noise_bins);
}

DetectionReport detect_psd(std::span<const double> series, const PadConfig& cfg) {
  validate(cfg);
  DetectionReport report;
  report.detector = "pad";
  const auto window = static_cast<std::size_t>(cfg.window);
  if (series.size() < window) {
    report.insufficient_data = true;
    return report;
  }
  const Band band = band_bins(cfg);
  const double df = 1e9 / (static_cast<double>(cfg.window) * cfg.sample_interval);
  const double ln2 = std::log(2.0);
  RealFft fft(window);
  const std::size_t hop = window / 2;
  for (std::size_t start = 0; start + window <= series.size(); start += hop) {
    const auto peak = peak_of(fft.power(series.subspan(start, window)), band, df, cfg.noise_bins);
    const auto index = report.blocks_processed++;
    // p is the complement of the tail mass an exponential (white-noise)
    // periodogram bin would put beyond this multiple of its median.
    const double p = std::isfinite(peak.ratio) ? -std::expm1(-peak.ratio * ln2) : 1.0;
    report.trajectory.push_back({index, peak.ratio, p});
    if (peak.ratio > cfg.peak_factor) {
      report.detected = true;
      report.detection_time = static_cast<Nanos>(start + window) * cfg.sample_interval;
      break;
    }
  }
  return report;
}

}  // namespace icsim::pad
