#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icsim/config.hpp"
#include "icsim/meassim.hpp"
#include "icsim/types.hpp"

// Seeded experiment pipeline: generate -> merge -> measure -> detect, over
// every configured system, aggregated into a detectors x systems table.
namespace icsim::harness {

struct MeasurementStats {
  std::int64_t measurements = 0;
  std::int64_t packets = 0;
  double mean_gap_us = 0.0;      ///< first-order M[n] - M[n-1]
  double var_gap_us2 = 0.0;      ///< unbiased sample variance of the same gaps
  double mean_c = 0.0;
  double rate_per_s = 0.0;       ///< measurements per second of measured span
  double packet_timer_fraction = 0.0;  ///< share of ISRs fired by T_pack (HIC only)
};

/// Throws InsufficientDataError for fewer than two measurements.
MeasurementStats measurement_stats(std::span<const MeasurementRecord> ms);
MeasurementStats measurement_stats(const meassim::Measurements& ms);

/// One trial's merged input trace.
Trace build_trace(const config::ExperimentConfig& cfg, int trial);
/// Background-only trace used for PAD calibration run `index`.
Trace build_calibration_trace(const config::ExperimentConfig& cfg, int index);

meassim::Measurements measure_on(const config::SystemSpec& system,
                                 std::span<const PacketRecord> trace);

/// PDMM settings for one system: lower cutoff at its absolute timer, its
/// guard band, and upper rounded up to a whole number of sub-bins.
pdmm::PdmmConfig fit_pdmm(const pdmm::PdmmConfig& base, const config::SystemSpec& system);

/// Smallest threshold exceeded by at most `false_alarm` of the given
/// per-trace maximum statistics.
double calibrate_threshold(std::vector<double> background_maxima, double false_alarm);

/// Runs one named detector ("pdmm" or "pad") over a measurement stream.
/// `length` bounds the PAD count series (0 sizes it to the data).
DetectionReport run_detector(const std::string& detector, std::span<const MeasurementRecord> ms,
                             const config::ExperimentConfig& cfg,
                             const config::SystemSpec& system, Nanos length = 0,
                             std::optional<double> pad_peak_factor = std::nullopt);

struct DetectorOutcome {
  std::string detector;
  std::optional<Nanos> time_to_detection;  ///< absent on timeout
  bool insufficient_data = false;
  std::int64_t blocks = 0;
  double peak_statistic = 0.0;
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string system;
  MeasurementStats stats;
  std::vector<DetectorOutcome> detections;
};

struct TableCell {
  std::string detector;
  std::string system;
  bool ran = false;
  int trials = 0;
  int detections = 0;
  std::optional<Nanos> median;  ///< median time to detection; absent = timeout
};

struct SystemSummary {
  std::string name;
  MeasurementStats mean_stats;  ///< field-wise mean over trials
  std::optional<pdmm::PdmmConfig> pdmm;
  std::optional<double> pad_peak_factor;
};

struct ExperimentResult {
  config::ExperimentConfig config;
  std::vector<SystemSummary> systems;
  std::vector<TableCell> table;
  std::vector<TrialRecord> trials;

  const TableCell* cell(const std::string& detector, const std::string& system) const;
  const SystemSummary* summary(const std::string& system) const;
};

/// Deterministic in (config, seed_base); the thread count does not change
/// the result. Stage failures are rethrown as StageError with the original
/// error nested.
ExperimentResult run_experiment(const config::ExperimentConfig& cfg);

/// Median with timeouts ordered last; absent when the median is a timeout.
std::optional<Nanos> median_time(std::vector<std::optional<Nanos>> times);

std::string results_json(const ExperimentResult& result);
/// Rows = detectors, columns = systems; seconds, "-" for timeout, "n/a"
/// where the detector did not run on that system.
std::string results_csv(const ExperimentResult& result);
/// Rows = statistics, columns = systems.
std::string stats_csv(const ExperimentResult& result);
/// One row per trial, system and detector.
std::string trials_csv(const ExperimentResult& result);

enum class Format { json, csv };

/// Writes `path` in the given format (csv also writes <stem>_stats.csv and
/// <stem>_trials.csv next to it). Throws IoError.
void emit_results(const ExperimentResult& result, const std::string& path, Format format);

}  // namespace icsim::harness
