#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icsim/meassim.hpp"
#include "icsim/pad.hpp"
#include "icsim/pdmm.hpp"
#include "icsim/trafficgen.hpp"
#include "icsim/types.hpp"

// Experiment description shared by the CLI, config files and presets.
// Config files are JSON documents using the field names of to_text().
namespace icsim::config {

struct TrafficSpec {
  trafficgen::PoissonConfig background;  ///< seed and duration are set per trial
  std::optional<trafficgen::AttackConfig> attack;
  /// Draw each trial's attack start offset uniformly from [0, period).
  bool random_offset = true;
};

/// One measurement system: a column of the results table.
struct SystemSpec {
  std::string name;
  /// Off for a hardware tap, which stamps packets on the wire.
  bool transfer_enabled = true;
  meassim::TransferConfig transfer;
  meassim::CoalescenceConfig coalescence = meassim::Hic{30 * kMicrosecond, 300 * kMicrosecond};
  /// Excluded band above T_abs where the system's own timers bend the
  /// background histogram.
  Nanos pdmm_guard = 0;
  /// Detectors run on this system; empty means all configured detectors.
  std::vector<std::string> detectors;
};

struct DetectorSpec {
  std::optional<pdmm::PdmmConfig> pdmm;
  std::optional<pad::PadConfig> pad;
  /// Take PDMM's lower cutoff and guard from each system, rounding upper up
  /// to keep the range divisible into sub-bins.
  bool pdmm_fit_to_system = true;
  /// Background-only trials per system used to set PAD's peak_factor for at
  /// most 5% false alarms. 0 keeps the configured factor.
  int pad_calibration_trials = 0;
};

struct ExperimentConfig {
  std::string name = "custom";
  TrafficSpec traffic;
  std::vector<SystemSpec> systems;
  DetectorSpec detectors;
  Nanos detection_window = 20 * kSecond;
  int trials = 1;
  std::uint64_t seed_base = 1;
  int threads = 1;  ///< trial-level parallelism; results do not depend on it
};

void validate(const ExperimentConfig& cfg);

/// Named systems: "hardware", "hicv1", "hicv2".
SystemSpec system_preset(const std::string& name);
std::vector<std::string> system_preset_names();

/// Named experiments: "high-rate", "low-rate", and their attack-free
/// "-background" variants.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Parses a config document. Missing fields keep their defaults; unknown
/// fields are rejected. Throws ConfigError.
ExperimentConfig parse(const std::string& text);
ExperimentConfig load(const std::string& path);

/// Serializes every field, so parse(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& cfg);
/// A system as it appears inside an experiment's "systems" list.
std::string to_text(const SystemSpec& system);

}  // namespace icsim::config
