#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace icsim {

/// Time in integer nanoseconds since trace start.
using Nanos = std::int64_t;

inline constexpr Nanos kMicrosecond = 1'000;
inline constexpr Nanos kMillisecond = 1'000'000;
inline constexpr Nanos kSecond = 1'000'000'000;

enum class Label : std::uint8_t { background = 0, attack = 1 };

/// One packet as seen on the wire. The label is provenance only; no detector
/// reads it.
struct PacketRecord {
  Nanos timestamp = 0;
  std::uint32_t size = 0;
  Label label = Label::background;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

using Trace = std::vector<PacketRecord>;

/// One interrupt service request: its assertion time and how many packets
/// it delivered.
struct MeasurementRecord {
  Nanos m = 0;
  std::uint32_t c = 1;

  friend bool operator==(const MeasurementRecord&,
                         const MeasurementRecord&) = default;
};

struct TrajectoryPoint {
  std::int64_t index = 0;
  double statistic = 0.0;
  double p = 0.0;
};

/// Verdict of a detector over a measurement stream.
struct DetectionReport {
  std::string detector;
  bool detected = false;
  std::optional<Nanos> detection_time;
  std::int64_t blocks_processed = 0;
  bool insufficient_data = false;
  std::vector<TrajectoryPoint> trajectory;
};

}  // namespace icsim
