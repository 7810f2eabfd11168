#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "icsim/meassim.hpp"
#include "icsim/types.hpp"

// File formats. Every reader/writer throws IoError on an unreadable or
// malformed file.
//
//   trace        t_ns,size_bytes,label        label 0 background, 1 attack
//   measurements m_ns,count                   plus a JSON sidecar <path>.json
//   report       JSON: detector, detected, detection_time_ns, blocks, trajectory
namespace icsim::io {

void write_trace(std::ostream& out, const Trace& trace);
Trace read_trace(std::istream& in);
void write_trace(const std::string& path, const Trace& trace);
Trace read_trace(const std::string& path);

void write_measurements(std::ostream& out, const std::vector<MeasurementRecord>& ms);
std::vector<MeasurementRecord> read_measurements(std::istream& in);
void write_measurements(const std::string& path, const std::vector<MeasurementRecord>& ms);
std::vector<MeasurementRecord> read_measurements(const std::string& path);

/// Config echo and run flags (pic_flushed, firing counts) for a measurement file.
std::string measurement_sidecar(const meassim::Measurements& ms,
                                const meassim::TransferConfig* transfer,
                                const meassim::CoalescenceConfig& coalescence);
std::string sidecar_path(const std::string& measurement_path);

std::string report_json(const DetectionReport& report);
DetectionReport parse_report(const std::string& json);

/// Writes `text` to `path`, replacing it. Throws IoError.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace icsim::io
