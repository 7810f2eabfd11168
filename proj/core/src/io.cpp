#include "icsim/io.hpp"

#include <array>
#include <charconv>
#include <limits>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "icsim/error.hpp"
#include "json_codec.hpp"

namespace icsim::io {
namespace {

constexpr std::string_view kTraceHeader = "t_ns,size_bytes,label";
constexpr std::string_view kMeasurementHeader = "m_ns,count";

template <class T>
T parse_field(std::string_view s, std::size_t line, const char* what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError("line " + std::to_string(line) + ": bad " + what + " '" + std::string(s) + "'");
  }
  return v;
}

// Splits one line into exactly N comma-separated fields.
template <std::size_t N>
std::array<std::string_view, N> split(std::string_view line, std::size_t lineno) {
  std::array<std::string_view, N> out;
  for (std::size_t i = 0; i < N; ++i) {
    const auto comma = line.find(',');
    if (i + 1 < N) {
      if (comma == std::string_view::npos) {
        throw IoError("line " + std::to_string(lineno) + ": expected " + std::to_string(N) +
                      " fields");
      }
      out[i] = line.substr(0, comma);
      line.remove_prefix(comma + 1);
    } else {
      if (comma != std::string_view::npos) {
        throw IoError("line " + std::to_string(lineno) + ": too many fields");
      }
      out[i] = line;
    }
  }
  return out;
}

void expect_header(std::istream& in, std::string_view header) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file, expected header '" + std::string(header) + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw IoError("expected header '" + std::string(header) + "', got '" + line + "'");
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

void write_trace(std::ostream& out, const Trace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& p : trace) {
    out << p.timestamp << ',' << p.size << ',' << static_cast<int>(p.label) << '\n';
  }
}

Trace read_trace(std::istream& in) {
  expect_header(in, kTraceHeader);
  Trace trace;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split<3>(line, lineno);
    PacketRecord p;
    p.timestamp = parse_field<Nanos>(f[0], lineno, "timestamp");
    p.size = parse_field<std::uint32_t>(f[1], lineno, "size");
    const int label = parse_field<int>(f[2], lineno, "label");
    if (p.timestamp < 0) throw IoError("line " + std::to_string(lineno) + ": negative timestamp");
    if (p.size < 1) throw IoError("line " + std::to_string(lineno) + ": size must be >= 1");
    if (label != 0 && label != 1) throw IoError("line " + std::to_string(lineno) + ": label must be 0 or 1");
    p.label = static_cast<Label>(label);
    trace.push_back(p);
  }
  if (in.bad()) throw IoError("read error");
  return trace;
}

void write_trace(const std::string& path, const Trace& trace) {
  auto out = open_out(path);
  write_trace(out, trace);
  finish_write(out, path);
}

Trace read_trace(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_trace(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_measurements(std::ostream& out, const std::vector<MeasurementRecord>& ms) {
  out << kMeasurementHeader << '\n';
  for (const auto& r : ms) out << r.m << ',' << r.c << '\n';
}

std::vector<MeasurementRecord> read_measurements(std::istream& in) {
  expect_header(in, kMeasurementHeader);
  std::vector<MeasurementRecord> ms;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split<2>(line, lineno);
    MeasurementRecord r;
    r.m = parse_field<Nanos>(f[0], lineno, "timestamp");
    r.c = parse_field<std::uint32_t>(f[1], lineno, "count");
    if (r.c < 1) throw IoError("line " + std::to_string(lineno) + ": count must be >= 1");
    if (!ms.empty() && r.m <= ms.back().m) {
      throw IoError("line " + std::to_string(lineno) + ": timestamps must be strictly increasing");
    }
    ms.push_back(r);
  }
  if (in.bad()) throw IoError("read error");
  return ms;
}

void write_measurements(const std::string& path, const std::vector<MeasurementRecord>& ms) {
  auto out = open_out(path);
  write_measurements(out, ms);
  finish_write(out, path);
}

std::vector<MeasurementRecord> read_measurements(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_measurements(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::string measurement_sidecar(const meassim::Measurements& ms,
                                const meassim::TransferConfig* transfer,
                                const meassim::CoalescenceConfig& coalescence) {
  codec::Json j;
  j["transfer"] = transfer ? codec::to_json(*transfer) : codec::Json(nullptr);
  j["coalescence"] = codec::to_json(coalescence);
  j["records"] = ms.records.size();
  j["packets"] = ms.packet_total();
  j["pic_flushed"] = ms.pic_flushed;
  j["firing"] = codec::Json{{"packet_timer", ms.firing.packet_timer},
                            {"absolute_timer", ms.firing.absolute_timer},
                            {"packet_count", ms.firing.packet_count},
                            {"flushed", ms.firing.flushed}};
  return j.dump(2) + "\n";
}

std::string sidecar_path(const std::string& measurement_path) { return measurement_path + ".json"; }

std::string report_json(const DetectionReport& report) {
  return codec::to_json(report).dump(2) + "\n";
}

DetectionReport parse_report(const std::string& json) {
  try {
    const auto j = codec::Json::parse(json);
    DetectionReport r;
    r.detector = j.at("detector").get<std::string>();
    r.detected = j.at("detected").get<bool>();
    if (!j.at("detection_time_ns").is_null()) r.detection_time = j.at("detection_time_ns").get<Nanos>();
    r.blocks_processed = j.at("blocks").get<std::int64_t>();
    r.insufficient_data = j.value("insufficient_data", false);
    for (const auto& t : j.at("trajectory")) {
      // JSON has no infinity; an unbounded statistic is written as null.
      const auto& stat = t.at("statistic");
      r.trajectory.push_back({t.at("block").get<std::int64_t>(),
                              stat.is_null() ? std::numeric_limits<double>::infinity()
                                             : stat.get<double>(),
                              t.at("p").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish_write(out, path);
}

std::string read_text(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream s;
  s << in.rdbuf();
  if (in.bad()) throw IoError("read error: " + path);
  return s.str();
}

}  // namespace icsim::io
