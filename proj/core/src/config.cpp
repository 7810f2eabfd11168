#include "icsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "icsim/error.hpp"
#include "json_codec.hpp"

namespace icsim {
namespace codec {
namespace {

// Reads fields out of one JSON object and rejects any it did not consume, so
// a misspelt key fails loudly instead of silently keeping a default.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const Json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void integer(const char* key, T& out) {
    if (!j_.contains(key)) return;
    const Json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(where_ + "." + key + ": expected an integer");
    if (v.is_number_unsigned()) {
      out = static_cast<T>(v.get<std::uint64_t>());
    } else {
      out = static_cast<T>(v.get<std::int64_t>());
    }
  }

  void real(const char* key, double& out) {
    if (!j_.contains(key)) return;
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError(where_ + "." + key + ": expected a number");
    out = v.get<double>();
  }

  void boolean(const char* key, bool& out) {
    if (!j_.contains(key)) return;
    const Json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(where_ + "." + key + ": expected true or false");
    out = v.get<bool>();
  }

  void string(const char* key, std::string& out) {
    if (!j_.contains(key)) return;
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
    out = v.get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown field '" + key + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

Json to_json(const trafficgen::SizeDistribution& d) {
  if (const auto* f = std::get_if<trafficgen::FixedSize>(&d)) return Json{{"fixed", f->bytes}};
  const auto& e = std::get<trafficgen::EmpiricalSizes>(d);
  return Json{{"bytes", e.bytes}, {"weights", e.weights}};
}

Json to_json(const trafficgen::PoissonConfig& c) {
  return Json{{"lambda_ns", c.lambda_ns}, {"sizes", to_json(c.sizes)}};
}

Json to_json(const trafficgen::AttackConfig& c) {
  return Json{{"period_ns", c.period},
              {"packet_size", c.packet_size},
              {"start_offset_ns", c.start_offset},
              {"jitter_stddev_ns", c.jitter_stddev_ns}};
}

Json to_json(const meassim::TransferConfig& c) { return Json{{"bit_rate", c.bit_rate}}; }

Json to_json(const meassim::CoalescenceConfig& c) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, meassim::Tic>) {
          return Json{{"type", "tic"}, {"t_fix_ns", v.t_fix}};
        } else if constexpr (std::is_same_v<T, meassim::Pic>) {
          return Json{{"type", "pic"}, {"count", v.count}};
        } else {
          Json j{{"type", "hic"}, {"t_pack_ns", v.t_pack}, {"t_abs_ns", v.t_abs}};
          if (v.allow_inert_packet_timer) j["allow_inert_packet_timer"] = true;
          return j;
        }
      },
      c);
}

Json to_json(const pdmm::PdmmConfig& c) {
  return Json{{"max_order", c.max_order},     {"block_length", c.block_length},
              {"sub_bins", c.sub_bins},       {"false_alarm", c.false_alarm},
              {"lower_ns", c.lower},          {"upper_ns", c.upper},
              {"bin_width_ns", c.bin_width},  {"guard_ns", c.guard},
              {"window_blocks", c.window_blocks}};
}

Json to_json(const pad::PadConfig& c) {
  return Json{{"sample_interval_ns", c.sample_interval},
              {"window", c.window},
              {"peak_factor", c.peak_factor},
              {"min_freq_hz", c.min_freq},
              {"max_freq_hz", c.max_freq},
              {"noise_bins", c.noise_bins}};
}

Json to_json(const config::SystemSpec& s) {
  Json j{{"name", s.name},
         {"transfer_enabled", s.transfer_enabled},
         {"transfer", to_json(s.transfer)},
         {"coalescence", to_json(s.coalescence)},
         {"pdmm_guard_ns", s.pdmm_guard},
         {"detectors", s.detectors}};
  return j;
}

Json to_json(const config::ExperimentConfig& c) {
  Json traffic{{"background", to_json(c.traffic.background)},
               {"attack", c.traffic.attack ? to_json(*c.traffic.attack) : Json(nullptr)},
               {"random_offset", c.traffic.random_offset}};
  Json systems = Json::array();
  for (const auto& s : c.systems) systems.push_back(to_json(s));
  Json detectors{{"pdmm", c.detectors.pdmm ? to_json(*c.detectors.pdmm) : Json(nullptr)},
                 {"pad", c.detectors.pad ? to_json(*c.detectors.pad) : Json(nullptr)},
                 {"pdmm_fit_to_system", c.detectors.pdmm_fit_to_system},
                 {"pad_calibration_trials", c.detectors.pad_calibration_trials}};
  return Json{{"name", c.name},
              {"traffic", traffic},
              {"systems", systems},
              {"detectors", detectors},
              {"detection_window_ns", c.detection_window},
              {"trials", c.trials},
              {"seed_base", c.seed_base},
              {"threads", c.threads}};
}

Json to_json(const DetectionReport& r) {
  Json trajectory = Json::array();
  for (const auto& t : r.trajectory) {
    trajectory.push_back(Json{{"block", t.index}, {"statistic", t.statistic}, {"p", t.p}});
  }
  return Json{{"detector", r.detector},
              {"detected", r.detected},
              {"detection_time_ns", r.detection_time ? Json(*r.detection_time) : Json(nullptr)},
              {"blocks", r.blocks_processed},
              {"insufficient_data", r.insufficient_data},
              {"trajectory", trajectory}};
}

trafficgen::SizeDistribution size_dist_from(const Json& j) {
  ObjectReader r(j, "sizes");
  if (r.has("fixed")) {
    trafficgen::FixedSize f;
    r.integer("fixed", f.bytes);
    r.finish();
    return f;
  }
  trafficgen::EmpiricalSizes e;
  try {
    e.bytes = r.at("bytes").get<std::vector<std::uint32_t>>();
    e.weights = r.at("weights").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("sizes: expected 'fixed' or 'bytes' + 'weights': ") + ex.what());
  }
  r.finish();
  return e;
}

meassim::TransferConfig transfer_from(const Json& j) {
  ObjectReader r(j, "transfer");
  meassim::TransferConfig c;
  r.integer("bit_rate", c.bit_rate);
  r.finish();
  return c;
}

meassim::CoalescenceConfig coalescence_from(const Json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "hardware") throw ConfigError("'hardware' names a system, not a coalescence");
    return config::system_preset(name).coalescence;
  }
  ObjectReader r(j, "coalescence");
  std::string type;
  r.string("type", type);
  meassim::CoalescenceConfig out;
  if (type == "tic") {
    meassim::Tic t;
    r.integer("t_fix_ns", t.t_fix);
    out = t;
  } else if (type == "pic") {
    meassim::Pic p;
    r.integer("count", p.count);
    out = p;
  } else if (type == "hic") {
    meassim::Hic h;
    r.integer("t_pack_ns", h.t_pack);
    r.integer("t_abs_ns", h.t_abs);
    r.boolean("allow_inert_packet_timer", h.allow_inert_packet_timer);
    out = h;
  } else {
    throw ConfigError("coalescence.type must be tic, pic or hic");
  }
  r.finish();
  return out;
}

pdmm::PdmmConfig pdmm_from(const Json& j) {
  ObjectReader r(j, "pdmm");
  pdmm::PdmmConfig c;
  r.integer("max_order", c.max_order);
  r.integer("block_length", c.block_length);
  r.integer("sub_bins", c.sub_bins);
  r.real("false_alarm", c.false_alarm);
  r.integer("lower_ns", c.lower);
  r.integer("upper_ns", c.upper);
  r.integer("bin_width_ns", c.bin_width);
  r.integer("guard_ns", c.guard);
  r.integer("window_blocks", c.window_blocks);
  r.finish();
  return c;
}

pad::PadConfig pad_from(const Json& j) {
  ObjectReader r(j, "pad");
  pad::PadConfig c;
  r.integer("sample_interval_ns", c.sample_interval);
  r.integer("window", c.window);
  r.real("peak_factor", c.peak_factor);
  r.real("min_freq_hz", c.min_freq);
  r.real("max_freq_hz", c.max_freq);
  r.integer("noise_bins", c.noise_bins);
  r.finish();
  return c;
}

config::SystemSpec system_from(const Json& j) {
  if (j.is_string()) return config::system_preset(j.get<std::string>());
  ObjectReader r(j, "system");
  config::SystemSpec s;
  // A named base lets a file tweak one field of a preset.
  if (r.has("preset")) {
    std::string base;
    r.string("preset", base);
    s = config::system_preset(base);
  }
  r.string("name", s.name);
  r.boolean("transfer_enabled", s.transfer_enabled);
  if (r.has("transfer")) s.transfer = transfer_from(r.at("transfer"));
  if (r.has("coalescence")) s.coalescence = coalescence_from(r.at("coalescence"));
  r.integer("pdmm_guard_ns", s.pdmm_guard);
  if (r.has("detectors")) {
    const Json& d = r.at("detectors");
    if (!d.is_array()) throw ConfigError("system.detectors: expected an array");
    s.detectors.clear();
    for (const auto& name : d) {
      if (!name.is_string()) throw ConfigError("system.detectors: expected names");
      s.detectors.push_back(name.get<std::string>());
    }
  }
  r.finish();
  if (s.name.empty()) throw ConfigError("system.name is required");
  return s;
}

config::ExperimentConfig experiment_from(const Json& j) {
  ObjectReader r(j, "config");
  config::ExperimentConfig c;
  if (r.has("preset")) {
    std::string base;
    r.string("preset", base);
    c = config::preset(base);
  }
  r.string("name", c.name);
  if (r.has("traffic")) {
    const Json& tj = r.at("traffic");
    ObjectReader t(tj, "traffic");
    if (t.has("background")) {
      ObjectReader b(t.at("background"), "traffic.background");
      b.real("lambda_ns", c.traffic.background.lambda_ns);
      if (b.has("sizes")) c.traffic.background.sizes = size_dist_from(b.at("sizes"));
      b.finish();
    }
    if (tj.contains("attack")) {
      const Json& aj = t.at("attack");
      if (aj.is_null()) {
        c.traffic.attack.reset();
      } else {
        ObjectReader a(aj, "traffic.attack");
        trafficgen::AttackConfig at = c.traffic.attack.value_or(trafficgen::AttackConfig{});
        a.integer("period_ns", at.period);
        a.integer("packet_size", at.packet_size);
        a.integer("start_offset_ns", at.start_offset);
        a.real("jitter_stddev_ns", at.jitter_stddev_ns);
        a.finish();
        c.traffic.attack = at;
      }
    }
    t.boolean("random_offset", c.traffic.random_offset);
    t.finish();
  }
  if (r.has("systems")) {
    const Json& s = r.at("systems");
    if (!s.is_array()) throw ConfigError("systems: expected an array");
    c.systems.clear();
    for (const auto& e : s) c.systems.push_back(system_from(e));
  }
  if (r.has("detectors")) {
    const Json& dj = r.at("detectors");
    ObjectReader d(dj, "detectors");
    if (dj.contains("pdmm")) {
      const Json& p = d.at("pdmm");
      c.detectors.pdmm = p.is_null() ? std::nullopt : std::optional(pdmm_from(p));
    }
    if (dj.contains("pad")) {
      const Json& p = d.at("pad");
      c.detectors.pad = p.is_null() ? std::nullopt : std::optional(pad_from(p));
    }
    d.boolean("pdmm_fit_to_system", c.detectors.pdmm_fit_to_system);
    d.integer("pad_calibration_trials", c.detectors.pad_calibration_trials);
    d.finish();
  }
  r.integer("detection_window_ns", c.detection_window);
  r.integer("trials", c.trials);
  r.integer("seed_base", c.seed_base);
  r.integer("threads", c.threads);
  r.finish();
  return c;
}

}  // namespace codec

namespace config {

void validate(const ExperimentConfig& cfg) {
  if (cfg.detection_window <= 0) throw ConfigError("detection_window must be > 0");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.detectors.pad_calibration_trials < 0) {
    throw ConfigError("pad_calibration_trials must be >= 0");
  }
  if (cfg.systems.empty()) throw ConfigError("at least one system is required");
  trafficgen::PoissonConfig bg = cfg.traffic.background;
  bg.duration = cfg.detection_window;
  trafficgen::validate(bg);
  if (cfg.traffic.attack) {
    trafficgen::AttackConfig at = *cfg.traffic.attack;
    at.duration = cfg.detection_window;
    trafficgen::validate(at);
  }
  std::set<std::string> names;
  for (const auto& s : cfg.systems) {
    if (s.name.empty()) throw ConfigError("system name is required");
    if (!names.insert(s.name).second) throw ConfigError("duplicate system name: " + s.name);
    if (s.pdmm_guard < 0) throw ConfigError("pdmm_guard_ns must be >= 0");
    meassim::validate(s.transfer);
    meassim::validate(s.coalescence);
    for (const auto& d : s.detectors) {
      if (d != "pdmm" && d != "pad") throw ConfigError("unknown detector: " + d);
    }
  }
  if (cfg.detectors.pdmm) pdmm::validate(*cfg.detectors.pdmm);
  if (cfg.detectors.pad) pad::validate(*cfg.detectors.pad);
}

SystemSpec system_preset(const std::string& name) {
  SystemSpec s;
  s.name = name;
  if (name == "hicv1") {
    s.coalescence = meassim::Hic{30 * kMicrosecond, 300 * kMicrosecond};
    s.pdmm_guard = 100 * kMicrosecond;
  } else if (name == "hicv2") {
    s.coalescence = meassim::Hic{33 * kMicrosecond, 120 * kMicrosecond};
    s.pdmm_guard = 580 * kMicrosecond;
  } else if (name == "hardware") {
    // A capture card stamps each packet on the wire: no transfer delay and
    // one record per packet (same-nanosecond arrivals share a record).
    s.transfer_enabled = false;
    s.coalescence = meassim::Tic{1};
    s.detectors = {"pad"};
  } else {
    throw ConfigError("unknown system preset: " + name);
  }
  return s;
}

std::vector<std::string> system_preset_names() { return {"hardware", "hicv1", "hicv2"}; }

ExperimentConfig preset(const std::string& name) {
  std::string base = name;
  bool background_only = false;
  const std::string suffix = "-background";
  if (base.size() > suffix.size() && base.ends_with(suffix)) {
    base.resize(base.size() - suffix.size());
    background_only = true;
  }
  ExperimentConfig c;
  c.name = name;
  // Small/medium/large mix with a mean near 500 B, so 80k packets/s is about
  // 320 Mbps and 47k packets/s about 196 Mbps.
  c.traffic.background.sizes = trafficgen::EmpiricalSizes{{40, 576, 1500}, {0.5, 0.3, 0.2}};
  trafficgen::AttackConfig attack;
  attack.packet_size = 1500;
  if (base == "high-rate") {
    c.traffic.background.lambda_ns = 12'500.0;
    attack.period = trafficgen::period_for_rate(1500, 30e6);
  } else if (base == "low-rate") {
    c.traffic.background.lambda_ns = 1e9 / 47'000.0;
    attack.period = trafficgen::period_for_rate(1500, 15e6);
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  if (!background_only) c.traffic.attack = attack;
  for (const auto& s : system_preset_names()) c.systems.push_back(system_preset(s));
  c.detectors.pdmm = pdmm::PdmmConfig{};
  c.detectors.pad = pad::PadConfig{};
  c.detectors.pad_calibration_trials = 20;
  c.trials = 20;
  return c;
}

std::vector<std::string> preset_names() {
  return {"high-rate", "low-rate", "high-rate-background", "low-rate-background"};
}

ExperimentConfig parse(const std::string& text) {
  codec::Json j;
  try {
    j = codec::Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return codec::experiment_from(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  if (in.bad()) throw IoError("cannot read config file: " + path);
  return parse(text.str());
}

std::string to_text(const ExperimentConfig& cfg) { return codec::to_json(cfg).dump(2) + "\n"; }

std::string to_text(const SystemSpec& system) { return codec::to_json(system).dump(2) + "\n"; }

}  // namespace config
}  // namespace icsim
