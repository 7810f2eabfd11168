#include "icsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "icsim/error.hpp"
#include "icsim/io.hpp"
#include "icsim/pad.hpp"
#include "icsim/pdmm.hpp"
#include "icsim/trafficgen.hpp"
#include "json_codec.hpp"

namespace icsim::harness {
namespace {

using codec::Json;

// Stream tags for seeds derived from a trial seed.
constexpr std::uint64_t kBackgroundStream = 1;
constexpr std::uint64_t kAttackStream = 2;
constexpr std::uint64_t kOffsetStream = 3;
constexpr std::uint64_t kCalibrationBase = 0xCA11B8A7E;

constexpr double kPadCalibrationFalseAlarm = 0.05;

template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(StageError(stage, e.what()));
  }
}

std::uint64_t trial_seed(const config::ExperimentConfig& cfg, int trial) {
  return trafficgen::derive_seed(cfg.seed_base, static_cast<std::uint64_t>(trial));
}

Trace background_trace(const config::ExperimentConfig& cfg, std::uint64_t seed) {
  trafficgen::PoissonConfig bg = cfg.traffic.background;
  bg.duration = cfg.detection_window;
  bg.seed = trafficgen::derive_seed(seed, kBackgroundStream);
  return trafficgen::gen_poisson(bg);
}

std::vector<std::string> detectors_for(const config::ExperimentConfig& cfg,
                                       const config::SystemSpec& system) {
  std::vector<std::string> out;
  for (const char* name : {"pad", "pdmm"}) {
    const bool configured = std::string(name) == "pad" ? cfg.detectors.pad.has_value()
                                                       : cfg.detectors.pdmm.has_value();
    if (!configured) continue;
    if (!system.detectors.empty() &&
        std::find(system.detectors.begin(), system.detectors.end(), name) ==
            system.detectors.end()) {
      continue;
    }
    out.emplace_back(name);
  }
  return out;
}

double max_statistic(const DetectionReport& r) {
  double best = 0.0;
  for (const auto& t : r.trajectory) best = std::max(best, t.statistic);
  return best;
}

// Seconds with nanosecond precision, printed exactly from the integer.
std::string seconds(Nanos ns) {
  std::ostringstream s;
  const char* sign = ns < 0 ? "-" : "";
  const Nanos a = ns < 0 ? -ns : ns;
  s << sign << a / kSecond << '.';
  const auto frac = std::to_string(a % kSecond);
  s << std::string(9 - frac.size(), '0') << frac;
  return s.str();
}

Json stats_json(const MeasurementStats& s) {
  return Json{{"measurements", s.measurements},
              {"packets", s.packets},
              {"mean_gap_us", s.mean_gap_us},
              {"var_gap_us2", s.var_gap_us2},
              {"mean_c", s.mean_c},
              {"rate_per_s", s.rate_per_s},
              {"packet_timer_fraction", s.packet_timer_fraction}};
}

Json optional_ns(const std::optional<Nanos>& v) { return v ? Json(*v) : Json(nullptr); }

struct TrialOutput {
  std::vector<TrialRecord> records;  // one per system
};

}  // namespace

MeasurementStats measurement_stats(std::span<const MeasurementRecord> ms) {
  if (ms.size() < 2) throw InsufficientDataError("measurement_stats needs >= 2 measurements");
  MeasurementStats s;
  s.measurements = static_cast<std::int64_t>(ms.size());
  // Welford over the gaps, in microseconds.
  double mean = 0.0;
  double m2 = 0.0;
  std::int64_t n = 0;
  std::int64_t packets = ms.front().c;
  for (std::size_t i = 1; i < ms.size(); ++i) {
    const double gap = static_cast<double>(ms[i].m - ms[i - 1].m) / 1e3;
    ++n;
    const double d = gap - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (gap - mean);
    packets += ms[i].c;
  }
  s.packets = packets;
  s.mean_gap_us = mean;
  s.var_gap_us2 = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  s.mean_c = static_cast<double>(packets) / static_cast<double>(ms.size());
  const double span_s = static_cast<double>(ms.back().m - ms.front().m) / 1e9;
  s.rate_per_s = span_s > 0.0 ? static_cast<double>(n) / span_s : 0.0;
  return s;
}

MeasurementStats measurement_stats(const meassim::Measurements& ms) {
  MeasurementStats s = measurement_stats(std::span<const MeasurementRecord>(ms.records));
  const auto& f = ms.firing;
  const auto fired = f.packet_timer + f.absolute_timer + f.packet_count + f.flushed;
  if (fired > 0) s.packet_timer_fraction = static_cast<double>(f.packet_timer) / static_cast<double>(fired);
  return s;
}

Trace build_trace(const config::ExperimentConfig& cfg, int trial) {
  const std::uint64_t seed = trial_seed(cfg, trial);
  Trace bg = background_trace(cfg, seed);
  if (!cfg.traffic.attack) return bg;
  trafficgen::AttackConfig at = *cfg.traffic.attack;
  at.duration = cfg.detection_window;
  at.seed = trafficgen::derive_seed(seed, kAttackStream);
  if (cfg.traffic.random_offset) {
    std::mt19937_64 rng(trafficgen::derive_seed(seed, kOffsetStream));
    at.start_offset = static_cast<Nanos>(rng() % static_cast<std::uint64_t>(at.period));
    // Keep the attack inside the detection window.
    at.duration = std::max<Nanos>(0, cfg.detection_window - at.start_offset);
  }
  return trafficgen::merge(bg, trafficgen::gen_periodic(at));
}

Trace build_calibration_trace(const config::ExperimentConfig& cfg, int index) {
  const std::uint64_t seed = trafficgen::derive_seed(
      trafficgen::derive_seed(cfg.seed_base, kCalibrationBase), static_cast<std::uint64_t>(index));
  return background_trace(cfg, seed);
}

meassim::Measurements measure_on(const config::SystemSpec& system,
                                 std::span<const PacketRecord> trace) {
  if (system.transfer_enabled) return meassim::measure(trace, system.transfer, system.coalescence);
  return meassim::coalesce(trace, system.coalescence);
}

pdmm::PdmmConfig fit_pdmm(const pdmm::PdmmConfig& base, const config::SystemSpec& system) {
  pdmm::PdmmConfig c = base;
  c.lower = std::visit(
      [](const auto& v) -> Nanos {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, meassim::Hic>) {
          return v.t_abs;
        } else if constexpr (std::is_same_v<T, meassim::Tic>) {
          return v.t_fix;
        } else {
          return 0;
        }
      },
      system.coalescence);
  c.guard = system.pdmm_guard;
  const Nanos step = static_cast<Nanos>(c.sub_bins) * c.bin_width;
  if (step <= 0) throw ConfigError("pdmm sub_bins * bin_width must be > 0");
  const Nanos begin = c.range_begin();
  const Nanos width = std::max<Nanos>(c.upper - begin, step);
  c.upper = begin + (width + step - 1) / step * step;
  return c;
}

double calibrate_threshold(std::vector<double> maxima, double false_alarm) {
  if (maxima.empty()) throw InsufficientDataError("calibration needs at least one trace");
  if (!(false_alarm >= 0.0 && false_alarm < 1.0)) throw ConfigError("false_alarm must lie in [0, 1)");
  std::sort(maxima.begin(), maxima.end());
  // Detection needs a strictly larger statistic, so at most n - keep traces
  // exceed the threshold.
  const auto n = maxima.size();
  auto keep = static_cast<std::size_t>(std::ceil((1.0 - false_alarm) * static_cast<double>(n) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, n);
  return maxima[keep - 1];
}

DetectionReport run_detector(const std::string& detector, std::span<const MeasurementRecord> ms,
                             const config::ExperimentConfig& cfg,
                             const config::SystemSpec& system, Nanos length,
                             std::optional<double> pad_peak_factor) {
  if (detector == "pdmm") {
    if (!cfg.detectors.pdmm) throw ConfigError("pdmm is not configured");
    const auto pc = cfg.detectors.pdmm_fit_to_system ? fit_pdmm(*cfg.detectors.pdmm, system)
                                                     : *cfg.detectors.pdmm;
    return pdmm::detect_stream(ms, pc);
  }
  if (detector == "pad") {
    if (!cfg.detectors.pad) throw ConfigError("pad is not configured");
    pad::PadConfig pc = *cfg.detectors.pad;
    if (pad_peak_factor) pc.peak_factor = std::max(*pad_peak_factor, 1.0 + 1e-9);
    std::optional<std::size_t> samples;
    if (length > 0) samples = static_cast<std::size_t>(length / pc.sample_interval);
    const auto series = pad::rasterize(ms, pc.sample_interval, samples);
    return pad::detect_psd(series, pc);
  }
  throw ConfigError("unknown detector: " + detector);
}

std::optional<Nanos> median_time(std::vector<std::optional<Nanos>> times) {
  if (times.empty()) return std::nullopt;
  std::sort(times.begin(), times.end(), [](const auto& a, const auto& b) {
    if (!a) return false;
    if (!b) return true;
    return *a < *b;
  });
  const auto n = times.size();
  const auto& lo = times[(n - 1) / 2];
  const auto& hi = times[n / 2];
  if (!lo || !hi) return std::nullopt;
  return *lo + (*hi - *lo) / 2;
}

const TableCell* ExperimentResult::cell(const std::string& detector,
                                        const std::string& system) const {
  for (const auto& c : table) {
    if (c.detector == detector && c.system == system) return &c;
  }
  return nullptr;
}

const SystemSummary* ExperimentResult::summary(const std::string& system) const {
  for (const auto& s : systems) {
    if (s.name == system) return &s;
  }
  return nullptr;
}

ExperimentResult run_experiment(const config::ExperimentConfig& cfg) {
  in_stage("config", [&] { config::validate(cfg); });
  ExperimentResult result;
  result.config = cfg;

  // PAD thresholds from background-only traces, per system.
  std::vector<std::optional<double>> peak_factor(cfg.systems.size());
  if (cfg.detectors.pad && cfg.detectors.pad_calibration_trials > 0) {
    std::vector<std::vector<double>> maxima(cfg.systems.size());
    config::ExperimentConfig probe = cfg;
    probe.detectors.pad->peak_factor = std::numeric_limits<double>::max();
    for (int i = 0; i < cfg.detectors.pad_calibration_trials; ++i) {
      const Trace trace = in_stage("calibrate", [&] { return build_calibration_trace(cfg, i); });
      for (std::size_t s = 0; s < cfg.systems.size(); ++s) {
        const auto& system = cfg.systems[s];
        const auto dets = detectors_for(cfg, system);
        if (std::find(dets.begin(), dets.end(), "pad") == dets.end()) continue;
        in_stage("calibrate", [&] {
          const auto ms = measure_on(system, trace);
          const auto report = run_detector("pad", ms.records, probe, system, cfg.detection_window);
          maxima[s].push_back(max_statistic(report));
        });
      }
    }
    for (std::size_t s = 0; s < cfg.systems.size(); ++s) {
      if (!maxima[s].empty()) {
        peak_factor[s] = calibrate_threshold(maxima[s], kPadCalibrationFalseAlarm);
      }
    }
  }

  auto run_trial = [&](int trial) {
    TrialOutput out;
    const std::uint64_t seed = trial_seed(cfg, trial);
    const Trace trace = in_stage("generate", [&] { return build_trace(cfg, trial); });
    const Nanos origin = trace.empty() ? 0 : trace.front().timestamp;
    for (std::size_t s = 0; s < cfg.systems.size(); ++s) {
      const auto& system = cfg.systems[s];
      TrialRecord rec;
      rec.trial = trial;
      rec.seed = seed;
      rec.system = system.name;
      const auto ms = in_stage("measure", [&] { return measure_on(system, trace); });
      if (ms.records.size() >= 2) rec.stats = measurement_stats(ms);
      for (const auto& det : detectors_for(cfg, system)) {
        const std::string stage = "detect:" + det;
        const auto report = in_stage(stage.c_str(), [&] {
          return run_detector(det, ms.records, cfg, system, cfg.detection_window, peak_factor[s]);
        });
        DetectorOutcome o;
        o.detector = det;
        o.insufficient_data = report.insufficient_data;
        o.blocks = report.blocks_processed;
        o.peak_statistic = max_statistic(report);
        if (report.detected && report.detection_time) {
          const Nanos ttd = *report.detection_time - origin;
          if (ttd <= cfg.detection_window) o.time_to_detection = ttd;
        }
        rec.detections.push_back(std::move(o));
      }
      out.records.push_back(std::move(rec));
    }
    return out;
  };

  // Each trial writes only its own slot, so the result does not depend on
  // completion order.
  std::vector<TrialOutput> outputs(static_cast<std::size_t>(cfg.trials));
  std::vector<std::exception_ptr> errors(outputs.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < cfg.trials; t = next++) {
      try {
        outputs[static_cast<std::size_t>(t)] = run_trial(t);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  const int threads = std::min(cfg.threads, cfg.trials);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (auto& o : outputs) {
    for (auto& r : o.records) result.trials.push_back(std::move(r));
  }

  for (std::size_t s = 0; s < cfg.systems.size(); ++s) {
    const auto& system = cfg.systems[s];
    SystemSummary sum;
    sum.name = system.name;
    int n = 0;
    for (const auto& r : result.trials) {
      if (r.system != system.name) continue;
      ++n;
      auto& m = sum.mean_stats;
      m.measurements += r.stats.measurements;
      m.packets += r.stats.packets;
      m.mean_gap_us += r.stats.mean_gap_us;
      m.var_gap_us2 += r.stats.var_gap_us2;
      m.mean_c += r.stats.mean_c;
      m.rate_per_s += r.stats.rate_per_s;
      m.packet_timer_fraction += r.stats.packet_timer_fraction;
    }
    if (n > 0) {
      auto& m = sum.mean_stats;
      m.measurements /= n;
      m.packets /= n;
      m.mean_gap_us /= n;
      m.var_gap_us2 /= n;
      m.mean_c /= n;
      m.rate_per_s /= n;
      m.packet_timer_fraction /= n;
    }
    const auto dets = detectors_for(cfg, system);
    if (std::find(dets.begin(), dets.end(), "pdmm") != dets.end()) {
      sum.pdmm = cfg.detectors.pdmm_fit_to_system ? fit_pdmm(*cfg.detectors.pdmm, system)
                                                  : *cfg.detectors.pdmm;
    }
    if (std::find(dets.begin(), dets.end(), "pad") != dets.end()) {
      sum.pad_peak_factor = peak_factor[s] ? *peak_factor[s] : cfg.detectors.pad->peak_factor;
    }
    result.systems.push_back(std::move(sum));
  }

  for (const char* det : {"pad", "pdmm"}) {
    const bool configured = std::string(det) == "pad" ? cfg.detectors.pad.has_value()
                                                      : cfg.detectors.pdmm.has_value();
    if (!configured) continue;
    for (const auto& system : cfg.systems) {
      TableCell cell;
      cell.detector = det;
      cell.system = system.name;
      std::vector<std::optional<Nanos>> times;
      for (const auto& r : result.trials) {
        if (r.system != system.name) continue;
        for (const auto& o : r.detections) {
          if (o.detector != det) continue;
          cell.ran = true;
          ++cell.trials;
          if (o.time_to_detection) ++cell.detections;
          times.push_back(o.time_to_detection);
        }
      }
      if (cell.ran) cell.median = median_time(times);
      result.table.push_back(std::move(cell));
    }
  }
  return result;
}

std::string results_json(const ExperimentResult& result) {
  Json systems = Json::array();
  for (const auto& s : result.systems) {
    systems.push_back(Json{{"name", s.name},
                           {"stats", stats_json(s.mean_stats)},
                           {"pdmm", s.pdmm ? codec::to_json(*s.pdmm) : Json(nullptr)},
                           {"pad_peak_factor", s.pad_peak_factor ? Json(*s.pad_peak_factor)
                                                                 : Json(nullptr)}});
  }
  Json table = Json::array();
  for (const auto& c : result.table) {
    table.push_back(Json{{"detector", c.detector},
                         {"system", c.system},
                         {"ran", c.ran},
                         {"trials", c.trials},
                         {"detections", c.detections},
                         {"median_time_to_detection_ns", optional_ns(c.median)},
                         {"timeout", c.ran && !c.median}});
  }
  Json trials = Json::array();
  for (const auto& t : result.trials) {
    Json dets = Json::array();
    for (const auto& o : t.detections) {
      dets.push_back(Json{{"detector", o.detector},
                          {"time_to_detection_ns", optional_ns(o.time_to_detection)},
                          {"insufficient_data", o.insufficient_data},
                          {"blocks", o.blocks},
                          {"peak_statistic", o.peak_statistic}});
    }
    trials.push_back(Json{{"trial", t.trial},
                          {"seed", t.seed},
                          {"system", t.system},
                          {"stats", stats_json(t.stats)},
                          {"detections", dets}});
  }
  Json j{{"config", codec::to_json(result.config)},
         {"systems", systems},
         {"table", table},
         {"trials", trials}};
  return j.dump(2) + "\n";
}

std::string results_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "detector";
  for (const auto& s : result.config.systems) out << ',' << s.name;
  out << '\n';
  std::vector<std::string> detectors;
  for (const auto& c : result.table) {
    if (std::find(detectors.begin(), detectors.end(), c.detector) == detectors.end()) {
      detectors.push_back(c.detector);
    }
  }
  for (const auto& d : detectors) {
    out << d;
    for (const auto& s : result.config.systems) {
      const TableCell* c = result.cell(d, s.name);
      out << ',';
      if (!c || !c->ran) {
        out << "n/a";
      } else if (!c->median) {
        out << '-';
      } else {
        out << seconds(*c->median);
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string stats_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "statistic";
  for (const auto& s : result.systems) out << ',' << s.name;
  out << '\n';
  auto row = [&](const char* name, auto field) {
    out << name;
    for (const auto& s : result.systems) out << ',' << field(s.mean_stats);
    out << '\n';
  };
  row("mean_gap_us", [](const MeasurementStats& m) { return m.mean_gap_us; });
  row("var_gap_us2", [](const MeasurementStats& m) { return m.var_gap_us2; });
  row("mean_c", [](const MeasurementStats& m) { return m.mean_c; });
  row("rate_per_s", [](const MeasurementStats& m) { return m.rate_per_s; });
  row("packet_timer_fraction", [](const MeasurementStats& m) { return m.packet_timer_fraction; });
  return out.str();
}

std::string trials_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "trial,seed,system,detector,time_to_detection_s,peak_statistic,mean_gap_us,var_gap_us2,"
         "mean_c,rate_per_s\n";
  for (const auto& t : result.trials) {
    auto emit = [&](const std::string& det, const std::string& ttd, double peak) {
      out << t.trial << ',' << t.seed << ',' << t.system << ',' << det << ',' << ttd << ','
          << peak << ',' << t.stats.mean_gap_us << ',' << t.stats.var_gap_us2 << ','
          << t.stats.mean_c << ',' << t.stats.rate_per_s << '\n';
    };
    if (t.detections.empty()) emit("", "", 0.0);
    for (const auto& o : t.detections) {
      emit(o.detector, o.time_to_detection ? seconds(*o.time_to_detection) : "-", o.peak_statistic);
    }
  }
  return out.str();
}

void emit_results(const ExperimentResult& result, const std::string& path, Format format) {
  if (format == Format::json) {
    io::write_text(path, results_json(result));
    return;
  }
  std::string stem = path;
  if (stem.size() > 4 && stem.ends_with(".csv")) stem.resize(stem.size() - 4);
  io::write_text(path, results_csv(result));
  io::write_text(stem + "_stats.csv", stats_csv(result));
  io::write_text(stem + "_trials.csv", trials_csv(result));
}

}  // namespace icsim::harness
