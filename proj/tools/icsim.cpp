// icsim: command-line front end for the simulator, detectors and harness.
//
// Exit codes: 0 success, 1 configuration error, 2 insufficient data, 3 I/O.

#include <CLI11.hpp>

#include <algorithm>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "icsim/config.hpp"
#include "icsim/error.hpp"
#include "icsim/harness.hpp"
#include "icsim/io.hpp"

namespace {

using namespace icsim;

enum Exit { kOk = 0, kConfig = 1, kInsufficient = 2, kIo = 3, kInternal = 4 };

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const InsufficientDataError*>(&e)) return kInsufficient;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  // Unsorted or otherwise malformed input data.
  if (dynamic_cast<const PreconditionError*>(&e)) return kConfig;
  return kInternal;
}

// A StageError carries the original error nested inside it; the innermost
// one decides the exit code.
int classify(const std::exception& e) {
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    return classify(inner);
  } catch (...) {
    return kInternal;
  }
  return exit_code_for(e);
}

struct Source {
  std::string preset;
  std::string config_path;

  void add_to(CLI::App* app) {
    auto* p = app->add_option("--preset", preset, "Named experiment preset");
    auto* c = app->add_option("--config", config_path, "Experiment config file (JSON)");
    p->excludes(c);
  }

  std::optional<config::ExperimentConfig> load() const {
    if (!config_path.empty()) return config::load(config_path);
    if (!preset.empty()) return config::preset(preset);
    return std::nullopt;
  }

  config::ExperimentConfig load_or(const std::string& fallback) const {
    auto c = load();
    return c ? *c : config::preset(fallback);
  }
};

config::SystemSpec pick_system(const config::ExperimentConfig& cfg, const std::string& name) {
  for (const auto& s : cfg.systems) {
    if (s.name == name) return s;
  }
  return config::system_preset(name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Software measurement (interrupt coalescence) simulator and periodic detectors"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Write one trial's synthetic trace");
  Source gen_src;
  gen_src.add_to(gen);
  int gen_trial = 0;
  std::optional<std::uint64_t> gen_seed;
  std::optional<double> gen_duration_s;
  std::string gen_out;
  gen->add_option("--trial", gen_trial, "Trial index")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Override seed_base");
  gen->add_option("--duration-s", gen_duration_s, "Override the trace duration (seconds)");
  gen->add_option("--out", gen_out, "Trace CSV path")->required();

  // measure
  auto* measure = app.add_subcommand("measure", "Run a trace through a measurement system");
  Source measure_src;
  measure_src.add_to(measure);
  std::string measure_in;
  std::string measure_out;
  std::string measure_system = "hicv1";
  measure->add_option("--in", measure_in, "Trace CSV")->required();
  measure->add_option("--out", measure_out, "Measurement CSV (sidecar written to <out>.json)")
      ->required();
  measure->add_option("--system", measure_system, "System name (config or preset)")
      ->capture_default_str();

  // detect
  auto* detect = app.add_subcommand("detect", "Run a detector over a measurement file");
  Source detect_src;
  detect_src.add_to(detect);
  std::string detect_in;
  std::string detect_out;
  std::string detector = "pdmm";
  std::string detect_system;
  std::optional<double> detect_peak;
  detect->add_option("--in", detect_in, "Measurement CSV")->required();
  detect->add_option("--detector", detector, "pdmm or pad")
      ->check(CLI::IsMember({"pdmm", "pad"}))
      ->capture_default_str();
  detect->add_option("--system", detect_system,
                     "Fit PDMM's range to this system (default: detector config as given)");
  detect->add_option("--peak-factor", detect_peak, "Override PAD peak_factor");
  detect->add_option("--out", detect_out, "Report JSON path (default stdout)");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run the full seeded pipeline");
  Source exp_src;
  exp_src.add_to(experiment);
  std::optional<int> exp_trials;
  std::optional<std::uint64_t> exp_seed;
  std::optional<int> exp_threads;
  std::string exp_out;
  experiment->add_option("--trials", exp_trials, "Number of trials");
  experiment->add_option("--seed", exp_seed, "seed_base");
  experiment->add_option("--threads", exp_threads, "Worker threads");
  experiment->add_option("--out", exp_out,
                         "Output prefix: writes <out>.json, <out>.csv, <out>_stats.csv, "
                         "<out>_trials.csv");

  // stats
  auto* stats = app.add_subcommand("stats", "Summary statistics of a measurement file");
  std::string stats_in;
  stats->add_option("--in", stats_in, "Measurement CSV")->required();

  // preset
  auto* preset = app.add_subcommand("preset", "List presets, or print one as a config file");
  std::string preset_name;
  preset->add_option("name", preset_name, "Preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*gen) {
      auto cfg = gen_src.load_or("high-rate");
      if (gen_seed) cfg.seed_base = *gen_seed;
      if (gen_duration_s) cfg.detection_window = static_cast<Nanos>(*gen_duration_s * 1e9);
      config::validate(cfg);
      io::write_trace(gen_out, harness::build_trace(cfg, gen_trial));
      return kOk;
    }

    if (*measure) {
      const auto cfg = measure_src.load_or("high-rate");
      const auto system = pick_system(cfg, measure_system);
      meassim::validate(system.coalescence);
      const auto trace = io::read_trace(measure_in);
      const auto ms = harness::measure_on(system, trace);
      io::write_measurements(measure_out, ms.records);
      io::write_text(io::sidecar_path(measure_out),
                     io::measurement_sidecar(ms, system.transfer_enabled ? &system.transfer : nullptr,
                                             system.coalescence));
      return kOk;
    }

    if (*detect) {
      auto cfg = detect_src.load_or("high-rate");
      config::SystemSpec system;
      if (detect_system.empty()) {
        cfg.detectors.pdmm_fit_to_system = false;
      } else {
        system = pick_system(cfg, detect_system);
      }
      if (!cfg.detectors.pdmm) cfg.detectors.pdmm = pdmm::PdmmConfig{};
      if (!cfg.detectors.pad) cfg.detectors.pad = pad::PadConfig{};
      const auto ms = io::read_measurements(detect_in);
      const auto report = harness::run_detector(detector, ms, cfg, system, 0, detect_peak);
      const auto text = io::report_json(report);
      if (detect_out.empty()) {
        std::cout << text;
      } else {
        io::write_text(detect_out, text);
      }
      return report.insufficient_data ? kInsufficient : kOk;
    }

    if (*experiment) {
      auto cfg = exp_src.load_or("high-rate");
      if (exp_trials) cfg.trials = *exp_trials;
      if (exp_seed) cfg.seed_base = *exp_seed;
      if (exp_threads) cfg.threads = *exp_threads;
      const auto result = harness::run_experiment(cfg);
      if (!exp_out.empty()) {
        harness::emit_results(result, exp_out + ".json", harness::Format::json);
        harness::emit_results(result, exp_out + ".csv", harness::Format::csv);
      }
      std::cout << harness::results_csv(result);
      return kOk;
    }

    if (*stats) {
      const auto ms = io::read_measurements(stats_in);
      const auto s = harness::measurement_stats(ms);
      std::cout << "measurements " << s.measurements << "\n"
                << "packets " << s.packets << "\n"
                << "mean_gap_us " << s.mean_gap_us << "\n"
                << "var_gap_us2 " << s.var_gap_us2 << "\n"
                << "mean_c " << s.mean_c << "\n"
                << "rate_per_s " << s.rate_per_s << "\n";
      return kOk;
    }

    if (*preset) {
      if (preset_name.empty()) {
        std::cout << "experiments:";
        for (const auto& n : config::preset_names()) std::cout << ' ' << n;
        std::cout << "\nsystems:";
        for (const auto& n : config::system_preset_names()) std::cout << ' ' << n;
        std::cout << '\n';
      } else if (std::ranges::count(config::system_preset_names(), preset_name) > 0) {
        std::cout << config::to_text(config::system_preset(preset_name));
      } else {
        std::cout << config::to_text(config::preset(preset_name));
      }
      return kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "icsim: " << e.what() << '\n';
    return classify(e);
  }
  return kOk;
}
