// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (capped), so ctest reports red when anything misses.

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "icsim/analytic.hpp"
#include "icsim/config.hpp"
#include "icsim/error.hpp"
#include "icsim/harness.hpp"
#include "icsim/meassim.hpp"
#include "icsim/pdmm.hpp"
#include "icsim/trafficgen.hpp"

using namespace icsim;

namespace {

constexpr double us = 1000.0;

// Tolerances and runtime budgets.
constexpr double kDensityNormTol = 1e-6;
constexpr double kConvolutionTol = 1e-6;  // per microsecond
constexpr double kMixtureTol = 1e-4;      // relative to 1/lambda
constexpr double kEstimatorTol = 0.02;
constexpr double kChiSquareRelTol = 1e-9;
constexpr double kMaxFalsePositive = 0.05;
constexpr double kMinAttackDetection = 0.95;
constexpr Nanos kMaxAttackMedian = 5 * kSecond;
constexpr double kMinHarmonicDetection = 0.90;
constexpr double kMinPadTimeouts = 0.80;
constexpr double kHighRateVarRatio = 2.0;
constexpr double kLowRateVarRatio = 1.16;
constexpr double kVarRatioTol = 0.30;
constexpr double kRate = 11'000.0;
constexpr double kRateTol = 0.20;
constexpr int kPdmmTrials = 50;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Notes {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      if (failures_++ < 6) out_ << (out_.tellp() > 0 ? "; " : "") << what;
    }
  }
  void info(const std::string& what) { info_ << (info_.tellp() > 0 ? "; " : "") << what; }
  Outcome done() const {
    if (pass_) return {true, info_.str()};
    std::string d = out_.str();
    if (failures_ > 6) d += "; +" + std::to_string(failures_ - 6) + " more";
    return {false, d + " | measured: " + info_.str()};
  }

 private:
  bool pass_ = true;
  int failures_ = 0;
  std::ostringstream out_;
  std::ostringstream info_;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt2(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

double convolution_oracle(double y, int order, double lambda, double shift) {
  if (y <= shift) return order == 1 && y == shift ? 1.0 / lambda : 0.0;
  if (order == 1) return std::exp(-(y - shift) / lambda) / lambda;
  auto integrand = [&](double x) {
    return convolution_oracle(y - x, order - 1, lambda, shift) * std::exp(-x / lambda) / lambda;
  };
  return boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.0, y - shift);
}

Outcome analytic_suite() {
  Notes n;
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<analytic::DistParams> grid{
      {10 * us, 30 * us}, {12.5 * us, 30 * us}, {50 * us, 33 * us}, {5 * us, 120 * us}};
  for (const auto& p : grid) {
    const double se = integrate([&](double y) { return analytic::pdf_shifted_exp(y, p); }, p.b, inf);
    n.check(std::abs(se - 1) <= kDensityNormTol, fmt("shifted exp integrates to %.9f", se));
    const double te = integrate([&](double y) { return analytic::pdf_trunc_exp(y, p); }, 0.0, p.b);
    n.check(std::abs(te - 1) <= kDensityNormTol, fmt("truncated exp integrates to %.9f", te));
    for (int i = 1; i <= 8; ++i) {
      const double e =
          integrate([&](double y) { return analytic::pdf_erlang_shifted(y, i, p); }, p.b,
                    p.b + (i + 40) * 4 * p.lambda);
      n.check(std::abs(e - 1) <= kDensityNormTol, fmt("order-i density integrates to %.9f", e));
    }
  }

  const analytic::DistParams p{10 * us, 30 * us};
  double worst = 0;
  for (int i = 1; i <= 5; ++i) {
    for (double y_us : {30.0, 31.0, 35.0, 40.0, 50.0, 70.0, 100.0, 150.0, 250.0}) {
      const double y = y_us * us;
      const double diff = std::abs(analytic::pdf_erlang_shifted(y, i, p) -
                                   convolution_oracle(y, i, p.lambda, p.b)) * us;
      worst = std::max(worst, diff);
    }
  }
  n.check(worst <= kConvolutionTol, fmt("convolution oracle off by %.3g per us", worst));
  n.info(fmt("convolution max err %.2g/us", worst));

  double mix_worst = 0;
  for (const auto& q : grid) {
    for (double k = 0.05; k <= 20.0; k += 0.05) {
      const double y = q.b + k * q.lambda;
      mix_worst = std::max(mix_worst, std::abs(analytic::mixture_density(y, 50, q) * q.lambda - 1));
    }
  }
  for (double y_us : {40.0, 100.0, 300.0}) {
    const double v = analytic::mixture_density(y_us * us, 50, p) * p.lambda;
    mix_worst = std::max(mix_worst, std::abs(v - 1));
  }
  n.check(mix_worst <= kMixtureTol, fmt("mixture off by %.3g relative", mix_worst));
  n.info(fmt("mixture max rel err %.2g", mix_worst));
  return n.done();
}

std::vector<MeasurementRecord> through(double lambda_ns, const meassim::CoalescenceConfig& c,
                                       std::uint64_t seed) {
  trafficgen::PoissonConfig bg;
  bg.lambda_ns = lambda_ns;
  bg.sizes = trafficgen::FixedSize{1500};
  bg.duration = static_cast<Nanos>(lambda_ns * 1e6);
  bg.seed = seed;
  const auto trace = trafficgen::gen_poisson(bg);
  return meassim::measure(trace, meassim::TransferConfig{}, c).records;
}

Outcome estimator_suite() {
  Notes n;
  const meassim::Hic v1{30 * kMicrosecond, 300 * kMicrosecond};
  const meassim::Hic v2{33 * kMicrosecond, 120 * kMicrosecond};
  struct Case {
    const char* name;
    double lambda;
    meassim::Hic hic;
    bool single_pair;
  };
  const std::vector<Case> cases{{"single-pair 50us hicv1", 50 * us, v1, true},
                                {"single-pair 50us hicv2", 50 * us, v2, true},
                                {"ratio 12.5us hicv1", 12.5 * us, v1, false},
                                {"ratio 12.5us hicv2", 12.5 * us, v2, false},
                                {"ratio 50us hicv1", 50 * us, v1, false}};
  std::uint64_t seed = 11;
  for (const auto& c : cases) {
    const auto ms = through(c.lambda, c.hic, seed++);
    const double est = c.single_pair
                           ? analytic::estimate_lambda_single_pairs(ms, c.hic.t_pack).value
                           : analytic::estimate_lambda_ratio(ms).value;
    const double rel = est / c.lambda - 1;
    n.check(std::abs(rel) <= kEstimatorTol, std::string(c.name) + fmt(" off by %+.4f", rel));
    n.info(std::string(c.name) + fmt(" %+.4f", rel));
    if (!c.single_pair) {
      auto shifted = ms;
      for (auto& r : shifted) r.m += 123'456'789;
      n.check(analytic::estimate_lambda_ratio(shifted).value == est,
              std::string(c.name) + " not shift invariant");
    }
  }
  return n.done();
}

Outcome coalescence_suite() {
  Notes n;
  auto trace_us = [](std::initializer_list<double> t) {
    Trace out;
    for (double v : t) out.push_back({static_cast<Nanos>(v * us), 64, Label::background});
    return out;
  };
  using R = std::vector<MeasurementRecord>;
  const meassim::Hic v1{30 * kMicrosecond, 300 * kMicrosecond};
  n.check(meassim::coalesce(trace_us({0, 10, 20, 60}), v1).records ==
              R{{50'000, 3}, {90'000, 1}},
          "HIC short example");
  Trace dense;
  for (int i = 0; i < 30; ++i) dense.push_back({i * 20 * kMicrosecond, 64, Label::background});
  const auto d = meassim::coalesce(dense, v1).records;
  n.check(d.size() == 2 && d[0] == MeasurementRecord{300'000, 15} && d[1].c == 15 &&
              d[1].m == 600'000,
          "HIC dense example");
  Trace twelve;
  for (int i = 0; i < 12; ++i) twelve.push_back({i * kMicrosecond, 64, Label::background});
  const auto pic = meassim::coalesce(twelve, meassim::Pic{5});
  n.check(pic.records == R{{4'000, 5}, {9'000, 5}, {11'000, 2}} && pic.pic_flushed,
          "PIC example");
  n.check(meassim::coalesce(trace_us({0, 5, 12}), meassim::Tic{10 * kMicrosecond}).records ==
              R{{10'000, 2}, {22'000, 1}},
          "TIC example");
  const auto moved = meassim::apply_transfer(
      Trace{{0, 64, Label::background}, {100'000, 1500, Label::background}},
      meassim::TransferConfig{});
  n.check(moved[0].timestamp == 512 && moved[1].timestamp == 112'000, "transfer example");

  std::mt19937_64 rng(2024);
  const std::vector<meassim::CoalescenceConfig> configs{
      v1, meassim::Hic{33 * kMicrosecond, 120 * kMicrosecond}, meassim::Tic{10 * kMicrosecond},
      meassim::Pic{5}, meassim::Hic{5 * kMicrosecond, 50 * kMicrosecond}};
  int bad_conservation = 0, bad_replay = 0, bad_idempotent = 0;
  for (int f = 0; f < 1000; ++f) {
    const int len = std::uniform_int_distribution<int>(0, 400)(rng);
    const double mean_gap = std::uniform_real_distribution<double>(1, 80)(rng) * us;
    std::exponential_distribution<double> gap(1.0 / mean_gap);
    Trace t;
    Nanos now = 0;
    for (int i = 0; i < len; ++i) {
      now += static_cast<Nanos>(gap(rng));
      t.push_back({now, 64, Label::background});
    }
    const auto& cfg = configs[f % configs.size()];
    const auto m = meassim::coalesce(t, cfg);
    std::int64_t packets = 0;
    for (const auto& r : m.records) packets += r.c;
    bad_conservation += packets != len;
    bad_idempotent += meassim::coalesce(t, cfg).records != m.records;
    if (std::holds_alternative<meassim::Pic>(cfg)) continue;
    // Replaying each group's packets alone must reproduce its interrupt.
    std::size_t at = 0;
    for (const auto& r : m.records) {
      const Trace group(t.begin() + static_cast<std::ptrdiff_t>(at),
                        t.begin() + static_cast<std::ptrdiff_t>(at + r.c));
      at += r.c;
      if (meassim::coalesce(group, cfg).records != R{r}) {
        ++bad_replay;
        break;
      }
    }
  }
  n.check(bad_conservation == 0, std::to_string(bad_conservation) + " traces lose packets");
  n.check(bad_replay == 0, std::to_string(bad_replay) + " traces fail group replay");
  n.check(bad_idempotent == 0, std::to_string(bad_idempotent) + " traces differ on re-run");
  n.info("4 examples + transfer, 1000 fuzzed traces");
  return n.done();
}

Outcome chi_square_suite() {
  Notes n;
  double worst = 0;
  int cells = 0;
  for (double s : {0.01, 0.02, 0.05, 0.1, 0.15, 0.2}) {
    for (int k : {5, 10, 20, 47, 100}) {
      for (double o : {1e3, 1e4, 1e5, 1e6}) {
        std::vector<double> counts(static_cast<std::size_t>(k), o / k - s * o / (k - 1));
        counts[0] = o / k + s * o;
        const double got = pdmm::pearson_chi_square(counts).chi_square;
        const double want = s * s * o * (k + static_cast<double>(k) / (k - 1));
        const double rel = std::abs(got - want) / want;
        worst = std::max(worst, rel);
        n.check(rel <= kChiSquareRelTol, fmt2("S=%g O=%g", s, o) + " K=" + std::to_string(k));
        n.check(std::abs(pdmm::chi_square_for_deviation(s, k, o) - want) <= kChiSquareRelTol * want,
                "closed-form helper disagrees");
        ++cells;
      }
    }
  }
  n.info(std::to_string(cells) + fmt(" grid points, max rel err %.2g", worst));
  return n.done();
}

config::ExperimentConfig pdmm_only(const std::string& preset_name) {
  auto cfg = config::preset(preset_name);
  cfg.systems = {config::system_preset("hicv1")};
  cfg.detectors.pad.reset();
  cfg.trials = kPdmmTrials;
  cfg.seed_base = 5;
  return cfg;
}

std::string seconds(std::optional<Nanos> t) {
  return t ? fmt("%.3fs", static_cast<double>(*t) / 1e9) : "-";
}

Outcome pdmm_suite() {
  Notes n;
  const auto bg = harness::run_experiment(pdmm_only("high-rate-background"));
  const auto* c = bg.cell("pdmm", "hicv1");
  const double fpr = static_cast<double>(c->detections) / c->trials;
  n.check(fpr <= kMaxFalsePositive, fmt("background false positives %.2f", fpr));
  n.info(fmt("FPR %.2f", fpr));

  const auto atk = harness::run_experiment(pdmm_only("high-rate"));
  c = atk.cell("pdmm", "hicv1");
  const double rate = static_cast<double>(c->detections) / c->trials;
  n.check(rate >= kMinAttackDetection, fmt("attack detection rate %.2f", rate));
  n.check(c->median && *c->median < kMaxAttackMedian, "attack median " + seconds(c->median));
  n.info(fmt("attack rate %.2f median ", rate) + seconds(c->median));

  // P below T_abs: the fundamental is excluded, its multiples are not.
  for (Nanos period : {250 * kMicrosecond, 200 * kMicrosecond}) {
    auto cfg = pdmm_only("high-rate");
    cfg.traffic.attack->period = period;
    const auto h = harness::run_experiment(cfg);
    c = h.cell("pdmm", "hicv1");
    const double hr = static_cast<double>(c->detections) / c->trials;
    const std::string tag = "harmonic P=" + std::to_string(period / kMicrosecond) + "us";
    n.check(hr >= kMinHarmonicDetection, tag + fmt(" detection rate %.2f", hr));
    n.info(tag + fmt(" rate %.2f", hr));
  }
  return n.done();
}

struct RegimeRuns {
  harness::ExperimentResult high;
  harness::ExperimentResult low;
};

RegimeRuns& regime_runs() {
  static RegimeRuns runs = [] {
    auto high = config::preset("high-rate");
    auto low = config::preset("low-rate");
    high.seed_base = low.seed_base = 9;
    return RegimeRuns{harness::run_experiment(high), harness::run_experiment(low)};
  }();
  return runs;
}

// Timeouts compare as later than any finite time.
bool earlier(std::optional<Nanos> a, std::optional<Nanos> b) {
  if (!a) return false;
  if (!b) return true;
  return *a < *b;
}

Outcome regime_suite() {
  Notes n;
  const auto& r = regime_runs();
  const auto* p1 = r.high.cell("pdmm", "hicv1");
  const auto* p2 = r.high.cell("pdmm", "hicv2");
  n.check(earlier(p1->median, p2->median),
          "high-rate PDMM hicv1 " + seconds(p1->median) + " not < hicv2 " + seconds(p2->median));
  n.info("PDMM hicv1 " + seconds(p1->median) + " hicv2 " + seconds(p2->median));
  const auto* a1 = r.high.cell("pad", "hicv1");
  const auto* a2 = r.high.cell("pad", "hicv2");
  n.check(earlier(a2->median, a1->median),
          "high-rate PAD hicv2 " + seconds(a2->median) + " not < hicv1 " + seconds(a1->median));
  n.info("PAD hicv1 " + seconds(a1->median) + " hicv2 " + seconds(a2->median));
  for (const char* sys : {"hicv1", "hicv2"}) {
    const auto* pd = r.low.cell("pdmm", sys);
    n.check(pd->detections == pd->trials, std::string("low-rate PDMM ") + sys + " detected " +
                                              std::to_string(pd->detections) + "/" +
                                              std::to_string(pd->trials));
    const auto* pa = r.low.cell("pad", sys);
    const double timeouts = 1.0 - static_cast<double>(pa->detections) / pa->trials;
    n.check(timeouts >= kMinPadTimeouts,
            std::string("low-rate PAD ") + sys + fmt(" timeouts %.2f", timeouts));
    n.info(std::string("low ") + sys + " PDMM " + std::to_string(pd->detections) + "/" +
           std::to_string(pd->trials) + fmt(" PAD timeouts %.2f", timeouts));
  }
  return n.done();
}

Outcome variance_suite() {
  Notes n;
  const auto& r = regime_runs();
  auto check_ratio = [&](const harness::ExperimentResult& res, const char* tag, double target) {
    const double ratio = res.summary("hicv1")->mean_stats.var_gap_us2 /
                         res.summary("hicv2")->mean_stats.var_gap_us2;
    n.check(std::abs(ratio / target - 1) <= kVarRatioTol,
            std::string(tag) + fmt2(" variance ratio %.2f (want %.2f)", ratio, target));
    n.info(std::string(tag) + fmt(" ratio %.2f", ratio));
  };
  check_ratio(r.high, "high-rate", kHighRateVarRatio);
  check_ratio(r.low, "low-rate", kLowRateVarRatio);
  for (const auto* res : {&r.high, &r.low}) {
    for (const char* sys : {"hicv1", "hicv2"}) {
      const double rate = res->summary(sys)->mean_stats.rate_per_s;
      const std::string tag = res->config.name + " " + sys;
      n.check(std::abs(rate / kRate - 1) <= kRateTol, tag + fmt(" rate %.0f/s", rate));
      n.info(tag + fmt(" %.0f/s", rate));
    }
  }
  return n.done();
}

Outcome determinism_suite() {
  Notes n;
  auto cfg = config::preset("high-rate");
  cfg.trials = 2;
  cfg.seed_base = 77;
  const auto a = harness::results_json(harness::run_experiment(cfg));
  const auto b = harness::results_json(harness::run_experiment(cfg));
  n.check(a == b, "experiment JSON differs between runs");
  n.info(std::to_string(a.size()) + " identical bytes");
  return n.done();
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "analytic densities", 10, analytic_suite},
      {2, "lambda estimators", 30, estimator_suite},
      {3, "coalescence oracles", 10, coalescence_suite},
      {4, "chi-square closed form", 0, chi_square_suite},
      {5, "PDMM operating characteristics", 600, pdmm_suite},
      {6, "regime orderings", 0, regime_suite},
      {7, "variance ratios and rates", 0, variance_suite},
      {8, "determinism", 0, determinism_suite},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over budget of %.0fs", c.budget_s);
    }
    failed += !o.pass;
    std::printf("criterion %d %-32s %s (%.1fs) %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
