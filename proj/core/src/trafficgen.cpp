#include "icsim/trafficgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "icsim/error.hpp"

namespace icsim::trafficgen {
namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class SizeSampler {
 public:
  explicit SizeSampler(const SizeDistribution& dist, std::uint64_t seed)
      : rng_(seed) {
    if (const auto* fixed = std::get_if<FixedSize>(&dist)) {
      sizes_ = {fixed->bytes};
    } else {
      const auto& emp = std::get<EmpiricalSizes>(dist);
      sizes_ = emp.bytes;
      pick_ = std::discrete_distribution<std::size_t>(emp.weights.begin(),
                                                      emp.weights.end());
    }
  }

  std::uint32_t operator()() {
    if (sizes_.size() == 1) return sizes_.front();
    return sizes_[pick_(rng_)];
  }

 private:
  std::mt19937_64 rng_;
  std::vector<std::uint32_t> sizes_;
  std::discrete_distribution<std::size_t> pick_;
};

void validate_sizes(const SizeDistribution& dist) {
  if (const auto* fixed = std::get_if<FixedSize>(&dist)) {
    if (fixed->bytes == 0) throw ConfigError("packet size must be >= 1 byte");
    return;
  }
  const auto& emp = std::get<EmpiricalSizes>(dist);
  if (emp.bytes.empty() || emp.bytes.size() != emp.weights.size()) {
    throw ConfigError("empirical sizes need one weight per size");
  }
  if (std::ranges::any_of(emp.bytes, [](auto b) { return b == 0; })) {
    throw ConfigError("packet size must be >= 1 byte");
  }
  if (std::ranges::any_of(emp.weights, [](double w) { return !(w >= 0.0); })) {
    throw ConfigError("size weights must be non-negative");
  }
  const double total = std::accumulate(emp.weights.begin(), emp.weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("size weights must sum to 1");
  }
}

}  // namespace

double mean_size(const SizeDistribution& dist) {
  if (const auto* fixed = std::get_if<FixedSize>(&dist)) return fixed->bytes;
  const auto& emp = std::get<EmpiricalSizes>(dist);
  double mean = 0.0;
  for (std::size_t i = 0; i < emp.bytes.size(); ++i) {
    mean += emp.weights[i] * emp.bytes[i];
  }
  return mean;
}

void validate(const PoissonConfig& cfg) {
  if (!(cfg.lambda_ns > 0.0) || !std::isfinite(cfg.lambda_ns)) {
    throw ConfigError("poisson lambda must be > 0");
  }
  if (cfg.duration < 0) throw ConfigError("poisson duration must be >= 0");
  validate_sizes(cfg.sizes);
}

void validate(const AttackConfig& cfg) {
  if (cfg.period <= 0) throw ConfigError("attack period must be > 0");
  if (cfg.packet_size == 0) throw ConfigError("attack packet size must be >= 1 byte");
  if (cfg.start_offset < 0) throw ConfigError("attack start offset must be >= 0");
  if (cfg.duration < 0) throw ConfigError("attack duration must be >= 0");
  if (!(cfg.jitter_stddev_ns >= 0.0) ||
      !(cfg.jitter_stddev_ns < static_cast<double>(cfg.period) / 4.0)) {
    throw ConfigError("attack jitter stddev must lie in [0, period/4)");
  }
}

Nanos period_for_rate(std::uint32_t packet_size, double bits_per_second) {
  if (packet_size == 0 || !(bits_per_second > 0.0)) {
    throw ConfigError("attack rate and packet size must be positive");
  }
  return std::llround(packet_size * 8.0 * 1e9 / bits_per_second);
}

Trace gen_poisson(const PoissonConfig& cfg) {
  validate(cfg);
  Trace out;
  if (cfg.duration == 0) return out;
  out.reserve(static_cast<std::size_t>(cfg.duration / cfg.lambda_ns * 1.01) + 16);

  std::mt19937_64 gaps(derive_seed(cfg.seed, 0));
  SizeSampler sizes(cfg.sizes, derive_seed(cfg.seed, 1));
  double t = 0.0;
  for (;;) {
    t += -cfg.lambda_ns * std::log1p(-uniform01(gaps));
    const Nanos stamp = std::llround(t);
    if (stamp >= cfg.duration) break;
    out.push_back({stamp, sizes(), Label::background});
  }
  return out;
}

Trace gen_periodic(const AttackConfig& cfg) {
  validate(cfg);
  Trace out;
  if (cfg.duration == 0) return out;
  const auto n = static_cast<std::size_t>((cfg.duration + cfg.period - 1) / cfg.period);
  out.reserve(n);

  std::mt19937_64 rng(derive_seed(cfg.seed, 2));
  std::normal_distribution<double> jitter(0.0, cfg.jitter_stddev_ns);
  // |jitter| < period/2 keeps consecutive packets strictly ordered.
  const double bound = static_cast<double>(cfg.period) / 2.0 - 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    Nanos stamp = cfg.start_offset + static_cast<Nanos>(k) * cfg.period;
    if (cfg.jitter_stddev_ns > 0.0) {
      stamp += std::llround(std::clamp(jitter(rng), -bound, bound));
      stamp = std::max<Nanos>(stamp, out.empty() ? 0 : out.back().timestamp);
    }
    out.push_back({stamp, cfg.packet_size, Label::attack});
  }
  return out;
}

bool is_sorted(std::span<const PacketRecord> trace) {
  return std::ranges::is_sorted(trace, {}, &PacketRecord::timestamp);
}

Trace merge(std::span<const PacketRecord> a, std::span<const PacketRecord> b) {
  if (!is_sorted(a) || !is_sorted(b)) {
    throw PreconditionError("merge: inputs must be timestamp-sorted");
  }
  Trace out;
  out.reserve(a.size() + b.size());
  auto take_b = [](const PacketRecord& x, const PacketRecord& y) {
    if (y.timestamp != x.timestamp) return y.timestamp < x.timestamp;
    return y.label == Label::background && x.label == Label::attack;
  };
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (take_b(a[i], b[j])) {
      out.push_back(b[j++]);
    } else {
      out.push_back(a[i++]);
    }
  }
  out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(i), a.end());
  out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(j), b.end());
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace icsim::trafficgen
