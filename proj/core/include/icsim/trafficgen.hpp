#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "icsim/types.hpp"

namespace icsim::trafficgen {

struct FixedSize {
  std::uint32_t bytes = 1500;
};

/// Discrete packet-size distribution. Weights must sum to 1.
struct EmpiricalSizes {
  std::vector<std::uint32_t> bytes;
  std::vector<double> weights;
};

using SizeDistribution = std::variant<FixedSize, EmpiricalSizes>;

double mean_size(const SizeDistribution& dist);

struct PoissonConfig {
  double lambda_ns = 12'500.0;  ///< mean inter-arrival
  SizeDistribution sizes = FixedSize{};
  Nanos duration = kSecond;
  std::uint64_t seed = 1;
};

struct AttackConfig {
  Nanos period = 400 * kMicrosecond;
  std::uint32_t packet_size = 1500;
  Nanos start_offset = 0;
  double jitter_stddev_ns = 0.0;
  Nanos duration = kSecond;
  std::uint64_t seed = 1;
};

void validate(const PoissonConfig& cfg);
void validate(const AttackConfig& cfg);

/// Period of back-to-back packets of `packet_size` bytes on a link of
/// `bits_per_second`, rounded to the nearest nanosecond.
Nanos period_for_rate(std::uint32_t packet_size, double bits_per_second);

/// Poisson arrivals in [0, duration) with exponential gaps of mean lambda.
Trace gen_poisson(const PoissonConfig& cfg);

/// Arrivals at start_offset + k*period (+ clamped Gaussian jitter) for
/// nominal times in [start_offset, start_offset + duration).
Trace gen_periodic(const AttackConfig& cfg);

/// Timestamp-ordered union. On equal timestamps background precedes attack;
/// otherwise records from `a` precede records from `b`.
Trace merge(std::span<const PacketRecord> a, std::span<const PacketRecord> b);

bool is_sorted(std::span<const PacketRecord> trace);

/// SplitMix64 step, used to derive independent stream seeds from one base.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace icsim::trafficgen
