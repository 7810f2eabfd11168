#include "icsim/meassim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icsim/error.hpp"
#include "icsim/trafficgen.hpp"

namespace icsim::meassim {
namespace {

struct Emitter {
  Measurements& out;

  void operator()(Nanos m, std::uint32_t c) {
    // Only PIC can produce an ISR at the previous ISR instant (several
    // packets sharing one timestamp); fold it into the earlier record.
    if (!out.records.empty() && out.records.back().m == m) {
      out.records.back().c += c;
      return;
    }
    out.records.push_back({m, c});
  }
};

void run_hic(std::span<const PacketRecord> t, const Hic& cfg, Measurements& out) {
  Emitter emit{out};
  std::size_t i = 0;
  while (i < t.size()) {
    const Nanos abs_deadline = t[i].timestamp + cfg.t_abs;
    Nanos pack_deadline = t[i].timestamp + cfg.t_pack;
    std::size_t j = i + 1;
    for (;;) {
      const Nanos isr = std::min(abs_deadline, pack_deadline);
      if (j < t.size() && t[j].timestamp < isr) {
        pack_deadline = t[j].timestamp + cfg.t_pack;
        ++j;
        continue;
      }
      if (pack_deadline < abs_deadline) {
        ++out.firing.packet_timer;
      } else {
        ++out.firing.absolute_timer;
      }
      emit(isr, static_cast<std::uint32_t>(j - i));
      break;
    }
    i = j;
  }
}

void run_tic(std::span<const PacketRecord> t, const Tic& cfg, Measurements& out) {
  Emitter emit{out};
  std::size_t i = 0;
  while (i < t.size()) {
    const Nanos isr = t[i].timestamp + cfg.t_fix;
    std::size_t j = i + 1;
    while (j < t.size() && t[j].timestamp < isr) ++j;
    ++out.firing.absolute_timer;
    emit(isr, static_cast<std::uint32_t>(j - i));
    i = j;
  }
}

void run_pic(std::span<const PacketRecord> t, const Pic& cfg, Measurements& out) {
  Emitter emit{out};
  std::size_t i = 0;
  while (i < t.size()) {
    const std::size_t j = std::min(t.size(), i + cfg.count);
    if (j - i < cfg.count) {
      ++out.firing.flushed;
      out.pic_flushed = true;
    } else {
      ++out.firing.packet_count;
    }
    emit(t[j - 1].timestamp, static_cast<std::uint32_t>(j - i));
    i = j;
  }
}

}  // namespace

void validate(const TransferConfig& cfg) {
  if (cfg.bit_rate <= 0) throw ConfigError("transfer bit_rate must be > 0");
}

void validate(const CoalescenceConfig& cfg) {
  std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Tic>) {
          if (c.t_fix <= 0) throw ConfigError("TIC t_fix must be > 0");
        } else if constexpr (std::is_same_v<T, Pic>) {
          if (c.count == 0) throw ConfigError("PIC count must be >= 1");
        } else {
          if (c.t_pack <= 0 || c.t_abs <= 0) {
            throw ConfigError("HIC timers must be > 0");
          }
          if (c.t_pack >= c.t_abs && !c.allow_inert_packet_timer) {
            throw ConfigError("HIC requires t_pack < t_abs");
          }
        }
      },
      cfg);
}

std::string describe(const CoalescenceConfig& cfg) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Tic>) {
          return "TIC(t_fix=" + std::to_string(c.t_fix) + "ns)";
        } else if constexpr (std::is_same_v<T, Pic>) {
          return "PIC(count=" + std::to_string(c.count) + ")";
        } else {
          return "HIC(t_pack=" + std::to_string(c.t_pack) +
                 "ns,t_abs=" + std::to_string(c.t_abs) + "ns)";
        }
      },
      cfg);
}

std::int64_t Measurements::packet_total() const {
  return std::accumulate(records.begin(), records.end(), std::int64_t{0},
                         [](std::int64_t acc, const MeasurementRecord& r) { return acc + r.c; });
}

Trace apply_transfer(std::span<const PacketRecord> trace, const TransferConfig& cfg) {
  validate(cfg);
  if (!trafficgen::is_sorted(trace)) {
    throw PreconditionError("apply_transfer: trace must be timestamp-sorted");
  }
  Trace out(trace.begin(), trace.end());
  const long double ns_per_bit = static_cast<long double>(kSecond) / cfg.bit_rate;
  for (auto& rec : out) {
    rec.timestamp += std::llround(static_cast<long double>(rec.size) * 8 * ns_per_bit);
  }
  // A small packet closely behind a large one can overtake it.
  std::ranges::stable_sort(out, {}, &PacketRecord::timestamp);
  return out;
}

Measurements coalesce(std::span<const PacketRecord> trace, const CoalescenceConfig& cfg) {
  validate(cfg);
  if (!trafficgen::is_sorted(trace)) {
    throw PreconditionError("coalesce: trace must be timestamp-sorted");
  }
  Measurements out;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Tic>) {
          run_tic(trace, c, out);
        } else if constexpr (std::is_same_v<T, Pic>) {
          run_pic(trace, c, out);
        } else {
          run_hic(trace, c, out);
        }
      },
      cfg);
  return out;
}

Measurements measure(std::span<const PacketRecord> trace, const TransferConfig& transfer,
                     const CoalescenceConfig& coalescence) {
  validate(coalescence);
  return coalesce(apply_transfer(trace, transfer), coalescence);
}

}  // namespace icsim::meassim
