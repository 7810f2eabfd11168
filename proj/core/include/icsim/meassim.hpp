#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "icsim/types.hpp"

namespace icsim::meassim {

struct TransferConfig {
  std::int64_t bit_rate = 1'000'000'000;  ///< bits per second
};

/// Timer-based coalescence: ISR fires a fixed time after a group's first packet.
struct Tic {
  Nanos t_fix = 0;
};

/// Packet-based coalescence: ISR fires on the count-th packet of a group.
struct Pic {
  std::uint32_t count = 1;
};

/// Hybrid coalescence with a resettable packet timer and a per-group
/// absolute timer.
struct Hic {
  Nanos t_pack = 0;
  Nanos t_abs = 0;
  /// Accept t_pack >= t_abs, where the packet timer can never fire first.
  bool allow_inert_packet_timer = false;
};

using CoalescenceConfig = std::variant<Tic, Pic, Hic>;

void validate(const TransferConfig& cfg);
void validate(const CoalescenceConfig& cfg);

std::string describe(const CoalescenceConfig& cfg);

/// Which timer asserted each interrupt, tallied over one coalesce() call.
struct FiringCounts {
  std::int64_t packet_timer = 0;    // HIC T_pack
  std::int64_t absolute_timer = 0;  // HIC T_abs, TIC T_fix
  std::int64_t packet_count = 0;    // PIC
  std::int64_t flushed = 0;         // PIC trailing partial group
};

struct Measurements {
  std::vector<MeasurementRecord> records;
  FiringCounts firing;
  bool pic_flushed = false;

  std::int64_t packet_total() const;
};

/// Shifts each timestamp by size*8/bit_rate (nearest ns) and re-sorts.
Trace apply_transfer(std::span<const PacketRecord> trace, const TransferConfig& cfg);

/// Event-driven interrupt coalescence over a sorted trace.
///
/// A packet arriving strictly before the pending ISR instant joins the group;
/// one arriving exactly at it opens the next group. Both timers are idle
/// between an ISR and the next arrival. For PIC a trailing partial group is
/// emitted at the last arrival and `pic_flushed` is set.
Measurements coalesce(std::span<const PacketRecord> trace, const CoalescenceConfig& cfg);

/// apply_transfer followed by coalesce.
Measurements measure(std::span<const PacketRecord> trace, const TransferConfig& transfer,
                     const CoalescenceConfig& coalescence);

}  // namespace icsim::meassim
