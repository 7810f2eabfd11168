#pragma once

// nlohmann::json conversions shared by config, io and harness. Private to
// the library so the public headers stay free of the JSON dependency.

#include <json.hpp>

#include "icsim/config.hpp"
#include "icsim/meassim.hpp"
#include "icsim/pad.hpp"
#include "icsim/pdmm.hpp"
#include "icsim/trafficgen.hpp"
#include "icsim/types.hpp"

namespace icsim::codec {

using Json = nlohmann::ordered_json;

Json to_json(const trafficgen::SizeDistribution& d);
Json to_json(const trafficgen::PoissonConfig& c);
Json to_json(const trafficgen::AttackConfig& c);
Json to_json(const meassim::TransferConfig& c);
Json to_json(const meassim::CoalescenceConfig& c);
Json to_json(const pdmm::PdmmConfig& c);
Json to_json(const pad::PadConfig& c);
Json to_json(const config::SystemSpec& s);
Json to_json(const config::ExperimentConfig& c);
Json to_json(const DetectionReport& r);

trafficgen::SizeDistribution size_dist_from(const Json& j);
meassim::TransferConfig transfer_from(const Json& j);
meassim::CoalescenceConfig coalescence_from(const Json& j);
pdmm::PdmmConfig pdmm_from(const Json& j);
pad::PadConfig pad_from(const Json& j);
config::SystemSpec system_from(const Json& j);
config::ExperimentConfig experiment_from(const Json& j);

}  // namespace icsim::codec
