#pragma once

#include <string>

#include "lendsim/sim.hpp"

namespace lendsim {

// JSON scenario files; unknown keys are rejected with their field path.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config_file(const std::string& path);
std::string dump_config(const ScenarioConfig& cfg);

// Replay schedule CSV: header block,a_b,b_b,a_l,b_l.
std::vector<ReplayEntry> load_replay_csv(const std::string& path);

}  // namespace lendsim
