#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "undusim/characterization.hpp"
#include "undusim/environment.hpp"
#include "undusim/sim.hpp"

// Experiment configuration: JSON files (// comments allowed) with a
// top-level `include` key that deep-merges shared defaults underneath the
// including file. Readers report problems by dotted field path.

namespace undu {

using Json = nlohmann::json;

Json parse_config_text(const std::string& text, const std::string& origin);

// Reads a file, resolves `include` (string or list, relative to the file),
// and returns the merged object. Detects include cycles.
Json load_config(const std::string& path);

// Overlay wins; objects merge recursively, everything else replaces.
Json deep_merge(Json base, const Json& overlay);

// Built-in defaults, same values configs/defaults.json ships with.
Json default_config();

bool config_has(const Json& j, const std::string& path);
double config_number(const Json& j, const std::string& path, double fallback);
double require_config_number(const Json& j, const std::string& path);
long config_integer(const Json& j, const std::string& path, long fallback);
bool config_flag(const Json& j, const std::string& path, bool fallback);
std::string config_string(const Json& j, const std::string& path, const std::string& fallback);
const Json* config_find(const Json& j, const std::string& path);

std::uint64_t config_hash(const Json& j);

TrialSetup trial_setup_from_config(const Json& j);
Environment environment_from_config(const Json& j, const TrialSetup& setup);
RigParams rig_from_config(const Json& j);

}  // namespace undu
