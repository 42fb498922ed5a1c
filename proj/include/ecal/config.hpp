#pragma once

#include <map>
#include <string>

#include "ecal/pipeline.hpp"

namespace ecal {

/// Flat dotted-key configuration, e.g. "clustering.eps_s=0.015".
using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` comments and blank lines are skipped.
ConfigMap load_config_file(const std::string& path);

/// Applies one "key=value" override; throws on malformed input.
void apply_override(ConfigMap& map, const std::string& entry);

/// Builds a PipelineConfig from defaults plus the map; unknown keys throw.
PipelineConfig pipeline_config_from(const ConfigMap& map);

/// Effective configuration as strings, for echo-back into reports.
ConfigMap config_echo(const PipelineConfig& config);

/// One line per key with its default value and meaning.
std::string config_reference();

}  // namespace ecal
