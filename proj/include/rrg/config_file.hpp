#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rrg/training.hpp"

namespace rrg {

// Experiment file: plain-text key=value lines grouped into [run <name>]
// sections; '#' starts a comment. Keys outside any section form defaults
// applied to every run.
struct ExperimentSpec {
  std::vector<RunConfig> runs;
};

// Raw parsed form, kept for flag overrides.
struct ParsedConfig {
  std::map<std::string, std::string> defaults;
  std::vector<std::pair<std::string, std::map<std::string, std::string>>> sections;
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::filesystem::path& file);

// Builds one RunConfig from defaults + section keys (section wins).
RunConfig run_config_from_keys(const std::string& name,
                               const std::map<std::string, std::string>& keys);

ExperimentSpec experiment_from_config(const ParsedConfig& parsed);

// The four paper pairings with desk-scale geometry.
ExperimentSpec default_experiment();

}  // namespace rrg
