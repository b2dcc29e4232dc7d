#pragma once

// Command-line front end: gen, roundtrip, run, render, gradcheck, metrics.
//
// Exit codes: 0 ok, 1 tolerance failure, 2 invalid arguments or degenerate
// input, 3 IO or file format, 4 guidance transport, 5 divergence.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "svt/optimize.hpp"

namespace svt::cli {

enum ExitCode : int {
    kOk = 0,
    kTolerance = 1,
    kInvalid = 2,
    kIo = 3,
    kGuidance = 4,
    kDivergence = 5,
};

/// Every tunable of a command. The forward configuration drives
/// forward_lscm (round trip and oracle targets).
struct Settings {
    PipelineConfig pipeline;
    StageConfig forward = StageConfig::forward_defaults();
};

using SettingMap = std::map<std::string, std::string>;

/// Keys accepted in config files and as --key flags.
const std::vector<std::string>& setting_keys();

/// Throws InvalidArgument on an unknown key or unparsable value.
void apply_setting(Settings& s, const std::string& key, const std::string& value);
void apply_settings(Settings& s, const SettingMap& values);
/// Current values of every key, formatted to round-trip exactly.
SettingMap describe(const Settings& s);

/// Flat key=value text ('#' starts a comment) or a run manifest, whose
/// "config" object is used.
SettingMap read_config_file(const std::filesystem::path& path);

/// Entry point; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace svt::cli
