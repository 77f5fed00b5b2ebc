#pragma once

#include "fxd/synth.hpp"
#include "fxd/trainer.hpp"

#include <filesystem>
#include <string>

namespace fxd {

struct RunPaths {
    std::string dataset;
    std::string out;
    std::string scene_file;
};

/// Everything a run can configure, with working defaults. The JSON file
/// mirrors this struct in sections: train, losses, render, scene, paths.
/// Command-line flags override file values, which override defaults.
struct Config {
    TrainConfig train; // carries LossWeights and RenderConfig
    SceneSpec scene;
    RunPaths paths;
};

/// Parses a JSON config over the given defaults. Unknown keys anywhere
/// raise an Error naming the key and its section; so do mistyped values.
Config parse_config(const std::string& json_text, const Config& defaults = {});
Config load_config(const std::filesystem::path& path, const Config& defaults = {});

/// Canonical serialization of the effective config, defaults included.
/// parse_config(config_json(c)) reproduces c exactly.
std::string config_json(const Config& cfg);

/// FNV-1a hash of the canonical serialization, as a hex string.
std::string config_hash(const Config& cfg);

} // namespace fxd
