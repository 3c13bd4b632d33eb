#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "latentdub/core/nn.hpp"

namespace latentdub {

// Versioned checkpoint container shared by all models.
//
// Byte layout (all integers little-endian):
//   [0..7]   magic "LDCKPT01"
//   [8..11]  u32 manifest length in bytes
//   [12..]   manifest, UTF-8 JSON:
//              {"format_version": 1,
//               "kind": "<model kind>",
//               "config": {...},
//               "arrays": [{"name": "...", "shape": [...]}, ...]}
//   then, for each array in manifest order, product(shape) float64 values.
void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& config, const nn::ParamRegistry& params);

// Loads into an existing registry; names and shapes must match exactly.
// Returns the manifest "config" object.
nlohmann::json load_checkpoint(const std::string& path, const std::string& expected_kind,
                               nn::ParamRegistry& params);

// Reads just the manifest (kind + config) without the arrays.
nlohmann::json read_checkpoint_manifest(const std::string& path);

}  // namespace latentdub
