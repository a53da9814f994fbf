#pragma once

#include "redmoment/protocol.hpp"
#include "redmoment/state.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace redmoment::io {

// Density-matrix file format: {"d_a": int, "d_b": int, "re": [[...]],
// "im": [[...]]}; "im" may be omitted for real matrices. Every rejection
// throws states::StateError whose reason() maps to a stable token.
states::DensityMatrix parse_state_json(const std::string& text);
states::DensityMatrix load_state_json(const std::string& path);
void save_state_json(const states::DensityMatrix& rho, const std::string& path);

struct RunManifest {
  std::string command;       // normalized command line
  nlohmann::json config;     // resolved run configuration
  std::uint64_t master_seed = 0;
  std::string version;
  std::vector<std::string> outputs;
  std::string created_at;    // wall-clock stamp; excluded from the hash
};

// Digest over the deterministic fields only (command, config, seed, version,
// outputs) so that identical runs produce identical hashes regardless of
// when they were executed.
std::uint64_t manifest_hash(const RunManifest& manifest);
std::string manifest_hash_hex(const RunManifest& manifest);

nlohmann::json manifest_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::string& path);

// One JSON object per line: {"setting_index", "setting_seed", "y_hat"}.
void write_setting_records(const protocol::ProtocolResult& result,
                           const std::string& path,
                           const std::string& manifest_hash_hex);

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

std::string now_rfc3339();

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace redmoment::io
