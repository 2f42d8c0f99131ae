#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftgate/pipeline.hpp"
#include "driftgate/record.hpp"

// JSON line encodings of the sidecar, decision log and manifest.
namespace driftgate {

std::string metadata_line(const EmbeddingRecord& rec);
std::vector<EmbeddingRecord> read_metadata_lines(const std::filesystem::path& path);

std::string decision_line(const Decision& d);
Decision parse_decision(const nlohmann::json& j);

std::string manifest_line(const ManifestEntry& e);
ManifestEntry parse_manifest_entry(const nlohmann::json& j);

}  // namespace driftgate
