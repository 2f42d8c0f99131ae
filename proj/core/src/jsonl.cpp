#include "jsonl.hpp"

#include <fstream>

#include "driftgate/error.hpp"

namespace driftgate {

namespace {

using nlohmann::json;

json bbox_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

BBox parse_bbox(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("bbox must be [x, y, w, h]");
  return BBox{j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>(), j[2].get<std::uint32_t>(),
              j[3].get<std::uint32_t>()};
}

json label_json(const std::optional<std::string>& label) {
  return label ? json(*label) : json(nullptr);
}

std::optional<std::string> parse_label(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

std::string metadata_line(const EmbeddingRecord& rec) {
  json j;
  j["frame"] = rec.frame;
  j["patch"] = rec.patch;
  j["bbox"] = bbox_json(rec.bbox);
  j["label"] = label_json(rec.label);
  return j.dump();
}

std::vector<EmbeddingRecord> read_metadata_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metadata sidecar " + path.string());
  std::vector<EmbeddingRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      EmbeddingRecord rec;
      rec.frame = j.at("frame").get<std::uint64_t>();
      rec.patch = j.at("patch").get<std::uint32_t>();
      rec.bbox = j.contains("bbox") ? parse_bbox(j.at("bbox")) : BBox{};
      rec.label = parse_label(j, "label");
      rec.row = out.size();
      out.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw FormatError(FormatError::Kind::Malformed,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string decision_line(const Decision& d) {
  json j;
  j["frame"] = d.frame;
  j["patch"] = d.patch;
  j["score"] = d.score;
  j["threshold"] = d.threshold;
  j["accepted"] = d.accepted;
  j["stats_version"] = d.stats_version;
  return j.dump();
}

Decision parse_decision(const json& j) {
  return Decision{j.at("frame").get<std::uint64_t>(),   j.at("patch").get<std::uint32_t>(),
                  j.at("score").get<double>(),          j.at("threshold").get<double>(),
                  j.at("accepted").get<bool>(),         j.at("stats_version").get<std::uint64_t>()};
}

std::string manifest_line(const ManifestEntry& e) {
  json j;
  j["frame"] = e.frame;
  j["patch"] = e.patch;
  j["bbox"] = bbox_json(e.bbox);
  j["label"] = label_json(e.label);
  j["source"] = e.source;
  j["row"] = e.row;
  return j.dump();
}

ManifestEntry parse_manifest_entry(const json& j) {
  ManifestEntry e;
  e.frame = j.at("frame").get<std::uint64_t>();
  e.patch = j.at("patch").get<std::uint32_t>();
  e.bbox = j.contains("bbox") ? parse_bbox(j.at("bbox")) : BBox{};
  e.label = parse_label(j, "label");
  e.source = j.value("source", std::string{});
  e.row = j.at("row").get<std::uint64_t>();
  return e;
}

}  // namespace driftgate
