#include "driftgate/pipeline.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <system_error>
#include <tuple>

#include "driftgate/error.hpp"
#include "driftgate/fileio.hpp"
#include "driftgate/scorer.hpp"
#include "jsonl.hpp"

namespace driftgate {

Eigen::MatrixXd to_matrix(std::span<const EmbeddingRecord> records) {
  if (records.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(records.front().vector.size());
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(records.size()));
  for (std::size_t c = 0; c < records.size(); ++c) {
    const auto& v = records[c].vector;
    if (static_cast<Eigen::Index>(v.size()) != dim) {
      throw InputError("records in one batch have different dimensions");
    }
    for (Eigen::Index r = 0; r < dim; ++r) {
      out(r, static_cast<Eigen::Index>(c)) = static_cast<double>(v[static_cast<std::size_t>(r)]);
    }
  }
  return out;
}

namespace {

std::string frame_label(std::uint64_t frame) { return "frame " + std::to_string(frame); }

void validate_frame(const std::vector<EmbeddingRecord>& frame, std::size_t dim) {
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const auto& rec = frame[i];
    if (rec.patch != i) {
      throw InputError(frame_label(rec.frame) + ": patch indices must run 0, 1, 2, ...; got " +
                       std::to_string(rec.patch) + " at position " + std::to_string(i));
    }
    if (rec.vector.size() != dim) {
      throw InputError(frame_label(rec.frame) + ", patch " + std::to_string(rec.patch) +
                       ": dimension " + std::to_string(rec.vector.size()) +
                       " does not match model dimension " + std::to_string(dim));
    }
    require_finite(rec.vector, frame_label(rec.frame) + " patch " + std::to_string(rec.patch));
  }
}

}  // namespace

StreamSummary run_filter(RecordSource& stream, NormalStats& stats, double threshold,
                         const FilterSinks& sinks) {
  if (!(threshold > 0.0)) throw InputError("threshold must be positive");

  StreamSummary summary;
  std::optional<std::uint64_t> last_completed;
  std::optional<EmbeddingRecord> pending = stream.next();

  auto guarded = [&](auto&& fn) {
    try {
      fn();
    } catch (const IoError& e) {
      throw IoError(e.what(), last_completed);
    } catch (const std::ios_base::failure& e) {
      throw IoError(e.what(), last_completed);
    }
  };

  std::vector<EmbeddingRecord> frame;
  while (pending) {
    const std::uint64_t frame_index = pending->frame;
    if (last_completed && frame_index <= *last_completed) {
      throw InputError("frames out of order: " + frame_label(frame_index) + " arrived after " +
                       frame_label(*last_completed));
    }
    frame.clear();
    while (pending && pending->frame == frame_index) {
      frame.push_back(std::move(*pending));
      pending = stream.next();
    }
    validate_frame(frame, stats.dim());

    const SnapshotPtr snapshot = stats.snapshot();
    const std::vector<double> scores = score_batch(*snapshot, to_matrix(frame));

    std::vector<std::size_t> novel;
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const Decision d = decide(scores[i], threshold, snapshot->version(), frame_index,
                                frame[i].patch);
      if (d.accepted) novel.push_back(i);
      if (sinks.on_decision) guarded([&] { sinks.on_decision(d); });
    }

    ++summary.frames_seen;
    summary.patches_seen += frame.size();
    if (!novel.empty()) {
      Eigen::MatrixXd update(static_cast<Eigen::Index>(stats.dim()),
                             static_cast<Eigen::Index>(novel.size()));
      for (std::size_t k = 0; k < novel.size(); ++k) {
        const auto& v = frame[novel[k]].vector;
        for (std::size_t r = 0; r < v.size(); ++r) {
          update(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v[r];
        }
      }
      stats.absorb(update);
      ++summary.frames_recorded;
      summary.patches_accepted += novel.size();
      if (sinks.on_record) {
        guarded([&] {
          for (const auto& rec : frame) sinks.on_record(rec);
        });
      }
    }
    summary.selection_curve.push_back(CurvePoint{summary.frames_seen, summary.frames_recorded,
                                                 summary.frames_discarded()});
    last_completed = frame_index;
  }
  return summary;
}

DecisionLogWriter::DecisionLogWriter(std::filesystem::path path) : path_(std::move(path)) {
  tmp_ = path_;
  tmp_ += ".tmp";
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open " + tmp_.string() + " for writing");
}

DecisionLogWriter::~DecisionLogWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ignored;
    std::filesystem::remove(tmp_, ignored);
  }
}

void DecisionLogWriter::write(const Decision& d) {
  out_ << decision_line(d) << '\n';
  if (!out_) throw IoError("write failed for " + tmp_.string());
}

void DecisionLogWriter::commit() {
  out_.flush();
  if (!out_) throw IoError("write failed for " + tmp_.string());
  out_.close();
  std::error_code ec;
  std::filesystem::rename(tmp_, path_, ec);
  if (ec) throw IoError("cannot move " + tmp_.string() + " to " + path_.string());
  committed_ = true;
}

namespace {

template <typename T, typename Parse>
std::vector<T> read_jsonl(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError(FormatError::Kind::Malformed,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<Decision> read_decision_log(const std::filesystem::path& path) {
  return read_jsonl<Decision>(path, parse_decision);
}

ManifestEntry make_manifest_entry(const EmbeddingRecord& rec, const std::string& source) {
  return ManifestEntry{rec.frame, rec.patch, rec.bbox, rec.label, source, rec.row};
}

void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path) {
  std::vector<ManifestEntry> sorted(entries.begin(), entries.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame, a.patch) < std::tie(b.frame, b.patch);
  });
  write_file_atomically(path, [&](std::ostream& out) {
    for (const auto& e : sorted) out << manifest_line(e) << '\n';
  });
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  return read_jsonl<ManifestEntry>(path, parse_manifest_entry);
}

std::vector<EmbeddingRecord> resolve_manifest(std::span<const ManifestEntry> entries,
                                              const std::filesystem::path& default_source) {
  std::map<std::filesystem::path, std::unique_ptr<EmbsReader>> readers;
  std::vector<EmbeddingRecord> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const std::filesystem::path source =
        e.source.empty() ? default_source : std::filesystem::path(e.source);
    if (source.empty()) {
      throw InputError("manifest entry (frame " + std::to_string(e.frame) +
                       ") has no source file");
    }
    auto& reader = readers[source];
    if (!reader) reader = std::make_unique<EmbsReader>(source);
    EmbeddingRecord rec = reader->read_row(e.row);
    rec.frame = e.frame;
    rec.patch = e.patch;
    rec.bbox = e.bbox;
    rec.label = e.label;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace driftgate
