#include "driftgate/embs.hpp"

#include <cstring>
#include <limits>

#include <json.hpp>

#include "binary.hpp"
#include "driftgate/error.hpp"
#include "driftgate/fileio.hpp"
#include "jsonl.hpp"

namespace driftgate {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'S'};

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& embs) {
  std::filesystem::path out = embs;
  out.replace_extension(".meta.jsonl");
  return out;
}

std::optional<EmbeddingRecord> VectorSource::next() {
  if (pos_ >= records_.size()) return std::nullopt;
  return records_[pos_++];
}

EmbsReader::EmbsReader(const std::filesystem::path& path,
                       std::optional<std::uint32_t> expected_dim)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open embedding file " + path.string());
  const std::string name = path.string();

  binary::Reader r(in_, name);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::BadMagic, name + ": not an EMBS file (bad magic)");
  }
  header_.version = r.u32("format version");
  if (header_.version != kEmbsVersion) {
    throw FormatError(FormatError::Kind::BadVersion,
                      name + ": unsupported EMBS version " + std::to_string(header_.version));
  }
  header_.dim = r.u32("dim");
  header_.count = r.u64("count");
  if (header_.dim == 0 && header_.count > 0) {
    throw FormatError(FormatError::Kind::Malformed, name + ": dim is 0 but count is not");
  }
  if (expected_dim && header_.dim != *expected_dim) {
    throw FormatError(FormatError::Kind::DimensionMismatch,
                      name + ": file has dim " + std::to_string(header_.dim) +
                          ", model expects " + std::to_string(*expected_dim));
  }

  const std::uint64_t row_bytes = std::uint64_t{header_.dim} * sizeof(float);
  if (row_bytes > 0 && header_.count > (std::numeric_limits<std::uint64_t>::max() -
                                        kEmbsHeaderBytes) / row_bytes) {
    throw FormatError(FormatError::Kind::Malformed, name + ": count overflows the file size");
  }
  const std::uint64_t expected = kEmbsHeaderBytes + header_.count * row_bytes;
  const std::uint64_t actual = std::filesystem::file_size(path);
  if (actual < expected) {
    const std::uint64_t complete = row_bytes == 0 ? 0 : (actual - kEmbsHeaderBytes) / row_bytes;
    throw FormatError(FormatError::Kind::Truncated,
                      name + ": truncated payload, header promises " +
                          std::to_string(header_.count) + " vectors but only " +
                          std::to_string(complete) + " are complete; data ends at byte offset " +
                          std::to_string(actual) + ", expected " + std::to_string(expected));
  }

  const auto meta_file = sidecar_path(path);
  if (std::filesystem::exists(meta_file)) {
    has_sidecar_ = true;
    meta_ = read_metadata_lines(meta_file);
    if (meta_.size() != header_.count) {
      throw FormatError(FormatError::Kind::MetadataMismatch,
                        meta_file.string() + ": " + std::to_string(meta_.size()) +
                            " metadata rows for " + std::to_string(header_.count) + " vectors");
    }
  }
}

EmbeddingRecord EmbsReader::make_record(std::uint64_t row, std::vector<float> values) const {
  EmbeddingRecord rec;
  if (has_sidecar_) {
    rec = meta_[row];
  } else {
    rec.frame = row;
  }
  rec.row = row;
  rec.vector = std::move(values);
  return rec;
}

std::optional<EmbeddingRecord> EmbsReader::next() {
  if (cursor_ >= header_.count) return std::nullopt;
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(kEmbsHeaderBytes +
                                        cursor_ * std::uint64_t{header_.dim} * sizeof(float)));
  binary::Reader r(in_, path_.string(), static_cast<std::uint64_t>(in_.tellg()));
  std::vector<float> values(header_.dim);
  r.f32_array(values, "vector");
  return make_record(cursor_++, std::move(values));
}

EmbeddingRecord EmbsReader::read_row(std::uint64_t row) {
  if (row >= header_.count) {
    throw InputError(path_.string() + ": row " + std::to_string(row) + " out of range (count " +
                     std::to_string(header_.count) + ")");
  }
  const std::uint64_t offset = kEmbsHeaderBytes + row * std::uint64_t{header_.dim} * sizeof(float);
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offset));
  binary::Reader r(in_, path_.string(), offset);
  std::vector<float> values(header_.dim);
  r.f32_array(values, "vector");
  return make_record(row, std::move(values));
}

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path,
                                                 std::optional<std::uint32_t> expected_dim) {
  EmbsReader reader(path, expected_dim);
  std::vector<EmbeddingRecord> out;
  out.reserve(reader.header().count);
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

void write_embedding_file(const std::filesystem::path& path,
                          std::span<const EmbeddingRecord> records, std::uint32_t dim) {
  for (const auto& rec : records) {
    if (rec.vector.size() != dim) {
      throw InputError("record (frame " + std::to_string(rec.frame) + ", patch " +
                       std::to_string(rec.patch) + ") has " + std::to_string(rec.vector.size()) +
                       " entries, expected " + std::to_string(dim));
    }
  }
  write_file_atomically(path, [&](std::ostream& out) {
    out.write(kMagic, 4);
    binary::put_u32(out, kEmbsVersion);
    binary::put_u32(out, dim);
    binary::put_u64(out, records.size());
    for (const auto& rec : records) binary::put_f32_array(out, rec.vector);
  });
  write_file_atomically(sidecar_path(path), [&](std::ostream& out) {
    for (const auto& rec : records) out << metadata_line(rec) << '\n';
  });
}

}  // namespace driftgate
