#include "driftgate/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "binary.hpp"
#include "driftgate/error.hpp"
#include "driftgate/fileio.hpp"

namespace driftgate {

namespace {
constexpr char kMagic[4] = {'M', 'S', 'N', 'S'};
}

void write_checkpoint(const NormalStats& stats, std::ostream& out) {
  using namespace binary;
  if (stats.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw InputError("dimension too large for the checkpoint format");
  }
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(stats.dim()));
  put_u64(out, stats.count());
  put_f64(out, stats.alpha());
  const auto d = static_cast<Eigen::Index>(stats.dim());
  for (Eigen::Index i = 0; i < d; ++i) put_f64(out, stats.sum_b()(i));
  const Eigen::MatrixXd& a = stats.sum_A_lower();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) put_f64(out, a(i, j));
  }
  put_u32(out, static_cast<std::uint32_t>(stats.reservoir().size()));
  for (const auto& v : stats.reservoir()) {
    for (Eigen::Index i = 0; i < d; ++i) put_f64(out, v(i));
  }
}

void save_checkpoint(const NormalStats& stats, const std::filesystem::path& path) {
  write_file_atomically(path, [&](std::ostream& out) { write_checkpoint(stats, out); });
}

NormalStats read_checkpoint(std::istream& in, const AlphaPolicy& policy,
                            const std::string& name) {
  binary::Reader r(in, name);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::BadMagic, name + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32("format version");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::BadVersion,
                      name + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t dim = r.u32("dim");
  if (dim == 0) throw FormatError(FormatError::Kind::Malformed, name + ": dim is 0");
  const std::uint64_t count = r.u64("count");
  const double alpha = r.f64("alpha");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw FormatError(FormatError::Kind::Malformed, name + ": alpha outside [0, 1]");
  }

  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::VectorXd sum_b(d);
  for (Eigen::Index i = 0; i < d; ++i) sum_b(i) = r.f64("sum_b");
  Eigen::MatrixXd sum_A = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) sum_A(i, j) = r.f64("sum_A");
  }
  const std::uint32_t kept = r.u32("reservoir count");
  if (kept > count) {
    throw FormatError(FormatError::Kind::Malformed,
                      name + ": reservoir holds more vectors than were absorbed");
  }
  std::vector<Eigen::VectorXd> reservoir;
  reservoir.reserve(kept);
  for (std::uint32_t k = 0; k < kept; ++k) {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = r.f64("reservoir");
    reservoir.push_back(std::move(v));
  }
  try {
    return NormalStats::restore(dim, count, alpha, std::move(sum_b), std::move(sum_A),
                                std::move(reservoir), policy);
  } catch (const InputError& e) {
    throw FormatError(FormatError::Kind::Malformed, name + ": " + e.what());
  }
}

NormalStats load_checkpoint(const std::filesystem::path& path, const AlphaPolicy& policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, policy, path.string());
}

}  // namespace driftgate
