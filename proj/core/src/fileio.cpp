#include "driftgate/fileio.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <system_error>

#include "driftgate/error.hpp"
#include "driftgate/record.hpp"

namespace driftgate {

void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& writer) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

namespace {

template <typename T>
void check_finite(std::span<const T> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InputError(std::string(what) + " has a non-finite entry at index " +
                       std::to_string(i));
    }
  }
}

}  // namespace

void require_finite(std::span<const float> values, std::string_view what) {
  check_finite(values, what);
}

void require_finite(std::span<const double> values, std::string_view what) {
  check_finite(values, what);
}

}  // namespace driftgate
