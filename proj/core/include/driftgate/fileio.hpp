#pragma once

#include <filesystem>
#include <functional>
#include <ostream>

namespace driftgate {

/// Writes a file through a sibling temporary and renames it into place, so
/// readers never observe a partially written file. Throws IoError.
void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& writer);

}  // namespace driftgate
