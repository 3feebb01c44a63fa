#pragma once

#include <filesystem>
#include <string>

namespace bganlab {

/// Whole-file binary read. Throws IoError.
std::string read_file(const std::filesystem::path& p);
/// Creates parent directories, then writes the bytes. Throws IoError.
void write_file(const std::filesystem::path& p, const std::string& bytes);

}  // namespace bganlab
