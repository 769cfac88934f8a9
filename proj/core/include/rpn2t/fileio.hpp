#pragma once

#include <filesystem>
#include <string>

namespace rpn2t {

// Whole-file read; throws DataError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace rpn2t
