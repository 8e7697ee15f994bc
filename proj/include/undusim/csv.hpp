#pragma once

#include <string>

// File persistence helpers. Writes go through a temp file in the target
// directory and a rename, so readers never observe partial output.

namespace undu {

std::string read_file(const std::string& path);

// Creates parent directories as needed; atomic within the filesystem.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace undu
