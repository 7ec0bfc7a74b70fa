// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace mixer {

/// Reads a whole file into memory. Throws Error("cannot open ...") on failure.
std::vector<std::byte> read_file(const std::filesystem::path& path);

/// Writes bytes to `path` atomically: the content goes to a sibling temp file
/// first and is renamed into place, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace mixer
