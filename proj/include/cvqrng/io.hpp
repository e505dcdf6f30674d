#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cvqrng::io {

/// Writes to `<path>.tmp` and renames over `path`, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Appends one line (newline added) to an append-only log.
void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace cvqrng::io
