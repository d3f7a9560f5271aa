#pragma once

#include <string>

namespace gp {

std::string read_file(const std::string& path);

// Writes via a temp file in the same directory followed by a rename, so
// readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

// ISO-8601 UTC timestamp, e.g. "2026-01-02T03:04:05Z".
std::string utc_timestamp();

}  // namespace gp
