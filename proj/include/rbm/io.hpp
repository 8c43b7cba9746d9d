#pragma once
// Small output helpers shared by the CSV/JSON writers: fixed numeric
// formatting (golden files must be byte-stable) and a config hash.

#include <cstdint>
#include <string>

namespace rbm {

// shortest-roundtrip style formatting is not stable across libcs; pin the
// classic %.17g instead
std::string fmt17(double x);

// FNV-1a over a canonical string (used for config hashes in manifests)
uint64_t fnv1a(const std::string& s);

std::string hex64(uint64_t x);

// write text to a file in binary mode (keeps LF on every platform)
void write_text_file(const std::string& path, const std::string& text);

std::string read_text_file(const std::string& path);

} // namespace rbm
