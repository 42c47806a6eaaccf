#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace smoothsnn {

/// Writes `bytes` to `path` via a sibling temp file and rename, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Little-endian encoding helpers for the binary formats.
void put_u32_le(std::string& out, std::uint32_t v);
std::uint32_t get_u32_le(const unsigned char* p);
void put_f32_le(std::string& out, float v);
float get_f32_le(const unsigned char* p);

/// printf("%.9g"), the float format of every CSV this project writes.
std::string format_real(double v);

}  // namespace smoothsnn
