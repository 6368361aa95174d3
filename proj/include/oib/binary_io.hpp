#pragma once

// Manifest + blob persistence: a JSON manifest at <stem>.json next to a raw
// little-endian array at <stem>.bin.

#include "oib/tensor_stats.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace oib::io {

using Json = nlohmann::json;

std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path blob_path(const std::filesystem::path& stem);

void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

void append_f64_le(std::vector<std::uint8_t>& out, double v);
void append_f32_le(std::vector<std::uint8_t>& out, float v);
double read_f64_le(const std::uint8_t* p);
float read_f32_le(const std::uint8_t* p);

/// Row-major little-endian float64 encoding of a matrix.
std::vector<std::uint8_t> encode_f64(const Matrix& m);
Matrix decode_f64(const std::vector<std::uint8_t>& bytes, Index rows, Index cols,
                  size_t offset = 0);

}  // namespace oib::io
