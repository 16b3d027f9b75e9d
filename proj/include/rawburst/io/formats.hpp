#pragma once

#include "rawburst/model/sensor.hpp"
#include "rawburst/util/image.hpp"

#include <filesystem>
#include <string>

namespace rawburst::io {

// PFM: "PF\n<w> <h>\n-1.0\n" (or "Pf" for one channel), float32 little-endian,
// scanlines stored bottom to top. Big-endian files (positive scale) are accepted on read.
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);
std::string encode_pfm(const Image& img);
Image decode_pfm(const std::string& bytes);

// Binary PGM with 16-bit big-endian samples; maxval = 2^q - 1.
void write_pgm16(const std::filesystem::path& path, const DnImage& img, int bit_depth);
/// Throws ValidationError when the file's maxval disagrees with `bit_depth`.
DnImage read_pgm16(const std::filesystem::path& path, int bit_depth);
std::string encode_pgm16(const DnImage& img, int bit_depth);
DnImage decode_pgm16(const std::string& bytes, int bit_depth);

/// Simple 8-bit PPM preview writer (values clamped to [0, 1]).
void write_ppm8(const std::filesystem::path& path, const Image& rgb);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

} // namespace rawburst::io
