#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "gloredi/tensor.hpp"
#include "gloredi/tomo.hpp"

namespace gloredi {

/// Malformed or unreadable file (bad magic, truncated payload, unknown entry).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Image file: "GDI1", u32 rank, u32 extents, float32 payload (all little-endian).
void write_image(const std::filesystem::path& path, const Grid& image);
Grid read_image(const std::filesystem::path& path);

// Sinogram file: "GDS1", u32 rank (2), u32 extents, float32 payload, then one
// float64 angle per view.
void write_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram read_sinogram(const std::filesystem::path& path);

/// 8-bit binary PGM (P5) with [0,1] mapped linearly onto [0,255] (clamped, rounded).
void write_pgm(const std::filesystem::path& path, const Grid& image);

namespace binary {

void write_u32(std::ostream& os, std::uint32_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
std::uint32_t read_u32(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);
void write_magic(std::ostream& os, const char (&magic)[5]);
/// Throws FormatError if the next four bytes differ from `magic`.
void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what);
void write_shape(std::ostream& os, const Shape& shape);
Shape read_shape(std::istream& is);
void write_payload_f32(std::ostream& os, const Grid& g);
Grid read_payload_f32(std::istream& is, Shape shape);

}  // namespace binary

}  // namespace gloredi
