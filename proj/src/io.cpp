#include "gloredi/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace gloredi {
namespace binary {
namespace {

constexpr std::uint32_t kMaxRank = 8;

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw FormatError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
void write_f32(std::ostream& os, float v) { put_le(os, v); }
void write_f64(std::ostream& os, double v) { put_le(os, v); }
std::uint32_t read_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
float read_f32(std::istream& is) { return get_le<float>(is); }
double read_f64(std::istream& is) { return get_le<double>(is); }

void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what) {
  char got[4] = {};
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(what + ": bad magic (expected " + std::string(magic, 4) + ")");
  }
}

void write_shape(std::ostream& os, const Shape& shape) {
  write_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (auto e : shape) write_u32(os, static_cast<std::uint32_t>(e));
}

Shape read_shape(std::istream& is) {
  const auto rank = read_u32(is);
  if (rank == 0 || rank > kMaxRank) throw FormatError("invalid rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& e : shape) {
    e = read_u32(is);
    if (e == 0) throw FormatError("zero extent");
  }
  return shape;
}

void write_payload_f32(std::ostream& os, const Grid& g) {
  for (double v : g.values()) write_f32(os, static_cast<float>(v));
}

Grid read_payload_f32(std::istream& is, Shape shape) {
  Grid g(std::move(shape));
  for (auto& v : g.values()) v = static_cast<double>(read_f32(is));
  return g;
}

}  // namespace binary

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return is;
}

}  // namespace

void write_image(const std::filesystem::path& path, const Grid& image) {
  auto os = open_out(path);
  binary::write_magic(os, "GDI1");
  binary::write_shape(os, image.shape());
  binary::write_payload_f32(os, image);
  if (!os) throw FormatError("failed writing " + path.string());
}

Grid read_image(const std::filesystem::path& path) {
  auto is = open_in(path);
  binary::expect_magic(is, "GDI1", path.string());
  auto shape = binary::read_shape(is);
  return binary::read_payload_f32(is, std::move(shape));
}

void write_sinogram(const std::filesystem::path& path, const Sinogram& sino) {
  auto os = open_out(path);
  binary::write_magic(os, "GDS1");
  binary::write_shape(os, sino.values.shape());
  binary::write_payload_f32(os, sino.values);
  for (double a : sino.angles) binary::write_f64(os, a);
  if (!os) throw FormatError("failed writing " + path.string());
}

Sinogram read_sinogram(const std::filesystem::path& path) {
  auto is = open_in(path);
  binary::expect_magic(is, "GDS1", path.string());
  auto shape = binary::read_shape(is);
  if (shape.size() != 2) throw FormatError(path.string() + ": sinogram must have rank 2");
  Sinogram sino;
  sino.values = binary::read_payload_f32(is, shape);
  sino.angles.resize(shape[0]);
  for (auto& a : sino.angles) a = binary::read_f64(is);
  return sino;
}

void write_pgm(const std::filesystem::path& path, const Grid& image) {
  if (image.rank() != 2) throw std::invalid_argument("write_pgm: image must be 2-D");
  auto os = open_out(path);
  const std::string header =
      "P5\n" + std::to_string(image.extent(1)) + " " + std::to_string(image.extent(0)) + "\n255\n";
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double v : image.values()) {
    const double clamped = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

}  // namespace gloredi
