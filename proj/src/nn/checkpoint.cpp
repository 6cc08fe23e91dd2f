#include "gloredi/nn/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "gloredi/io.hpp"

namespace gloredi::nn {
namespace {

constexpr std::uint32_t kMaxName = 4096;

}  // namespace

void Checkpoint::add(const std::string& name, Grid value) {
  if (name.empty() || name.size() > kMaxName) throw std::invalid_argument("checkpoint: invalid entry name");
  if (contains(name)) throw std::invalid_argument("checkpoint: duplicate entry " + name);
  entries_.push_back({name, std::move(value)});
}

void Checkpoint::add_module(Module& m, const std::string& prefix) {
  for (const auto& t : state(m)) add(prefix + t.name, *t.grid);
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

const Grid& Checkpoint::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw FormatError("checkpoint: missing entry " + name);
}

double Checkpoint::scalar(const std::string& name) const {
  const Grid& g = get(name);
  if (g.size() != 1) throw FormatError("checkpoint: entry " + name + " is not a scalar");
  return g[0];
}

void Checkpoint::load_module(Module& m, const std::string& prefix) const {
  std::set<std::string> owned;
  for (const auto& t : state(m)) {
    const std::string key = prefix + t.name;
    const Grid& src = get(key);
    if (src.shape() != t.grid->shape()) {
      throw FormatError("checkpoint: shape mismatch for " + key + ": file " + shape_string(src.shape()) +
                        ", model " + shape_string(t.grid->shape()));
    }
    *t.grid = src;
    owned.insert(key);
  }
  const std::string ns = prefix + m.name() + ".";
  for (const auto& e : entries_) {
    if (e.name.rfind(ns, 0) == 0 && owned.count(e.name) == 0) {
      throw FormatError("checkpoint: unexpected entry " + e.name + " for module " + m.name());
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  binary::write_magic(os, "GDC1");
  binary::write_u32(os, static_cast<std::uint32_t>(ckpt.entries().size()));
  for (const auto& e : ckpt.entries()) {
    binary::write_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    binary::write_shape(os, e.value.shape());
    binary::write_payload_f32(os, e.value);
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  binary::expect_magic(is, "GDC1", path.string());
  Checkpoint ckpt;
  const std::uint32_t count = binary::read_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = binary::read_u32(is);
    if (len == 0 || len > kMaxName) throw FormatError(path.string() + ": invalid entry name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError(path.string() + ": truncated entry name");
    Shape shape = binary::read_shape(is);
    if (ckpt.contains(name)) throw FormatError(path.string() + ": duplicate entry " + name);
    ckpt.add(name, binary::read_payload_f32(is, std::move(shape)));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes");
  return ckpt;
}

}  // namespace gloredi::nn
