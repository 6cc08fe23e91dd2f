#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gloredi/nn/layers.hpp"

namespace gloredi::nn {

/// Ordered name -> tensor table persisted as a GDC1 file:
///   "GDC1", u32 entry count, then per entry
///   u32 name length, name bytes, u32 rank, u32 extents, float32 payload.
/// Scalars (config, iteration counters) are stored as 1-element entries.
class Checkpoint {
 public:
  struct Entry {
    std::string name;
    Grid value;
  };

  /// Throws std::invalid_argument on a duplicate name.
  void add(const std::string& name, Grid value);
  void add_scalar(const std::string& name, double value) { add(name, Grid({1}, value)); }
  /// Adds every parameter and buffer of `m`, each name prefixed by `prefix`.
  void add_module(Module& m, const std::string& prefix = "");

  bool contains(const std::string& name) const;
  /// Throws FormatError when the entry is missing.
  const Grid& get(const std::string& name) const;
  double scalar(const std::string& name) const;

  /// Overwrites the state of `m` from entries named prefix + tensor name.
  /// Throws FormatError on a missing tensor, a shape mismatch, or an entry
  /// under the module's namespace that the module does not own.
  void load_module(Module& m, const std::string& prefix = "") const;

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gloredi::nn
