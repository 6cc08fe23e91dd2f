#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gloredi/tensor.hpp"
#include "gloredi/tomo.hpp"

namespace gloredi {

struct SampleTriplet {
  Grid full;           // I_F, ground truth phantom
  Grid teacher_input;  // I_T, FBP from n_sparse * multiplier views
  Grid student_input;  // I_S, FBP from n_sparse views
  std::size_t id = 0;
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  std::size_t count = 64;
  ScanGeometry geometry;
  std::size_t n_sparse = 18;
  std::size_t teacher_multiplier = 2;
  double photons = 1e6;
  /// Linear attenuation per pixel length of unit image intensity; line
  /// integrals are scaled by it before noise injection and back afterwards.
  double attenuation = 0.2;
  std::uint64_t seed = 0;
  FilterKind filter = FilterKind::kRamLak;

  /// Throws std::invalid_argument when n_sparse * multiplier does not divide the full view count.
  void validate() const;
};

/// Stream seed for sample `id`; independent of how samples are scheduled.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Builds one triplet: phantom -> radon -> Poisson noise -> subsample -> fbp.
SampleTriplet make_sample(const DatasetConfig& cfg, std::size_t id);

std::vector<SampleTriplet> build_dataset(const DatasetConfig& cfg);

/// Writes <root>/<id>_{full,teacher,student}.gdi and manifest.txt.
void write_dataset(const std::filesystem::path& root, const DatasetConfig& cfg,
                   const std::vector<SampleTriplet>& samples);

/// Reads a dataset directory written by write_dataset (manifest order).
std::vector<SampleTriplet> read_dataset(const std::filesystem::path& root);

std::string sample_stem(std::size_t id);

}  // namespace gloredi
