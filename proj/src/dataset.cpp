#include "gloredi/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gloredi/io.hpp"
#include "gloredi/phantom.hpp"

namespace gloredi {

void DatasetConfig::validate() const {
  geometry.validate();
  if (n_sparse == 0 || teacher_multiplier == 0) {
    throw std::invalid_argument("dataset: view count and teacher multiplier must be positive");
  }
  const std::size_t teacher_views = n_sparse * teacher_multiplier;
  if (geometry.n_full_views % n_sparse != 0 || geometry.n_full_views % teacher_views != 0) {
    throw std::invalid_argument("dataset: " + std::to_string(n_sparse) + " x " + std::to_string(teacher_multiplier) +
                                " views must divide " + std::to_string(geometry.n_full_views) + " full views");
  }
  if (!(photons > 0.0)) throw std::invalid_argument("dataset: photon count must be positive");
  if (!(attenuation > 0.0)) throw std::invalid_argument("dataset: attenuation must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SampleTriplet make_sample(const DatasetConfig& cfg, std::size_t id) {
  SampleTriplet sample;
  sample.id = id;
  sample.seed = derive_seed(cfg.seed, id);
  std::mt19937_64 rng(sample.seed);
  sample.full = random_phantom(cfg.geometry.image_size, rng);
  // Noise goes onto the full sinogram once so both inputs share realizations on common views.
  Sinogram noisy = radon(sample.full, cfg.geometry);
  noisy.values *= cfg.attenuation;
  noisy = add_poisson_noise(noisy, cfg.photons, rng);
  noisy.values *= 1.0 / cfg.attenuation;
  sample.student_input = fbp(subsample_views(noisy, cfg.n_sparse), cfg.geometry, cfg.filter);
  if (cfg.teacher_multiplier == 1) {
    sample.teacher_input = sample.student_input;
  } else {
    sample.teacher_input =
        fbp(subsample_views(noisy, cfg.n_sparse * cfg.teacher_multiplier), cfg.geometry, cfg.filter);
  }
  return sample;
}

std::vector<SampleTriplet> build_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  std::vector<SampleTriplet> samples;
  samples.reserve(cfg.count);
  for (std::size_t id = 0; id < cfg.count; ++id) samples.push_back(make_sample(cfg, id));
  return samples;
}

std::string sample_stem(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu", id);
  return buf;
}

void write_dataset(const std::filesystem::path& root, const DatasetConfig& cfg,
                   const std::vector<SampleTriplet>& samples) {
  std::filesystem::create_directories(root);
  std::ofstream manifest(root / "manifest.txt", std::ios::trunc);
  if (!manifest) throw FormatError("cannot write manifest in " + root.string());
  manifest << "# gloredi dataset: image_size=" << cfg.geometry.image_size
           << " detectors=" << cfg.geometry.n_detectors << " full_views=" << cfg.geometry.n_full_views
           << " photons=" << cfg.photons << " attenuation=" << cfg.attenuation << "\n";
  manifest << "# id seed n_sparse multiplier\n";
  for (const auto& s : samples) {
    const auto stem = sample_stem(s.id);
    write_image(root / (stem + "_full.gdi"), s.full);
    write_image(root / (stem + "_teacher.gdi"), s.teacher_input);
    write_image(root / (stem + "_student.gdi"), s.student_input);
    manifest << s.id << ' ' << s.seed << ' ' << cfg.n_sparse << ' ' << cfg.teacher_multiplier << "\n";
  }
  if (!manifest) throw FormatError("failed writing manifest in " + root.string());
}

std::vector<SampleTriplet> read_dataset(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw FormatError("dataset directory not found: " + root.string());
  std::ifstream manifest(root / "manifest.txt");
  if (!manifest) throw FormatError("missing manifest.txt in " + root.string());
  std::vector<SampleTriplet> samples;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    SampleTriplet s;
    std::size_t n_sparse = 0, multiplier = 0;
    if (!(fields >> s.id >> s.seed >> n_sparse >> multiplier)) {
      throw FormatError("malformed manifest line: " + line);
    }
    const auto stem = sample_stem(s.id);
    s.full = read_image(root / (stem + "_full.gdi"));
    s.teacher_input = read_image(root / (stem + "_teacher.gdi"));
    s.student_input = read_image(root / (stem + "_student.gdi"));
    if (s.full.shape() != s.teacher_input.shape() || s.full.shape() != s.student_input.shape() ||
        s.full.rank() != 2) {
      throw FormatError("inconsistent image shapes for sample " + stem);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace gloredi
