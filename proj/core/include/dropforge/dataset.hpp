#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "dropforge/image.hpp"

namespace dropforge {

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int class_count = 0;
  std::uint64_t split_seed = 0;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
  // Throws kLabel / kShape when the invariants do not hold.
  void validate() const;
};

// Procedural shapes, one geometry and colour family per class, balanced.
Dataset synth_dataset(int class_count, int per_class, int side,
                      std::uint64_t seed);

// Records of 1 label byte followed by side*side*channels planar pixel bytes.
Dataset load_raw_dataset(const std::filesystem::path& path, int side,
                         int channels, int class_count = 256);
Dataset parse_raw_dataset(std::span<const std::uint8_t> bytes, int side,
                          int channels, int class_count = 256);

// Deterministic shuffled split; the first element holds
// round(size * (1 - holdout_fraction)) items.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data,
                                          double holdout_fraction,
                                          std::uint64_t seed);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace dropforge
