#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dropforge/attack.hpp"
#include "dropforge/image.hpp"
#include "dropforge/quant.hpp"

namespace dropforge {

inline constexpr std::size_t kStderrBatch = 100;
inline constexpr double kPsnrCap = 99.0;

struct Outcome {
  int predicted = -1;
  int label = -1;
  AttackMode mode = AttackMode::kUntargeted;
  int target = -1;

  bool success() const noexcept {
    return mode == AttackMode::kUntargeted ? predicted != label : predicted == target;
  }
};

struct Rate {
  double percent = 0.0;    // successes / total * 100
  double std_error = 0.0;  // population std of batch means / sqrt(batches)
  std::size_t successes = 0;
  std::size_t total = 0;
};

Rate success_rate(std::span<const Outcome> outcomes);
// Same aggregation over raw flags; throws kDomain when empty.
Rate rate_of(std::span<const bool> flags, std::size_t batch = kStderrBatch);

// 10 log10(255^2 / MSE); identical images give kPsnrCap.
double psnr(const Image& a, const Image& b);

struct DroppedInfo {
  int blocks_y = 0;
  int blocks_x = 0;
  // sum over channels and coefficients of |C - Q(C, q)|, row-major blocks
  std::vector<double> per_block;
  double total = 0.0;
  double high_fraction = 0.0;
  double low_fraction = 0.0;
  Image heatmap;  // grayscale, one 8x8 tile per block, min-max normalised
};

DroppedInfo dropped_info_map(const Image& x, const QTable& q, const QuantBounds& bounds = {});

double median(std::vector<double> values);

}  // namespace dropforge
