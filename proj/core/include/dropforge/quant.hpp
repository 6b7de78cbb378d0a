#pragma once

#include <vector>

#include "dropforge/freq.hpp"

namespace dropforge {

// Valid range of a quantized coefficient. The default is wider than anything
// an orthonormal 8x8 DCT of centred 8-bit data can reach (|c| <= 1024).
struct QuantBounds {
  double coeff_min = -2048.0;
  double coeff_max = 2048.0;
};

// round(c / step) * step with halves rounded up, then truncated to bounds.
double quantize_staircase(double c, int step, const QuantBounds& bounds = {});

// tanh steepness k = ln(2/alpha - 1).
double steepness(double alpha);

// Soft step over each unit cell of t:
//   phi(t) = 1/2 * (1 + tanh(k * (frac(t) - 1/2)) / (1 - alpha))
// phi = 0 at the cell start, 1/2 at the midpoint, -> 1 at the cell end.
double phi(double t, double alpha);
double phi_derivative(double t, double alpha);

// (phi(c/q) + floor(c/q)) * q, truncated to bounds.
double quantize_diff(double c, int q, double alpha, const QuantBounds& bounds = {});

struct QuantGrad {
  double d_coeff = 0.0;
  double d_step = 0.0;
};

// True when c/q is an integer, i.e. on the boundary between two cells where
// the floor term jumps.
bool at_cell_edge(double c, int q);

// Partial derivatives of quantize_diff with floor terms held constant. The
// soft quantizer and both partials are continuous across cell edges, so at an
// edge the value of the cell that starts there is returned.
QuantGrad d_quantize_diff(double c, int q, double alpha, const QuantBounds& bounds = {});

enum class Quantizer {
  kHard,  // staircase forward, zero gradient
  kShin,  // cubic rounding surrogate r(t) = n + (n - t)^3, n = floor(t + 1/2)
  kOurs,  // quantize_diff
};

double quantize_variant(double c, int q, Quantizer variant, double alpha,
                        const QuantBounds& bounds = {});
QuantGrad d_quantize_variant(double c, int q, Quantizer variant, double alpha,
                             const QuantBounds& bounds = {});

struct AlphaSchedule {
  double alpha_start = 0.5;
  double alpha_end = 0.01;
  int total_steps = 50;
};

// Linear from alpha_start (step 0) to alpha_end (step total_steps - 1).
double alpha_at(const AlphaSchedule& schedule, int step);

// Integer quantization steps over a BlockGrid. A shared table holds a single
// 8x8 block that every channel and block position reads.
class QTable {
 public:
  QTable() = default;
  static QTable initial(int channels, int blocks_y, int blocks_x, int eps);
  static QTable initial_shared(int eps);
  static QTable uniform(int channels, int blocks_y, int blocks_x, int value, int eps);

  int eps() const noexcept { return eps_; }
  bool shared() const noexcept { return shared_; }
  int channels() const noexcept { return channels_; }
  int blocks_y() const noexcept { return blocks_y_; }
  int blocks_x() const noexcept { return blocks_x_; }

  // Entry for coefficient i (row-major u*8+v) of block (c, by, bx).
  int at(int c, int by, int bx, int i) const { return entries_[index(c, by, bx, i)]; }
  int& at(int c, int by, int bx, int i) { return entries_[index(c, by, bx, i)]; }
  // Entry for flat BlockGrid block b and coefficient i.
  int at_block(std::size_t b, int i) const {
    return shared_ ? entries_[i] : entries_[b * kBlockArea + i];
  }

  std::vector<int>& entries() noexcept { return entries_; }
  const std::vector<int>& entries() const noexcept { return entries_; }

  // Every entry is an integer in [1, eps].
  bool within_bounds() const noexcept;
  bool compatible(const BlockGrid& grid) const noexcept;

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t index(int c, int by, int bx, int i) const noexcept {
    if (shared_) return static_cast<std::size_t>(i);
    return ((static_cast<std::size_t>(c) * blocks_y_ + by) * blocks_x_ + bx) * kBlockArea + i;
  }

  int channels_ = 0;
  int blocks_y_ = 0;
  int blocks_x_ = 0;
  int eps_ = 1;
  bool shared_ = false;
  std::vector<int> entries_;
};

// Elementwise staircase quantization of a frequency-domain grid.
BlockGrid quantize_grid(const BlockGrid& coeffs, const QTable& q,
                        const QuantBounds& bounds = {});

}  // namespace dropforge
