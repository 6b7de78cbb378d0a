#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <span>
#include <vector>

#include "dropforge/image.hpp"

namespace dropforge {

inline constexpr int kBlockSize = 8;
inline constexpr int kBlockArea = kBlockSize * kBlockSize;

// Per-channel grid of 8x8 blocks, coefficient layout
// [channel][block_y][block_x][u][v] with u the row (vertical) index.
class BlockGrid {
 public:
  BlockGrid() = default;
  BlockGrid(int channels, int blocks_y, int blocks_x);

  int channels() const noexcept { return channels_; }
  int blocks_y() const noexcept { return blocks_y_; }
  int blocks_x() const noexcept { return blocks_x_; }
  int height() const noexcept { return blocks_y_ * kBlockSize; }
  int width() const noexcept { return blocks_x_ * kBlockSize; }
  std::size_t block_count() const noexcept {
    return static_cast<std::size_t>(channels_) * blocks_y_ * blocks_x_;
  }

  std::span<double, kBlockArea> block(int c, int by, int bx) {
    return std::span<double, kBlockArea>(&coeffs_[offset(c, by, bx)], kBlockArea);
  }
  std::span<const double, kBlockArea> block(int c, int by, int bx) const {
    return std::span<const double, kBlockArea>(&coeffs_[offset(c, by, bx)], kBlockArea);
  }
  // Flat block index b in [0, block_count()).
  std::span<double, kBlockArea> block(std::size_t b) {
    return std::span<double, kBlockArea>(&coeffs_[b * kBlockArea], kBlockArea);
  }
  std::span<const double, kBlockArea> block(std::size_t b) const {
    return std::span<const double, kBlockArea>(&coeffs_[b * kBlockArea], kBlockArea);
  }

  std::span<double> coeffs() noexcept { return coeffs_; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }

  bool same_shape(const BlockGrid& o) const noexcept {
    return channels_ == o.channels_ && blocks_y_ == o.blocks_y_ && blocks_x_ == o.blocks_x_;
  }

 private:
  std::size_t offset(int c, int by, int bx) const noexcept {
    return ((static_cast<std::size_t>(c) * blocks_y_ + by) * blocks_x_ + bx) * kBlockArea;
  }

  int channels_ = 0;
  int blocks_y_ = 0;
  int blocks_x_ = 0;
  std::vector<double> coeffs_;
};

// Orthonormal 8x8 DCT-II and its inverse (the transpose).
void dct8x8(std::span<const double, kBlockArea> in, std::span<double, kBlockArea> out);
void idct8x8(std::span<const double, kBlockArea> in, std::span<double, kBlockArea> out);

// pixel - 128 per channel; throws kInvalidDimension unless dims are multiples of 8.
BlockGrid split_blocks(const Image& img);
BlockGrid dct2(const BlockGrid& grid);
BlockGrid idct2(const BlockGrid& grid);
// +128, round to nearest, clamp to [0, 255].
Image merge_blocks(const BlockGrid& grid);

// Standard JPEG zigzag: position of coefficient (u, v) in 0..63.
int zigzag_position(int u, int v);

enum class Band { kLow, kMid, kHigh, kCustom };

struct BandMask {
  Band band = Band::kCustom;
  std::bitset<kBlockArea> positions;  // indexed by zigzag position

  bool contains(int u, int v) const { return positions.test(zigzag_position(u, v)); }
};

// low = zigzag 0..20, mid = 21..41, high = 42..63.
inline constexpr int kLowBandEnd = 21;
inline constexpr int kMidBandEnd = 42;

BandMask band_mask(Band band);
BandMask custom_band(std::span<const int> zigzag_positions);
BlockGrid apply_band_drop(BlockGrid grid, const BandMask& mask);

}  // namespace dropforge
