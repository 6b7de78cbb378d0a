#include "dropforge/freq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dropforge/error.hpp"

namespace dropforge {

namespace {

// basis[u][k] = sqrt(2/N) * C(u) * cos((2k+1) u pi / 2N), C(0) = 1/sqrt(2).
struct DctBasis {
  std::array<std::array<double, kBlockSize>, kBlockSize> m{};

  DctBasis() {
    for (int u = 0; u < kBlockSize; ++u) {
      const double cu = u == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
      for (int k = 0; k < kBlockSize; ++k)
        m[u][k] = std::sqrt(2.0 / kBlockSize) * cu *
                  std::cos((2 * k + 1) * u * std::numbers::pi / (2.0 * kBlockSize));
    }
  }
};

const DctBasis& basis() {
  static const DctBasis b;
  return b;
}

constexpr std::array<int, kBlockArea> make_zigzag() {
  std::array<int, kBlockArea> pos{};
  int u = 0, v = 0;
  for (int i = 0; i < kBlockArea; ++i) {
    pos[u * kBlockSize + v] = i;
    if ((u + v) % 2 == 0) {  // moving up-right
      if (v == kBlockSize - 1) ++u;
      else if (u == 0) ++v;
      else { --u; ++v; }
    } else {  // moving down-left
      if (u == kBlockSize - 1) ++v;
      else if (v == 0) ++u;
      else { ++u; --v; }
    }
  }
  return pos;
}

constexpr std::array<int, kBlockArea> kZigzag = make_zigzag();

void check_block_dims(int height, int width) {
  if (height % kBlockSize != 0 || width % kBlockSize != 0)
    fail(ErrorKind::kInvalidDimension, "image " + std::to_string(height) + "x" +
                                           std::to_string(width) +
                                           " is not a multiple of 8 per side");
}

}  // namespace

BlockGrid::BlockGrid(int channels, int blocks_y, int blocks_x)
    : channels_(channels), blocks_y_(blocks_y), blocks_x_(blocks_x),
      coeffs_(static_cast<std::size_t>(channels) * blocks_y * blocks_x * kBlockArea, 0.0) {}

// Separable: rows then columns.
void dct8x8(std::span<const double, kBlockArea> in, std::span<double, kBlockArea> out) {
  const auto& m = basis().m;
  std::array<double, kBlockArea> tmp{};
  for (int k = 0; k < kBlockSize; ++k)
    for (int v = 0; v < kBlockSize; ++v) {
      double s = 0.0;
      for (int j = 0; j < kBlockSize; ++j) s += m[v][j] * in[k * kBlockSize + j];
      tmp[k * kBlockSize + v] = s;
    }
  for (int u = 0; u < kBlockSize; ++u)
    for (int v = 0; v < kBlockSize; ++v) {
      double s = 0.0;
      for (int k = 0; k < kBlockSize; ++k) s += m[u][k] * tmp[k * kBlockSize + v];
      out[u * kBlockSize + v] = s;
    }
}

void idct8x8(std::span<const double, kBlockArea> in, std::span<double, kBlockArea> out) {
  const auto& m = basis().m;
  std::array<double, kBlockArea> tmp{};
  for (int k = 0; k < kBlockSize; ++k)
    for (int v = 0; v < kBlockSize; ++v) {
      double s = 0.0;
      for (int u = 0; u < kBlockSize; ++u) s += m[u][k] * in[u * kBlockSize + v];
      tmp[k * kBlockSize + v] = s;
    }
  for (int k = 0; k < kBlockSize; ++k)
    for (int j = 0; j < kBlockSize; ++j) {
      double s = 0.0;
      for (int v = 0; v < kBlockSize; ++v) s += m[v][j] * tmp[k * kBlockSize + v];
      out[k * kBlockSize + j] = s;
    }
}

BlockGrid split_blocks(const Image& img) {
  check_block_dims(img.height(), img.width());
  BlockGrid grid(img.channels(), img.height() / kBlockSize, img.width() / kBlockSize);
  for (int c = 0; c < img.channels(); ++c)
    for (int by = 0; by < grid.blocks_y(); ++by)
      for (int bx = 0; bx < grid.blocks_x(); ++bx) {
        auto blk = grid.block(c, by, bx);
        for (int k = 0; k < kBlockSize; ++k)
          for (int m = 0; m < kBlockSize; ++m)
            blk[k * kBlockSize + m] =
                static_cast<double>(img.at(by * kBlockSize + k, bx * kBlockSize + m, c)) - 128.0;
      }
  return grid;
}

BlockGrid dct2(const BlockGrid& grid) {
  BlockGrid out(grid.channels(), grid.blocks_y(), grid.blocks_x());
  for (std::size_t b = 0; b < grid.block_count(); ++b) dct8x8(grid.block(b), out.block(b));
  return out;
}

BlockGrid idct2(const BlockGrid& grid) {
  BlockGrid out(grid.channels(), grid.blocks_y(), grid.blocks_x());
  for (std::size_t b = 0; b < grid.block_count(); ++b) idct8x8(grid.block(b), out.block(b));
  return out;
}

Image merge_blocks(const BlockGrid& grid) {
  Image img(grid.height(), grid.width(), grid.channels());
  for (int c = 0; c < grid.channels(); ++c)
    for (int by = 0; by < grid.blocks_y(); ++by)
      for (int bx = 0; bx < grid.blocks_x(); ++bx) {
        const auto blk = grid.block(c, by, bx);
        for (int k = 0; k < kBlockSize; ++k)
          for (int m = 0; m < kBlockSize; ++m) {
            const double v = std::round(blk[k * kBlockSize + m] + 128.0);
            img.at(by * kBlockSize + k, bx * kBlockSize + m, c) =
                static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
          }
      }
  return img;
}

int zigzag_position(int u, int v) {
  if (u < 0 || u >= kBlockSize || v < 0 || v >= kBlockSize)
    fail(ErrorKind::kDomain, "coefficient index outside 8x8 block");
  return kZigzag[u * kBlockSize + v];
}

BandMask band_mask(Band band) {
  BandMask mask;
  mask.band = band;
  int lo = 0, hi = 0;
  switch (band) {
    case Band::kLow: lo = 0; hi = kLowBandEnd; break;
    case Band::kMid: lo = kLowBandEnd; hi = kMidBandEnd; break;
    case Band::kHigh: lo = kMidBandEnd; hi = kBlockArea; break;
    case Band::kCustom: break;
  }
  for (int p = lo; p < hi; ++p) mask.positions.set(p);
  return mask;
}

BandMask custom_band(std::span<const int> zigzag_positions) {
  BandMask mask;
  for (int p : zigzag_positions) {
    if (p < 0 || p >= kBlockArea) fail(ErrorKind::kDomain, "zigzag position outside 0..63");
    mask.positions.set(p);
  }
  return mask;
}

BlockGrid apply_band_drop(BlockGrid grid, const BandMask& mask) {
  for (std::size_t b = 0; b < grid.block_count(); ++b) {
    auto blk = grid.block(b);
    for (int i = 0; i < kBlockArea; ++i)
      if (mask.positions.test(kZigzag[i])) blk[i] = 0.0;
  }
  return grid;
}

}  // namespace dropforge
