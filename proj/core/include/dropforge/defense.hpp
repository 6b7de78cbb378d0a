#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "dropforge/freq.hpp"
#include "dropforge/image.hpp"

namespace dropforge {

// ITU-T T.81 Annex K example tables, row-major.
extern const std::array<int, kBlockArea> kAnnexKLuminance;
extern const std::array<int, kBlockArea> kAnnexKChrominance;

struct JpegTables {
  int quality = 50;
  std::array<int, kBlockArea> luminance{};
  std::array<int, kBlockArea> chrominance{};
};

// IJG scaling: S = 5000/q (q < 50) else 200 - 2q; entry = clamp((base*S + 50)/100, 1, 255).
JpegTables jpeg_tables(int quality);

Image bit_depth_reduce(const Image& img, int bits);
Image median_filter(const Image& img, int window = 3);
// Lossy JPEG path only: BT.601 full-range YCbCr, 4:4:4, 8x8 DCT quantization.
Image jpeg_roundtrip(const Image& img, int quality);

struct DeflectConfig {
  int deflections = 50;
  int radius = 3;
  std::uint64_t seed = 0;
};

Image pixel_deflect(const Image& img, const DeflectConfig& cfg);
Image drop_band(const Image& img, Band band);

enum class DefenseKind { kNone, kMedian, kBitDepth, kJpeg, kPixelDeflect, kBandDrop };

// Parsed form of "none", "mf3" (or "mf<k>"), "bit:<b>", "jpeg:<q>", "pd",
// "band:<low|mid|high>".
struct Defense {
  DefenseKind kind = DefenseKind::kNone;
  int param = 0;
  Band band = Band::kHigh;

  static Defense parse(std::string_view text);
  std::string name() const;
};

// seed feeds pixel deflection only.
Image apply_defense(const Image& img, const Defense& defense, std::uint64_t seed = 0);

}  // namespace dropforge
