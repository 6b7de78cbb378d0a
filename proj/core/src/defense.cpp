#include "dropforge/defense.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <vector>

#include "dropforge/error.hpp"
#include "dropforge/rng.hpp"

namespace dropforge {

const std::array<int, kBlockArea> kAnnexKLuminance{
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

const std::array<int, kBlockArea> kAnnexKChrominance{
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99};

JpegTables jpeg_tables(int quality) {
  if (quality < 1 || quality > 100) fail(ErrorKind::kDomain, "JPEG quality must lie in 1..100");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  JpegTables t;
  t.quality = quality;
  for (int i = 0; i < kBlockArea; ++i) {
    t.luminance[i] = std::clamp((kAnnexKLuminance[i] * scale + 50) / 100, 1, 255);
    t.chrominance[i] = std::clamp((kAnnexKChrominance[i] * scale + 50) / 100, 1, 255);
  }
  return t;
}

namespace {

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); }

}  // namespace

Image bit_depth_reduce(const Image& img, int bits) {
  if (bits < 1 || bits > 8) fail(ErrorKind::kDomain, "bits must lie in 1..8");
  const double levels = static_cast<double>((1 << bits) - 1);
  Image out = img;
  for (auto& v : out.data()) {
    const double level = std::round(v * levels / 255.0);
    v = to_u8(level * 255.0 / levels);
  }
  return out;
}

Image median_filter(const Image& img, int window) {
  if (window < 3 || window % 2 == 0) fail(ErrorKind::kDomain, "median window must be odd and >= 3");
  const int r = window / 2;
  Image out(img.height(), img.width(), img.channels());
  std::vector<std::uint8_t> vals(static_cast<std::size_t>(window) * window);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        std::size_t n = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = std::clamp(y + dy, 0, img.height() - 1);
            const int xx = std::clamp(x + dx, 0, img.width() - 1);
            vals[n++] = img.at(yy, xx, c);
          }
        std::nth_element(vals.begin(), vals.begin() + n / 2, vals.end());
        out.at(y, x, c) = vals[n / 2];
      }
  return out;
}

Image jpeg_roundtrip(const Image& img, int quality) {
  const JpegTables tables = jpeg_tables(quality);
  if (img.height() % kBlockSize != 0 || img.width() % kBlockSize != 0)
    fail(ErrorKind::kInvalidDimension, "JPEG round trip needs dimensions that are multiples of 8");
  const int planes = img.channels();
  const int bh = img.height() / kBlockSize, bw = img.width() / kBlockSize;

  // Colour transform kept in floating point; centred on 128 for the DCT.
  BlockGrid grid(planes, bh, bw);
  for (int by = 0; by < bh; ++by)
    for (int bx = 0; bx < bw; ++bx)
      for (int k = 0; k < kBlockSize; ++k)
        for (int m = 0; m < kBlockSize; ++m) {
          const int y = by * kBlockSize + k, x = bx * kBlockSize + m;
          const int i = k * kBlockSize + m;
          if (planes == 1) {
            grid.block(0, by, bx)[i] = img.at(y, x, 0) - 128.0;
            continue;
          }
          const double r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
          grid.block(0, by, bx)[i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
          grid.block(1, by, bx)[i] = -0.168736 * r - 0.331264 * g + 0.5 * b;
          grid.block(2, by, bx)[i] = 0.5 * r - 0.418688 * g - 0.081312 * b;
        }

  BlockGrid coeffs = dct2(grid);
  for (int c = 0; c < planes; ++c) {
    const auto& table = c == 0 ? tables.luminance : tables.chrominance;
    for (int by = 0; by < bh; ++by)
      for (int bx = 0; bx < bw; ++bx) {
        auto blk = coeffs.block(c, by, bx);
        for (int i = 0; i < kBlockArea; ++i) blk[i] = std::round(blk[i] / table[i]) * table[i];
      }
  }
  const BlockGrid pix = idct2(coeffs);

  Image out(img.height(), img.width(), img.channels());
  for (int by = 0; by < bh; ++by)
    for (int bx = 0; bx < bw; ++bx)
      for (int k = 0; k < kBlockSize; ++k)
        for (int m = 0; m < kBlockSize; ++m) {
          const int y = by * kBlockSize + k, x = bx * kBlockSize + m;
          const int i = k * kBlockSize + m;
          const double luma = pix.block(0, by, bx)[i] + 128.0;
          if (planes == 1) {
            out.at(y, x, 0) = to_u8(luma);
            continue;
          }
          const double cb = pix.block(1, by, bx)[i], cr = pix.block(2, by, bx)[i];
          out.at(y, x, 0) = to_u8(luma + 1.402 * cr);
          out.at(y, x, 1) = to_u8(luma - 0.344136 * cb - 0.714136 * cr);
          out.at(y, x, 2) = to_u8(luma + 1.772 * cb);
        }
  return out;
}

Image pixel_deflect(const Image& img, const DeflectConfig& cfg) {
  if (cfg.deflections < 0 || cfg.radius < 1)
    fail(ErrorKind::kDomain, "deflections must be >= 0 and radius >= 1");
  Image out = img;
  if (img.height() * img.width() < 2) return out;
  RngStream rng(cfg.seed, 0xdef1);
  for (int n = 0; n < cfg.deflections; ++n) {
    const int y = static_cast<int>(rng.uniform_index(img.height()));
    const int x = static_cast<int>(rng.uniform_index(img.width()));
    int ny, nx;
    do {
      ny = y + static_cast<int>(rng.uniform_int(-cfg.radius, cfg.radius));
      nx = x + static_cast<int>(rng.uniform_int(-cfg.radius, cfg.radius));
    } while (ny < 0 || nx < 0 || ny >= img.height() || nx >= img.width() || (ny == y && nx == x));
    for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = out.at(ny, nx, c);
  }
  return out;
}

Image drop_band(const Image& img, Band band) {
  return merge_blocks(idct2(apply_band_drop(dct2(split_blocks(img)), band_mask(band))));
}

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorKind::kUsage, "invalid " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

Defense Defense::parse(std::string_view text) {
  Defense d;
  if (text == "none") return d;
  if (text == "pd") {
    d.kind = DefenseKind::kPixelDeflect;
    return d;
  }
  if (text.starts_with("mf")) {
    d.kind = DefenseKind::kMedian;
    d.param = parse_int(text.substr(2), "median window");
    if (d.param < 3 || d.param % 2 == 0) fail(ErrorKind::kUsage, "median window must be odd and >= 3");
    return d;
  }
  if (text.starts_with("bit:")) {
    d.kind = DefenseKind::kBitDepth;
    d.param = parse_int(text.substr(4), "bit depth");
    if (d.param < 1 || d.param > 8) fail(ErrorKind::kUsage, "bit depth must lie in 1..8");
    return d;
  }
  if (text.starts_with("jpeg:")) {
    d.kind = DefenseKind::kJpeg;
    d.param = parse_int(text.substr(5), "JPEG quality");
    if (d.param < 1 || d.param > 100) fail(ErrorKind::kUsage, "JPEG quality must lie in 1..100");
    return d;
  }
  if (text.starts_with("band:")) {
    d.kind = DefenseKind::kBandDrop;
    const auto b = text.substr(5);
    if (b == "low") d.band = Band::kLow;
    else if (b == "mid") d.band = Band::kMid;
    else if (b == "high") d.band = Band::kHigh;
    else fail(ErrorKind::kUsage, "unknown band '" + std::string(b) + "'");
    return d;
  }
  fail(ErrorKind::kUsage, "unknown defense '" + std::string(text) + "'");
}

std::string Defense::name() const {
  switch (kind) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kMedian: return "mf" + std::to_string(param);
    case DefenseKind::kBitDepth: return "bit:" + std::to_string(param);
    case DefenseKind::kJpeg: return "jpeg:" + std::to_string(param);
    case DefenseKind::kPixelDeflect: return "pd";
    case DefenseKind::kBandDrop:
      return std::string("band:") + (band == Band::kLow ? "low" : band == Band::kMid ? "mid" : "high");
  }
  return "none";
}

Image apply_defense(const Image& img, const Defense& defense, std::uint64_t seed) {
  switch (defense.kind) {
    case DefenseKind::kNone: return img;
    case DefenseKind::kMedian: return median_filter(img, defense.param);
    case DefenseKind::kBitDepth: return bit_depth_reduce(img, defense.param);
    case DefenseKind::kJpeg: return jpeg_roundtrip(img, defense.param);
    case DefenseKind::kPixelDeflect: return pixel_deflect(img, DeflectConfig{50, 3, seed});
    case DefenseKind::kBandDrop: return drop_band(img, defense.band);
  }
  return img;
}

}  // namespace dropforge
