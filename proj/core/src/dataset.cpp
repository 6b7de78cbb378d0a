#include "dropforge/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "dropforge/error.hpp"
#include "dropforge/png.hpp"
#include "dropforge/rng.hpp"

namespace dropforge {

void Dataset::validate() const {
  if (labels.size() != images.size())
    fail(ErrorKind::kShape, "label count does not match image count");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count)
      fail(ErrorKind::kLabel, "label " + std::to_string(labels[i]) +
                                  " outside [0, " + std::to_string(class_count) + ")");
    if (!images[i].same_shape(images.front()))
      fail(ErrorKind::kShape, "dataset images differ in shape");
  }
}

namespace {

constexpr int kGeometryCount = 10;
constexpr int kSupersample = 3;

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double hue_deg, double sat, double val) {
  hue_deg = std::fmod(std::fmod(hue_deg, 360.0) + 360.0, 360.0);
  const double c = val * sat;
  const double hp = hue_deg / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  Rgb rgb{0, 0, 0};
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  const double m = val - c;
  return {255.0 * (rgb.r + m), 255.0 * (rgb.g + m), 255.0 * (rgb.b + m)};
}

// Shape membership in normalized coordinates (object centred at origin,
// nominal radius 1).
bool inside(int geometry, double u, double v) {
  const double r = std::hypot(u, v);
  switch (geometry) {
    case 0:  // disk
      return r <= 1.0;
    case 1:  // square
      return std::abs(u) <= 0.85 && std::abs(v) <= 0.85;
    case 2:  // triangle, apex up
      return v >= -0.8 && v <= 0.9 && std::abs(u) <= (0.9 - v) * 0.6;
    case 3:  // ring
      return r <= 1.0 && r >= 0.6;
    case 4:  // plus
      return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case 5:  // three horizontal bars
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0 &&
             std::fmod(std::abs(v + 1.0), 0.8) < 0.4;
    case 6:  // diamond
      return std::abs(u) + std::abs(v) <= 1.0;
    case 7:  // X
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0 &&
             (std::abs(u - v) <= 0.35 || std::abs(u + v) <= 0.35);
    case 8:  // square frame
      return std::abs(u) <= 0.95 && std::abs(v) <= 0.95 &&
             (std::abs(u) >= 0.55 || std::abs(v) >= 0.55);
    default:  // two dots
      return std::hypot(u - 0.5, v) <= 0.42 || std::hypot(u + 0.5, v) <= 0.42;
  }
}

Image render(int cls, int class_count, int side, RngStream& rng) {
  const int geometry = cls % kGeometryCount;
  const double hue_center = 360.0 * cls / class_count;
  const Rgb fg = hsv_to_rgb(hue_center + rng.uniform(-24.0, 24.0),
                            rng.uniform(0.35, 0.9), rng.uniform(0.45, 0.9));
  const Rgb bg = hsv_to_rgb(rng.uniform(0.0, 360.0), rng.uniform(0.0, 0.5),
                            rng.uniform(0.25, 0.8));
  const double opacity = rng.uniform(0.6, 0.95);
  const double cx = side * (0.5 + rng.uniform(-0.15, 0.15));
  const double cy = side * (0.5 + rng.uniform(-0.15, 0.15));
  const double scale = side * rng.uniform(0.22, 0.36);
  const double angle = rng.uniform(-0.5, 0.5);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double grad_x = rng.uniform(-1.0, 1.0) * 40.0 / side;
  const double grad_y = rng.uniform(-1.0, 1.0) * 40.0 / side;
  // Background texture: an oriented sinusoid plus pixel noise.
  const double tex_freq = rng.uniform(0.4, 1.6);
  const double tex_dir = rng.uniform(0.0, std::numbers::pi);
  const double tex_amp = rng.uniform(6.0, 18.0);
  const double noise_sigma = rng.uniform(2.0, 6.0);

  Image img(side, side, 3);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double px = x + (sx + 0.5) / kSupersample - cx;
          const double py = y + (sy + 0.5) / kSupersample - cy;
          const double u = (ca * px + sa * py) / scale;
          const double v = (-sa * px + ca * py) / scale;
          hits += inside(geometry, u, -v) ? 1 : 0;
        }
      }
      const double cover =
          opacity * static_cast<double>(hits) / (kSupersample * kSupersample);
      const double shade = grad_x * (x - side / 2.0) + grad_y * (y - side / 2.0);
      const double tex =
          tex_amp * std::sin(tex_freq * (std::cos(tex_dir) * x + std::sin(tex_dir) * y));
      const std::array<double, 3> fgc{fg.r, fg.g, fg.b};
      const std::array<double, 3> bgc{bg.r, bg.g, bg.b};
      for (int c = 0; c < 3; ++c) {
        const double back = bgc[c] + shade + tex;
        const double value = cover * fgc[c] + (1.0 - cover) * back +
                             noise_sigma * rng.normal();
        img.at(y, x, c) =
            static_cast<std::uint8_t>(std::clamp(std::round(value), 0.0, 255.0));
      }
    }
  }
  return img;
}

}  // namespace

Dataset synth_dataset(int class_count, int per_class, int side, std::uint64_t seed) {
  if (side <= 0 || side % 8 != 0)
    fail(ErrorKind::kInvalidDimension, "side must be a positive multiple of 8");
  if (class_count < 2) fail(ErrorKind::kDomain, "class_count must be >= 2");
  if (per_class < 0) fail(ErrorKind::kDomain, "per_class must be >= 0");

  Dataset ds;
  ds.class_count = class_count;
  ds.split_seed = seed;
  ds.images.reserve(static_cast<std::size_t>(class_count) * per_class);
  // Interleave classes so prefixes of the dataset stay balanced.
  for (int i = 0; i < per_class; ++i) {
    for (int cls = 0; cls < class_count; ++cls) {
      RngStream rng(seed, static_cast<std::uint64_t>(i) * class_count + cls);
      ds.images.push_back(render(cls, class_count, side, rng));
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

Dataset parse_raw_dataset(std::span<const std::uint8_t> bytes, int side,
                          int channels, int class_count) {
  if (side <= 0 || side % 8 != 0)
    fail(ErrorKind::kInvalidDimension, "side must be a positive multiple of 8");
  if (channels != 1 && channels != 3)
    fail(ErrorKind::kInvalidDimension, "channels must be 1 or 3");
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  const std::size_t record = 1 + plane * channels;
  if (bytes.size() % record != 0)
    fail(ErrorKind::kFormat, "file size " + std::to_string(bytes.size()) +
                                 " is not a multiple of record size " +
                                 std::to_string(record));
  Dataset ds;
  ds.class_count = class_count;
  const std::size_t count = bytes.size() / record;
  for (std::size_t r = 0; r < count; ++r) {
    const auto rec = bytes.subspan(r * record, record);
    const int label = rec[0];
    if (label >= class_count)
      fail(ErrorKind::kLabel, "record " + std::to_string(r) + " has label " +
                                  std::to_string(label));
    Image img(side, side, channels);
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          img.at(y, x, c) = rec[1 + c * plane + static_cast<std::size_t>(y) * side + x];
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

Dataset load_raw_dataset(const std::filesystem::path& path, int side, int channels,
                         int class_count) {
  const auto bytes = read_bytes(path);
  return parse_raw_dataset(bytes, side, channels, class_count);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double holdout_fraction,
                                          std::uint64_t seed) {
  if (holdout_fraction < 0.0 || holdout_fraction > 1.0)
    fail(ErrorKind::kDomain, "holdout_fraction must lie in [0, 1]");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream rng(seed, 0x5e11);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  const auto keep = static_cast<std::size_t>(
      std::llround(static_cast<double>(data.size()) * (1.0 - holdout_fraction)));
  std::vector<std::size_t> first(order.begin(), order.begin() + keep);
  std::vector<std::size_t> second(order.begin() + keep, order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  auto a = subset(data, first);
  auto b = subset(data, second);
  a.split_seed = b.split_seed = seed;
  return {std::move(a), std::move(b)};
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.class_count = data.class_count;
  out.split_seed = data.split_seed;
  out.images.reserve(indices.size());
  for (auto i : indices) {
    out.images.push_back(data.images.at(i));
    out.labels.push_back(data.labels.at(i));
  }
  return out;
}

}  // namespace dropforge
