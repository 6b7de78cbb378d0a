#include "dropforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dropforge/error.hpp"

namespace dropforge {

namespace {

void check_dims(int height, int width, int channels) {
  if (height <= 0 || width <= 0)
    fail(ErrorKind::kInvalidDimension, "image dimensions must be positive");
  if (channels != 1 && channels != 3)
    fail(ErrorKind::kInvalidDimension,
         "unsupported channel count " + std::to_string(channels));
}

}  // namespace

Image::Image(int height, int width, int channels, std::uint8_t fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<std::uint8_t> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels)
    fail(ErrorKind::kShape, "pixel buffer length does not match dimensions");
}

Tensor3 to_tensor(const Image& img) {
  Tensor3 t(img.channels(), img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        t.at(c, y, x) = static_cast<float>(img.at(y, x, c)) / 255.0f;
  return t;
}

Image from_tensor(const Tensor3& t) {
  Image img(t.height, t.width, t.channels);
  for (int c = 0; c < t.channels; ++c)
    for (int y = 0; y < t.height; ++y)
      for (int x = 0; x < t.width; ++x) {
        const float v = std::round(t.at(c, y, x) * 255.0f);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
      }
  return img;
}

}  // namespace dropforge
