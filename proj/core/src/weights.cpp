#include <bit>
#include <cstring>
#include <string>

#include "dropforge/error.hpp"
#include "dropforge/nn.hpp"

namespace dropforge {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'W', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail(ErrorKind::kFormat, "truncated weight file");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

// magic | u16 version | u16 layer count | per layer: u8 kind [+ u32 in, u32 out]
// | f32 parameters (weights then bias, layer order), all little-endian.
std::vector<std::uint8_t> save_weights(const ConvNet& model) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u16(out, kWeightFormatVersion);
  put_u16(out, static_cast<std::uint16_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    out.push_back(static_cast<std::uint8_t>(l.kind));
    if (l.has_params()) {
      put_u32(out, static_cast<std::uint32_t>(l.in));
      put_u32(out, static_cast<std::uint32_t>(l.out));
    }
  }
  for (const auto& l : model.layers()) {
    for (float w : l.weights) put_f32(out, w);
    for (float b : l.bias) put_f32(out, b);
  }
  return out;
}

ConvNet load_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorKind::kFormat, "bad weight file magic");
  Reader r(bytes.subspan(4));
  const auto version = r.u16();
  if (version != kWeightFormatVersion)
    fail(ErrorKind::kFormat, "unsupported weight file version " + std::to_string(version));
  const int count = r.u16();
  std::vector<Layer> layers;
  for (int i = 0; i < count; ++i) {
    const auto kind = static_cast<LayerKind>(r.u8());
    switch (kind) {
      case LayerKind::kConv3x3:
      case LayerKind::kDense: {
        const auto in = r.u32(), out = r.u32();
        if (in == 0 || out == 0 || in > (1u << 24) || out > (1u << 24))
          fail(ErrorKind::kFormat, "implausible layer dimensions");
        layers.push_back(kind == LayerKind::kConv3x3 ? Layer::conv3x3(static_cast<int>(in), static_cast<int>(out))
                                                     : Layer::dense(static_cast<int>(in), static_cast<int>(out)));
        break;
      }
      case LayerKind::kRelu:
      case LayerKind::kMaxPool2:
      case LayerKind::kFlatten:
        layers.push_back(Layer{kind});
        break;
      default:
        fail(ErrorKind::kFormat, "unknown layer kind " + std::to_string(static_cast<int>(kind)));
    }
  }
  for (auto& l : layers) {
    for (auto& w : l.weights) w = r.f32();
    for (auto& b : l.bias) b = r.f32();
  }
  if (!r.done()) fail(ErrorKind::kFormat, "trailing bytes after weight data");
  return ConvNet(std::move(layers));
}

}  // namespace dropforge
