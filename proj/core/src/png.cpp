#include "dropforge/png.hpp"

#include <zlib.h>

#include <array>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "dropforge/error.hpp"

namespace dropforge {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature{0x89, 'P', 'N', 'G',
                                                   '\r', '\n', 0x1a, '\n'};

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32_be(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               std::span<const std::uint8_t> payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uLong crc = crc32(0L, out.data() + type_at,
                          static_cast<uInt>(4 + payload.size()));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

// Applies PNG filter `type` to one scanline. prev is the unfiltered previous
// row (zeros for the first row).
void filter_row(int type, std::span<const std::uint8_t> row,
                std::span<const std::uint8_t> prev, int bpp,
                std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    const int a = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
    const int b = prev[i];
    const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
    int pred = 0;
    switch (type) {
      case 1: pred = a; break;
      case 2: pred = b; break;
      case 3: pred = (a + b) / 2; break;
      case 4: pred = paeth(a, b, c); break;
      default: break;
    }
    out[i] = static_cast<std::uint8_t>(row[i] - pred);
  }
}

void unfilter_row(int type, std::span<std::uint8_t> row,
                  std::span<const std::uint8_t> prev, int bpp) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    const int a = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
    const int b = prev[i];
    const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
    int pred = 0;
    switch (type) {
      case 0: break;
      case 1: pred = a; break;
      case 2: pred = b; break;
      case 3: pred = (a + b) / 2; break;
      case 4: pred = paeth(a, b, c); break;
      default: fail(ErrorKind::kFormat, "unknown PNG filter type " + std::to_string(type));
    }
    row[i] = static_cast<std::uint8_t>(row[i] + pred);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  if (img.channels() != 3)
    fail(ErrorKind::kFormat, "PPM requires 3 channels");
  const std::string header = "P6 " + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + " 255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
      if (v > (1 << 24)) fail(ErrorKind::kFormat, "PPM dimension too large");
    }
    if (!any) fail(ErrorKind::kFormat, "malformed PPM header");
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    fail(ErrorKind::kFormat, "not a binary PPM (P6)");
  pos = 2;
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (maxval != 255) fail(ErrorKind::kFormat, "only maxval 255 is supported");
  ++pos;  // single whitespace byte before raster
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < pos + n) fail(ErrorKind::kFormat, "truncated PPM raster");
  return Image(h, w, 3, std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + n));
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.channels() != 1 && img.channels() != 3)
    fail(ErrorKind::kFormat, "PNG supports 1 or 3 channels");
  const int bpp = img.channels();
  const std::size_t stride = static_cast<std::size_t>(img.width()) * bpp;

  // Per-row adaptive filter choice: minimum sum of absolute signed residuals.
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * img.height());
  std::vector<std::uint8_t> zero(stride, 0), candidate(stride), best(stride);
  for (int y = 0; y < img.height(); ++y) {
    const auto row = img.data().subspan(y * stride, stride);
    const auto prev = y > 0 ? img.data().subspan((y - 1) * stride, stride)
                            : std::span<const std::uint8_t>(zero);
    long best_cost = -1;
    int best_type = 0;
    for (int type = 0; type <= 4; ++type) {
      filter_row(type, row, prev, bpp, candidate);
      long cost = 0;
      for (auto v : candidate) cost += std::abs(static_cast<int>(static_cast<std::int8_t>(v)));
      if (best_cost < 0 || cost < best_cost) {
        best_cost = cost;
        best_type = type;
        best.swap(candidate);
      }
    }
    raw.push_back(static_cast<std::uint8_t>(best_type));
    raw.insert(raw.end(), best.begin(), best.end());
  }

  uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_len);
  if (compress2(packed.data(), &packed_len, raw.data(), static_cast<uLong>(raw.size()),
                kPngCompressionLevel) != Z_OK)
    fail(ErrorKind::kFormat, "deflate failed");
  packed.resize(packed_len);

  std::vector<std::uint8_t> out(kPngSignature.begin(), kPngSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(img.width()));
  put_u32_be(ihdr, static_cast<std::uint32_t>(img.height()));
  ihdr.push_back(8);                            // bit depth
  ihdr.push_back(img.channels() == 3 ? 2 : 0);  // colour type
  ihdr.push_back(0);                            // deflate
  ihdr.push_back(0);                            // adaptive filtering
  ihdr.push_back(0);                            // no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin()))
    fail(ErrorKind::kFormat, "missing PNG signature");
  std::size_t pos = 8;
  int width = 0, height = 0, channels = 0;
  bool have_header = false, have_end = false;
  std::vector<std::uint8_t> packed;
  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = get_u32_be(bytes, pos);
    if (pos + 12 + static_cast<std::size_t>(len) > bytes.size())
      fail(ErrorKind::kFormat, "truncated PNG chunk");
    const auto type = bytes.subspan(pos + 4, 4);
    const auto payload = bytes.subspan(pos + 8, len);
    const std::uint32_t crc = get_u32_be(bytes, pos + 8 + len);
    if (crc != static_cast<std::uint32_t>(crc32(0L, type.data(), 4 + len)))
      fail(ErrorKind::kFormat, "PNG chunk CRC mismatch");
    const std::string name(type.begin(), type.end());
    if (name == "IHDR") {
      if (len != 13) fail(ErrorKind::kFormat, "bad IHDR length");
      width = static_cast<int>(get_u32_be(payload, 0));
      height = static_cast<int>(get_u32_be(payload, 4));
      const int depth = payload[8], colour = payload[9];
      if (depth != 8) fail(ErrorKind::kFormat, "only 8-bit PNGs are supported");
      if (colour == 0) channels = 1;
      else if (colour == 2) channels = 3;
      else fail(ErrorKind::kFormat, "unsupported PNG colour type");
      if (payload[10] != 0 || payload[11] != 0 || payload[12] != 0)
        fail(ErrorKind::kFormat, "unsupported PNG compression/filter/interlace");
      have_header = true;
    } else if (name == "IDAT") {
      packed.insert(packed.end(), payload.begin(), payload.end());
    } else if (name == "IEND") {
      have_end = true;
      break;
    }
    pos += 12 + len;
  }
  if (!have_header || !have_end) fail(ErrorKind::kFormat, "incomplete PNG stream");
  if (width <= 0 || height <= 0) fail(ErrorKind::kFormat, "bad PNG dimensions");

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, packed.data(), static_cast<uLong>(packed.size())) != Z_OK ||
      raw_len != raw.size())
    fail(ErrorKind::kFormat, "corrupt PNG image data");

  std::vector<std::uint8_t> pixels(stride * height);
  std::vector<std::uint8_t> zero(stride, 0);
  for (int y = 0; y < height; ++y) {
    const int type = raw[y * (stride + 1)];
    auto row = std::span<std::uint8_t>(pixels).subspan(y * stride, stride);
    std::memcpy(row.data(), raw.data() + y * (stride + 1) + 1, stride);
    const auto prev = y > 0 ? std::span<const std::uint8_t>(pixels).subspan((y - 1) * stride, stride)
                            : std::span<const std::uint8_t>(zero);
    unfilter_row(type, row, prev, channels);
  }
  return Image(height, width, channels, std::move(pixels));
}

std::vector<std::uint8_t> encode_image(const Image& img, ImageFormat format) {
  return format == ImageFormat::kPpm ? encode_ppm(img) : encode_png(img);
}

std::size_t byte_size(const Image& img) { return encode_png(img).size(); }

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kFile, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kFile, "write failed for " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kFile, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const auto ext = path.extension().string();
  write_bytes(path, encode_image(img, ext == ".ppm" ? ImageFormat::kPpm : ImageFormat::kPng));
}

}  // namespace dropforge
