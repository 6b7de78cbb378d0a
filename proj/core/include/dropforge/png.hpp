#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dropforge/image.hpp"

namespace dropforge {

enum class ImageFormat { kPpm, kPng };

// Deflate level used for every PNG; fixed so byte_size is reproducible.
inline constexpr int kPngCompressionLevel = 9;

std::vector<std::uint8_t> encode_image(const Image& img, ImageFormat format);
std::vector<std::uint8_t> encode_ppm(const Image& img);
std::vector<std::uint8_t> encode_png(const Image& img);

// Decodes 8-bit non-interlaced grayscale or truecolor PNGs.
Image decode_png(std::span<const std::uint8_t> bytes);
Image decode_ppm(std::span<const std::uint8_t> bytes);

std::size_t byte_size(const Image& img);

void write_image(const std::filesystem::path& path, const Image& img);
void write_bytes(const std::filesystem::path& path,
                 std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace dropforge
