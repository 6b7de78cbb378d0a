#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "dropforge/dataset.hpp"
#include "dropforge/png.hpp"
#include "test_util.hpp"

using namespace dropforge;
using dropforge::testing::random_image;

TEST(Rng, SameStreamRepeats) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DistinctStreamsDiffer) {
  RngStream a(42, 7), b(42, 8), c(43, 7);
  int same_b = 0, same_c = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    same_b += x == b.next_u64();
    same_c += x == c.next_u64();
  }
  EXPECT_EQ(same_b, 0);
  EXPECT_EQ(same_c, 0);
}

TEST(Rng, UniformIndexInRange) {
  RngStream r(1, 1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(r.uniform_index(7), 7u);
  EXPECT_ERROR_KIND(r.uniform_index(0), ErrorKind::kDomain);
}

TEST(Rng, UniformAndNormalMoments) {
  RngStream r(3, 0);
  double s = 0, s2 = 0, n = 0, n2 = 0;
  const int count = 20000;
  for (int i = 0; i < count; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
    const double z = r.normal();
    n += z;
    n2 += z * z;
  }
  EXPECT_NEAR(s / count, 0.5, 0.01);
  EXPECT_NEAR(s2 / count - 0.25, 1.0 / 12.0, 0.005);
  EXPECT_NEAR(n / count, 0.0, 0.03);
  EXPECT_NEAR(n2 / count, 1.0, 0.04);
}

TEST(Rng, ForkIsDeterministic) {
  RngStream a(9, 2);
  auto c1 = a.fork(5), c2 = a.fork(5), c3 = a.fork(6);
  const auto v = c1.next_u64();
  EXPECT_EQ(v, c2.next_u64());
  EXPECT_NE(v, c3.next_u64());
}

TEST(Image, RejectsBadChannelsAndSizes) {
  EXPECT_ERROR_KIND(Image(4, 4, 2), ErrorKind::kInvalidDimension);
  EXPECT_ERROR_KIND(Image(0, 4, 3), ErrorKind::kInvalidDimension);
  EXPECT_ERROR_KIND(Image(2, 2, 1, std::vector<std::uint8_t>(3)), ErrorKind::kShape);
}

TEST(Image, TensorRoundTrip) {
  const Image img = random_image(8, 16, 3, 11);
  const Tensor3 t = to_tensor(img);
  EXPECT_EQ(t.channels, 3);
  EXPECT_EQ(t.height, 8);
  EXPECT_EQ(t.width, 16);
  EXPECT_FLOAT_EQ(t.at(2, 3, 5), img.at(3, 5, 2) / 255.0f);
  EXPECT_EQ(from_tensor(t), img);
}

TEST(Image, FromTensorClampsAndRounds) {
  Tensor3 t(1, 1, 3);
  t.data = {-0.5f, 0.5f, 2.0f};
  const Image img = from_tensor(t);
  EXPECT_EQ(img.at(0, 0, 0), 0);
  EXPECT_EQ(img.at(0, 1, 0), 128);  // 127.5 rounds up
  EXPECT_EQ(img.at(0, 2, 0), 255);
}

TEST(Synth, Deterministic) {
  const auto a = synth_dataset(10, 20, 32, 7);
  const auto b = synth_dataset(10, 20, 32, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.images[i], b.images[i]);
    ASSERT_EQ(a.labels[i], b.labels[i]);
  }
  const auto c = synth_dataset(10, 20, 32, 8);
  EXPECT_NE(a.images[0], c.images[0]);
}

TEST(Synth, Balanced) {
  const auto ds = synth_dataset(10, 20, 32, 7);
  EXPECT_EQ(ds.size(), 200u);
  EXPECT_EQ(ds.class_count, 10);
  std::map<int, int> counts;
  for (int l : ds.labels) ++counts[l];
  ASSERT_EQ(counts.size(), 10u);
  for (auto [label, n] : counts) EXPECT_EQ(n, 20) << label;
  ds.validate();
}

TEST(Synth, ShapeAndErrors) {
  const auto ds = synth_dataset(3, 2, 16, 1);
  for (const auto& img : ds.images) {
    EXPECT_EQ(img.height(), 16);
    EXPECT_EQ(img.width(), 16);
    EXPECT_EQ(img.channels(), 3);
  }
  EXPECT_ERROR_KIND(synth_dataset(10, 1, 30, 1), ErrorKind::kInvalidDimension);
  EXPECT_ERROR_KIND(synth_dataset(1, 1, 32, 1), ErrorKind::kDomain);
}

TEST(Synth, ImagesAreNotDegenerate) {
  const auto ds = synth_dataset(10, 5, 32, 3);
  std::set<std::vector<std::uint8_t>> distinct;
  for (const auto& img : ds.images) {
    const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
    EXPECT_GT(*hi - *lo, 40);
    distinct.emplace(img.data().begin(), img.data().end());
  }
  EXPECT_EQ(distinct.size(), ds.size());
}

std::vector<std::uint8_t> raw_records(int count, int side, int channels, int label) {
  const std::size_t rec = 1 + static_cast<std::size_t>(side) * side * channels;
  std::vector<std::uint8_t> bytes(rec * count, 0);
  for (int r = 0; r < count; ++r) {
    bytes[r * rec] = static_cast<std::uint8_t>(label + r);
    for (std::size_t i = 1; i < rec; ++i) bytes[r * rec + i] = static_cast<std::uint8_t>((i * 7 + r) % 251);
  }
  return bytes;
}

TEST(RawDataset, TwoRecords) {
  const auto bytes = raw_records(2, 32, 3, 0);
  const auto ds = parse_raw_dataset(bytes, 32, 3);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.labels[0], 0);
  EXPECT_EQ(ds.labels[1], 1);
  // planar layout: byte 1 + c*1024 + y*32 + x
  const auto& img = ds.images[1];
  const std::size_t rec = 1 + 32 * 32 * 3;
  EXPECT_EQ(img.at(2, 5, 1), bytes[rec + 1 + 1024 + 2 * 32 + 5]);
  EXPECT_EQ(img.at(31, 31, 2), bytes[rec + 1 + 2048 + 31 * 32 + 31]);
}

TEST(RawDataset, AllZeroRecord) {
  std::vector<std::uint8_t> bytes(1 + 32 * 32 * 3, 0);
  const auto ds = parse_raw_dataset(bytes, 32, 3);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.labels[0], 0);
  EXPECT_EQ(ds.images[0].size(), 1024u * 3);
  EXPECT_TRUE(std::all_of(ds.images[0].data().begin(), ds.images[0].data().end(),
                          [](std::uint8_t v) { return v == 0; }));
}

TEST(RawDataset, Errors) {
  auto bytes = raw_records(2, 8, 1, 0);
  bytes.push_back(0);
  EXPECT_ERROR_KIND(parse_raw_dataset(bytes, 8, 1), ErrorKind::kFormat);
  const auto labelled = raw_records(1, 8, 1, 5);
  EXPECT_ERROR_KIND(parse_raw_dataset(labelled, 8, 1, 5), ErrorKind::kLabel);
  EXPECT_ERROR_KIND(load_raw_dataset("/nonexistent/raw.bin", 8, 1), ErrorKind::kFile);
}

TEST(RawDataset, LoadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "dropforge_raw_test.bin";
  const auto bytes = raw_records(3, 8, 3, 0);
  write_bytes(path, bytes);
  const auto ds = load_raw_dataset(path, 8, 3, 10);
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.class_count, 10);
  std::filesystem::remove(path);
}

TEST(Split, DeterministicPartition) {
  const auto ds = synth_dataset(4, 10, 8, 2);
  const auto [a, b] = split_dataset(ds, 0.25, 5);
  const auto [c, d] = split_dataset(ds, 0.25, 5);
  EXPECT_EQ(a.size(), 30u);
  EXPECT_EQ(b.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.images[i], c.images[i]);
  // Every image lands in exactly one side.
  std::multiset<std::vector<std::uint8_t>> all, parts;
  for (const auto& img : ds.images) all.emplace(img.data().begin(), img.data().end());
  for (const auto* part : {&a, &b})
    for (const auto& img : part->images) parts.emplace(img.data().begin(), img.data().end());
  EXPECT_EQ(all, parts);
  EXPECT_ERROR_KIND(split_dataset(ds, 1.5, 1), ErrorKind::kDomain);
}

TEST(Ppm, RedPixelHeader) {
  Image img(1, 1, 3);
  img.at(0, 0, 0) = 255;
  const auto bytes = encode_ppm(img);
  const std::string header = "P6 1 1 255\n";
  ASSERT_EQ(bytes.size(), header.size() + 3);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
  EXPECT_EQ(bytes[header.size()], 255);
  EXPECT_EQ(bytes[header.size() + 1], 0);
  EXPECT_EQ(bytes[header.size() + 2], 0);
}

TEST(Ppm, RoundTripAndErrors) {
  const Image img = random_image(5, 7, 3, 4);
  EXPECT_EQ(decode_ppm(encode_ppm(img)), img);
  EXPECT_ERROR_KIND(encode_ppm(Image(2, 2, 1)), ErrorKind::kFormat);
  const std::string bad = "P5 1 1 255\n\x01";
  EXPECT_ERROR_KIND(decode_ppm(std::vector<std::uint8_t>(bad.begin(), bad.end())), ErrorKind::kFormat);
}

TEST(Png, RoundTripProperty) {
  RngStream shapes(77, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = 1 + static_cast<int>(shapes.uniform_index(40));
    const int w = 1 + static_cast<int>(shapes.uniform_index(40));
    const int c = shapes.uniform_index(2) ? 3 : 1;
    Image img = random_image(h, w, c, 1000 + trial);
    // Mix in smooth regions so every filter type gets exercised.
    if (trial % 2)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int k = 0; k < c; ++k) img.at(y, x, k) = static_cast<std::uint8_t>(x * 3 + y * 5 + k);
    ASSERT_EQ(decode_png(encode_png(img)), img) << h << "x" << w << "x" << c;
  }
}

TEST(Png, SignatureAndCrc) {
  const Image img = random_image(4, 4, 3, 5);
  auto bytes = encode_png(img);
  const std::array<std::uint8_t, 8> sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  EXPECT_TRUE(std::equal(sig.begin(), sig.end(), bytes.begin()));
  bytes[20] ^= 0x01;  // inside IHDR payload
  EXPECT_ERROR_KIND(decode_png(bytes), ErrorKind::kFormat);
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 30);
  EXPECT_ERROR_KIND(decode_png(truncated), ErrorKind::kFormat);
}

TEST(Png, ConstantSmallerThanNoise) {
  const Image flat(32, 32, 3, 128);
  const Image noise = random_image(32, 32, 3, 9);
  EXPECT_LT(byte_size(flat), byte_size(noise));
  EXPECT_LT(byte_size(flat), 3072u);
}

TEST(Png, ByteSizeDeterministic) {
  const Image img = random_image(16, 16, 3, 12);
  EXPECT_EQ(byte_size(img), byte_size(img));
  EXPECT_EQ(byte_size(img), encode_png(img).size());
  EXPECT_EQ(encode_image(img, ImageFormat::kPng), encode_png(img));
  EXPECT_EQ(encode_image(img, ImageFormat::kPpm), encode_ppm(img));
}

TEST(Png, WriteImageByExtension) {
  const auto dir = std::filesystem::temp_directory_path();
  const Image img = random_image(8, 8, 3, 13);
  write_image(dir / "dropforge_t.png", img);
  write_image(dir / "dropforge_t.ppm", img);
  EXPECT_EQ(decode_png(read_bytes(dir / "dropforge_t.png")), img);
  EXPECT_EQ(decode_ppm(read_bytes(dir / "dropforge_t.ppm")), img);
  std::filesystem::remove(dir / "dropforge_t.png");
  std::filesystem::remove(dir / "dropforge_t.ppm");
}
