#include "dropforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dropforge/error.hpp"
#include "dropforge/freq.hpp"

namespace dropforge {

Rate rate_of(std::span<const bool> flags, std::size_t batch) {
  if (flags.empty()) fail(ErrorKind::kDomain, "success rate of an empty outcome list");
  Rate r;
  r.total = flags.size();
  r.successes = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  r.percent = 100.0 * static_cast<double>(r.successes) / static_cast<double>(r.total);

  std::vector<double> means;
  for (std::size_t start = 0; start < flags.size(); start += batch) {
    const std::size_t end = std::min(flags.size(), start + batch);
    const auto hits = std::count(flags.begin() + start, flags.begin() + end, true);
    means.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(end - start));
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(means.size());
  r.std_error = std::sqrt(var) / std::sqrt(static_cast<double>(means.size()));
  return r;
}

Rate success_rate(std::span<const Outcome> outcomes) {
  std::unique_ptr<bool[]> flags(new bool[outcomes.size()]);
  for (std::size_t i = 0; i < outcomes.size(); ++i) flags[i] = outcomes[i].success();
  return rate_of(std::span<const bool>(flags.get(), outcomes.size()));
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) fail(ErrorKind::kShape, "psnr requires images of the same shape");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrCap;
  const double mse = sse / static_cast<double>(a.size());
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

DroppedInfo dropped_info_map(const Image& x, const QTable& q, const QuantBounds& bounds) {
  const BlockGrid coeffs = dct2(split_blocks(x));
  if (!q.compatible(coeffs)) fail(ErrorKind::kShape, "quantization table does not match image");
  const BandMask low = band_mask(Band::kLow), high = band_mask(Band::kHigh);

  DroppedInfo info;
  info.blocks_y = coeffs.blocks_y();
  info.blocks_x = coeffs.blocks_x();
  info.per_block.assign(static_cast<std::size_t>(info.blocks_y) * info.blocks_x, 0.0);
  double low_sum = 0.0, high_sum = 0.0;
  for (int c = 0; c < coeffs.channels(); ++c)
    for (int by = 0; by < info.blocks_y; ++by)
      for (int bx = 0; bx < info.blocks_x; ++bx) {
        const auto blk = coeffs.block(c, by, bx);
        double d_block = 0.0;
        for (int u = 0; u < kBlockSize; ++u)
          for (int v = 0; v < kBlockSize; ++v) {
            const int i = u * kBlockSize + v;
            const double d = std::abs(blk[i] - quantize_staircase(blk[i], q.at(c, by, bx, i), bounds));
            d_block += d;
            if (low.contains(u, v)) low_sum += d;
            if (high.contains(u, v)) high_sum += d;
          }
        info.per_block[static_cast<std::size_t>(by) * info.blocks_x + bx] += d_block;
      }
  for (double d : info.per_block) info.total += d;
  if (info.total > 0.0) {
    info.high_fraction = high_sum / info.total;
    info.low_fraction = low_sum / info.total;
  }

  info.heatmap = Image(info.blocks_y * kBlockSize, info.blocks_x * kBlockSize, 1);
  const auto [mn, mx] = std::minmax_element(info.per_block.begin(), info.per_block.end());
  const double range = *mx - *mn;
  for (int by = 0; by < info.blocks_y; ++by)
    for (int bx = 0; bx < info.blocks_x; ++bx) {
      const double d = info.per_block[static_cast<std::size_t>(by) * info.blocks_x + bx];
      const double level = range > 0.0 ? 255.0 * (d - *mn) / range : 0.0;
      const auto px = static_cast<std::uint8_t>(std::clamp(std::round(level), 0.0, 255.0));
      for (int k = 0; k < kBlockSize; ++k)
        for (int m = 0; m < kBlockSize; ++m) info.heatmap.at(by * kBlockSize + k, bx * kBlockSize + m, 0) = px;
    }
  return info;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace dropforge
