#include "dropforge/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dropforge/error.hpp"

namespace dropforge {

namespace {

void check_step(int step) {
  if (step < 1) fail(ErrorKind::kDomain, "quantization step must be >= 1, got " + std::to_string(step));
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(ErrorKind::kDomain, "alpha must lie in (0, 1), got " + std::to_string(alpha));
}

bool outside(double v, const QuantBounds& b) { return v < b.coeff_min || v > b.coeff_max; }

double truncate(double v, const QuantBounds& b) { return std::clamp(v, b.coeff_min, b.coeff_max); }

}  // namespace

double quantize_staircase(double c, int step, const QuantBounds& bounds) {
  check_step(step);
  return truncate(std::floor(c / step + 0.5) * step, bounds);
}

double steepness(double alpha) {
  check_alpha(alpha);
  return std::log(2.0 / alpha - 1.0);
}

double phi(double t, double alpha) {
  const double k = steepness(alpha);
  const double frac = t - std::floor(t);
  return 0.5 * (1.0 + std::tanh(k * (frac - 0.5)) / (1.0 - alpha));
}

double phi_derivative(double t, double alpha) {
  const double k = steepness(alpha);
  const double frac = t - std::floor(t);
  const double th = std::tanh(k * (frac - 0.5));
  return 0.5 * k * (1.0 - th * th) / (1.0 - alpha);
}

double quantize_diff(double c, int q, double alpha, const QuantBounds& bounds) {
  check_step(q);
  const double t = c / q;
  return truncate((phi(t, alpha) + std::floor(t)) * q, bounds);
}

bool at_cell_edge(double c, int q) {
  const double t = c / q;
  return t == std::floor(t);
}

QuantGrad d_quantize_diff(double c, int q, double alpha, const QuantBounds& bounds) {
  check_step(q);
  const double t = c / q;
  const double p = phi(t, alpha);
  const double fl = std::floor(t);
  if (outside((p + fl) * q, bounds)) return {};
  const double dp = phi_derivative(t, alpha);
  // d/dc [(phi(c/q) + fl) q] = phi'(t);  d/dq = -phi'(t) t + phi(t) + fl.
  return {dp, -dp * t + p + fl};
}

double quantize_variant(double c, int q, Quantizer variant, double alpha, const QuantBounds& bounds) {
  switch (variant) {
    case Quantizer::kHard:
      return quantize_staircase(c, q, bounds);
    case Quantizer::kShin: {
      check_step(q);
      const double t = c / q;
      const double n = std::floor(t + 0.5);
      const double d = n - t;
      return truncate((n + d * d * d) * q, bounds);
    }
    case Quantizer::kOurs:
      return quantize_diff(c, q, alpha, bounds);
  }
  return 0.0;
}

QuantGrad d_quantize_variant(double c, int q, Quantizer variant, double alpha,
                             const QuantBounds& bounds) {
  switch (variant) {
    case Quantizer::kHard:
      check_step(q);
      return {};
    case Quantizer::kShin: {
      check_step(q);
      const double t = c / q;
      const double n = std::floor(t + 0.5);
      const double d = n - t;
      const double r = n + d * d * d;
      if (outside(r * q, bounds)) return {};
      const double dr = -3.0 * d * d;  // dr/dt
      // Q = r(c/q) q:  dQ/dc = r'(t);  dQ/dq = r(t) - t r'(t).
      return {dr, r - t * dr};
    }
    case Quantizer::kOurs:
      return d_quantize_diff(c, q, alpha, bounds);
  }
  return {};
}

double alpha_at(const AlphaSchedule& schedule, int step) {
  if (schedule.total_steps < 1)
    fail(ErrorKind::kDomain, "alpha schedule needs at least one step");
  if (step < 0 || step >= schedule.total_steps)
    fail(ErrorKind::kDomain, "step " + std::to_string(step) + " outside schedule of " +
                                 std::to_string(schedule.total_steps));
  if (schedule.total_steps == 1) return schedule.alpha_start;
  const double f = static_cast<double>(step) / (schedule.total_steps - 1);
  return std::lerp(schedule.alpha_start, schedule.alpha_end, f);
}

QTable QTable::initial(int channels, int blocks_y, int blocks_x, int eps) {
  return uniform(channels, blocks_y, blocks_x, 1, eps);
}

QTable QTable::uniform(int channels, int blocks_y, int blocks_x, int value, int eps) {
  if (eps < 1) fail(ErrorKind::kConfig, "eps must be >= 1");
  QTable t;
  t.channels_ = channels;
  t.blocks_y_ = blocks_y;
  t.blocks_x_ = blocks_x;
  t.eps_ = eps;
  t.entries_.assign(static_cast<std::size_t>(channels) * blocks_y * blocks_x * kBlockArea, value);
  return t;
}

QTable QTable::initial_shared(int eps) {
  if (eps < 1) fail(ErrorKind::kConfig, "eps must be >= 1");
  QTable t;
  t.channels_ = t.blocks_y_ = t.blocks_x_ = 1;
  t.eps_ = eps;
  t.shared_ = true;
  t.entries_.assign(kBlockArea, 1);
  return t;
}

bool QTable::within_bounds() const noexcept {
  return std::all_of(entries_.begin(), entries_.end(),
                     [this](int v) { return v >= 1 && v <= eps_; });
}

bool QTable::compatible(const BlockGrid& grid) const noexcept {
  return shared_ || (channels_ == grid.channels() && blocks_y_ == grid.blocks_y() &&
                     blocks_x_ == grid.blocks_x());
}

BlockGrid quantize_grid(const BlockGrid& coeffs, const QTable& q, const QuantBounds& bounds) {
  if (!q.compatible(coeffs)) fail(ErrorKind::kShape, "quantization table does not match grid");
  BlockGrid out = coeffs;
  for (std::size_t b = 0; b < out.block_count(); ++b) {
    auto blk = out.block(b);
    for (int i = 0; i < kBlockArea; ++i) blk[i] = quantize_staircase(blk[i], q.at_block(b, i), bounds);
  }
  return out;
}

}  // namespace dropforge
