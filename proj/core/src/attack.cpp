#include "dropforge/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dropforge/error.hpp"

namespace dropforge {

void AdvDropConfig::validate() const {
  if (eps < 1) fail(ErrorKind::kConfig, "eps must be >= 1");
  if (steps < 1) fail(ErrorKind::kConfig, "steps must be >= 1");
  if (!(alpha_start > 0.0 && alpha_start < 1.0 && alpha_end > 0.0 && alpha_end < 1.0))
    fail(ErrorKind::kConfig, "alpha schedule endpoints must lie in (0, 1)");
  if (bounds.coeff_min > bounds.coeff_max) fail(ErrorKind::kConfig, "coeff_min > coeff_max");
}

Image reconstruct_hard(const Image& img, const QTable& q, const QuantBounds& bounds) {
  return merge_blocks(idct2(quantize_grid(dct2(split_blocks(img)), q, bounds)));
}

namespace {

// Pixel-domain grid (centred) -> model input in [0,1]. mask marks pixels
// inside the clamp range, where the gradient passes through.
Tensor3 soft_pixels(const BlockGrid& pix, std::vector<std::uint8_t>& mask) {
  Tensor3 t(pix.channels(), pix.height(), pix.width());
  mask.assign(t.size(), 0);
  for (int c = 0; c < pix.channels(); ++c)
    for (int by = 0; by < pix.blocks_y(); ++by)
      for (int bx = 0; bx < pix.blocks_x(); ++bx) {
        const auto blk = pix.block(c, by, bx);
        for (int k = 0; k < kBlockSize; ++k)
          for (int m = 0; m < kBlockSize; ++m) {
            const int y = by * kBlockSize + k, x = bx * kBlockSize + m;
            const double v = (blk[k * kBlockSize + m] + 128.0) / 255.0;
            const std::size_t idx = (static_cast<std::size_t>(c) * t.height + y) * t.width + x;
            if (v <= 0.0) {
              t.data[idx] = 0.0f;
            } else if (v >= 1.0) {
              t.data[idx] = 1.0f;
            } else {
              t.data[idx] = static_cast<float>(v);
              mask[idx] = 1;
            }
          }
      }
  return t;
}

// dL/dx (model input) -> dL/d(centred pixel) laid out as a BlockGrid.
BlockGrid pixel_grad_grid(const Tensor3& grad, const std::vector<std::uint8_t>& mask,
                          const BlockGrid& like) {
  BlockGrid g(like.channels(), like.blocks_y(), like.blocks_x());
  for (int c = 0; c < g.channels(); ++c)
    for (int by = 0; by < g.blocks_y(); ++by)
      for (int bx = 0; bx < g.blocks_x(); ++bx) {
        auto blk = g.block(c, by, bx);
        for (int k = 0; k < kBlockSize; ++k)
          for (int m = 0; m < kBlockSize; ++m) {
            const int y = by * kBlockSize + k, x = bx * kBlockSize + m;
            const std::size_t idx = (static_cast<std::size_t>(c) * grad.height + y) * grad.width + x;
            const double gv = static_cast<double>(grad.data[idx]);
            if (!std::isfinite(gv)) fail(ErrorKind::kNumeric, "non-finite input gradient");
            blk[k * kBlockSize + m] = mask[idx] ? gv / 255.0 : 0.0;
          }
      }
  return g;
}

bool is_success(AttackMode mode, int predicted, int label, int target) {
  return mode == AttackMode::kUntargeted ? predicted != label : predicted == target;
}

}  // namespace

AttackResult advdrop(const ConvNet& model, const Image& img, int label, const AdvDropConfig& cfg) {
  cfg.validate();
  const int classes = model.class_count();
  if (label < 0 || label >= classes) fail(ErrorKind::kLabel, "label outside model classes");

  AttackResult result;
  int loss_label = label;
  LossMode loss_mode = LossMode::kUntargeted;
  if (cfg.mode == AttackMode::kTargeted) {
    result.target = cfg.target;
    if (result.target < 0) {
      RngStream rng(cfg.seed, 0);
      result.target = sample_target(label, classes, rng);
    }
    if (result.target >= classes || result.target == label)
      fail(ErrorKind::kConfig, "target class must differ from label and be < class count");
    loss_label = result.target;
    loss_mode = LossMode::kTargeted;
  }

  const BlockGrid coeffs = dct2(split_blocks(img));
  QTable q = cfg.shared_table
                 ? QTable::initial_shared(cfg.eps)
                 : QTable::initial(coeffs.channels(), coeffs.blocks_y(), coeffs.blocks_x(), cfg.eps);
  const AlphaSchedule schedule{cfg.alpha_start, cfg.alpha_end, cfg.steps};

  double best_loss = std::numeric_limits<double>::infinity();
  QTable best_q = q;
  Image best_image;
  int best_pred = -1;

  BlockGrid soft(coeffs.channels(), coeffs.blocks_y(), coeffs.blocks_x());
  std::vector<std::uint8_t> mask;
  std::vector<double> q_grad(q.entries().size());

  for (int s = 0; s < cfg.steps; ++s) {
    const double alpha = alpha_at(schedule, s);

    for (std::size_t b = 0; b < coeffs.block_count(); ++b) {
      const auto src = coeffs.block(b);
      auto dst = soft.block(b);
      for (int i = 0; i < kBlockArea; ++i)
        dst[i] = quantize_variant(src[i], q.at_block(b, i), cfg.quantizer, alpha, cfg.bounds);
    }
    const Tensor3 x_soft = soft_pixels(idct2(soft), mask);
    const LossAndGrad lg = model.loss_and_input_grad(x_soft, loss_label, loss_mode);
    if (!std::isfinite(lg.loss)) fail(ErrorKind::kNumeric, "non-finite attack loss");

    // The IDCT is orthonormal, so its adjoint is the forward DCT.
    const BlockGrid coeff_grad = dct2(pixel_grad_grid(lg.grad, mask, soft));
    std::fill(q_grad.begin(), q_grad.end(), 0.0);
    for (std::size_t b = 0; b < coeffs.block_count(); ++b) {
      const auto c = coeffs.block(b);
      const auto g = coeff_grad.block(b);
      for (int i = 0; i < kBlockArea; ++i) {
        const auto d = d_quantize_variant(c[i], q.at_block(b, i), cfg.quantizer, alpha, cfg.bounds);
        q_grad[q.shared() ? i : b * kBlockArea + i] += g[i] * d.d_step;
      }
    }
    for (std::size_t e = 0; e < q_grad.size(); ++e) {
      if (!std::isfinite(q_grad[e])) fail(ErrorKind::kNumeric, "non-finite table gradient");
      const int dir = q_grad[e] > 0.0 ? 1 : (q_grad[e] < 0.0 ? -1 : 0);
      q.entries()[e] = std::clamp(q.entries()[e] - dir, 1, cfg.eps);
    }

    Image hard = reconstruct_hard(img, q, cfg.bounds);
    const auto logits = model.forward(to_tensor(hard));
    const int pred = argmax(logits);
    const double lp = log_softmax_at(logits, loss_label);
    const double hard_loss = loss_mode == LossMode::kUntargeted ? lp : -lp;
    result.telemetry.push_back({lg.loss, pred, alpha});

    const bool hit = is_success(cfg.mode, pred, label, result.target);
    if (hit && !result.success) {
      result.success = true;
      result.success_step = s + 1;
      best_q = q;
      best_image = std::move(hard);
      best_pred = pred;
      if (cfg.early_exit) break;
      continue;
    }
    if (!result.success && hard_loss < best_loss) {
      best_loss = hard_loss;
      best_q = q;
      best_image = std::move(hard);
      best_pred = pred;
    }
  }

  result.q_final = std::move(best_q);
  result.adversarial = std::move(best_image);
  result.predicted = best_pred;
  return result;
}

int sample_target(int label, int class_count, RngStream& rng) {
  if (class_count < 2) fail(ErrorKind::kDomain, "class_count must be >= 2");
  if (label < 0 || label >= class_count) fail(ErrorKind::kLabel, "label outside class range");
  const auto r = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(class_count - 1)));
  return r >= label ? r + 1 : r;
}

}  // namespace dropforge
