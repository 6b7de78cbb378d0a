#include <algorithm>
#include <cmath>

#include "dropforge/attack.hpp"
#include "dropforge/error.hpp"

namespace dropforge {

namespace {

// Ascent direction of cross-entropy = descent direction of log p_y.
Tensor3 ascent_direction(const ConvNet& model, const Tensor3& x, int label) {
  auto lg = model.loss_and_input_grad(x, label, LossMode::kUntargeted);
  for (auto& v : lg.grad.data) v = -v;
  return std::move(lg.grad);
}

float signum(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

double l2_norm(const std::vector<float>& v) {
  double s = 0.0;
  for (float f : v) s += static_cast<double>(f) * f;
  return std::sqrt(s);
}

}  // namespace

Image fgsm(const ConvNet& model, const Image& img, int label, double eps) {
  if (eps < 0.0) fail(ErrorKind::kDomain, "eps must be >= 0");
  Tensor3 x = to_tensor(img);
  if (eps == 0.0) return img;
  const Tensor3 d = ascent_direction(model, x, label);
  for (std::size_t i = 0; i < x.size(); ++i)
    x.data[i] = std::clamp(x.data[i] + static_cast<float>(eps) * signum(d.data[i]), 0.0f, 1.0f);
  return from_tensor(x);
}

Tensor3 pgd_tensor(const ConvNet& model, const Tensor3& x0, int label, const PgdConfig& cfg) {
  if (cfg.eps < 0.0 || cfg.steps < 0 || cfg.step_size < 0.0)
    fail(ErrorKind::kDomain, "PGD parameters must be non-negative");
  const auto eps = static_cast<float>(cfg.eps);
  Tensor3 adv = x0;

  auto project = [&] {
    if (cfg.norm == Norm::kLinf) {
      for (std::size_t i = 0; i < adv.size(); ++i) {
        const float v = std::clamp(adv.data[i], x0.data[i] - eps, x0.data[i] + eps);
        adv.data[i] = std::clamp(v, 0.0f, 1.0f);
      }
      return;
    }
    std::vector<float> delta(adv.size());
    for (std::size_t i = 0; i < adv.size(); ++i) delta[i] = adv.data[i] - x0.data[i];
    const double n = l2_norm(delta);
    const double scale = n > cfg.eps ? cfg.eps / n : 1.0;
    for (std::size_t i = 0; i < adv.size(); ++i)
      adv.data[i] = std::clamp(x0.data[i] + static_cast<float>(delta[i] * scale), 0.0f, 1.0f);
  };

  if (cfg.random_start && cfg.eps > 0.0) {
    RngStream rng(cfg.seed, 0x96d);
    if (cfg.norm == Norm::kLinf) {
      for (auto& v : adv.data) v += static_cast<float>(rng.uniform(-cfg.eps, cfg.eps));
    } else {
      std::vector<float> dir(adv.size());
      for (auto& v : dir) v = static_cast<float>(rng.normal());
      const double n = l2_norm(dir);
      const double radius = cfg.eps * rng.uniform();
      for (std::size_t i = 0; i < adv.size(); ++i)
        adv.data[i] += static_cast<float>(dir[i] * radius / n);
    }
    project();
  }

  for (int s = 0; s < cfg.steps; ++s) {
    const Tensor3 d = ascent_direction(model, adv, label);
    if (cfg.norm == Norm::kLinf) {
      for (std::size_t i = 0; i < adv.size(); ++i)
        adv.data[i] += static_cast<float>(cfg.step_size) * signum(d.data[i]);
    } else {
      const double n = l2_norm(d.data);
      if (n > 0.0)
        for (std::size_t i = 0; i < adv.size(); ++i)
          adv.data[i] += static_cast<float>(cfg.step_size * d.data[i] / n);
    }
    project();
  }
  return adv;
}

Image pgd(const ConvNet& model, const Image& img, int label, const PgdConfig& cfg) {
  return from_tensor(pgd_tensor(model, to_tensor(img), label, cfg));
}

}  // namespace dropforge
