#include <algorithm>
#include <cmath>
#include <string>

#include "dropforge/error.hpp"
#include "dropforge/nn.hpp"
#include "dropforge/rng.hpp"
#include "nn_internal.hpp"

namespace dropforge {

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::kConfig, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::kConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorKind::kConfig, "learning_rate must be > 0");
  if (adversarial && (pgd.eps < 0.0f || pgd.steps < 1 || pgd.step_size <= 0.0f))
    fail(ErrorKind::kConfig, "invalid PGD training parameters");
}

namespace {

// Untargeted l_inf PGD on cross-entropy, random start, [0,1] box.
Tensor3 pgd_example(const ConvNet& model, const Tensor3& x, int label, const PgdTraining& p,
                    RngStream& rng) {
  Tensor3 adv = x;
  for (std::size_t i = 0; i < adv.size(); ++i)
    adv.data[i] = std::clamp(x.data[i] + static_cast<float>(rng.uniform(-p.eps, p.eps)), 0.0f, 1.0f);
  for (int s = 0; s < p.steps; ++s) {
    // Descending log p_y ascends cross-entropy.
    const auto lg = model.loss_and_input_grad(adv, label, LossMode::kUntargeted);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const float g = lg.grad.data[i];
      const float step = g > 0.0f ? -p.step_size : (g < 0.0f ? p.step_size : 0.0f);
      const float v = std::clamp(adv.data[i] + step, x.data[i] - p.eps, x.data[i] + p.eps);
      adv.data[i] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return adv;
}

struct Adam {
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  detail::ParamGrads m, v;

  Adam(std::span<const Layer> layers, double lr_) : lr(lr_), m(layers), v(layers) {}

  void step(std::vector<Layer>& layers, const detail::ParamGrads& g, float scale) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    auto update = [&](std::vector<float>& p, const std::vector<float>& grad,
                      std::vector<float>& mm, std::vector<float>& vv) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(grad[i]) * scale;
        mm[i] = static_cast<float>(beta1 * mm[i] + (1.0 - beta1) * gi);
        vv[i] = static_cast<float>(beta2 * vv[i] + (1.0 - beta2) * gi * gi);
        const double mhat = mm[i] / c1, vhat = vv[i] / c2;
        p[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
      }
    };
    for (std::size_t n = 0; n < layers.size(); ++n) {
      update(layers[n].weights, g.weights[n], m.weights[n], v.weights[n]);
      update(layers[n].bias, g.bias[n], m.bias[n], v.bias[n]);
    }
  }
};

}  // namespace

TrainResult train(ConvNet model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) fail(ErrorKind::kConfig, "training data is empty");
  data.validate();
  if (model.class_count() != data.class_count)
    fail(ErrorKind::kShape, "model class count does not match dataset");

  std::vector<Tensor3> inputs;
  inputs.reserve(data.size());
  for (const auto& img : data.images) inputs.push_back(to_tensor(img));

  TrainResult result;
  auto& layers = model.mutable_layers();
  Adam adam(layers, cfg.learning_rate);
  detail::ParamGrads grads(layers);
  detail::Trace trace;
  std::vector<std::size_t> order(data.size());
  std::vector<float> grad_logits;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    RngStream shuffle(cfg.seed, 0x7000 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.uniform_index(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.zero();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const int label = data.labels[idx];
        if (cfg.adversarial) {
          RngStream rng(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) | idx);
          detail::forward_trace(layers, pgd_example(model, inputs[idx], label, cfg.pgd, rng), trace);
        } else {
          detail::forward_trace(layers, inputs[idx], trace);
        }
        const auto& logits = trace.acts.back().data;
        const double loss = -log_softmax_at(logits, label);
        if (!std::isfinite(loss))
          fail(ErrorKind::kTraining, "non-finite loss at epoch " + std::to_string(epoch));
        loss_sum += loss;
        if (argmax(logits) == label) ++correct;
        const auto probs = softmax(logits);
        grad_logits.assign(logits.size(), 0.0f);
        for (std::size_t j = 0; j < logits.size(); ++j)
          grad_logits[j] = static_cast<float>(probs[j] - (static_cast<int>(j) == label ? 1.0 : 0.0));
        detail::backward(layers, trace, grad_logits, &grads, nullptr);
      }
      adam.step(layers, grads, 1.0f / static_cast<float>(end - start));
    }
    result.history.push_back({loss_sum / static_cast<double>(data.size()),
                              static_cast<double>(correct) / static_cast<double>(data.size())});
  }
  result.model = std::move(model);
  return result;
}

double accuracy(const ConvNet& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (model.predict(data.images[i]) == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace dropforge
