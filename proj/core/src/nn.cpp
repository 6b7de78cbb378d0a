#include "dropforge/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dropforge/error.hpp"
#include "dropforge/rng.hpp"
#include "nn_internal.hpp"

namespace dropforge {

Layer Layer::conv3x3(int in, int out) {
  Layer l{LayerKind::kConv3x3, in, out};
  l.weights.assign(static_cast<std::size_t>(out) * in * 9, 0.0f);
  l.bias.assign(out, 0.0f);
  return l;
}

Layer Layer::dense(int in, int out) {
  Layer l{LayerKind::kDense, in, out};
  l.weights.assign(static_cast<std::size_t>(out) * in, 0.0f);
  l.bias.assign(out, 0.0f);
  return l;
}

ConvNet::ConvNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (const auto& l : layers_) {
    if (!l.has_params()) continue;
    const std::size_t per = l.kind == LayerKind::kConv3x3 ? 9 : 1;
    if (l.in <= 0 || l.out <= 0 ||
        l.weights.size() != per * l.in * l.out || l.bias.size() != static_cast<std::size_t>(l.out))
      fail(ErrorKind::kShape, "layer parameter arrays do not match their dimensions");
  }
}

ConvNet ConvNet::make_default(int channels, int side, int class_count, std::uint64_t seed) {
  if (side % 4 != 0) fail(ErrorKind::kInvalidDimension, "side must be divisible by 4");
  const int pooled = side / 4;
  std::vector<Layer> layers{
      Layer::conv3x3(channels, 16), Layer::relu(), Layer::maxpool2(),
      Layer::conv3x3(16, 32),       Layer::relu(), Layer::maxpool2(),
      Layer::flatten(),             Layer::dense(32 * pooled * pooled, class_count)};
  RngStream rng(seed, 0x1a7e);
  for (auto& l : layers) {
    if (!l.has_params()) continue;
    const int fan_in = l.kind == LayerKind::kConv3x3 ? l.in * 9 : l.in;
    const double gain = l.kind == LayerKind::kConv3x3 ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / fan_in);
    for (auto& w : l.weights) w = static_cast<float>(stddev * rng.normal());
  }
  return ConvNet(std::move(layers));
}

int ConvNet::class_count() const noexcept {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    if (it->kind == LayerKind::kDense) return it->out;
  return 0;
}

std::size_t ConvNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<float> ConvNet::forward(const Tensor3& x) const {
  detail::Trace trace;
  detail::forward_trace(layers_, x, trace);
  detail::check_finite(trace);
  return std::move(trace.acts.back().data);
}

int ConvNet::predict(const Tensor3& x) const { return argmax(forward(x)); }

int ConvNet::predict(const Image& img) const { return predict(to_tensor(img)); }

LossAndGrad ConvNet::loss_and_input_grad(const Tensor3& x, int label, LossMode mode) const {
  const int k = class_count();
  if (label < 0 || label >= k)
    fail(ErrorKind::kLabel, "label " + std::to_string(label) + " outside [0, " +
                                std::to_string(k) + ")");
  detail::Trace trace;
  detail::forward_trace(layers_, x, trace);
  detail::check_finite(trace);
  const auto& logits = trace.acts.back().data;
  const auto probs = softmax(logits);
  const double log_p = log_softmax_at(logits, label);

  // d(log p_label)/dz_j = [j == label] - p_j
  const float sign = mode == LossMode::kUntargeted ? 1.0f : -1.0f;
  std::vector<float> grad_logits(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j)
    grad_logits[j] = sign * static_cast<float>((static_cast<int>(j) == label ? 1.0 : 0.0) - probs[j]);

  LossAndGrad out;
  out.loss = mode == LossMode::kUntargeted ? log_p : -log_p;
  detail::backward(layers_, trace, grad_logits, nullptr, &out.grad);
  out.logits = logits;
  return out;
}

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

double log_softmax_at(std::span<const float> logits, int label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto v : logits) z += std::exp(static_cast<double>(v) - m);
  return static_cast<double>(logits[label]) - m - std::log(z);
}

int argmax(std::span<const float> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

namespace detail {

namespace {

Tensor3 pad1(const Tensor3& x) {
  Tensor3 p(x.channels, x.height + 2, x.width + 2);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < x.height; ++y)
      std::copy_n(&x.data[(static_cast<std::size_t>(c) * x.height + y) * x.width], x.width,
                  &p.at(c, y + 1, 1));
  return p;
}

void conv_forward(const Layer& l, const Tensor3& x, Tensor3& out) {
  if (x.channels != l.in)
    fail(ErrorKind::kShape, "conv expects " + std::to_string(l.in) + " input channels, got " +
                                std::to_string(x.channels));
  const int h = x.height, w = x.width, pw = w + 2;
  const Tensor3 p = pad1(x);
  out = Tensor3(l.out, h, w);
  for (int o = 0; o < l.out; ++o) {
    float* dst_plane = &out.data[static_cast<std::size_t>(o) * h * w];
    std::fill_n(dst_plane, static_cast<std::size_t>(h) * w, l.bias[o]);
    for (int i = 0; i < l.in; ++i) {
      const float* k = &l.weights[(static_cast<std::size_t>(o) * l.in + i) * 9];
      const float* src_plane = &p.data[static_cast<std::size_t>(i) * (h + 2) * pw];
      for (int ky = 0; ky < 3; ++ky) {
        const float w0 = k[ky * 3], w1 = k[ky * 3 + 1], w2 = k[ky * 3 + 2];
        for (int y = 0; y < h; ++y) {
          const float* __restrict src = src_plane + (y + ky) * pw;
          float* __restrict dst = dst_plane + y * w;
          for (int xx = 0; xx < w; ++xx)
            dst[xx] += w0 * src[xx] + w1 * src[xx + 1] + w2 * src[xx + 2];
        }
      }
    }
  }
}

void conv_backward(const Layer& l, const Tensor3& x, const Tensor3& gout,
                   std::vector<float>* dw, std::vector<float>* db, Tensor3* gin) {
  const int h = x.height, w = x.width, pw = w + 2;
  if (dw != nullptr) {
    const Tensor3 p = pad1(x);
    std::vector<float> acc(9 * static_cast<std::size_t>(w));
    for (int o = 0; o < l.out; ++o) {
      const float* g_plane = &gout.data[static_cast<std::size_t>(o) * h * w];
      double bsum = 0.0;
      for (std::size_t n = 0; n < static_cast<std::size_t>(h) * w; ++n) bsum += g_plane[n];
      (*db)[o] += static_cast<float>(bsum);
      for (int i = 0; i < l.in; ++i) {
        const float* src_plane = &p.data[static_cast<std::size_t>(i) * (h + 2) * pw];
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (int y = 0; y < h; ++y) {
          const float* __restrict g = g_plane + y * w;
          for (int ky = 0; ky < 3; ++ky) {
            const float* __restrict src = src_plane + (y + ky) * pw;
            for (int kx = 0; kx < 3; ++kx) {
              float* __restrict a = &acc[(ky * 3 + kx) * static_cast<std::size_t>(w)];
              for (int xx = 0; xx < w; ++xx) a[xx] += g[xx] * src[xx + kx];
            }
          }
        }
        float* k = &(*dw)[(static_cast<std::size_t>(o) * l.in + i) * 9];
        for (int t = 0; t < 9; ++t) {
          double s = 0.0;
          for (int xx = 0; xx < w; ++xx) s += acc[t * static_cast<std::size_t>(w) + xx];
          k[t] += static_cast<float>(s);
        }
      }
    }
  }
  if (gin != nullptr) {
    Tensor3 gp(l.in, h + 2, pw);
    for (int o = 0; o < l.out; ++o) {
      const float* g_plane = &gout.data[static_cast<std::size_t>(o) * h * w];
      for (int i = 0; i < l.in; ++i) {
        const float* k = &l.weights[(static_cast<std::size_t>(o) * l.in + i) * 9];
        float* dst_plane = &gp.data[static_cast<std::size_t>(i) * (h + 2) * pw];
        for (int ky = 0; ky < 3; ++ky) {
          const float w0 = k[ky * 3], w1 = k[ky * 3 + 1], w2 = k[ky * 3 + 2];
          for (int y = 0; y < h; ++y) {
            const float* __restrict g = g_plane + y * w;
            float* __restrict dst = dst_plane + (y + ky) * pw;
            for (int xx = 0; xx < w; ++xx) dst[xx] += w0 * g[xx];
            for (int xx = 0; xx < w; ++xx) dst[xx + 1] += w1 * g[xx];
            for (int xx = 0; xx < w; ++xx) dst[xx + 2] += w2 * g[xx];
          }
        }
      }
    }
    *gin = Tensor3(l.in, h, w);
    for (int i = 0; i < l.in; ++i)
      for (int y = 0; y < h; ++y)
        std::copy_n(&gp.at(i, y + 1, 1), w, &gin->at(i, y, 0));
  }
}

void dense_forward(const Layer& l, const Tensor3& x, Tensor3& out) {
  if (x.size() != static_cast<std::size_t>(l.in))
    fail(ErrorKind::kShape, "dense expects " + std::to_string(l.in) + " features, got " +
                                std::to_string(x.size()));
  out = Tensor3(l.out, 1, 1);
  for (int o = 0; o < l.out; ++o) {
    const float* row = &l.weights[static_cast<std::size_t>(o) * l.in];
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= l.in; i += 8)
      for (int t = 0; t < 8; ++t) acc[t] += row[i + t] * x.data[i + t];
    double s = l.bias[o];
    for (; i < l.in; ++i) s += static_cast<double>(row[i]) * x.data[i];
    for (float a : acc) s += a;
    out.data[o] = static_cast<float>(s);
  }
}

void dense_backward(const Layer& l, const Tensor3& x, const Tensor3& gout,
                    std::vector<float>* dw, std::vector<float>* db, Tensor3* gin) {
  if (dw != nullptr) {
    for (int o = 0; o < l.out; ++o) {
      const float g = gout.data[o];
      (*db)[o] += g;
      float* __restrict row = &(*dw)[static_cast<std::size_t>(o) * l.in];
      for (int i = 0; i < l.in; ++i) row[i] += g * x.data[i];
    }
  }
  if (gin != nullptr) {
    *gin = Tensor3(x.channels, x.height, x.width);
    for (int o = 0; o < l.out; ++o) {
      const float g = gout.data[o];
      const float* __restrict row = &l.weights[static_cast<std::size_t>(o) * l.in];
      float* __restrict dst = gin->data.data();
      for (int i = 0; i < l.in; ++i) dst[i] += g * row[i];
    }
  }
}

void pool_forward(const Tensor3& x, Tensor3& out, std::vector<int>& argmax_index) {
  if (x.height % 2 != 0 || x.width % 2 != 0)
    fail(ErrorKind::kShape, "maxpool 2x2 requires even spatial dimensions");
  const int h = x.height / 2, w = x.width / 2;
  out = Tensor3(x.channels, h, w);
  argmax_index.assign(out.size(), 0);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        int best = -1;
        float best_v = 0.0f;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (c * x.height + 2 * y + dy) * x.width + 2 * xx + dx;
            if (best < 0 || x.data[idx] > best_v) {
              best = idx;
              best_v = x.data[idx];
            }
          }
        const std::size_t o = (static_cast<std::size_t>(c) * h + y) * w + xx;
        out.data[o] = best_v;
        argmax_index[o] = best;
      }
}

}  // namespace

ParamGrads::ParamGrads(std::span<const Layer> layers) {
  for (const auto& l : layers) {
    weights.emplace_back(l.weights.size(), 0.0f);
    bias.emplace_back(l.bias.size(), 0.0f);
  }
}

void ParamGrads::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0f);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0f);
}

void forward_trace(std::span<const Layer> layers, const Tensor3& x, Trace& trace) {
  trace.acts.resize(layers.size() + 1);
  trace.pool_argmax.resize(layers.size());
  trace.acts[0] = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const Tensor3& in = trace.acts[i];
    Tensor3& out = trace.acts[i + 1];
    switch (l.kind) {
      case LayerKind::kConv3x3:
        conv_forward(l, in, out);
        break;
      case LayerKind::kRelu:
        out = in;
        for (auto& v : out.data) v = v < 0.0f ? 0.0f : v;  // NaN passes through
        break;
      case LayerKind::kMaxPool2:
        pool_forward(in, out, trace.pool_argmax[i]);
        break;
      case LayerKind::kFlatten:
        out = in;
        out.channels = static_cast<int>(in.size());
        out.height = out.width = 1;
        break;
      case LayerKind::kDense:
        dense_forward(l, in, out);
        break;
    }
  }
}

void check_finite(const Trace& trace) {
  const auto& logits = trace.acts.back().data;
  if (std::all_of(logits.begin(), logits.end(), [](float v) { return std::isfinite(v); }))
    return;
  for (std::size_t i = 1; i < trace.acts.size(); ++i) {
    const auto& d = trace.acts[i].data;
    if (!std::all_of(d.begin(), d.end(), [](float v) { return std::isfinite(v); }))
      fail(ErrorKind::kNumeric, "non-finite activation at layer " + std::to_string(i - 1));
  }
}

void backward(std::span<const Layer> layers, const Trace& trace,
              std::span<const float> grad_logits, ParamGrads* param_grads,
              Tensor3* input_grad) {
  Tensor3 g(static_cast<int>(grad_logits.size()), 1, 1);
  std::copy(grad_logits.begin(), grad_logits.end(), g.data.begin());
  for (std::size_t n = layers.size(); n-- > 0;) {
    const Layer& l = layers[n];
    const Tensor3& in = trace.acts[n];
    const Tensor3& out = trace.acts[n + 1];
    const bool need_input = n > 0 || input_grad != nullptr;
    std::vector<float>* dw = param_grads ? &param_grads->weights[n] : nullptr;
    std::vector<float>* db = param_grads ? &param_grads->bias[n] : nullptr;
    Tensor3 gin;
    switch (l.kind) {
      case LayerKind::kConv3x3:
        conv_backward(l, in, g, dw, db, need_input ? &gin : nullptr);
        break;
      case LayerKind::kDense:
        dense_backward(l, in, g, dw, db, need_input ? &gin : nullptr);
        break;
      case LayerKind::kRelu:
        gin = std::move(g);
        for (std::size_t i = 0; i < gin.size(); ++i)
          if (out.data[i] <= 0.0f) gin.data[i] = 0.0f;
        break;
      case LayerKind::kMaxPool2: {
        gin = Tensor3(in.channels, in.height, in.width);
        const auto& idx = trace.pool_argmax[n];
        for (std::size_t i = 0; i < g.size(); ++i) gin.data[idx[i]] += g.data[i];
        break;
      }
      case LayerKind::kFlatten:
        gin = std::move(g);
        gin.channels = in.channels;
        gin.height = in.height;
        gin.width = in.width;
        break;
    }
    if (!need_input) return;
    g = std::move(gin);
  }
  if (input_grad != nullptr) *input_grad = std::move(g);
}

}  // namespace detail

}  // namespace dropforge
