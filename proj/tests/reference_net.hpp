#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dropforge/image.hpp"
#include "dropforge/nn.hpp"

namespace dropforge::testing {

// Plain double-precision forward pass over the same parameters.
inline std::vector<double> reference_forward(const ConvNet& m, const Tensor3& x) {
  int c = x.channels, h = x.height, w = x.width;
  std::vector<double> a(x.data.begin(), x.data.end());
  for (const Layer& l : m.layers()) {
    switch (l.kind) {
      case LayerKind::kConv3x3: {
        std::vector<double> out(static_cast<std::size_t>(l.out) * h * w);
        for (int o = 0; o < l.out; ++o)
          for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
              double s = l.bias[o];
              for (int i = 0; i < c; ++i)
                for (int dy = 0; dy < 3; ++dy)
                  for (int dx = 0; dx < 3; ++dx) {
                    const int yy = y + dy - 1, xs = xx + dx - 1;
                    if (yy < 0 || xs < 0 || yy >= h || xs >= w) continue;
                    s += l.weights[((o * c + i) * 3 + dy) * 3 + dx] * a[(i * h + yy) * w + xs];
                  }
              out[(o * h + y) * w + xx] = s;
            }
        a = std::move(out);
        c = l.out;
        break;
      }
      case LayerKind::kRelu:
        for (double& v : a) v = std::max(v, 0.0);
        break;
      case LayerKind::kMaxPool2: {
        std::vector<double> out(static_cast<std::size_t>(c) * (h / 2) * (w / 2));
        for (int i = 0; i < c; ++i)
          for (int y = 0; y < h / 2; ++y)
            for (int xx = 0; xx < w / 2; ++xx) {
              double best = -1e300;
              for (int d = 0; d < 4; ++d) best = std::max(best, a[(i * h + 2 * y + d / 2) * w + 2 * xx + d % 2]);
              out[(i * (h / 2) + y) * (w / 2) + xx] = best;
            }
        a = std::move(out);
        h /= 2;
        w /= 2;
        break;
      }
      case LayerKind::kFlatten:
        c = c * h * w;
        h = w = 1;
        break;
      case LayerKind::kDense: {
        std::vector<double> out(l.out);
        for (int o = 0; o < l.out; ++o) {
          double s = l.bias[o];
          for (int i = 0; i < l.in; ++i) s += l.weights[o * l.in + i] * a[i];
          out[o] = s;
        }
        a = std::move(out);
        c = l.out;
        break;
      }
    }
  }
  return a;
}

inline double reference_log_prob(const ConvNet& m, const Tensor3& x, int label) {
  const auto z = reference_forward(m, x);
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return z[label] - mx - std::log(s);
}

}  // namespace dropforge::testing
