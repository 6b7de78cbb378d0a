#pragma once

#include <vector>

#include "dropforge/nn.hpp"

namespace dropforge::detail {

// Activations of one forward pass: acts[0] is the input, acts[i + 1] the
// output of layer i.
struct Trace {
  std::vector<Tensor3> acts;
  std::vector<std::vector<int>> pool_argmax;  // per layer; empty unless maxpool
};

struct ParamGrads {
  std::vector<std::vector<float>> weights;
  std::vector<std::vector<float>> bias;

  explicit ParamGrads(std::span<const Layer> layers);
  void zero();
};

void forward_trace(std::span<const Layer> layers, const Tensor3& x, Trace& trace);

// Backpropagates dL/dlogits. Parameter gradients are accumulated into
// `param_grads` when non-null; dL/dx is stored into `input_grad` when non-null.
void backward(std::span<const Layer> layers, const Trace& trace,
              std::span<const float> grad_logits, ParamGrads* param_grads,
              Tensor3* input_grad);

// Throws kNumeric naming the first layer whose output is non-finite.
void check_finite(const Trace& trace);

}  // namespace dropforge::detail
