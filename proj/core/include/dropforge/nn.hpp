#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dropforge/dataset.hpp"
#include "dropforge/image.hpp"

namespace dropforge {

enum class LayerKind : std::uint8_t {
  kConv3x3 = 1,  // stride 1, zero padding 1, with bias
  kRelu = 2,
  kMaxPool2 = 3,
  kFlatten = 4,
  kDense = 5,
};

struct Layer {
  Layer() = default;
  explicit Layer(LayerKind k, int in_ = 0, int out_ = 0) : kind(k), in(in_), out(out_) {}

  LayerKind kind = LayerKind::kRelu;
  int in = 0;   // input channels (conv) or features (dense)
  int out = 0;  // output channels (conv) or features (dense)
  std::vector<float> weights;  // conv: [out][in][3][3], dense: [out][in]
  std::vector<float> bias;     // [out]

  static Layer conv3x3(int in, int out);
  static Layer dense(int in, int out);
  static Layer relu() { return Layer{LayerKind::kRelu}; }
  static Layer maxpool2() { return Layer{LayerKind::kMaxPool2}; }
  static Layer flatten() { return Layer{LayerKind::kFlatten}; }

  bool has_params() const noexcept {
    return kind == LayerKind::kConv3x3 || kind == LayerKind::kDense;
  }
};

// Loss conventions used by the attacks:
//   kUntargeted: L = log p_label(x)      (minimise to push away from label)
//   kTargeted:   L = -log p_label(x)     (cross-entropy toward label)
enum class LossMode { kUntargeted, kTargeted };

struct LossAndGrad {
  double loss = 0.0;
  Tensor3 grad;  // dL/dx, same shape as the input
  std::vector<float> logits;
};

class ConvNet {
 public:
  ConvNet() = default;
  explicit ConvNet(std::vector<Layer> layers);

  // conv16-relu-pool-conv32-relu-pool-flatten-dense(K), He-initialised.
  static ConvNet make_default(int channels, int side, int class_count,
                              std::uint64_t seed);

  std::span<const Layer> layers() const noexcept { return layers_; }
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }
  // Output width of the last dense layer; 0 when the net has none.
  int class_count() const noexcept;
  std::size_t parameter_count() const noexcept;

  std::vector<float> forward(const Tensor3& x) const;
  int predict(const Tensor3& x) const;
  int predict(const Image& img) const;
  LossAndGrad loss_and_input_grad(const Tensor3& x, int label, LossMode mode) const;

 private:
  std::vector<Layer> layers_;
};

std::vector<double> softmax(std::span<const float> logits);
// Numerically stable log p_label.
double log_softmax_at(std::span<const float> logits, int label);
int argmax(std::span<const float> values);

struct PgdTraining {
  float eps = 4.0f / 255.0f;
  int steps = 3;
  float step_size = 2.0f / 255.0f;
};

struct TrainConfig {
  int epochs = 8;
  int batch_size = 32;
  double learning_rate = 2e-3;
  std::uint64_t seed = 1;
  bool adversarial = false;  // replace each batch by PGD examples
  PgdTraining pgd;
  void validate() const;
};

struct EpochStats {
  double loss = 0.0;      // mean training loss
  double accuracy = 0.0;  // training accuracy on the (possibly adversarial) inputs
};

struct TrainResult {
  ConvNet model;
  std::vector<EpochStats> history;
};

// Adam on mean cross-entropy, shuffled mini-batches, deterministic per seed.
TrainResult train(ConvNet model, const Dataset& data, const TrainConfig& cfg);

double accuracy(const ConvNet& model, const Dataset& data);

// "DFW1" weight file.
std::vector<std::uint8_t> save_weights(const ConvNet& model);
ConvNet load_weights(std::span<const std::uint8_t> bytes);

inline constexpr std::uint16_t kWeightFormatVersion = 1;

}  // namespace dropforge
