#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dropforge/freq.hpp"
#include "dropforge/image.hpp"
#include "dropforge/nn.hpp"
#include "dropforge/quant.hpp"
#include "dropforge/rng.hpp"

namespace dropforge {

enum class AttackMode { kUntargeted, kTargeted };

struct AdvDropConfig {
  int eps = 60;    // upper bound on every quantization step
  int steps = 50;  // optimisation steps; suggested 500 for targeted runs
  AttackMode mode = AttackMode::kUntargeted;
  // Targeted class. When negative in targeted mode, one is drawn with
  // sample_target from (seed, 0).
  int target = -1;
  double alpha_start = 0.5;
  double alpha_end = 0.01;
  Quantizer quantizer = Quantizer::kOurs;
  bool shared_table = false;  // one 8x8 table for all blocks and channels
  bool early_exit = true;     // stop at the first successful hard reconstruction
  std::uint64_t seed = 0;
  QuantBounds bounds;

  void validate() const;
};

struct StepTelemetry {
  double loss = 0.0;   // loss of the soft reconstruction before the update
  int predicted = -1;  // class of the hard reconstruction after the update
  double alpha = 0.0;
};

struct AttackResult {
  Image adversarial;
  QTable q_final;
  bool success = false;
  std::optional<int> success_step;  // 1-based count of updates
  int target = -1;
  int predicted = -1;
  std::vector<StepTelemetry> telemetry;
};

// Sign-gradient descent on the quantization table of the block DCT; success
// is judged on the staircase reconstruction. Returns the first successful
// table, or the table whose hard reconstruction had the lowest loss.
AttackResult advdrop(const ConvNet& model, const Image& img, int label, const AdvDropConfig& cfg);

Image reconstruct_hard(const Image& img, const QTable& q, const QuantBounds& bounds = {});

enum class Norm { kLinf, kL2 };

struct PgdConfig {
  Norm norm = Norm::kLinf;
  double eps = 4.0 / 255.0;  // in [0,1] intensity units
  int steps = 10;
  double step_size = 1.0 / 255.0;
  bool random_start = true;  // off gives BIM
  std::uint64_t seed = 0;
};

// Untargeted, ascending cross-entropy.
Image fgsm(const ConvNet& model, const Image& img, int label, double eps);
Tensor3 pgd_tensor(const ConvNet& model, const Tensor3& x, int label, const PgdConfig& cfg);
Image pgd(const ConvNet& model, const Image& img, int label, const PgdConfig& cfg);

// Uniform over classes other than label.
int sample_target(int label, int class_count, RngStream& rng);

}  // namespace dropforge
