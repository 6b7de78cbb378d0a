#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dropforge/attack.hpp"
#include "dropforge/dataset.hpp"
#include "dropforge/defense.hpp"
#include "dropforge/nn.hpp"
#include "dropforge/report.hpp"

namespace dropforge {

enum class AttackKind { kNone, kAdvDrop, kFgsm, kPgdLinf, kPgdL2, kBim };

struct AttackSpec {
  AttackKind kind = AttackKind::kAdvDrop;
  AdvDropConfig advdrop;
  double linf_eps = 4.0 / 255.0;
  double l2_eps = 1.0;
  int pgd_steps = 10;
  // Fraction of the budget moved per PGD/BIM step.
  double step_fraction = 0.25;

  // "advdrop", "advdrop:shin", "pgd-linf", ... as written to the report.
  std::string name() const;
  // Budget in the attack's own units: q bound for AdvDrop, 8-bit levels for
  // l_inf attacks, [0,1]-scale norm for l2.
  std::string eps_label() const;
  std::string mode_label() const;
  AttackMode mode() const;

  // Accepts none|advdrop|fgsm|pgd-linf|pgd-l2|bim.
  static AttackKind parse_kind(const std::string& text);
};

struct AttackOutcome {
  Image adversarial;
  int target = -1;
  std::optional<int> steps_to_success;
  std::optional<QTable> q;  // AdvDrop only
};

// `seed` drives every random draw for this image (target, random start).
AttackOutcome run_attack(const ConvNet& model, const Image& img, int label, const AttackSpec& spec,
                         std::uint64_t seed);

// Indices of the first `count` images the model classifies correctly
// (all of them when count == 0).
std::vector<std::size_t> select_correct(const ConvNet& model, const Dataset& data, std::size_t count);

// Runs fn(i) for i in [0, n) on a pool of `threads` workers (0 = hardware
// concurrency). fn must only write to per-index state.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

std::uint64_t image_seed(std::uint64_t global_seed, std::size_t id);

struct ExperimentConfig {
  std::vector<AttackSpec> attacks;
  std::vector<Defense> defenses{Defense{}};
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::filesystem::path out_dir;  // empty: no artifacts written
  bool save_images = false;
  bool save_heatmaps = false;
  // Defaults to the attacked model; set for black-box transfer evaluation.
  const ConvNet* eval_model = nullptr;
};

struct HeatmapSummary {
  int id = 0;
  bool success = false;
  double total = 0.0;
  double high_fraction = 0.0;
  double low_fraction = 0.0;
};

struct ExperimentResult {
  Report report;
  std::vector<HeatmapSummary> heatmaps;  // AdvDrop rows when save_heatmaps or always for advdrop
};

// For every corpus image and attack, crafts x' once on `model`, then for
// every defense evaluates the defended x' on the evaluation model. Attack
// "none" uses the clean image, so its rows measure clean accuracy.
ExperimentResult run_experiment(const ConvNet& model, const Dataset& corpus, const ExperimentConfig& cfg);

}  // namespace dropforge
