#include "dropforge/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "dropforge/error.hpp"
#include "dropforge/metrics.hpp"
#include "dropforge/png.hpp"
#include "dropforge/rng.hpp"

namespace dropforge {

namespace {

std::string quantizer_name(Quantizer q) {
  switch (q) {
    case Quantizer::kHard: return "hard";
    case Quantizer::kShin: return "shin";
    case Quantizer::kOurs: return "ours";
  }
  return "ours";
}

std::string trim_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string file_token(std::string s) {
  std::replace(s.begin(), s.end(), ':', '-');
  return s;
}

}  // namespace

std::string AttackSpec::name() const {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kAdvDrop:
      return advdrop.quantizer == Quantizer::kOurs ? "advdrop" : "advdrop:" + quantizer_name(advdrop.quantizer);
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kPgdLinf: return "pgd-linf";
    case AttackKind::kPgdL2: return "pgd-l2";
    case AttackKind::kBim: return "bim";
  }
  return "none";
}

std::string AttackSpec::eps_label() const {
  switch (kind) {
    case AttackKind::kNone: return "0";
    case AttackKind::kAdvDrop: return std::to_string(advdrop.eps);
    case AttackKind::kFgsm:
    case AttackKind::kPgdLinf:
    case AttackKind::kBim: return trim_number(linf_eps * 255.0);
    case AttackKind::kPgdL2: return trim_number(l2_eps);
  }
  return "0";
}

AttackMode AttackSpec::mode() const {
  return kind == AttackKind::kAdvDrop ? advdrop.mode : AttackMode::kUntargeted;
}

std::string AttackSpec::mode_label() const {
  return mode() == AttackMode::kTargeted ? "targeted" : "untargeted";
}

AttackKind AttackSpec::parse_kind(const std::string& text) {
  if (text == "none") return AttackKind::kNone;
  if (text == "advdrop") return AttackKind::kAdvDrop;
  if (text == "fgsm") return AttackKind::kFgsm;
  if (text == "pgd-linf") return AttackKind::kPgdLinf;
  if (text == "pgd-l2") return AttackKind::kPgdL2;
  if (text == "bim") return AttackKind::kBim;
  fail(ErrorKind::kUsage, "unknown attack '" + text + "'");
}

std::uint64_t image_seed(std::uint64_t global_seed, std::size_t id) {
  return mix64(global_seed ^ mix64(static_cast<std::uint64_t>(id) + 0x1d));
}

AttackOutcome run_attack(const ConvNet& model, const Image& img, int label, const AttackSpec& spec,
                         std::uint64_t seed) {
  AttackOutcome out;
  switch (spec.kind) {
    case AttackKind::kNone:
      out.adversarial = img;
      break;
    case AttackKind::kAdvDrop: {
      AdvDropConfig cfg = spec.advdrop;
      cfg.seed = seed;
      auto r = advdrop(model, img, label, cfg);
      out.adversarial = std::move(r.adversarial);
      out.target = r.target;
      out.steps_to_success = r.success_step;
      out.q = std::move(r.q_final);
      break;
    }
    case AttackKind::kFgsm:
      out.adversarial = fgsm(model, img, label, spec.linf_eps);
      break;
    case AttackKind::kPgdLinf:
    case AttackKind::kBim:
    case AttackKind::kPgdL2: {
      PgdConfig p;
      p.norm = spec.kind == AttackKind::kPgdL2 ? Norm::kL2 : Norm::kLinf;
      p.eps = p.norm == Norm::kL2 ? spec.l2_eps : spec.linf_eps;
      p.steps = spec.pgd_steps;
      p.step_size = p.eps * spec.step_fraction;
      p.random_start = spec.kind != AttackKind::kBim;
      p.seed = seed;
      out.adversarial = pgd(model, img, label, p);
      break;
    }
  }
  return out;
}

std::vector<std::size_t> select_correct(const ConvNet& model, const Dataset& data, std::size_t count) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (count != 0 && idx.size() >= count) break;
    if (model.predict(data.images[i]) == data.labels[i]) idx.push_back(i);
  }
  return idx;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

ExperimentResult run_experiment(const ConvNet& model, const Dataset& corpus, const ExperimentConfig& cfg) {
  if (cfg.attacks.empty()) fail(ErrorKind::kConfig, "experiment needs at least one attack");
  if (cfg.defenses.empty()) fail(ErrorKind::kConfig, "experiment needs at least one defense");
  const ConvNet& judge = cfg.eval_model ? *cfg.eval_model : model;
  const bool write = !cfg.out_dir.empty();
  if (write) std::filesystem::create_directories(cfg.out_dir);

  struct Cell {
    std::vector<ReportRow> rows;
    std::vector<HeatmapSummary> heatmaps;
  };
  std::vector<Cell> cells(corpus.size());

  parallel_for(corpus.size(), cfg.threads, [&](std::size_t id) {
    const Image& clean = corpus.images[id];
    const int label = corpus.labels[id];
    const std::uint64_t seed = image_seed(cfg.seed, id);
    const std::size_t clean_bytes = byte_size(clean);
    Cell& cell = cells[id];
    for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
      const AttackSpec& spec = cfg.attacks[a];
      const AttackOutcome outcome = run_attack(model, clean, label, spec, mix64(seed + a));
      const std::string attack_name = spec.name();

      if (outcome.q) {
        const DroppedInfo info = dropped_info_map(clean, *outcome.q, spec.advdrop.bounds);
        cell.heatmaps.push_back({static_cast<int>(id), outcome.steps_to_success.has_value(),
                                 info.total, info.high_fraction, info.low_fraction});
        if (write && cfg.save_heatmaps)
          write_image(cfg.out_dir / (std::to_string(id) + "_" + file_token(attack_name) + "_heatmap.png"),
                      info.heatmap);
      }

      for (const Defense& defense : cfg.defenses) {
        const Image defended = apply_defense(outcome.adversarial, defense, mix64(seed ^ 0xd5));
        const int pred = judge.predict(defended);
        Outcome o{pred, label, spec.mode(), outcome.target};
        ReportRow row;
        row.id = static_cast<int>(id);
        row.attack = attack_name;
        row.eps = spec.eps_label();
        row.mode = spec.mode_label();
        row.defense = defense.name();
        row.steps_to_success = outcome.steps_to_success;
        row.success = o.success();
        row.correct = pred == label;
        row.psnr_db = psnr(clean, defended);
        row.clean_bytes = clean_bytes;
        row.adv_bytes = byte_size(defended);
        cell.rows.push_back(std::move(row));
        if (write && cfg.save_images && spec.kind != AttackKind::kNone)
          write_image(cfg.out_dir / (std::to_string(id) + "_" + file_token(attack_name) + "_" +
                                     file_token(defense.name()) + ".png"),
                      defended);
      }
    }
  });

  ExperimentResult result;
  for (auto& cell : cells) {
    for (auto& row : cell.rows) result.report.add(std::move(row));
    for (auto& h : cell.heatmaps) result.heatmaps.push_back(h);
  }
  return result;
}

}  // namespace dropforge
