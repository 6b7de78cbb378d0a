#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dropforge/dataset.hpp"
#include "dropforge/defense.hpp"
#include "dropforge/error.hpp"
#include "dropforge/experiment.hpp"
#include "dropforge/nn.hpp"
#include "dropforge/png.hpp"
#include "dropforge/report.hpp"

namespace fs = std::filesystem;
using namespace dropforge;

namespace {

struct Options {
  // data
  int classes = 10;
  int per_class = 600;
  int side = 32;
  std::uint64_t data_seed = 1;
  std::string raw;
  int channels = 3;
  double holdout = 0.2;
  std::size_t count = 200;
  std::string corpus;  // "correct" or "all"; empty picks the command default

  // model
  std::string weights;
  std::string eval_weights;
  int epochs = 8;
  int batch_size = 32;
  double lr = 2e-3;
  bool adversarial_training = false;

  // attack
  std::vector<std::string> attacks;
  std::vector<std::string> defenses;
  int eps = 60;
  int steps = 50;
  std::string mode = "untargeted";
  std::string quantizer = "ours";
  bool shared_table = false;
  double linf_eps = 4.0;  // 8-bit levels
  double l2_eps = 1.0;
  int pgd_steps = 10;

  // sweeps
  std::vector<int> quality_list{10, 30, 50, 70, 90};
  std::vector<int> bits_list{2, 3, 4, 5, 6, 7, 8};
  std::string band;

  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out = "out";
  bool save_images = false;
};

Dataset load_pool(const Options& o) {
  return o.raw.empty() ? synth_dataset(o.classes, o.per_class, o.side, o.data_seed)
                       : load_raw_dataset(o.raw, o.side, o.channels, o.classes);
}

// Held-out part of the data pool; training uses the other part.
Dataset held_out(const Options& o) { return split_dataset(load_pool(o), o.holdout, o.data_seed).second; }

ConvNet load_model(const std::string& path) {
  if (path.empty()) fail(ErrorKind::kUsage, "--weights is required");
  if (!fs::exists(path)) fail(ErrorKind::kFile, "weights file not found: " + path);
  return load_weights(read_bytes(path));
}

Quantizer parse_quantizer(const std::string& s) {
  if (s == "hard") return Quantizer::kHard;
  if (s == "shin") return Quantizer::kShin;
  if (s == "ours") return Quantizer::kOurs;
  fail(ErrorKind::kUsage, "unknown quantizer '" + s + "'");
}

AttackMode parse_mode(const std::string& s) {
  if (s == "untargeted") return AttackMode::kUntargeted;
  if (s == "targeted") return AttackMode::kTargeted;
  fail(ErrorKind::kUsage, "unknown mode '" + s + "'");
}

AttackSpec make_spec(const Options& o, const std::string& name) {
  AttackSpec spec;
  spec.kind = AttackSpec::parse_kind(name);
  spec.advdrop.eps = o.eps;
  spec.advdrop.steps = o.steps;
  spec.advdrop.mode = parse_mode(o.mode);
  spec.advdrop.quantizer = parse_quantizer(o.quantizer);
  spec.advdrop.shared_table = o.shared_table;
  spec.advdrop.validate();
  spec.linf_eps = o.linf_eps / 255.0;
  spec.l2_eps = o.l2_eps;
  spec.pgd_steps = o.pgd_steps;
  if (spec.linf_eps < 0.0 || spec.l2_eps < 0.0 || spec.pgd_steps < 0)
    fail(ErrorKind::kConfig, "baseline budgets must be non-negative");
  return spec;
}

std::vector<Defense> parse_defenses(const std::vector<std::string>& names) {
  std::vector<Defense> out;
  for (const auto& n : names) out.push_back(Defense::parse(n));
  if (out.empty()) out.push_back(Defense{});
  return out;
}

void record_config(Report& rep, const std::string& command, const Options& o, std::size_t corpus_size,
                   const std::string& corpus_kind) {
  rep.set_config("command", command);
  rep.set_config("data", o.raw.empty() ? "synth" : "raw:" + o.raw);
  rep.set_config("classes", std::to_string(o.classes));
  rep.set_config("per_class", std::to_string(o.per_class));
  rep.set_config("side", std::to_string(o.side));
  rep.set_config("data_seed", std::to_string(o.data_seed));
  rep.set_config("holdout", std::to_string(o.holdout));
  rep.set_config("corpus", corpus_kind + ":" + std::to_string(corpus_size));
  rep.set_config("weights", fs::path(o.weights).filename().string());
  if (!o.eval_weights.empty()) rep.set_config("eval_weights", fs::path(o.eval_weights).filename().string());
  rep.set_config("eps", std::to_string(o.eps));
  rep.set_config("steps", std::to_string(o.steps));
  rep.set_config("mode", o.mode);
  rep.set_config("quantizer", o.quantizer);
  rep.set_config("shared_table", o.shared_table ? "1" : "0");
  rep.set_config("linf_eps", std::to_string(o.linf_eps));
  rep.set_config("l2_eps", std::to_string(o.l2_eps));
  rep.set_config("pgd_steps", std::to_string(o.pgd_steps));
  rep.set_config("seed", std::to_string(o.seed));
}

struct Plan {
  std::vector<AttackSpec> attacks;
  std::vector<Defense> defenses;
  std::string default_corpus = "correct";
  bool heatmaps = false;
};

int run_plan(const std::string& command, const Options& o, const Plan& plan) {
  const ConvNet model = load_model(o.weights);
  std::optional<ConvNet> judge;
  if (!o.eval_weights.empty()) judge = load_model(o.eval_weights);

  const Dataset pool = held_out(o);
  const std::string kind = o.corpus.empty() ? plan.default_corpus : o.corpus;
  std::vector<std::size_t> idx;
  if (kind == "correct") {
    idx = select_correct(model, pool, o.count);
  } else if (kind == "all") {
    for (std::size_t i = 0; i < pool.size() && (o.count == 0 || i < o.count); ++i) idx.push_back(i);
  } else {
    fail(ErrorKind::kUsage, "--corpus must be correct or all");
  }
  if (idx.empty()) fail(ErrorKind::kConfig, "corpus is empty");
  if (o.count != 0 && idx.size() < o.count)
    std::cerr << "warning: only " << idx.size() << " images available for the corpus\n";
  const Dataset corpus = subset(pool, idx);

  ExperimentConfig cfg;
  cfg.attacks = plan.attacks;
  cfg.defenses = plan.defenses;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.out_dir = o.out;
  cfg.save_images = o.save_images;
  cfg.save_heatmaps = plan.heatmaps;
  cfg.eval_model = judge ? &*judge : nullptr;

  ExperimentResult res = run_experiment(model, corpus, cfg);
  record_config(res.report, command, o, corpus.size(), kind);
  fs::create_directories(o.out);
  res.report.write(fs::path(o.out) / "report.csv");

  if (plan.heatmaps) {
    std::ofstream f(fs::path(o.out) / "dropped_info.csv", std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::kFile, "cannot write dropped_info.csv");
    f << "id,success,total,high_fraction,low_fraction\n";
    char buf[160];
    double high = 0.0, low = 0.0;
    for (const auto& h : res.heatmaps) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.4f,%.6f,%.6f\n", h.id, h.success ? 1 : 0, h.total,
                    h.high_fraction, h.low_fraction);
      f << buf;
      high += h.high_fraction;
      low += h.low_fraction;
    }
    if (!res.heatmaps.empty()) {
      const double n = static_cast<double>(res.heatmaps.size());
      std::printf("mean dropped fraction: high %.4f low %.4f\n", high / n, low / n);
    }
  }

  for (const auto& a : res.report.aggregates())
    std::printf("%-14s eps=%-6s %-10s %-10s n=%-4zu success=%6.2f +- %5.2f recovered=%6.2f psnr=%6.2f\n",
                a.attack.c_str(), a.eps.c_str(), a.mode.c_str(), a.defense.c_str(), a.n, a.success_rate,
                a.std_error, a.recovered_rate, a.median_psnr_db);
  return 0;
}

int run_train(const Options& o) {
  const auto [train_set, test_set] = split_dataset(load_pool(o), o.holdout, o.data_seed);
  const int ch = train_set.images.front().channels();
  const int classes = o.classes;
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.learning_rate = o.lr;
  cfg.seed = o.seed;
  cfg.adversarial = o.adversarial_training;
  cfg.validate();

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res = train(ConvNet::make_default(ch, o.side, classes, o.seed), train_set, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double acc = accuracy(res.model, test_set);

  fs::create_directories(o.out);
  const fs::path weights = o.weights.empty() ? fs::path(o.out) / "model.dfw" : fs::path(o.weights);
  write_bytes(weights, save_weights(res.model));

  std::ostringstream csv;
  csv << "# dropforge-train v1\n";
  csv << "# config: classes=" << classes << " per_class=" << o.per_class << " side=" << o.side
      << " data_seed=" << o.data_seed << " epochs=" << o.epochs << " seed=" << o.seed << '\n';
  csv << "epoch,loss,accuracy\n";
  char buf[96];
  for (std::size_t e = 0; e < res.history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", e + 1, res.history[e].loss, res.history[e].accuracy);
    csv << buf;
  }
  std::snprintf(buf, sizeof buf, "# held_out_accuracy=%.6f\n", acc);
  csv << buf;
  const std::string text = csv.str();
  write_bytes(fs::path(o.out) / "train.csv", std::vector<std::uint8_t>(text.begin(), text.end()));

  std::printf("held-out accuracy %.4f (%zu images), %.1f s, weights %s\n", acc, test_set.size(), secs,
              weights.string().c_str());
  return 0;
}

void add_data_flags(CLI::App* app, Options& o) {
  app->add_option("--classes", o.classes, "Number of classes")->check(CLI::Range(2, 256));
  app->add_option("--per-class", o.per_class, "Synthetic images per class")->check(CLI::PositiveNumber);
  app->add_option("--side", o.side, "Image side in pixels (multiple of 8)")->check(CLI::PositiveNumber);
  app->add_option("--data-seed", o.data_seed, "Dataset and split seed");
  app->add_option("--raw", o.raw, "Raw record file instead of synthetic data");
  app->add_option("--channels", o.channels, "Channels of raw records")->check(CLI::IsMember({1, 3}));
  app->add_option("--holdout", o.holdout, "Held-out fraction")->check(CLI::Range(0.0, 1.0));
  app->add_option("--seed", o.seed, "Global seed");
  app->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  app->add_option("--out", o.out, "Output directory");
}

void add_attack_flags(CLI::App* app, Options& o, bool with_attack_list, bool with_defense_list) {
  app->add_option("--weights", o.weights, "Model weights (DFW1)")->required();
  app->add_option("--eval-weights", o.eval_weights, "Separate model for evaluation (transfer)");
  app->add_option("--count", o.count, "Corpus size (0 = every eligible image)");
  app->add_option("--corpus", o.corpus, "correct | all")->check(CLI::IsMember({"correct", "all"}));
  app->add_option("--eps", o.eps, "AdvDrop bound on quantization steps");
  app->add_option("--steps", o.steps, "AdvDrop optimisation steps");
  app->add_option("--mode", o.mode, "untargeted | targeted")->check(CLI::IsMember({"untargeted", "targeted"}));
  app->add_option("--quantizer", o.quantizer, "hard | shin | ours")->check(CLI::IsMember({"hard", "shin", "ours"}));
  app->add_flag("--shared-table", o.shared_table, "One 8x8 table for the whole image");
  app->add_option("--linf-eps", o.linf_eps, "l_inf budget of baselines, in 8-bit levels");
  app->add_option("--l2-eps", o.l2_eps, "l_2 budget of pgd-l2 on the [0,1] scale");
  app->add_option("--pgd-steps", o.pgd_steps, "Iterations of pgd and bim");
  app->add_flag("--save-images", o.save_images, "Write adversarial PNGs into --out");
  if (with_attack_list)
    app->add_option("--attack", o.attacks, "Attacks: none,advdrop,fgsm,pgd-linf,pgd-l2,bim")->delimiter(',');
  if (with_defense_list)
    app->add_option("--defense", o.defenses, "Defenses: none,mf<k>,bit:<b>,jpeg:<q>,pd,band:<b>")->delimiter(',');
}

std::vector<AttackSpec> specs(const Options& o, std::vector<std::string> names,
                              const std::vector<std::string>& fallback) {
  if (names.empty()) names = fallback;
  std::vector<AttackSpec> out;
  for (const auto& n : names) out.push_back(make_spec(o, n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dropforge: information-dropping adversarial attacks, baselines and defenses"};
  app.require_subcommand(1);
  Options o;

  auto* train_cmd = app.add_subcommand("train", "Train the default classifier on the data pool");
  add_data_flags(train_cmd, o);
  train_cmd->add_option("--weights", o.weights, "Output weights path (default <out>/model.dfw)");
  train_cmd->add_option("--epochs", o.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  train_cmd->add_option("--lr", o.lr, "Adam learning rate");
  train_cmd->add_flag("--adversarial", o.adversarial_training, "PGD adversarial training");

  auto* attack_cmd = app.add_subcommand("attack", "Craft adversarial examples and score them");
  add_data_flags(attack_cmd, o);
  add_attack_flags(attack_cmd, o, true, true);

  auto* defend_cmd = app.add_subcommand("defend", "Score attacks under input-transformation defenses");
  add_data_flags(defend_cmd, o);
  add_attack_flags(defend_cmd, o, true, true);

  auto* quant_cmd = app.add_subcommand("ablate-quantizer", "AdvDrop with hard, shin and ours quantizers");
  add_data_flags(quant_cmd, o);
  add_attack_flags(quant_cmd, o, false, true);

  auto* bits_cmd = app.add_subcommand("ablate-bits", "Accuracy under bit-depth reduction");
  add_data_flags(bits_cmd, o);
  add_attack_flags(bits_cmd, o, true, false);
  bits_cmd->add_option("--bits-list", o.bits_list, "Bit depths")->delimiter(',')->check(CLI::Range(1, 8));

  auto* bands_cmd = app.add_subcommand("ablate-bands", "Accuracy after dropping DCT frequency bands");
  add_data_flags(bands_cmd, o);
  add_attack_flags(bands_cmd, o, true, false);
  bands_cmd->add_option("--band", o.band, "Single band: low | mid | high")->check(CLI::IsMember({"low", "mid", "high"}));

  auto* jpeg_cmd = app.add_subcommand("jpeg-sweep", "Recovered rate under JPEG at several qualities");
  add_data_flags(jpeg_cmd, o);
  add_attack_flags(jpeg_cmd, o, true, false);
  jpeg_cmd->add_option("--quality-list", o.quality_list, "JPEG qualities")->delimiter(',')->check(CLI::Range(1, 100));

  auto* heat_cmd = app.add_subcommand("heatmap", "Dropped-information maps of AdvDrop outputs");
  add_data_flags(heat_cmd, o);
  add_attack_flags(heat_cmd, o, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) return run_train(o);

    Plan plan;
    std::string command;
    if (*attack_cmd) {
      command = "attack";
      plan.attacks = specs(o, o.attacks, {"advdrop"});
      plan.defenses = parse_defenses(o.defenses);
    } else if (*defend_cmd) {
      command = "defend";
      plan.attacks = specs(o, o.attacks, {"advdrop"});
      plan.defenses = parse_defenses(o.defenses.empty()
                                         ? std::vector<std::string>{"none", "mf3", "bit:4", "jpeg:75", "pd"}
                                         : o.defenses);
    } else if (*quant_cmd) {
      command = "ablate-quantizer";
      for (const char* q : {"ours", "shin", "hard"}) {
        Options v = o;
        v.quantizer = q;
        plan.attacks.push_back(make_spec(v, "advdrop"));
      }
      plan.defenses = parse_defenses(o.defenses);
    } else if (*bits_cmd) {
      command = "ablate-bits";
      plan.attacks = specs(o, o.attacks, {"none"});
      for (int b : o.bits_list) plan.defenses.push_back(Defense::parse("bit:" + std::to_string(b)));
      plan.default_corpus = "all";
    } else if (*bands_cmd) {
      command = "ablate-bands";
      plan.attacks = specs(o, o.attacks, {"none"});
      plan.defenses.push_back(Defense{});
      for (const char* b : {"low", "mid", "high"})
        if (o.band.empty() || o.band == b) plan.defenses.push_back(Defense::parse(std::string("band:") + b));
      plan.default_corpus = "all";
    } else if (*jpeg_cmd) {
      command = "jpeg-sweep";
      plan.attacks = specs(o, o.attacks, {"advdrop", "pgd-linf"});
      for (int q : o.quality_list) plan.defenses.push_back(Defense::parse("jpeg:" + std::to_string(q)));
    } else if (*heat_cmd) {
      command = "heatmap";
      plan.attacks = {make_spec(o, "advdrop")};
      plan.defenses = {Defense{}};
      plan.heatmaps = true;
    }
    return run_plan(command, o, plan);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return e.kind() == ErrorKind::kUsage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
