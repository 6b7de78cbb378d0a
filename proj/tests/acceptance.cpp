// Acceptance suite: one PASS/FAIL line per criterion. Experiment criteria
// drive the dropforge CLI and read back its report.csv files.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dropforge/dataset.hpp"
#include "dropforge/defense.hpp"
#include "dropforge/freq.hpp"
#include "dropforge/nn.hpp"
#include "dropforge/png.hpp"
#include "dropforge/quant.hpp"
#include "dropforge/rng.hpp"
#include "reference_net.hpp"

namespace fs = std::filesystem;
using namespace dropforge;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and thresholds.
constexpr double kDctRoundTripTol = 1e-4;
constexpr double kParsevalTol = 1e-3;
constexpr double kDctSeconds = 1.0;
constexpr double kConvergenceTol = 0.01;  // times q
constexpr double kPhiNormTol = 1e-9;
constexpr double kQuantGradTol = 1e-3;
constexpr double kNetGradTol = 1e-2;
constexpr double kMinAccuracy = 0.85;
constexpr double kTrainSeconds = 300.0;
constexpr double kMinAdvDropSuccess = 80.0;
constexpr double kEpsSlack = 2.0;
constexpr double kAttackSeconds = 600.0;
constexpr int kCorpus = 200;

struct Row {
  int id = 0;
  std::string attack, eps, mode, defense;
  bool success = false;
  double psnr = 0.0;
  double clean_bytes = 0.0, adv_bytes = 0.0;
};

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<Row> read_report(const fs::path& path) {
  std::ifstream f(path);
  std::vector<Row> rows;
  bool header = false;
  for (std::string line; std::getline(f, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto v = split(line);
    if (v.size() != 10) continue;
    Row r;
    r.id = std::stoi(v[0]);
    r.attack = v[1];
    r.eps = v[2];
    r.mode = v[3];
    r.defense = v[4];
    r.success = v[6] == "1";
    r.psnr = std::stod(v[7]);
    r.clean_bytes = std::stod(v[8]);
    r.adv_bytes = std::stod(v[9]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<Row> select(const std::vector<Row>& rows, const std::string& attack, const std::string& defense) {
  std::vector<Row> out;
  for (const auto& r : rows)
    if (r.attack == attack && r.defense == defense) out.push_back(r);
  return out;
}

double success_pct(const std::vector<Row>& rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto n = std::count_if(rows.begin(), rows.end(), [](const Row& r) { return r.success; });
  return 100.0 * static_cast<double>(n) / static_cast<double>(rows.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct Suite {
  fs::path cli;
  fs::path work;
  int failures = 0;
  std::map<std::string, double> cli_seconds;

  void report(int id, bool pass, const std::string& name, const std::string& detail) {
    std::printf("%s %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }

  // Runs the CLI with output captured to <out>.log; returns wall seconds or
  // a negative value when the command failed.
  double run(const std::string& args, const std::string& tag) {
    const fs::path log = work / (tag + ".log");
    const std::string cmd = "\"" + cli.string() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (rc != 0) {
      std::fprintf(stderr, "command failed (%d): %s\n%s", rc, cmd.c_str(), slurp(log).c_str());
      return -1.0;
    }
    return secs;
  }

  std::string out(const std::string& tag) const { return "\"" + (work / tag).string() + "\""; }
  fs::path report_of(const std::string& tag) const { return work / tag / "report.csv"; }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1
void transform_fidelity(Suite& s) {
  const auto t0 = Clock::now();
  RngStream rng(1001, 0);
  double worst = 0.0, worst_energy = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<float, kBlockArea> xf{};
    std::array<double, kBlockArea> x{}, c{}, back{};
    for (int i = 0; i < kBlockArea; ++i) {
      xf[i] = static_cast<float>(rng.uniform(-128.0, 127.0));
      x[i] = xf[i];
    }
    dct8x8(x, c);
    double ex = 0.0, ec = 0.0;
    for (int i = 0; i < kBlockArea; ++i) {
      ex += x[i] * x[i];
      ec += c[i] * c[i];
    }
    worst_energy = std::max(worst_energy, std::abs(ex - ec) / ex);
    for (auto& v : c) v = static_cast<float>(v);
    idct8x8(c, back);
    for (int i = 0; i < kBlockArea; ++i)
      worst = std::max(worst, static_cast<double>(std::abs(static_cast<float>(back[i]) - xf[i])));
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool pass = worst <= kDctRoundTripTol && worst_energy <= kParsevalTol && secs < kDctSeconds;
  s.report(1, pass, "transform fidelity",
           "max err " + fmt("%.2e", worst) + ", energy rel " + fmt("%.2e", worst_energy) + ", " +
               fmt("%.3f s", secs));
}

double sup_gap(int q, double alpha) {
  double worst = 0.0;
  const int samples = 200000;
  const double lo = -50.0 * q, hi = 50.0 * q;
  for (int i = 0; i <= samples; ++i) {
    const double c = lo + (hi - lo) * i / samples;
    const double t = c / q;
    if (std::abs(t - std::floor(t) - 0.5) < 0.05) continue;
    worst = std::max(worst, std::abs(quantize_diff(c, q, alpha) - quantize_staircase(c, q)));
  }
  return worst;
}

// 2
void quantizer_convergence(Suite& s) {
  bool bound_ok = true, order_ok = true;
  std::string detail;
  for (int q : {1, 2, 5, 20}) {
    double prev = std::numeric_limits<double>::infinity();
    double at_min = 0.0;
    for (double alpha : {0.3, 0.1, 0.01, 1e-4}) {
      const double e = sup_gap(q, alpha);
      if (!(e < prev)) order_ok = false;
      prev = e;
      at_min = e;
    }
    if (at_min > kConvergenceTol * q) bound_ok = false;
    detail += "q=" + std::to_string(q) + ":" + fmt("%.4f", at_min / q) + "q ";
  }
  s.report(2, bound_ok && order_ok, "quantizer convergence",
           "sup gap at alpha=1e-4 " + detail + "(limit 0.01q), decreasing " + (order_ok ? "yes" : "no"));
}

// 3
void phi_identities(Suite& s) {
  double worst_norm = 0.0, worst_edge = 0.0;
  for (double alpha : {0.5, 0.3, 0.1, 0.01}) {
    worst_norm = std::max(worst_norm, std::abs(std::tanh(steepness(alpha) / 2.0) / (1.0 - alpha) - 1.0));
    for (double cell : {-2.0, 0.0, 3.0}) {
      worst_edge = std::max(worst_edge, std::abs(phi(cell, alpha)));
      worst_edge = std::max(worst_edge, std::abs(phi(cell + 0.5, alpha) - 0.5));
      worst_edge = std::max(worst_edge, std::abs(phi(cell + 1.0 - 1e-12, alpha) - 1.0));
    }
  }
  s.report(3, worst_norm <= kPhiNormTol && worst_edge <= 1e-9, "phi identities",
           "normalisation " + fmt("%.1e", worst_norm) + ", edges " + fmt("%.1e", worst_edge));
}

// 4
void gradient_checks(Suite& s) {
  RngStream rng(1004, 0);
  double worst_q = 0.0;
  for (int checked = 0; checked < 1000;) {
    const double c = rng.uniform(-500, 500);
    const int q = 1 + static_cast<int>(rng.uniform_index(60));
    const double alpha = rng.uniform(0.01, 0.5);
    const double t = c / q;
    if (std::abs(t - std::round(t)) < 0.02) continue;
    const auto g = d_quantize_diff(c, q, alpha);
    const double h = 1e-5 * q;
    const double fd_c = (quantize_diff(c + h, q, alpha) - quantize_diff(c - h, q, alpha)) / (2 * h);
    auto soft_q = [&](double qq) { return (phi(c / qq, alpha) + std::floor(c / qq)) * qq; };
    const double hq = 1e-6 * q;
    const double fd_q = (soft_q(q + hq) - soft_q(q - hq)) / (2 * hq);
    worst_q = std::max(worst_q, std::abs(g.d_coeff - fd_c) / std::max(1e-6, std::abs(fd_c)));
    worst_q = std::max(worst_q, std::abs(g.d_step - fd_q) / std::max(1e-6, std::abs(fd_q)));
    ++checked;
  }

  const ConvNet m = ConvNet::make_default(3, 32, 10, 1005);
  Tensor3 x(3, 32, 32);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform());
  const int label = 4;
  const auto lg = m.loss_and_input_grad(x, label, LossMode::kUntargeted);
  double worst_net = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 1000 && checked < 100; ++trial) {
    const auto i = rng.uniform_index(x.size());
    auto fd_at = [&](double h) {
      Tensor3 a = x, b = x;
      a.data[i] = static_cast<float>(x.data[i] + h);
      b.data[i] = static_cast<float>(x.data[i] - h);
      // untargeted loss is +log p(label)
      return (testing::reference_log_prob(m, a, label) - testing::reference_log_prob(m, b, label)) /
             (static_cast<double>(a.data[i]) - b.data[i]);
    };
    const double fd = fd_at(1e-3), fd_half = fd_at(5e-4);
    if (std::abs(fd - fd_half) > 1e-3 * (std::abs(fd) + 1e-6)) continue;  // kink inside the stencil
    worst_net = std::max(worst_net, std::abs(lg.grad.data[i] - fd) / (std::abs(lg.grad.data[i]) + 1e-6));
    ++checked;
  }
  const bool pass = worst_q <= kQuantGradTol && worst_net <= kNetGradTol && checked == 100;
  s.report(4, pass, "gradient checks",
           "quantizer rel " + fmt("%.2e", worst_q) + " (1000 pts), classifier rel " + fmt("%.2e", worst_net) +
               " (" + std::to_string(checked) + " coords)");
}

// 5
bool model_quality(Suite& s, fs::path& weights) {
  const double secs = s.run("train --out " + s.out("train"), "train");
  weights = s.work / "train" / "model.dfw";
  if (secs < 0.0 || !fs::exists(weights)) {
    s.report(5, false, "model quality", "training command failed");
    return false;
  }
  const ConvNet model = load_weights(read_bytes(weights));
  const auto held = split_dataset(synth_dataset(10, 600, 32, 1), 0.2, 1).second;
  const double acc = accuracy(model, held);
  s.report(5, acc >= kMinAccuracy && secs < kTrainSeconds, "model quality",
           "held-out accuracy " + fmt("%.4f", acc) + " on " + std::to_string(held.size()) + " images, " +
               fmt("%.1f s", secs));
  return true;
}

std::string model_flag(const fs::path& w) { return " --weights \"" + w.string() + "\""; }

// 6 and 10
void attack_effectiveness(Suite& s, const fs::path& w) {
  const std::string base = "attack --attack advdrop --mode untargeted --steps 50 --count " +
                           std::to_string(kCorpus) + model_flag(w);
  double total = 0.0;
  std::map<int, double> rate;
  bool ran = true;
  for (int eps : {20, 60, 100}) {
    const std::string tag = "untargeted_eps" + std::to_string(eps);
    const double secs = s.run(base + " --eps " + std::to_string(eps) + " --out " + s.out(tag), tag);
    ran &= secs >= 0.0;
    total += std::max(secs, 0.0);
    const auto rows = select(read_report(s.report_of(tag)), "advdrop", "none");
    ran &= rows.size() == static_cast<std::size_t>(kCorpus);
    rate[eps] = success_pct(rows);
  }
  const std::string targeted = "attack --attack advdrop --mode targeted --eps 60 --count " +
                               std::to_string(kCorpus) + model_flag(w);
  std::map<int, double> trate;
  for (int steps : {50, 500}) {
    const std::string tag = "targeted_steps" + std::to_string(steps);
    ran &= s.run(targeted + " --steps " + std::to_string(steps) + " --out " + s.out(tag), tag) >= 0.0;
    trate[steps] = success_pct(select(read_report(s.report_of(tag)), "advdrop", "none"));
  }
  const bool ordered = rate[20] <= rate[60] + kEpsSlack && rate[60] <= rate[100] + kEpsSlack;
  const bool pass = ran && rate[60] >= kMinAdvDropSuccess && ordered && total < kAttackSeconds &&
                    trate[500] > trate[50];
  s.report(6, pass, "attack effectiveness",
           "untargeted eps20/60/100 = " + fmt("%.1f", rate[20]) + "/" + fmt("%.1f", rate[60]) + "/" +
               fmt("%.1f%%", rate[100]) + " (need eps60 >= 80), " + fmt("%.0f s", total) +
               "; targeted 50 vs 500 steps = " + fmt("%.1f", trate[50]) + " vs " + fmt("%.1f%%", trate[500]));
}

void information_drop(Suite& s, const fs::path& w) {
  const auto rows = select(read_report(s.report_of("untargeted_eps60")), "advdrop", "none");
  std::vector<double> clean, adv;
  for (const auto& r : rows) {
    clean.push_back(r.clean_bytes);
    adv.push_back(r.adv_bytes);
  }
  const double mc = median_of(clean), ma = median_of(adv);

  const std::string tag = "heatmap";
  bool ran = s.run("heatmap --eps 60 --steps 50 --count " + std::to_string(kCorpus) + model_flag(w) +
                       " --out " + s.out(tag),
                   tag) >= 0.0;
  std::ifstream f(s.work / tag / "dropped_info.csv");
  double high = 0.0, low = 0.0;
  int n = 0;
  std::string line;
  std::getline(f, line);
  while (std::getline(f, line)) {
    const auto v = split(line);
    if (v.size() != 5) continue;
    high += std::stod(v[3]);
    low += std::stod(v[4]);
    ++n;
  }
  ran &= n == kCorpus && !rows.empty();
  if (n > 0) {
    high /= n;
    low /= n;
  }
  s.report(10, ran && ma <= mc && high > low, "information-drop signature",
           "median PNG bytes adv " + fmt("%.1f", ma) + " vs clean " + fmt("%.1f", mc) +
               "; dropped fraction high " + fmt("%.4f", high) + " vs low " + fmt("%.4f", low));
}

// 7
void quantizer_ablation(Suite& s, const fs::path& w) {
  const std::string tag = "ablate_quantizer";
  const bool ran = s.run("ablate-quantizer --eps 20 --steps 50 --count " + std::to_string(kCorpus) +
                             model_flag(w) + " --out " + s.out(tag),
                         tag) >= 0.0;
  const auto rows = read_report(s.report_of(tag));
  const double ours = success_pct(select(rows, "advdrop", "none"));
  const double shin = success_pct(select(rows, "advdrop:shin", "none"));
  const double hard = success_pct(select(rows, "advdrop:hard", "none"));
  s.report(7, ran && ours > shin && shin > hard, "quantizer ablation",
           "ours/shin/hard = " + fmt("%.1f", ours) + "/" + fmt("%.1f", shin) + "/" + fmt("%.1f%%", hard));
}

double recovered_pct(const std::vector<Row>& rows) { return 100.0 - success_pct(rows); }

// 8
void defense_direction(Suite& s, const fs::path& w) {
  const std::string tag = "jpeg30";
  bool ran = s.run("jpeg-sweep --attack advdrop,pgd-linf --eps 60 --steps 50 --linf-eps 4 --quality-list 30 "
                   "--count " + std::to_string(kCorpus) + model_flag(w) + " --out " + s.out(tag),
                   tag) >= 0.0;
  const auto rows = read_report(s.report_of(tag));
  const double adv = recovered_pct(select(rows, "advdrop", "jpeg:30"));
  const double pgd = recovered_pct(select(rows, "pgd-linf", "jpeg:30"));

  const std::string btag = "bits";
  ran &= s.run("ablate-bits --bits-list 2,4,6 --corpus all --count 0" + model_flag(w) + " --out " + s.out(btag),
               btag) >= 0.0;
  const auto brows = read_report(s.report_of(btag));
  const double b2 = recovered_pct(select(brows, "none", "bit:2"));
  const double b4 = recovered_pct(select(brows, "none", "bit:4"));
  const double b6 = recovered_pct(select(brows, "none", "bit:6"));
  s.report(8, ran && adv < pgd && b2 < b4 && b4 < b6, "defense direction",
           "jpeg:30 recovered advdrop " + fmt("%.1f", adv) + " vs pgd-linf " + fmt("%.1f%%", pgd) +
               "; clean accuracy bits 2/4/6 = " + fmt("%.2f", b2) + "/" + fmt("%.2f", b4) + "/" +
               fmt("%.2f%%", b6));
}

// 9
void frequency_ablation(Suite& s, const fs::path& w) {
  const std::string tag = "bands";
  const bool ran =
      s.run("ablate-bands --corpus all --count 0" + model_flag(w) + " --out " + s.out(tag), tag) >= 0.0;
  const auto rows = read_report(s.report_of(tag));
  const double low = recovered_pct(select(rows, "none", "band:low"));
  const double mid = recovered_pct(select(rows, "none", "band:mid"));
  const double high = recovered_pct(select(rows, "none", "band:high"));
  s.report(9, ran && low < mid && low < high, "frequency ablation",
           "clean accuracy dropping low/mid/high = " + fmt("%.2f", low) + "/" + fmt("%.2f", mid) + "/" +
               fmt("%.2f%%", high));
}

// 11
void jpeg_tables_check(Suite& s) {
  // ITU-T T.81 K.1 and K.2, typed in independently of the library copy.
  static const int lum[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                              14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                              18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                              49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  static const int chr[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                              24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                              99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                              99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  const auto t50 = jpeg_tables(50);
  bool equal = true;
  for (int i = 0; i < 64; ++i) equal &= t50.luminance[i] == lum[i] && t50.chrominance[i] == chr[i];
  // Hand-computed spot values: scale 500 at q10, 20 at q90, 0 at q100 (clamped to 1).
  const auto t10 = jpeg_tables(10), t90 = jpeg_tables(90), t100 = jpeg_tables(100);
  const bool spots = t10.luminance[0] == 80 && t10.chrominance[0] == 85 && t90.luminance[0] == 3 &&
                     t90.luminance[63] == 20 && t100.luminance[0] == 1 && jpeg_tables(25).luminance[1] == 22;
  s.report(11, equal && spots, "jpeg table conformance",
           std::string("q50 equals base tables: ") + (equal ? "yes" : "no") + ", spot values " +
               (spots ? "match" : "differ") + " (q10 DC " + std::to_string(t10.luminance[0]) + ")");
}

// 12
void determinism(Suite& s, const fs::path& w) {
  struct Run {
    std::string tag, args;
  };
  const std::vector<Run> runs{
      {"untargeted_eps60", "attack --attack advdrop --mode untargeted --steps 50 --eps 60 --count " +
                               std::to_string(kCorpus)},
      {"mixed", "defend --attack advdrop,fgsm,pgd-linf,pgd-l2,bim --defense none,mf3,bit:4,jpeg:75,pd "
                "--steps 20 --count 40 --seed 9"},
      {"targeted_small", "attack --attack advdrop --mode targeted --steps 30 --count 40 --seed 3"},
  };
  bool same = true;
  int compared = 0;
  for (const auto& r : runs) {
    const std::string a = r.tag + "_a", b = r.tag + "_b";
    const fs::path first = r.tag == "untargeted_eps60" ? s.report_of(r.tag) : s.report_of(a);
    if (r.tag != "untargeted_eps60") same &= s.run(r.args + model_flag(w) + " --out " + s.out(a), a) >= 0.0;
    same &= s.run(r.args + model_flag(w) + " --out " + s.out(b), b) >= 0.0;
    const std::string x = slurp(first), y = slurp(s.report_of(b));
    same &= !x.empty() && x == y;
    ++compared;
  }
  s.report(12, same, "determinism",
           std::to_string(compared) + " commands rerun, report.csv " + (same ? "byte-identical" : "differs"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dropforge acceptance suite"};
  Suite s;
  std::string cli, work = "acceptance_work";
  app.add_option("--cli", cli, "Path to the dropforge executable")->required();
  app.add_option("--work", work, "Scratch directory for CLI outputs");
  CLI11_PARSE(app, argc, argv);
  s.cli = fs::absolute(cli);
  s.work = fs::absolute(work);
  fs::remove_all(s.work);
  fs::create_directories(s.work);

  const auto t0 = Clock::now();
  transform_fidelity(s);
  quantizer_convergence(s);
  phi_identities(s);
  gradient_checks(s);
  fs::path weights;
  const bool trained = model_quality(s, weights);
  if (trained) {
    attack_effectiveness(s, weights);
    quantizer_ablation(s, weights);
    defense_direction(s, weights);
    frequency_ablation(s, weights);
    information_drop(s, weights);
  } else {
    for (int id : {6, 7, 8, 9, 10}) s.report(id, false, "needs trained model", "skipped");
  }
  jpeg_tables_check(s);
  if (trained) determinism(s, weights);
  else s.report(12, false, "determinism", "skipped");

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("%d of 12 criteria failed (%.0f s)\n", s.failures, secs);
  return s.failures == 0 ? 0 : 1;
}
