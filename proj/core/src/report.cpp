#include "dropforge/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <tuple>
#include <sstream>

#include "dropforge/error.hpp"
#include "dropforge/metrics.hpp"

namespace dropforge {

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void Report::set_config(std::string key, std::string value) {
  for (auto& [k, v] : config_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  config_.emplace_back(std::move(key), std::move(value));
}

std::vector<Aggregate> Report::aggregates() const {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<const ReportRow*>> groups;
  for (const auto& r : rows_) {
    Key k{r.attack, r.eps, r.mode, r.defense};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(&r);
  }
  std::vector<Aggregate> out;
  for (const auto& k : order) {
    auto rows = groups[k];
    std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->id < b->id; });
    Aggregate a;
    std::tie(a.attack, a.eps, a.mode, a.defense) = k;
    a.n = rows.size();
    std::unique_ptr<bool[]> flags(new bool[rows.size()]);
    std::vector<double> psnrs, clean, adv;
    std::size_t correct = 0, succ_steps = 0;
    double step_sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      flags[i] = rows[i]->success;
      correct += rows[i]->correct ? 1 : 0;
      psnrs.push_back(rows[i]->psnr_db);
      clean.push_back(static_cast<double>(rows[i]->clean_bytes));
      adv.push_back(static_cast<double>(rows[i]->adv_bytes));
      if (rows[i]->success && rows[i]->steps_to_success) {
        step_sum += *rows[i]->steps_to_success;
        ++succ_steps;
      }
    }
    const Rate rate = rate_of(std::span<const bool>(flags.get(), rows.size()));
    a.success_rate = rate.percent;
    a.std_error = rate.std_error;
    a.recovered_rate = 100.0 * static_cast<double>(correct) / static_cast<double>(rows.size());
    a.median_psnr_db = median(psnrs);
    a.median_clean_bytes = median(clean);
    a.median_adv_bytes = median(adv);
    a.mean_steps_to_success = succ_steps ? step_sum / static_cast<double>(succ_steps) : 0.0;
    out.push_back(std::move(a));
  }
  return out;
}

const Aggregate* Report::find(const std::string& attack, const std::string& defense) const {
  cache_ = aggregates();
  for (const auto& a : cache_)
    if (a.attack == attack && a.defense == defense) return &a;
  return nullptr;
}

std::string Report::to_csv() const {
  std::ostringstream out;
  out << kReportVersionLine << '\n';
  for (const auto& [k, v] : config_) out << "# config: " << k << '=' << v << '\n';
  out << kReportHeader << '\n';
  std::vector<const ReportRow*> sorted;
  for (const auto& r : rows_) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const auto* r : sorted) {
    out << r->id << ',' << r->attack << ',' << r->eps << ',' << r->mode << ',' << r->defense << ','
        << (r->steps_to_success ? std::to_string(*r->steps_to_success) : std::string()) << ','
        << (r->success ? 1 : 0) << ',' << fixed(r->psnr_db) << ',' << r->clean_bytes << ','
        << r->adv_bytes << '\n';
  }
  out << "#agg,attack,eps,mode,defense,n,success_rate,stderr,recovered_rate,median_psnr_db,"
         "median_clean_bytes,median_adv_bytes,mean_steps_to_success\n";
  for (const auto& a : aggregates()) {
    out << "#agg," << a.attack << ',' << a.eps << ',' << a.mode << ',' << a.defense << ',' << a.n
        << ',' << fixed(a.success_rate) << ',' << fixed(a.std_error) << ','
        << fixed(a.recovered_rate) << ',' << fixed(a.median_psnr_db) << ','
        << fixed(a.median_clean_bytes, 1) << ',' << fixed(a.median_adv_bytes, 1) << ','
        << fixed(a.mean_steps_to_success, 2) << '\n';
  }
  return out.str();
}

void Report::write(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::kFile, "cannot write " + path.string());
  f << to_csv();
}

}  // namespace dropforge
