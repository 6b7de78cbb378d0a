#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dropforge {

inline constexpr const char* kReportVersionLine = "# dropforge-report v1";
inline constexpr const char* kReportHeader =
    "id,attack,eps,mode,defense,steps_to_success,success,psnr_db,clean_bytes,adv_bytes";

struct ReportRow {
  int id = 0;
  std::string attack;
  std::string eps;
  std::string mode;
  std::string defense;
  std::optional<int> steps_to_success;
  bool success = false;
  double psnr_db = 0.0;
  std::size_t clean_bytes = 0;
  std::size_t adv_bytes = 0;
  // Not serialised per row; feeds the recovered_rate aggregate.
  bool correct = false;
};

struct Aggregate {
  std::string attack, eps, mode, defense;
  std::size_t n = 0;
  double success_rate = 0.0;
  double std_error = 0.0;
  double recovered_rate = 0.0;  // percent classified as the true label
  double median_psnr_db = 0.0;
  double median_clean_bytes = 0.0;
  double median_adv_bytes = 0.0;
  double mean_steps_to_success = 0.0;  // over successful rows; 0 when none
};

class Report {
 public:
  void set_config(std::string key, std::string value);
  void add(ReportRow row) { rows_.push_back(std::move(row)); }

  const std::vector<ReportRow>& rows() const noexcept { return rows_; }
  const std::vector<std::pair<std::string, std::string>>& config() const noexcept { return config_; }

  // Grouped by (attack, eps, mode, defense) in order of first appearance.
  std::vector<Aggregate> aggregates() const;
  const Aggregate* find(const std::string& attack, const std::string& defense) const;

  // Version line, config comments, header, rows (stable-sorted by id) and
  // the "#agg" aggregate block.
  std::string to_csv() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> config_;
  std::vector<ReportRow> rows_;
  mutable std::vector<Aggregate> cache_;
};

}  // namespace dropforge
