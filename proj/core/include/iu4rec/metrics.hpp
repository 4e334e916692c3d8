#pragma once

// AUC, GAUC, RelaImpr and the Overall / Interest Unit / Normal Product split.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace iu4rec {

struct ScoredSample {
  std::uint32_t user_id = 0;
  double score = 0.0;
  std::uint8_t label = 0;
  bool iu_domain = false;

  bool operator==(const ScoredSample&) const = default;
};

// kHalf counts a tied positive/negative pair as 0.5; kStrict counts it as 0.
enum class TieMode { kHalf, kStrict };

// Rank-statistic AUC. Throws UndefinedMetric on single-class input.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels, TieMode ties = TieMode::kHalf);
double auc(std::span<const ScoredSample> samples, TieMode ties = TieMode::kHalf);

struct UserAuc {
  std::uint32_t user_id = 0;
  std::size_t impressions = 0;
  double auc = 0.0;
};

// Users having both classes, ascending user id.
std::vector<UserAuc> per_user_auc(std::span<const ScoredSample> samples, TieMode ties = TieMode::kHalf);

// Impression-weighted mean of per-user AUCs; single-class users are excluded.
double gauc(std::span<const ScoredSample> samples, TieMode ties = TieMode::kHalf);

// Percent. Throws UndefinedMetric when base == 0.5.
double rela_impr(double measured_auc, double base_auc);

struct DomainMetrics {
  std::optional<double> overall_auc;
  std::optional<double> overall_gauc;
  std::optional<double> iu_auc;
  std::optional<double> normal_auc;
  std::size_t overall_count = 0;
  std::size_t iu_count = 0;
  std::size_t normal_count = 0;
};

// Undefined cells (empty or single-class partitions) are left empty.
DomainMetrics domain_split_eval(std::span<const ScoredSample> samples);

struct ModelRow {
  std::string model;
  DomainMetrics metrics;
  std::optional<double> ri_overall_auc;
  std::optional<double> ri_overall_gauc;
  std::optional<double> ri_iu_auc;
  std::optional<double> ri_normal_auc;
};

struct EvalReport {
  std::string base_model;
  std::vector<ModelRow> rows;
};

// Fills the RI columns of every row against the row named base_model.
EvalReport make_report(std::vector<ModelRow> rows, const std::string& base_model);

nlohmann::ordered_json to_json(const EvalReport& report);

}  // namespace iu4rec
