#include "iu4rec/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "iu4rec/errors.hpp"

namespace iu4rec {

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels, TieMode ties) {
  if (scores.size() != labels.size()) throw DataError("auc: scores/labels size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // For each tie group: positives beat every negative strictly below, and
  // split (or lose) the pairs inside the group.
  double wins = 0.0;
  std::size_t negatives_below = 0;
  std::size_t positives = 0;
  const double tie_credit = ties == TieMode::kHalf ? 0.5 : 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos = 0;
    std::size_t neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] != 0 ? pos : neg) += 1;
      ++j;
    }
    wins += static_cast<double>(pos) * static_cast<double>(negatives_below) +
            tie_credit * static_cast<double>(pos) * static_cast<double>(neg);
    negatives_below += neg;
    positives += pos;
    i = j;
  }
  const std::size_t negatives = negatives_below;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetric("auc: need at least one positive and one negative (got " + std::to_string(positives) +
                          " positives, " + std::to_string(negatives) + " negatives)");
  }
  return wins / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double auc(std::span<const ScoredSample> samples, TieMode ties) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  scores.reserve(samples.size());
  labels.reserve(samples.size());
  for (const auto& s : samples) {
    scores.push_back(s.score);
    labels.push_back(s.label);
  }
  return auc(scores, labels, ties);
}

std::vector<UserAuc> per_user_auc(std::span<const ScoredSample> samples, TieMode ties) {
  std::map<std::uint32_t, std::vector<ScoredSample>> by_user;
  for (const auto& s : samples) by_user[s.user_id].push_back(s);
  std::vector<UserAuc> out;
  for (const auto& [user, list] : by_user) {
    const bool has_pos = std::any_of(list.begin(), list.end(), [](const ScoredSample& s) { return s.label != 0; });
    const bool has_neg = std::any_of(list.begin(), list.end(), [](const ScoredSample& s) { return s.label == 0; });
    if (!has_pos || !has_neg) continue;
    out.push_back({user, list.size(), auc(list, ties)});
  }
  return out;
}

double gauc(std::span<const ScoredSample> samples, TieMode ties) {
  const auto users = per_user_auc(samples, ties);
  if (users.empty()) throw UndefinedMetric("gauc: no user has both positive and negative samples");
  double num = 0.0;
  double den = 0.0;
  for (const auto& u : users) {
    num += static_cast<double>(u.impressions) * u.auc;
    den += static_cast<double>(u.impressions);
  }
  return num / den;
}

double rela_impr(double measured_auc, double base_auc) {
  if (base_auc == 0.5) throw UndefinedMetric("rela_impr: base AUC equals the random-guess level 0.5");
  return ((measured_auc - 0.5) / (base_auc - 0.5) - 1.0) * 100.0;
}

namespace {

template <class F>
std::optional<double> defined(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

}  // namespace

DomainMetrics domain_split_eval(std::span<const ScoredSample> samples) {
  std::vector<ScoredSample> iu;
  std::vector<ScoredSample> normal;
  for (const auto& s : samples) (s.iu_domain ? iu : normal).push_back(s);
  DomainMetrics m;
  m.overall_count = samples.size();
  m.iu_count = iu.size();
  m.normal_count = normal.size();
  m.overall_auc = defined([&] { return auc(samples); });
  m.overall_gauc = defined([&] { return gauc(samples); });
  m.iu_auc = defined([&] { return auc(iu); });
  m.normal_auc = defined([&] { return auc(normal); });
  return m;
}

namespace {

std::optional<double> ri(const std::optional<double>& measured, const std::optional<double>& base) {
  if (!measured || !base) return std::nullopt;
  return defined([&] { return rela_impr(*measured, *base); });
}

}  // namespace

EvalReport make_report(std::vector<ModelRow> rows, const std::string& base_model) {
  auto base = std::find_if(rows.begin(), rows.end(), [&](const ModelRow& r) { return r.model == base_model; });
  if (base == rows.end()) throw ConfigError("report: base model '" + base_model + "' not among the evaluated models");
  const DomainMetrics b = base->metrics;
  for (auto& row : rows) {
    row.ri_overall_auc = ri(row.metrics.overall_auc, b.overall_auc);
    row.ri_overall_gauc = ri(row.metrics.overall_gauc, b.overall_gauc);
    row.ri_iu_auc = ri(row.metrics.iu_auc, b.iu_auc);
    row.ri_normal_auc = ri(row.metrics.normal_auc, b.normal_auc);
  }
  return {base_model, std::move(rows)};
}

namespace {

nlohmann::ordered_json cell(const std::optional<double>& v) {
  if (!v) return "undefined";
  return *v;
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json out;
  out["base_model"] = report.base_model;
  out["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["model"] = r.model;
    row["overall"] = {{"auc", cell(r.metrics.overall_auc)},
                      {"auc_ri_pct", cell(r.ri_overall_auc)},
                      {"gauc", cell(r.metrics.overall_gauc)},
                      {"gauc_ri_pct", cell(r.ri_overall_gauc)},
                      {"samples", r.metrics.overall_count}};
    row["interest_unit"] = {{"auc", cell(r.metrics.iu_auc)},
                            {"auc_ri_pct", cell(r.ri_iu_auc)},
                            {"samples", r.metrics.iu_count}};
    row["normal_product"] = {{"auc", cell(r.metrics.normal_auc)},
                             {"auc_ri_pct", cell(r.ri_normal_auc)},
                             {"samples", r.metrics.normal_count}};
    out["rows"].push_back(std::move(row));
  }
  return out;
}

}  // namespace iu4rec
