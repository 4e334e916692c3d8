#include "iu4rec/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "iu4rec/errors.hpp"

namespace iu4rec {

FeatureCatalog FeatureCatalog::from(const World& world, const IuCatalog& units, const Precedence& precedence) {
  FeatureCatalog c;
  c.n_users = world.users.size();
  // Ids stay stable when items are deleted, so size tables by the largest id.
  for (const auto& item : world.items) c.n_items = std::max<std::size_t>(c.n_items, item.item_id);
  c.n_categories = world.config.n_categories;
  c.n_brands = world.config.n_categories * world.config.brands_per_category;
  c.n_ius = units.size();
  c.item_side.assign(c.n_items + 1, ItemFeatures{});
  for (const auto& item : world.items) {
    c.item_side[item.item_id] = {item.item_id, item.attributes.category, item.attributes.brand};
  }
  c.item_iu = units.resolved_map(precedence);
  // Deleted items keep their unit mapping so their logged events still count.
  c.item_iu.resize(std::max(c.item_iu.size(), c.n_items + 1), 0);
  c.iu_type.assign(c.n_ius + 1, 0);
  c.iu_category.assign(c.n_ius + 1, 0);
  for (const auto& unit : units.units()) {
    c.iu_type[unit.iu_id] = static_cast<std::uint32_t>(unit.type);
    c.iu_category[unit.iu_id] = unit.dominant_category;
  }
  return c;
}

ItemFeatures FeatureCatalog::item(std::uint32_t item_id) const {
  if (item_id >= item_side.size()) {
    throw DataError("feature catalog: unknown item id " + std::to_string(item_id));
  }
  return item_side[item_id];
}

// ---------------------------------------------------------------------------

namespace {

void count_into(IuStats& s, EventKind kind) {
  switch (kind) {
    case EventKind::kImpression: ++s.impressions; break;
    case EventKind::kClick: ++s.clicks; break;
    case EventKind::kInquiry: ++s.inquiries; break;
    case EventKind::kTransaction: ++s.transactions; break;
  }
}

IuStatsTable empty_table(std::size_t max_iu_id) {
  IuStatsTable t(max_iu_id + 1);
  for (std::size_t i = 0; i < t.size(); ++i) t[i].iu_id = static_cast<std::uint32_t>(i);
  return t;
}

}  // namespace

IuStatsTable accumulate_iu_stats(std::span<const InteractionEvent> events,
                                 std::span<const std::uint32_t> item_to_iu, std::int64_t as_of,
                                 std::size_t max_iu_id) {
  IuStatsTable table = empty_table(max_iu_id);
  for (const auto& e : events) {
    if (e.timestamp_ms >= as_of) break;
    if (e.item_id >= item_to_iu.size()) continue;
    const std::uint32_t iu = item_to_iu[e.item_id];
    if (iu == 0 || iu > max_iu_id) continue;
    count_into(table[iu], e.kind);
  }
  return table;
}

ItemClickSequence build_item_sequence(std::span<const ClickRecord> user_clicks, std::int64_t as_of,
                                      const FeatureCatalog& catalog, const FeatureConfig& cfg) {
  ItemClickSequence seq;
  // First click at or after as_of.
  auto end = std::lower_bound(user_clicks.begin(), user_clicks.end(), as_of,
                              [](const ClickRecord& c, std::int64_t t) { return c.timestamp_ms < t; });
  const std::int64_t earliest = as_of - cfg.window_ms;
  for (auto it = end; it != user_clicks.begin() && seq.size() < cfg.max_item_seq;) {
    --it;
    if (it->timestamp_ms < earliest) break;
    seq.push_back(catalog.item(it->item_id));
  }
  return seq;
}

namespace {

std::vector<ClickRecord> clicks_for(std::span<const InteractionEvent> events, std::uint32_t user_id) {
  std::vector<ClickRecord> clicks;
  for (const auto& e : events) {
    if (e.user_id == user_id && e.kind == EventKind::kClick) clicks.push_back({e.timestamp_ms, e.item_id});
  }
  std::stable_sort(clicks.begin(), clicks.end(),
                   [](const ClickRecord& a, const ClickRecord& b) { return a.timestamp_ms < b.timestamp_ms; });
  return clicks;
}

}  // namespace

ItemClickSequence build_item_sequence(std::span<const InteractionEvent> events, std::uint32_t user_id,
                                      std::int64_t as_of, const FeatureCatalog& catalog,
                                      const FeatureConfig& cfg) {
  return build_item_sequence(clicks_for(events, user_id), as_of, catalog, cfg);
}

HierIuClickSequence group_by_iu(const ItemClickSequence& items, const FeatureCatalog& catalog,
                                std::size_t max_entries, std::size_t max_inner) {
  HierIuClickSequence seq;
  for (const auto& item : items) {
    const std::uint32_t iu = catalog.iu_of(item.item_id);
    if (iu == 0) continue;
    auto it = std::find_if(seq.begin(), seq.end(), [&](const IuEntry& e) { return e.iu_id == iu; });
    if (it == seq.end()) {
      if (seq.size() >= max_entries) continue;
      seq.push_back({iu, catalog.iu_type[iu], catalog.iu_category[iu], {}});
      it = seq.end() - 1;
    }
    if (it->items.size() < max_inner) it->items.push_back(item);
  }
  return seq;
}

HierIuClickSequence build_hier_iu_sequence(std::span<const InteractionEvent> events, std::uint32_t user_id,
                                           const FeatureCatalog& catalog, std::int64_t as_of,
                                           const FeatureConfig& cfg) {
  return group_by_iu(build_item_sequence(events, user_id, as_of, catalog, cfg), catalog, cfg.max_iu_seq,
                     cfg.max_inner);
}

// ---------------------------------------------------------------------------

void UserIuCrossTable::add_click(std::uint32_t user_id, std::uint32_t iu_id, std::int64_t t) {
  auto& entry = table_[key(user_id, iu_id)];
  ++entry.clicks;
  entry.last_time = std::max(entry.last_time, t);
}

std::optional<UserIuCross> UserIuCrossTable::find(std::uint32_t user_id, std::uint32_t iu_id) const {
  auto it = table_.find(key(user_id, iu_id));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

UserIuCrossTable accumulate_cross(std::span<const InteractionEvent> events,
                                  std::span<const std::uint32_t> item_to_iu, std::int64_t as_of) {
  UserIuCrossTable table;
  for (const auto& e : events) {
    if (e.timestamp_ms >= as_of) break;
    if (e.kind != EventKind::kClick || e.item_id >= item_to_iu.size()) continue;
    const std::uint32_t iu = item_to_iu[e.item_id];
    if (iu != 0) table.add_click(e.user_id, iu, e.timestamp_ms);
  }
  return table;
}

std::uint32_t count_bucket(std::uint32_t clicks) {
  if (clicks == 0) return 1;
  if (clicks == 1) return 2;
  if (clicks == 2) return 3;
  if (clicks <= 5) return 4;
  if (clicks <= 10) return 5;
  return 6;
}

std::uint32_t recency_bucket(std::optional<std::int64_t> elapsed_ms) {
  if (!elapsed_ms) return kRecencyNever;
  if (*elapsed_ms < kMillisPerHour) return 1;
  if (*elapsed_ms < kMillisPerDay) return 2;
  if (*elapsed_ms < 7 * kMillisPerDay) return 3;
  return 4;
}

CrossFeatureIds cross_features(std::uint32_t user_id, std::uint32_t iu_id, const UserIuCrossTable& cross,
                               std::int64_t as_of) {
  if (iu_id == 0) return {};
  const auto entry = cross.find(user_id, iu_id);
  if (!entry) return {count_bucket(0), recency_bucket(std::nullopt)};
  return {count_bucket(entry->clicks), recency_bucket(as_of - entry->last_time)};
}

void StatsBucketizer::fit(const IuStatsTable& stats) {
  std::vector<double> ctrs;
  for (const auto& s : stats) {
    if (auto c = s.ctr()) ctrs.push_back(*c);
  }
  cuts_.clear();
  if (!ctrs.empty()) {
    std::sort(ctrs.begin(), ctrs.end());
    for (std::size_t q = 1; q < kCtrBuckets; ++q) {
      const std::size_t idx = std::min(ctrs.size() - 1, q * ctrs.size() / kCtrBuckets);
      cuts_.push_back(ctrs[idx]);
    }
  }
  fitted_ = true;
}

void StatsBucketizer::set_cuts(std::vector<double> cuts) {
  if (!cuts.empty() && cuts.size() != kCtrBuckets - 1) {
    throw DataError("stats bucketizer: expected " + std::to_string(kCtrBuckets - 1) + " cut points");
  }
  cuts_ = std::move(cuts);
  fitted_ = true;
}

std::uint32_t StatsBucketizer::ctr_bucket(const IuStats& stats) const {
  const auto ctr = stats.ctr();
  if (!ctr || !fitted_ || cuts_.empty()) return kCtrCold;
  const auto pos = std::upper_bound(cuts_.begin(), cuts_.end(), *ctr) - cuts_.begin();
  return static_cast<std::uint32_t>(1 + pos);
}

std::uint32_t StatsBucketizer::impression_bucket(const IuStats& stats) {
  const double level = std::floor(std::log2(static_cast<double>(stats.impressions) + 1.0));
  return static_cast<std::uint32_t>(1 + std::min(level, static_cast<double>(kImpressionVocab - 2)));
}

// ---------------------------------------------------------------------------

FeatureStore::FeatureStore(FeatureCatalog catalog, FeatureConfig cfg)
    : catalog_(std::move(catalog)),
      cfg_(cfg),
      live_(empty_table(catalog_.n_ius)),
      snapshot_(empty_table(catalog_.n_ius)),
      clicks_(catalog_.n_users + 1) {}

void FeatureStore::advance_to(std::int64_t t) {
  const int day = day_of(t);
  if (day == current_day_) return;
  if (day < current_day_) throw DataError("feature store: events out of time order");
  snapshot_ = live_;
  cross_snapshot_ = cross_live_;
  // Quantiles come from the first complete day and stay frozen.
  if (!buckets_.fitted() && day >= 2) buckets_.fit(snapshot_);
  current_day_ = day;
  if (callback_) callback_(day, snapshot_);
}

void FeatureStore::observe(const InteractionEvent& e) {
  advance_to(e.timestamp_ms);
  if (e.user_id >= clicks_.size()) throw DataError("feature store: unknown user " + std::to_string(e.user_id));
  const std::uint32_t iu = catalog_.iu_of(e.item_id);
  if (iu != 0) count_into(live_[iu], e.kind);
  if (e.kind == EventKind::kClick) {
    auto& list = clicks_[e.user_id];
    if (!list.empty() && list.back().timestamp_ms > e.timestamp_ms) {
      throw DataError("feature store: clicks out of time order");
    }
    list.push_back({e.timestamp_ms, e.item_id});
    if (iu != 0) cross_live_.add_click(e.user_id, iu, e.timestamp_ms);
  }
}

std::span<const ClickRecord> FeatureStore::clicks_of(std::uint32_t user_id) const {
  if (user_id >= clicks_.size()) return {};
  return clicks_[user_id];
}

TrainingSample FeatureStore::make_context(std::uint32_t user_id, std::int64_t t) const {
  TrainingSample s;
  s.user_id = user_id;
  s.timestamp_ms = t;
  s.day = day_of(t);
  s.item_seq = build_item_sequence(clicks_of(user_id), t, catalog_, cfg_);
  s.iu_seq = group_by_iu(s.item_seq, catalog_, cfg_.max_iu_seq, cfg_.max_inner);
  return s;
}

void FeatureStore::retarget(TrainingSample& s, std::uint32_t item_id, bool iu_domain) const {
  s.iu_domain = iu_domain;
  s.label = 0;
  s.target = catalog_.item(item_id);
  s.iu_id = s.iu_type = s.iu_category = 0;
  s.stats_ctr = s.stats_impressions = s.cross_count = s.cross_recency = 0;
  const std::uint32_t iu = catalog_.iu_of(item_id);
  if (iu == 0) return;
  s.iu_id = iu;
  s.iu_type = catalog_.iu_type[iu];
  s.iu_category = catalog_.iu_category[iu];
  const IuStats& stats = snapshot_[iu];
  s.stats_ctr = buckets_.ctr_bucket(stats);
  s.stats_impressions = StatsBucketizer::impression_bucket(stats);
  const CrossFeatureIds cross = cross_features(s.user_id, iu, cross_snapshot_, s.timestamp_ms);
  s.cross_count = cross.count_bucket;
  s.cross_recency = cross.recency_bucket;
}

TrainingSample FeatureStore::make_sample(std::uint32_t user_id, std::uint32_t item_id, std::int64_t t,
                                         bool iu_domain) const {
  TrainingSample s = make_context(user_id, t);
  retarget(s, item_id, iu_domain);
  return s;
}

std::vector<TrainingSample> featurize(std::span<const InteractionEvent> events, FeatureStore& store) {
  std::vector<TrainingSample> samples;
  struct Pending {
    std::size_t index;
    std::int64_t t;
  };
  std::unordered_map<std::uint64_t, Pending> pending;
  const std::int64_t label_window = store.config().label_window_ms;
  for (const auto& e : events) {
    store.advance_to(e.timestamp_ms);
    const std::uint64_t key = (static_cast<std::uint64_t>(e.user_id) << 32) | e.item_id;
    if (e.kind == EventKind::kImpression) {
      pending[key] = {samples.size(), e.timestamp_ms};
      samples.push_back(store.make_sample(e.user_id, e.item_id, e.timestamp_ms, e.surface != Surface::kHomepage));
    } else if (e.kind == EventKind::kClick) {
      auto it = pending.find(key);
      if (it != pending.end() && e.timestamp_ms - it->second.t <= label_window) {
        samples[it->second.index].label = 1;
        pending.erase(it);
      }
    }
    store.observe(e);
  }
  return samples;
}

}  // namespace iu4rec
