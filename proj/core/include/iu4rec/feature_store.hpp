#pragma once

// IU-level behavior accumulation, user-IU cross features and the item /
// hierarchical IU click sequences that feed the CTR models.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "iu4rec/iu_construction.hpp"
#include "iu4rec/marketplace.hpp"

namespace iu4rec {

struct ItemFeatures {
  std::uint32_t item_id = 0;
  std::uint32_t category = 0;
  std::uint32_t brand = 0;

  bool operator==(const ItemFeatures&) const = default;
};

// Newest first.
using ItemClickSequence = std::vector<ItemFeatures>;

struct IuEntry {
  std::uint32_t iu_id = 0;
  std::uint32_t iu_type = 0;
  std::uint32_t category = 0;
  std::vector<ItemFeatures> items;  // newest first, at most max_inner

  bool operator==(const IuEntry&) const = default;
};

// Entries ordered by each unit's most recent click, newest first.
using HierIuClickSequence = std::vector<IuEntry>;

struct IuStats {
  std::uint32_t iu_id = 0;
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;
  std::uint64_t inquiries = 0;
  std::uint64_t transactions = 0;

  std::optional<double> ctr() const {
    if (impressions == 0) return std::nullopt;
    return static_cast<double>(clicks) / static_cast<double>(impressions);
  }
  // Allowed (clicks can arrive on a different surface) but worth flagging.
  bool clicks_exceed_impressions() const { return clicks > impressions; }

  bool operator==(const IuStats&) const = default;
};

// Indexed by iu id; entry 0 is unused.
using IuStatsTable = std::vector<IuStats>;

struct FeatureConfig {
  std::int64_t window_ms = 30 * kMillisPerDay;
  std::size_t max_item_seq = 150;
  std::size_t max_iu_seq = 20;
  std::size_t max_inner = 5;
  // Drop the label join if the click comes later than this after the impression.
  std::int64_t label_window_ms = 30 * 60 * 1000;
};

// Catalog-side lookups needed to turn raw ids into feature ids.
struct FeatureCatalog {
  std::vector<ItemFeatures> item_side;  // indexed by item id
  std::vector<std::uint32_t> item_iu;   // resolved unit per item id, 0 = none
  std::vector<std::uint32_t> iu_type;   // indexed by iu id
  std::vector<std::uint32_t> iu_category;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_categories = 0;
  std::size_t n_brands = 0;
  std::size_t n_ius = 0;

  static FeatureCatalog from(const World& world, const IuCatalog& units,
                             const Precedence& precedence = kDefaultPrecedence);

  std::uint32_t iu_of(std::uint32_t item_id) const {
    return item_id < item_iu.size() ? item_iu[item_id] : 0;
  }
  ItemFeatures item(std::uint32_t item_id) const;
};

// ---------------------------------------------------------------------------
// Stateless operations over a time-ordered log.

IuStatsTable accumulate_iu_stats(std::span<const InteractionEvent> events,
                                 std::span<const std::uint32_t> item_to_iu, std::int64_t as_of,
                                 std::size_t max_iu_id);

struct ClickRecord {
  std::int64_t timestamp_ms = 0;
  std::uint32_t item_id = 0;
};

// The user's clicks in [as_of - window, as_of), newest first, truncated.
ItemClickSequence build_item_sequence(std::span<const ClickRecord> user_clicks, std::int64_t as_of,
                                      const FeatureCatalog& catalog, const FeatureConfig& cfg);
ItemClickSequence build_item_sequence(std::span<const InteractionEvent> events, std::uint32_t user_id,
                                      std::int64_t as_of, const FeatureCatalog& catalog,
                                      const FeatureConfig& cfg);

// Groups an item sequence by resolved unit; unmapped items are dropped.
HierIuClickSequence group_by_iu(const ItemClickSequence& items, const FeatureCatalog& catalog,
                                std::size_t max_entries, std::size_t max_inner);
HierIuClickSequence build_hier_iu_sequence(std::span<const InteractionEvent> events, std::uint32_t user_id,
                                           const FeatureCatalog& catalog, std::int64_t as_of,
                                           const FeatureConfig& cfg);

// ---------------------------------------------------------------------------
// User x IU cross features.

struct UserIuCross {
  std::uint32_t clicks = 0;
  std::int64_t last_time = 0;

  bool operator==(const UserIuCross&) const = default;
};

class UserIuCrossTable {
 public:
  void add_click(std::uint32_t user_id, std::uint32_t iu_id, std::int64_t t);
  std::optional<UserIuCross> find(std::uint32_t user_id, std::uint32_t iu_id) const;
  std::size_t size() const { return table_.size(); }

 private:
  static std::uint64_t key(std::uint32_t user_id, std::uint32_t iu_id) {
    return (static_cast<std::uint64_t>(user_id) << 32) | iu_id;
  }
  std::unordered_map<std::uint64_t, UserIuCross> table_;
};

UserIuCrossTable accumulate_cross(std::span<const InteractionEvent> events,
                                  std::span<const std::uint32_t> item_to_iu, std::int64_t as_of);

// Click-count buckets {0, 1, 2, 3-5, 6-10, 11+} -> ids 1..6.
inline constexpr std::size_t kCountBucketVocab = 7;
// Recency buckets {<1h, <1d, <7d, >=7d, never} -> ids 1..5.
inline constexpr std::size_t kRecencyBucketVocab = 6;
inline constexpr std::uint32_t kRecencyNever = 5;

std::uint32_t count_bucket(std::uint32_t clicks);
std::uint32_t recency_bucket(std::optional<std::int64_t> elapsed_ms);

struct CrossFeatureIds {
  std::uint32_t count_bucket = 0;
  std::uint32_t recency_bucket = 0;

  bool operator==(const CrossFeatureIds&) const = default;
};

CrossFeatureIds cross_features(std::uint32_t user_id, std::uint32_t iu_id, const UserIuCrossTable& cross,
                               std::int64_t as_of);

// IU statistic buckets. CTR: 10 quantile buckets (ids 1..10) fitted once and
// frozen, id 11 for units without impressions. Impressions: log2 buckets.
class StatsBucketizer {
 public:
  static constexpr std::size_t kCtrBuckets = 10;
  static constexpr std::size_t kCtrVocab = kCtrBuckets + 2;
  static constexpr std::uint32_t kCtrCold = kCtrBuckets + 1;
  static constexpr std::size_t kImpressionVocab = 17;

  void fit(const IuStatsTable& stats);
  bool fitted() const { return fitted_; }
  const std::vector<double>& cuts() const { return cuts_; }
  void set_cuts(std::vector<double> cuts);

  std::uint32_t ctr_bucket(const IuStats& stats) const;
  static std::uint32_t impression_bucket(const IuStats& stats);

 private:
  std::vector<double> cuts_;
  bool fitted_ = false;
};

// ---------------------------------------------------------------------------

struct TrainingSample {
  std::uint32_t user_id = 0;
  std::int64_t timestamp_ms = 0;
  int day = 0;
  std::uint8_t label = 0;
  bool iu_domain = false;  // impression came from an IU card or IU page

  ItemFeatures target;
  std::uint32_t iu_id = 0;
  std::uint32_t iu_type = 0;
  std::uint32_t iu_category = 0;
  std::uint32_t stats_ctr = 0;
  std::uint32_t stats_impressions = 0;
  std::uint32_t cross_count = 0;
  std::uint32_t cross_recency = 0;

  ItemClickSequence item_seq;
  HierIuClickSequence iu_seq;

  bool operator==(const TrainingSample&) const = default;
};

// Streaming point-in-time feature state. Events must be observed in time
// order; statistics and cross features are frozen snapshots taken at each
// day boundary, sequences are exact as of the sample timestamp.
class FeatureStore {
 public:
  using SnapshotCallback = std::function<void(int day, const IuStatsTable&)>;

  FeatureStore(FeatureCatalog catalog, FeatureConfig cfg);

  // Moves the clock; crossing a day boundary refreshes the snapshots.
  void advance_to(std::int64_t t);
  void observe(const InteractionEvent& event);

  TrainingSample make_sample(std::uint32_t user_id, std::uint32_t item_id, std::int64_t t,
                             bool iu_domain) const;
  // Sequences only; the target is left empty.
  TrainingSample make_context(std::uint32_t user_id, std::int64_t t) const;
  // Sets the target and its IU features, keeping the sequences.
  void retarget(TrainingSample& sample, std::uint32_t item_id, bool iu_domain) const;

  std::span<const ClickRecord> clicks_of(std::uint32_t user_id) const;
  const IuStatsTable& snapshot() const { return snapshot_; }
  const IuStatsTable& live_stats() const { return live_; }
  const UserIuCrossTable& cross_snapshot() const { return cross_snapshot_; }
  const StatsBucketizer& buckets() const { return buckets_; }
  StatsBucketizer& buckets() { return buckets_; }
  const FeatureCatalog& catalog() const { return catalog_; }
  const FeatureConfig& config() const { return cfg_; }
  int current_day() const { return current_day_; }

  void on_snapshot(SnapshotCallback cb) { callback_ = std::move(cb); }

 private:
  FeatureCatalog catalog_;
  FeatureConfig cfg_;
  int current_day_ = 0;
  IuStatsTable live_;
  IuStatsTable snapshot_;
  UserIuCrossTable cross_live_;
  UserIuCrossTable cross_snapshot_;
  std::vector<std::vector<ClickRecord>> clicks_;  // per user, time ordered
  StatsBucketizer buckets_;
  SnapshotCallback callback_;
};

// One sample per impression; label = a click by the same user on the same
// item within the label window.
std::vector<TrainingSample> featurize(std::span<const InteractionEvent> events, FeatureStore& store);

}  // namespace iu4rec
