#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "iu4rec/errors.hpp"
#include "iu4rec/feature_store.hpp"
#include "iu4rec/pipeline.hpp"
#include "test_support.hpp"

using namespace iu4rec;

namespace {

// Ten items; items 1-4 in unit 1, items 5-6 in unit 2, the rest in none.
FeatureCatalog hand_catalog() {
  FeatureCatalog c;
  c.n_users = 3;
  c.n_items = 10;
  c.n_categories = 2;
  c.n_brands = 4;
  c.n_ius = 2;
  c.item_side.resize(11);
  for (std::uint32_t i = 1; i <= 10; ++i) c.item_side[i] = {i, 1 + i % 2, 1 + i % 4};
  c.item_iu = {0, 1, 1, 1, 1, 2, 2, 0, 0, 0, 0};
  c.iu_type = {0, 1, 2};
  c.iu_category = {0, 1, 2};
  return c;
}

InteractionEvent ev(std::int64_t t, std::uint32_t user, std::uint32_t item, EventKind kind,
                    Surface surface = Surface::kHomepage) {
  return {t, user, item, kind, surface};
}

struct Logged {
  World world;
  IuCatalog units;
  std::vector<InteractionEvent> events;
};

const Logged& logged_world() {
  static const Logged logged = [] {
    const PipelineConfig cfg = fixtures::small_pipeline_config();
    SynthOutput out = synthesize(cfg);
    IuCatalog units = build_units(cfg, out.world);
    return Logged{std::move(out.world), std::move(units), std::move(out.events)};
  }();
  return logged;
}

}  // namespace

TEST(Buckets, CountBoundaries) {
  const std::map<std::uint32_t, std::uint32_t> expected{{0, 1}, {1, 2}, {2, 3}, {3, 4},  {5, 4},
                                                        {6, 5}, {10, 5}, {11, 6}, {500, 6}};
  for (const auto& [clicks, bucket] : expected) EXPECT_EQ(count_bucket(clicks), bucket) << clicks;
}

TEST(Buckets, RecencyBoundaries) {
  EXPECT_EQ(recency_bucket(0), 1u);
  EXPECT_EQ(recency_bucket(kMillisPerHour - 1), 1u);
  EXPECT_EQ(recency_bucket(kMillisPerHour), 2u);
  EXPECT_EQ(recency_bucket(kMillisPerDay), 3u);
  EXPECT_EQ(recency_bucket(7 * kMillisPerDay - 1), 3u);
  EXPECT_EQ(recency_bucket(7 * kMillisPerDay), 4u);
  EXPECT_EQ(recency_bucket(std::nullopt), kRecencyNever);
}

TEST(Buckets, ImpressionLogScale) {
  auto bucket = [](std::uint64_t imps) { return StatsBucketizer::impression_bucket({0, imps, 0, 0, 0}); };
  EXPECT_EQ(bucket(0), 1u);
  EXPECT_EQ(bucket(1), 2u);
  EXPECT_EQ(bucket(2), 2u);
  EXPECT_EQ(bucket(3), 3u);
  EXPECT_EQ(bucket(1u << 20), 16u);
  EXPECT_LT(bucket(~0ull >> 1), StatsBucketizer::kImpressionVocab);
}

TEST(Buckets, CtrQuantilesFrozenAfterFit) {
  IuStatsTable table(101);
  for (std::uint32_t i = 1; i <= 100; ++i) table[i] = {i, 100, i, 0, 0};
  StatsBucketizer b;
  EXPECT_EQ(b.ctr_bucket(table[50]), StatsBucketizer::kCtrCold);
  b.fit(table);
  ASSERT_EQ(b.cuts().size(), StatsBucketizer::kCtrBuckets - 1);
  EXPECT_TRUE(std::is_sorted(b.cuts().begin(), b.cuts().end()));
  EXPECT_EQ(b.ctr_bucket(table[1]), 1u);
  EXPECT_EQ(b.ctr_bucket(table[100]), 10u);
  EXPECT_EQ(b.ctr_bucket({7, 0, 0, 0, 0}), StatsBucketizer::kCtrCold);
  std::map<std::uint32_t, int> sizes;
  for (std::uint32_t i = 1; i <= 100; ++i) ++sizes[b.ctr_bucket(table[i])];
  for (const auto& [bucket, n] : sizes) EXPECT_EQ(n, 10) << bucket;
  EXPECT_THROW(b.set_cuts({0.1, 0.2}), DataError);
}

TEST(IuStats, FlagsClicksAboveImpressions) {
  const IuStats s{1, 2, 3, 0, 0};
  EXPECT_TRUE(s.clicks_exceed_impressions());
  EXPECT_DOUBLE_EQ(*s.ctr(), 1.5);
  EXPECT_FALSE(IuStats{}.ctr().has_value());
}

TEST(IuStats, AccumulateCountsBeforeCutoff) {
  const auto c = hand_catalog();
  const std::vector<InteractionEvent> events{
      ev(10, 1, 1, EventKind::kImpression), ev(11, 1, 1, EventKind::kClick), ev(12, 1, 2, EventKind::kImpression),
      ev(13, 2, 5, EventKind::kImpression), ev(14, 2, 8, EventKind::kImpression), ev(20, 2, 3, EventKind::kClick),
  };
  const auto table = accumulate_iu_stats(events, c.item_iu, 20, 2);
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[1], (IuStats{1, 2, 1, 0, 0}));
  EXPECT_EQ(table[2], (IuStats{2, 1, 0, 0, 0}));
  const auto later = accumulate_iu_stats(events, c.item_iu, 21, 2);
  EXPECT_EQ(later[1].clicks, 2u);
}

TEST(Sequences, NewestFirstWithinWindowAndTruncated) {
  const auto c = hand_catalog();
  FeatureConfig cfg;
  cfg.max_item_seq = 150;
  std::vector<ClickRecord> clicks;
  const std::int64_t now = 40 * kMillisPerDay;
  // 20 clicks older than the window, then 200 inside it.
  for (int i = 0; i < 20; ++i) clicks.push_back({i * 1000, static_cast<std::uint32_t>(1 + i % 10)});
  for (int i = 0; i < 200; ++i) {
    clicks.push_back({now - cfg.window_ms + 1 + i * 1000, static_cast<std::uint32_t>(1 + i % 10)});
  }
  clicks.push_back({now, 3});  // at the sample time: excluded
  const auto seq = build_item_sequence(clicks, now, c, cfg);
  ASSERT_EQ(seq.size(), 150u);
  EXPECT_EQ(seq.front().item_id, static_cast<std::uint32_t>(1 + 199 % 10));
  cfg.max_item_seq = 500;
  const auto full = build_item_sequence(clicks, now, c, cfg);
  EXPECT_EQ(full.size(), 200u);
}

TEST(Sequences, GroupByUnitKeepsRecencyOrder) {
  const auto c = hand_catalog();
  // Newest first: 5, 1, 8, 2, 6, 3, 4, 1, 2, 3, 4
  ItemClickSequence items;
  for (std::uint32_t id : {5, 1, 8, 2, 6, 3, 4, 1, 2, 3, 4}) items.push_back(c.item(id));
  const auto hier = group_by_iu(items, c, 20, 5);
  ASSERT_EQ(hier.size(), 2u);
  EXPECT_EQ(hier[0].iu_id, 2u);
  EXPECT_EQ(hier[1].iu_id, 1u);
  EXPECT_EQ(hier[0].items.size(), 2u);
  EXPECT_EQ(hier[1].items.size(), 5u);
  EXPECT_EQ(hier[1].items[0].item_id, 1u);
  EXPECT_EQ(hier[1].items[1].item_id, 2u);
  EXPECT_EQ(hier[1].iu_type, 1u);
  const auto capped = group_by_iu(items, c, 1, 2);
  ASSERT_EQ(capped.size(), 1u);
  EXPECT_EQ(capped[0].items.size(), 2u);
}

TEST(Cross, CountsAndRecency) {
  const auto c = hand_catalog();
  const std::vector<InteractionEvent> events{
      ev(0, 1, 1, EventKind::kClick), ev(kMillisPerHour, 1, 2, EventKind::kClick),
      ev(2 * kMillisPerHour, 1, 9, EventKind::kClick), ev(3 * kMillisPerHour, 2, 5, EventKind::kImpression)};
  const auto table = accumulate_cross(events, c.item_iu, kMillisPerDay);
  EXPECT_EQ(table.size(), 1u);
  EXPECT_EQ(table.find(1, 1)->clicks, 2u);
  const auto f = cross_features(1, 1, table, kMillisPerHour + 10);
  EXPECT_EQ(f.count_bucket, 3u);
  EXPECT_EQ(f.recency_bucket, 1u);
  const auto none = cross_features(2, 1, table, kMillisPerDay);
  EXPECT_EQ(none.count_bucket, 1u);
  EXPECT_EQ(none.recency_bucket, kRecencyNever);
  EXPECT_EQ(cross_features(1, 0, table, 0), CrossFeatureIds{});
}

TEST(Featurize, LabelJoinWindowAndDomain) {
  FeatureStore store(hand_catalog(), FeatureConfig{});
  const std::int64_t m = 60 * 1000;
  const std::vector<InteractionEvent> events{
      ev(0, 1, 1, EventKind::kImpression),
      ev(10 * m, 1, 1, EventKind::kClick),
      ev(11 * m, 1, 5, EventKind::kImpression, Surface::kIuPage),
      ev(50 * m, 1, 5, EventKind::kClick, Surface::kIuPage),
      ev(51 * m, 2, 7, EventKind::kImpression, Surface::kIuCard),
      ev(52 * m, 2, 7, EventKind::kClick, Surface::kIuCard),
      ev(53 * m, 2, 7, EventKind::kClick, Surface::kIuCard),
  };
  const auto samples = featurize(events, store);
  ASSERT_EQ(samples.size(), 3u);
  EXPECT_EQ(samples[0].label, 1);
  EXPECT_FALSE(samples[0].iu_domain);
  EXPECT_EQ(samples[1].label, 0);  // click 39 minutes later
  EXPECT_TRUE(samples[1].iu_domain);
  EXPECT_EQ(samples[1].item_seq.size(), 1u);
  EXPECT_EQ(samples[1].item_seq[0].item_id, 1u);
  EXPECT_EQ(samples[2].label, 1);
  EXPECT_TRUE(samples[2].iu_domain);
  EXPECT_EQ(samples[2].iu_id, 0u);
  EXPECT_EQ(samples[2].cross_count, 0u);
}

TEST(FeatureStore, RejectsOutOfOrderEvents) {
  FeatureStore store(hand_catalog(), FeatureConfig{});
  store.observe(ev(2 * kMillisPerDay, 1, 1, EventKind::kClick));
  EXPECT_THROW(store.observe(ev(0, 1, 1, EventKind::kClick)), DataError);
}

TEST(FeatureStore, SnapshotsMatchRecountOracle) {
  const auto& lw = logged_world();
  const PipelineConfig cfg = fixtures::small_pipeline_config();
  FeatureStore store = make_feature_store(cfg, lw.world, lw.units);
  const auto& catalog = store.catalog();
  std::map<int, IuStatsTable> seen;
  store.on_snapshot([&](int day, const IuStatsTable& t) { seen[day] = t; });
  for (const auto& e : lw.events) store.observe(e);
  ASSERT_EQ(seen.size(), static_cast<std::size_t>(cfg.log_days));
  for (const auto& [day, table] : seen) {
    EXPECT_EQ(table, accumulate_iu_stats(lw.events, catalog.item_iu, day_start(day), catalog.n_ius)) << day;
  }
  EXPECT_EQ(store.live_stats(), accumulate_iu_stats(lw.events, catalog.item_iu, day_start(cfg.log_days + 1),
                                                    catalog.n_ius));
}

TEST(FeatureStore, StatsSurviveDeletingSoldItems) {
  const auto& lw = logged_world();
  const auto& units = lw.units;
  const FeatureCatalog full = FeatureCatalog::from(lw.world, units);
  World pruned = lw.world;
  std::erase_if(pruned.items, [](const SynthItem& item) { return item.sold; });
  ASSERT_LT(pruned.items.size(), lw.world.items.size());
  const FeatureCatalog after = FeatureCatalog::from(pruned, units);
  const std::int64_t end = day_start(9);
  const auto before_table = accumulate_iu_stats(lw.events, full.item_iu, end, full.n_ius);
  const auto after_table = accumulate_iu_stats(lw.events, after.item_iu, end, after.n_ius);
  EXPECT_EQ(before_table, after_table);
  std::uint64_t impressions = 0;
  for (const auto& s : before_table) impressions += s.impressions;
  EXPECT_GT(impressions, 0u);
}

TEST(FeatureStore, SamplesUseOnlyPastEvents) {
  const auto& lw = logged_world();
  const PipelineConfig cfg = fixtures::small_pipeline_config();
  FeatureStore store = make_feature_store(cfg, lw.world, lw.units);
  const auto samples = featurize(lw.events, store);
  const auto& catalog = store.catalog();
  ASSERT_FALSE(samples.empty());

  // Recompute every feature from the raw log, restricted to events before the sample.
  std::map<std::uint32_t, std::vector<ClickRecord>> clicks;
  for (const auto& e : lw.events) {
    if (e.kind == EventKind::kClick) clicks[e.user_id].push_back({e.timestamp_ms, e.item_id});
  }
  std::map<int, IuStatsTable> stats_at;
  std::map<int, UserIuCrossTable> cross_at;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < samples.size(); i += 7) {
    const auto& s = samples[i];
    const auto& mine = clicks[s.user_id];
    const auto seq = build_item_sequence(mine, s.timestamp_ms, catalog, cfg.features);
    if (seq != s.item_seq) ++violations;
    if (s.item_seq.size() > cfg.features.max_item_seq) ++violations;
    if (s.iu_seq.size() > cfg.features.max_iu_seq) ++violations;
    for (const auto& entry : s.iu_seq) {
      if (entry.items.size() > cfg.features.max_inner) ++violations;
    }
    // Window audit on the clicks behind the sequence.
    std::size_t k = 0;
    for (auto it = mine.rbegin(); it != mine.rend() && k < s.item_seq.size(); ++it) {
      if (it->timestamp_ms >= s.timestamp_ms) continue;
      if (it->timestamp_ms < s.timestamp_ms - cfg.features.window_ms) ++violations;
      ++k;
    }
    if (s.iu_id != 0) {
      auto& stats = stats_at[s.day];
      if (stats.empty()) stats = accumulate_iu_stats(lw.events, catalog.item_iu, day_start(s.day), catalog.n_ius);
      if (s.stats_impressions != StatsBucketizer::impression_bucket(stats[s.iu_id])) ++violations;
      if (s.stats_ctr != store.buckets().ctr_bucket(stats[s.iu_id])) ++violations;
      if (!cross_at.contains(s.day)) cross_at[s.day] = accumulate_cross(lw.events, catalog.item_iu, day_start(s.day));
      if (cross_features(s.user_id, s.iu_id, cross_at[s.day], s.timestamp_ms) !=
          CrossFeatureIds{s.cross_count, s.cross_recency}) {
        ++violations;
      }
    }
  }
  EXPECT_EQ(violations, 0u);
}
