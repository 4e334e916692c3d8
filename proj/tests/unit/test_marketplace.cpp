#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "iu4rec/errors.hpp"
#include "iu4rec/marketplace.hpp"
#include "test_support.hpp"

using namespace iu4rec;

TEST(Marketplace, DaysAreOneBased) {
  EXPECT_EQ(day_of(0), 1);
  EXPECT_EQ(day_of(kMillisPerDay - 1), 1);
  EXPECT_EQ(day_of(kMillisPerDay), 2);
  EXPECT_EQ(day_start(3), 2 * kMillisPerDay);
}

TEST(Marketplace, EnumTextRoundTrips) {
  for (auto k : {EventKind::kImpression, EventKind::kClick, EventKind::kInquiry, EventKind::kTransaction}) {
    EXPECT_EQ(parse_event_kind(to_string(k)), k);
  }
  for (auto s : {Surface::kHomepage, Surface::kIuCard, Surface::kIuPage}) EXPECT_EQ(parse_surface(to_string(s)), s);
  EXPECT_THROW(parse_surface("sidebar"), DataError);
}

TEST(Marketplace, ValidateRejectsInfeasibleWorlds) {
  auto cfg = fixtures::small_world_config();
  cfg.n_true_units = cfg.n_items + 1;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = fixtures::small_world_config();
  cfg.stock_one_fraction = 1.5;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = fixtures::small_world_config();
  cfg.user_interest_categories = cfg.n_categories + 1;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Marketplace, GenerationIsDeterministic) {
  const auto cfg = fixtures::small_world_config();
  const World a = generate_catalog(cfg, 5);
  const World b = generate_catalog(cfg, 5);
  const World c = generate_catalog(cfg, 6);
  EXPECT_EQ(a.items, b.items);
  EXPECT_EQ(a.users, b.users);
  EXPECT_NE(a.items, c.items);
}

TEST(Marketplace, CatalogShape) {
  const auto cfg = fixtures::small_world_config();
  const World w = generate_catalog(cfg, 1);
  ASSERT_EQ(w.items.size(), cfg.n_items);
  ASSERT_EQ(w.users.size(), cfg.n_users);
  std::set<std::uint32_t> units;
  std::size_t stock_one = 0;
  for (std::size_t i = 0; i < w.items.size(); ++i) {
    const auto& item = w.items[i];
    EXPECT_EQ(item.item_id, i + 1);
    EXPECT_LT(item.true_unit, cfg.n_true_units);
    EXPECT_GE(item.attributes.category, 1u);
    EXPECT_LE(item.attributes.category, cfg.n_categories);
    EXPECT_GE(item.initial_stock, 1u);
    EXPECT_LE(item.initial_stock, cfg.max_stock);
    EXPECT_FALSE(item.sold);
    units.insert(item.true_unit);
    stock_one += item.initial_stock == 1 ? 1 : 0;
  }
  EXPECT_EQ(units.size(), cfg.n_true_units);
  const double frac = static_cast<double>(stock_one) / static_cast<double>(cfg.n_items);
  EXPECT_NEAR(frac, cfg.stock_one_fraction, 0.05);
}

TEST(Marketplace, GroundTruthCtrIsAProbability) {
  const World w = generate_catalog(fixtures::small_world_config(), 2);
  for (std::size_t u = 0; u < 10; ++u) {
    for (std::size_t i = 0; i < 200; ++i) {
      const double p = ground_truth_ctr(w, w.users[u], w.items[i]);
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
    }
  }
}

TEST(Inventory, ListsOverTimeAndSells) {
  World w = generate_catalog(fixtures::small_world_config(), 3);
  Inventory inv(w);
  inv.advance_to(0);
  const std::size_t at_start = inv.available().size();
  inv.advance_to(day_start(5));
  EXPECT_EQ(inv.available().size(), w.items.size());
  EXPECT_LT(at_start, w.items.size());
  for (auto id : inv.available()) EXPECT_LE(w.item(id).list_time, day_start(5));

  auto one = std::find_if(w.items.begin(), w.items.end(), [](const SynthItem& it) { return it.initial_stock == 1; });
  ASSERT_NE(one, w.items.end());
  const std::uint32_t id = one->item_id;
  const std::uint32_t unit = one->true_unit;
  EXPECT_TRUE(inv.sell(w, id, 123));
  EXPECT_TRUE(w.item(id).sold);
  EXPECT_EQ(w.item(id).sold_time, 123);
  EXPECT_FALSE(inv.is_available(id));
  const auto in_unit = inv.available_in_unit(unit);
  EXPECT_EQ(std::find(in_unit.begin(), in_unit.end(), id), in_unit.end());
  EXPECT_FALSE(inv.sell(w, id, 124));
}

TEST(SimulateLog, EventsAreOrderedAndConsistent) {
  World w = generate_catalog(fixtures::small_world_config(), 4);
  const auto events = simulate_log(w, 3, ExposurePolicy{}, 9);
  ASSERT_FALSE(events.empty());
  EXPECT_TRUE(std::is_sorted(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return a.timestamp_ms < b.timestamp_ms;
  }));
  EXPECT_LT(events.back().timestamp_ms, day_start(4));
  // Every click follows an impression of the same (user, item).
  std::set<std::pair<std::uint32_t, std::uint32_t>> shown;
  std::map<std::uint32_t, std::int64_t> sold_at;
  for (const auto& e : events) {
    EXPECT_NE(e.surface, Surface::kIuCard);
    if (e.kind == EventKind::kImpression) {
      shown.insert({e.user_id, e.item_id});
      EXPECT_FALSE(sold_at.contains(e.item_id)) << "impression of a sold-out item";
    } else {
      EXPECT_TRUE(shown.contains({e.user_id, e.item_id}));
    }
    if (e.kind == EventKind::kTransaction && w.item(e.item_id).sold && w.item(e.item_id).sold_time == e.timestamp_ms) {
      sold_at[e.item_id] = e.timestamp_ms;
    }
  }
  EXPECT_FALSE(sold_at.empty());
}

TEST(SimulateLog, SameSeedSameLog) {
  const auto cfg = fixtures::small_world_config();
  World a = generate_catalog(cfg, 4);
  World b = generate_catalog(cfg, 4);
  EXPECT_EQ(simulate_log(a, 2, ExposurePolicy{}, 1), simulate_log(b, 2, ExposurePolicy{}, 1));
  EXPECT_EQ(a.items, b.items);
}

TEST(SimulateLog, TransactionsRespectStock) {
  World w = generate_catalog(fixtures::small_world_config(), 8);
  const auto initial = w.items;
  const auto events = simulate_log(w, 4, ExposurePolicy{}, 2);
  std::map<std::uint32_t, std::uint32_t> bought;
  for (const auto& e : events) bought[e.item_id] += e.kind == EventKind::kTransaction ? 1 : 0;
  for (const auto& [id, n] : bought) {
    EXPECT_LE(n, initial[id - 1].initial_stock);
    EXPECT_EQ(w.item(id).stock, initial[id - 1].initial_stock - n);
    EXPECT_EQ(w.item(id).sold, w.item(id).stock == 0);
  }
}
