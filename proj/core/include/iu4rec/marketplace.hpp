#pragma once

// Seeded synthetic C2C marketplace: users with latent interests, limited-stock
// items clustered around hidden ground-truth units, and a behavioral oracle
// that turns exposures into click/inquiry/transaction logs.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iu4rec/numeric.hpp"

namespace iu4rec {

inline constexpr std::int64_t kMillisPerHour = 3'600'000;
inline constexpr std::int64_t kMillisPerDay = 86'400'000;

// 1-based day index of a timestamp (day 1 = [0, 24h)).
inline int day_of(std::int64_t timestamp_ms) {
  return static_cast<int>(timestamp_ms / kMillisPerDay) + 1;
}
inline std::int64_t day_start(int day) { return static_cast<std::int64_t>(day - 1) * kMillisPerDay; }

enum class EventKind : std::uint8_t { kImpression, kClick, kInquiry, kTransaction };
// kIuCard is a homepage slot that shows an interest unit instead of one item.
enum class Surface : std::uint8_t { kHomepage, kIuCard, kIuPage };

std::string_view to_string(EventKind kind);
std::string_view to_string(Surface surface);
EventKind parse_event_kind(std::string_view text);
Surface parse_surface(std::string_view text);

struct InteractionEvent {
  std::int64_t timestamp_ms = 0;
  std::uint32_t user_id = 0;
  std::uint32_t item_id = 0;
  EventKind kind = EventKind::kImpression;
  Surface surface = Surface::kHomepage;

  bool operator==(const InteractionEvent&) const = default;
};

struct AttributeRecord {
  std::uint32_t category = 0;  // 1-based
  std::uint32_t brand = 0;     // 1-based, global across categories
  std::string model;           // empty when the seller gave none

  bool operator==(const AttributeRecord&) const = default;
};

struct SynthUser {
  std::uint32_t user_id = 0;
  std::vector<double> latent;
  double activity_rate = 1.0;  // expected sessions per day

  bool operator==(const SynthUser&) const = default;
};

struct SynthItem {
  std::uint32_t item_id = 0;
  std::uint32_t seller_id = 0;
  std::uint32_t true_unit = 0;  // hidden generator cluster, 0-based
  AttributeRecord attributes;
  std::vector<double> image;
  std::vector<double> text;
  std::vector<double> residual;  // item-specific taste component
  std::uint32_t initial_stock = 1;
  std::uint32_t stock = 1;
  std::int64_t list_time = 0;
  bool sold = false;
  std::int64_t sold_time = 0;

  bool operator==(const SynthItem&) const = default;
};

struct WorldConfig {
  std::size_t n_users = 2000;
  std::size_t n_items = 20000;
  std::size_t n_true_units = 400;
  std::size_t latent_dim = 32;
  std::size_t image_dim = 16;
  std::size_t text_dim = 16;
  std::size_t n_categories = 20;
  std::size_t brands_per_category = 2;

  // Sell-out pressure: fraction of items listed with stock 1.
  double stock_one_fraction = 0.8;
  std::uint32_t max_stock = 5;
  // Units whose items carry a structured model attribute (SPU candidates).
  double standard_unit_fraction = 0.35;
  double model_label_rate = 0.9;
  double initial_listed_fraction = 0.5;
  int listing_days = 8;

  // Unit center = category_weight*cat + brand_weight*brand + unit_weight*own.
  double category_weight = 1.0;
  double brand_weight = 0.5;
  double unit_weight = 1.0;
  double residual_scale = 0.5;
  // Users: a few interest categories and units plus isotropic noise.
  std::size_t user_interest_categories = 2;
  std::size_t user_interest_units = 3;
  double user_category_strength = 1.0;
  double user_unit_strength = 1.2;
  double user_noise = 0.3;
  double activity_min = 0.5;
  double activity_max = 2.0;

  // Ground-truth CTR = sigmoid(alpha*<u, center> + beta*<u, residual> + bias).
  double alpha = 2.0;
  double beta = 1.0;
  double bias = -3.5;

  double image_noise = 0.1;
  double text_noise = 0.15;
};

struct World {
  WorldConfig config;
  std::vector<SynthUser> users;  // users[i].user_id == i + 1
  std::vector<SynthItem> items;  // items[i].item_id == i + 1
  Matrix unit_centers;           // n_true_units x latent_dim

  const SynthUser& user(std::uint32_t id) const { return users.at(id - 1); }
  const SynthItem& item(std::uint32_t id) const { return items.at(id - 1); }
  SynthItem& item(std::uint32_t id) { return items.at(id - 1); }
};

// Throws ConfigError on infeasible configurations.
void validate(const WorldConfig& cfg);

World generate_catalog(const WorldConfig& cfg, std::uint64_t seed);

double ground_truth_ctr(const World& world, const SynthUser& user, const SynthItem& item);

// Items that are listed and unsold at the current clock, with O(1) removal.
class Inventory {
 public:
  explicit Inventory(const World& world);

  // Lists every unsold item with list_time <= t.
  void advance_to(std::int64_t t);
  std::span<const std::uint32_t> available() const { return available_; }
  std::span<const std::uint32_t> available_in_unit(std::uint32_t true_unit) const {
    return by_unit_[true_unit];
  }
  bool is_available(std::uint32_t item_id) const { return position_[item_id] != kAbsent; }

  // Decrements stock; on sell-out marks the item sold and delists it.
  // Returns false when the item had no stock left.
  bool sell(World& world, std::uint32_t item_id, std::int64_t t);

 private:
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  void remove(std::uint32_t item_id, std::uint32_t true_unit);

  std::vector<std::uint32_t> pending_;  // sorted by list_time, descending (pop from back)
  const World* world_;
  std::vector<std::uint32_t> available_;
  std::vector<std::size_t> position_;
  std::vector<std::vector<std::uint32_t>> by_unit_;
  std::vector<std::size_t> unit_position_;
};

struct ExposurePolicy {
  std::size_t homepage_size = 12;
  // Probability that a homepage click opens a page of same-unit items.
  double iu_page_prob = 0.5;
  std::size_t iu_page_size = 6;
  double inquiry_prob = 0.3;
  double transaction_prob = 0.5;  // given an inquiry
};

// Runs days [first_day, first_day + horizon_days) of random-exposure traffic.
// Mutates stock state in `world`. Events are time ordered.
std::vector<InteractionEvent> simulate_log(World& world, int horizon_days,
                                           const ExposurePolicy& policy, std::uint64_t seed,
                                           int first_day = 1);

}  // namespace iu4rec
