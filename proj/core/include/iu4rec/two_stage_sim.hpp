#pragma once

// Two-stage serving simulator: stage one ranks a merged homepage of IU cards
// and normal items, a click on an IU card opens a stage-two page ranking the
// unit's unsold members. Includes the A/B harness.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iu4rec/ctr_model.hpp"
#include "iu4rec/feature_store.hpp"
#include "iu4rec/iu_construction.hpp"
#include "iu4rec/marketplace.hpp"

namespace iu4rec {

struct MergePolicy {
  double iu_slot_ratio = 0.13;
};

// Slot s holds an IU card iff floor((s+1)*r) > floor(s*r); r is read to
// 1e-6 precision. Gives floor(n*r) IU slots spread evenly over n slots.
std::vector<bool> interleave_pattern(double iu_slot_ratio, std::size_t page_size);

enum class CardScore { kMax, kMean };

struct HomepageCard {
  std::size_t slot = 0;
  bool is_iu = false;
  std::uint32_t item_id = 0;  // normal item, or the IU's best member
  std::uint32_t iu_id = 0;
  std::string title;
  double score = 0.0;
};

struct IuCandidate {
  std::uint32_t iu_id = 0;
  std::vector<std::uint32_t> members;  // unsold members to score
};

// Score of one target item for the current user.
using ItemScorer = std::function<double(std::uint32_t item_id, bool iu_domain)>;

std::vector<HomepageCard> stage_one_rank(std::span<const std::uint32_t> items, std::span<const IuCandidate> ius,
                                         const ItemScorer& scorer, const IuCatalog& catalog,
                                         const MergePolicy& policy, std::size_t page_size,
                                         CardScore mode = CardScore::kMax);

struct RankedItem {
  std::uint32_t item_id = 0;
  double score = 0.0;
};

// Unsold members only, by score descending (ties: lower item id first).
std::vector<RankedItem> stage_two_rank(const InterestUnit& unit, const Inventory& inventory,
                                       const ItemScorer& scorer);

struct SurfaceCounters {
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;
  std::uint64_t transactions = 0;

  double ctr() const {
    return impressions == 0 ? 0.0 : static_cast<double>(clicks) / static_cast<double>(impressions);
  }
  SurfaceCounters& operator+=(const SurfaceCounters& o);
  bool operator==(const SurfaceCounters&) const = default;
};

struct SessionOutcome {
  std::array<SurfaceCounters, 3> by_surface{};  // indexed by Surface

  SurfaceCounters& at(Surface s) { return by_surface[static_cast<std::size_t>(s)]; }
  const SurfaceCounters& at(Surface s) const { return by_surface[static_cast<std::size_t>(s)]; }
  SurfaceCounters iu_domain() const;  // IU cards + IU pages
  SurfaceCounters normal() const { return at(Surface::kHomepage); }
  SurfaceCounters overall() const;
  // Transactions times a unit price of 1.
  std::uint64_t gmv() const { return overall().transactions; }
  bool operator==(const SessionOutcome&) const = default;
};

SessionOutcome count_outcome(std::span<const InteractionEvent> events);

struct SimConfig {
  MergePolicy merge;
  std::size_t page_size = 40;
  double mean_scroll_depth = 20.0;
  std::size_t item_candidates = 60;
  std::size_t iu_candidates = 12;
  std::size_t members_scored = 12;  // most recently listed unsold members per IU
  std::size_t stage_two_size = 8;
  CardScore card_score = CardScore::kMax;
  double inquiry_prob = 0.3;
  double transaction_prob = 0.5;
  int first_day = 9;
  int horizon_days = 2;
};

// Mutable serving state one arm runs against.
struct ServingState {
  World world;
  FeatureStore store;
};

struct SimResult {
  SessionOutcome outcome;
  std::vector<InteractionEvent> events;
  std::size_t sessions = 0;
};

// Which users take part: all when empty.
using UserFilter = std::function<bool(std::uint32_t user_id)>;

// Sees every stage-two page: the opened unit and the items shown on it.
using StageTwoObserver =
    std::function<void(std::uint32_t user_id, std::uint32_t iu_id, std::span<const RankedItem> shown)>;

// Simulates days [first_day, first_day + horizon). Session arrivals come from
// schedule_seed, behavior from behavior_seed.
SimResult run_sessions(ServingState& state, const IuCatalog& catalog, const CtrModel& model, const SimConfig& cfg,
                       std::uint64_t schedule_seed, std::uint64_t behavior_seed, const UserFilter& users = {},
                       const StageTwoObserver& observer = {});

enum class AbMode {
  kSplit,   // hash-partitioned users, independent behavior streams
  kShared,  // every user in both arms, one behavior stream (A/A checks)
};

struct AbConfig {
  double split = 0.5;  // fraction of users in arm B
  AbMode mode = AbMode::kSplit;
};

struct AbDelta {
  double ctr_pct = 0.0;
  double clicks_pct = 0.0;  // per arm user
  double bills_pct = 0.0;   // per arm user
};

struct AbReport {
  std::string model_a;
  std::string model_b;
  std::size_t users_a = 0;
  std::size_t users_b = 0;
  SessionOutcome arm_a;
  SessionOutcome arm_b;
  AbDelta overall;
  AbDelta interest_unit;
  AbDelta general_product;
};

bool in_arm_b(std::uint32_t user_id, std::uint64_t seed, double split);

AbReport run_ab_test(const ServingState& base, const IuCatalog& catalog, const CtrModel& model_a,
                     const CtrModel& model_b, const AbConfig& ab, const SimConfig& cfg, std::uint64_t seed);

nlohmann::ordered_json to_json(const AbReport& report);

}  // namespace iu4rec
