#include "iu4rec/two_stage_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "iu4rec/errors.hpp"
#include "iu4rec/rng.hpp"

namespace iu4rec {

std::vector<bool> interleave_pattern(double iu_slot_ratio, std::size_t page_size) {
  if (!(iu_slot_ratio >= 0.0 && iu_slot_ratio <= 1.0)) {
    throw ConfigError("merge policy: iu_slot_ratio must lie in [0, 1]");
  }
  const std::int64_t r = std::llround(iu_slot_ratio * 1e6);
  std::vector<bool> out(page_size);
  for (std::size_t s = 0; s < page_size; ++s) {
    const auto si = static_cast<std::int64_t>(s);
    out[s] = ((si + 1) * r) / 1'000'000 > (si * r) / 1'000'000;
  }
  return out;
}

namespace {

template <class T>
void sort_by_score(std::vector<T>& v) {
  std::stable_sort(v.begin(), v.end(), [](const T& a, const T& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
}

}  // namespace

std::vector<HomepageCard> stage_one_rank(std::span<const std::uint32_t> items, std::span<const IuCandidate> ius,
                                         const ItemScorer& scorer, const IuCatalog& catalog,
                                         const MergePolicy& policy, std::size_t page_size, CardScore mode) {
  const auto pattern = interleave_pattern(policy.iu_slot_ratio, page_size);
  std::vector<HomepageCard> item_cards;
  for (std::uint32_t id : items) {
    HomepageCard c;
    c.item_id = id;
    c.score = scorer(id, false);
    item_cards.push_back(c);
  }
  std::vector<HomepageCard> iu_cards;
  if (policy.iu_slot_ratio > 0.0) {
    for (const auto& cand : ius) {
      if (cand.members.empty()) continue;
      HomepageCard c;
      c.is_iu = true;
      c.iu_id = cand.iu_id;
      c.title = catalog.unit(cand.iu_id).title;
      double best = -std::numeric_limits<double>::infinity();
      double sum = 0.0;
      for (std::uint32_t m : cand.members) {
        const double s = scorer(m, true);
        sum += s;
        if (s > best || (s == best && m < c.item_id)) {
          best = s;
          c.item_id = m;
        }
      }
      c.score = mode == CardScore::kMax ? best : sum / static_cast<double>(cand.members.size());
      iu_cards.push_back(std::move(c));
    }
  }
  sort_by_score(item_cards);
  std::stable_sort(iu_cards.begin(), iu_cards.end(), [](const HomepageCard& a, const HomepageCard& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.iu_id < b.iu_id;
  });

  std::vector<HomepageCard> page;
  std::size_t next_item = 0;
  std::size_t next_iu = 0;
  for (std::size_t s = 0; s < page_size; ++s) {
    const bool want_iu = pattern[s];
    const bool have_iu = next_iu < iu_cards.size();
    const bool have_item = next_item < item_cards.size();
    if (!have_iu && !have_item) break;
    HomepageCard card = (want_iu && have_iu) || !have_item ? iu_cards[next_iu++] : item_cards[next_item++];
    card.slot = page.size();
    page.push_back(std::move(card));
  }
  return page;
}

std::vector<RankedItem> stage_two_rank(const InterestUnit& unit, const Inventory& inventory,
                                       const ItemScorer& scorer) {
  std::vector<RankedItem> out;
  for (std::uint32_t m : unit.members) {
    if (inventory.is_available(m)) out.push_back({m, scorer(m, true)});
  }
  sort_by_score(out);
  return out;
}

// ---------------------------------------------------------------------------

SurfaceCounters& SurfaceCounters::operator+=(const SurfaceCounters& o) {
  impressions += o.impressions;
  clicks += o.clicks;
  transactions += o.transactions;
  return *this;
}

SurfaceCounters SessionOutcome::iu_domain() const {
  SurfaceCounters c = at(Surface::kIuCard);
  c += at(Surface::kIuPage);
  return c;
}

SurfaceCounters SessionOutcome::overall() const {
  SurfaceCounters c;
  for (const auto& s : by_surface) c += s;
  return c;
}

SessionOutcome count_outcome(std::span<const InteractionEvent> events) {
  SessionOutcome out;
  for (const auto& e : events) {
    auto& c = out.at(e.surface);
    switch (e.kind) {
      case EventKind::kImpression: ++c.impressions; break;
      case EventKind::kClick: ++c.clicks; break;
      case EventKind::kTransaction: ++c.transactions; break;
      case EventKind::kInquiry: break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::int64_t kEventSpacingMs = 10;

class ServingSimulator {
 public:
  ServingSimulator(ServingState& state, const IuCatalog& catalog, const CtrModel& model, const SimConfig& cfg,
                   std::uint64_t behavior_seed, const StageTwoObserver& observer)
      : state_(state),
        catalog_(catalog),
        model_(model),
        cfg_(cfg),
        observer_(observer),
        rng_(behavior_seed),
        inventory_(state.world) {}

  SimResult run(std::uint64_t schedule_seed, const UserFilter& users) {
    Rng schedule(schedule_seed);
    SimResult result;
    for (int day = cfg_.first_day; day < cfg_.first_day + cfg_.horizon_days; ++day) {
      // Arrivals are drawn for every user so arms share one schedule.
      std::vector<std::uint32_t> sessions;
      for (const auto& user : state_.world.users) {
        const std::uint32_t n = schedule.poisson(user.activity_rate);
        for (std::uint32_t k = 0; k < n; ++k) sessions.push_back(user.user_id);
      }
      schedule.shuffle(std::span<std::uint32_t>(sessions));
      const std::int64_t slot = kMillisPerDay / static_cast<std::int64_t>(sessions.size() + 1);
      for (std::size_t s = 0; s < sessions.size(); ++s) {
        if (users && !users(sessions[s])) continue;
        clock_ = std::max(clock_, day_start(day) + static_cast<std::int64_t>(s + 1) * slot);
        inventory_.advance_to(clock_);
        state_.store.advance_to(clock_);
        run_session(state_.world.user(sessions[s]));
        ++result.sessions;
      }
    }
    result.events = std::move(events_);
    result.outcome = count_outcome(result.events);
    return result;
  }

 private:
  void emit(std::uint32_t user, std::uint32_t item, EventKind kind, Surface surface) {
    const InteractionEvent e{clock_, user, item, kind, surface};
    events_.push_back(e);
    state_.store.observe(e);
    clock_ += kEventSpacingMs;
  }

  void purchase_funnel(const SynthUser& user, std::uint32_t item_id, Surface surface) {
    if (!rng_.bernoulli(cfg_.inquiry_prob)) return;
    emit(user.user_id, item_id, EventKind::kInquiry, surface);
    if (rng_.bernoulli(cfg_.transaction_prob) && state_.world.item(item_id).stock > 0) {
      const std::int64_t t = clock_;
      emit(user.user_id, item_id, EventKind::kTransaction, surface);
      inventory_.sell(state_.world, item_id, t);
    }
  }

  void expose_item(const SynthUser& user, std::uint32_t item_id, Surface surface) {
    emit(user.user_id, item_id, EventKind::kImpression, surface);
    if (!rng_.bernoulli(ground_truth_ctr(state_.world, user, state_.world.item(item_id)))) return;
    emit(user.user_id, item_id, EventKind::kClick, surface);
    purchase_funnel(user, item_id, surface);
  }

  std::vector<std::uint32_t> candidate_items() {
    const auto pool = inventory_.available();
    std::vector<std::uint32_t> out;
    if (pool.size() <= cfg_.item_candidates) {
      out.assign(pool.begin(), pool.end());
      return out;
    }
    while (out.size() < cfg_.item_candidates) {
      const std::uint32_t id = pool[rng_.below(pool.size())];
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
    return out;
  }

  std::vector<std::uint32_t> unsold_members(std::uint32_t iu_id) const {
    std::vector<std::uint32_t> members;
    for (std::uint32_t m : catalog_.unit(iu_id).members) {
      if (inventory_.is_available(m)) members.push_back(m);
    }
    std::stable_sort(members.begin(), members.end(), [&](std::uint32_t a, std::uint32_t b) {
      return state_.world.item(a).list_time > state_.world.item(b).list_time;
    });
    if (members.size() > cfg_.members_scored) members.resize(cfg_.members_scored);
    return members;
  }

  // Half from the user's recent units, the rest uniformly from the catalog.
  std::vector<IuCandidate> candidate_ius(const TrainingSample& context) {
    std::vector<IuCandidate> out;
    auto taken = [&](std::uint32_t iu) {
      return std::any_of(out.begin(), out.end(), [&](const IuCandidate& c) { return c.iu_id == iu; });
    };
    auto try_add = [&](std::uint32_t iu) {
      if (iu == 0 || taken(iu)) return;
      auto members = unsold_members(iu);
      if (!members.empty()) out.push_back({iu, std::move(members)});
    };
    const std::size_t from_history = cfg_.iu_candidates / 2;
    for (const auto& e : context.iu_seq) {
      if (out.size() >= from_history) break;
      try_add(e.iu_id);
    }
    const std::size_t n_ius = catalog_.size();
    for (std::size_t attempt = 0; attempt < 4 * cfg_.iu_candidates && out.size() < cfg_.iu_candidates && n_ius > 0;
         ++attempt) {
      try_add(static_cast<std::uint32_t>(1 + rng_.below(n_ius)));
    }
    return out;
  }

  std::size_t scroll_depth() {
    std::size_t depth = 1;
    const double stop = 1.0 / std::max(1.0, cfg_.mean_scroll_depth);
    while (!rng_.bernoulli(stop)) ++depth;
    return depth;
  }

  void run_session(const SynthUser& user) {
    const FeatureStore& store = state_.store;
    TrainingSample probe = store.make_context(user.user_id, clock_);
    const SessionScorer scorer(model_, probe);
    const ItemScorer score = [&](std::uint32_t item_id, bool iu_domain) {
      store.retarget(probe, item_id, iu_domain);
      return scorer.predict(probe);
    };
    const auto items = candidate_items();
    const auto ius = candidate_ius(probe);
    const auto page = stage_one_rank(items, ius, score, catalog_, cfg_.merge, cfg_.page_size, cfg_.card_score);
    const std::size_t depth = std::min(page.size(), scroll_depth());
    for (std::size_t s = 0; s < depth; ++s) {
      const HomepageCard& card = page[s];
      if (!inventory_.is_available(card.item_id)) continue;
      if (!card.is_iu) {
        expose_item(user, card.item_id, Surface::kHomepage);
        continue;
      }
      // The card's pull is the user's best unsold option in the unit.
      double p = 0.0;
      for (const auto& cand : ius) {
        if (cand.iu_id != card.iu_id) continue;
        for (std::uint32_t m : cand.members) {
          if (inventory_.is_available(m)) p = std::max(p, ground_truth_ctr(state_.world, user, state_.world.item(m)));
        }
      }
      emit(user.user_id, card.item_id, EventKind::kImpression, Surface::kIuCard);
      if (!rng_.bernoulli(p)) continue;
      emit(user.user_id, card.item_id, EventKind::kClick, Surface::kIuCard);
      const auto ranked = stage_two_rank(catalog_.unit(card.iu_id), inventory_, score);
      const std::size_t shown = std::min(ranked.size(), cfg_.stage_two_size);
      if (observer_) observer_(user.user_id, card.iu_id, std::span<const RankedItem>(ranked).first(shown));
      for (std::size_t k = 0; k < shown; ++k) {
        if (inventory_.is_available(ranked[k].item_id)) expose_item(user, ranked[k].item_id, Surface::kIuPage);
      }
    }
  }

  ServingState& state_;
  const IuCatalog& catalog_;
  const CtrModel& model_;
  const SimConfig& cfg_;
  const StageTwoObserver& observer_;
  Rng rng_;
  Inventory inventory_;
  std::int64_t clock_ = 0;
  std::vector<InteractionEvent> events_;
};

}  // namespace

SimResult run_sessions(ServingState& state, const IuCatalog& catalog, const CtrModel& model, const SimConfig& cfg,
                       std::uint64_t schedule_seed, std::uint64_t behavior_seed, const UserFilter& users,
                       const StageTwoObserver& observer) {
  if (cfg.horizon_days < 0) throw ConfigError("simulation: horizon_days must be nonnegative");
  ServingSimulator sim(state, catalog, model, cfg, behavior_seed, observer);
  return sim.run(schedule_seed, users);
}

// ---------------------------------------------------------------------------

bool in_arm_b(std::uint32_t user_id, std::uint64_t seed, double split) {
  const std::uint64_t h = Rng::derive(seed ^ 0x61622d7370ULL, user_id);
  return static_cast<double>(h >> 11) * 0x1.0p-53 < split;
}

namespace {

double pct_change(double b, double a) {
  if (a == 0.0) return b == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  return (b / a - 1.0) * 100.0;
}

AbDelta delta(const SurfaceCounters& a, const SurfaceCounters& b, std::size_t users_a, std::size_t users_b) {
  const double na = static_cast<double>(users_a);
  const double nb = static_cast<double>(users_b);
  return {pct_change(b.ctr(), a.ctr()), pct_change(static_cast<double>(b.clicks) / nb, static_cast<double>(a.clicks) / na),
          pct_change(static_cast<double>(b.transactions) / nb, static_cast<double>(a.transactions) / na)};
}

}  // namespace

AbReport run_ab_test(const ServingState& base, const IuCatalog& catalog, const CtrModel& model_a,
                     const CtrModel& model_b, const AbConfig& ab, const SimConfig& cfg, std::uint64_t seed) {
  if (!(ab.split > 0.0 && ab.split < 1.0) && ab.mode == AbMode::kSplit) {
    throw ConfigError("ab test: split must lie strictly between 0 and 1");
  }
  AbReport report;
  report.model_a = std::string(to_string(model_a.kind()));
  report.model_b = std::string(to_string(model_b.kind()));
  const std::uint64_t schedule_seed = Rng::derive(seed, 1);
  UserFilter filter_a;
  UserFilter filter_b;
  std::uint64_t behavior_a = Rng::derive(seed, 2);
  std::uint64_t behavior_b = Rng::derive(seed, 3);
  if (ab.mode == AbMode::kShared) {
    behavior_b = behavior_a;
    report.users_a = report.users_b = base.world.users.size();
  } else {
    filter_a = [&](std::uint32_t u) { return !in_arm_b(u, seed, ab.split); };
    filter_b = [&](std::uint32_t u) { return in_arm_b(u, seed, ab.split); };
    for (const auto& u : base.world.users) (in_arm_b(u.user_id, seed, ab.split) ? report.users_b : report.users_a) += 1;
  }
  if (report.users_a == 0 || report.users_b == 0) throw Error("ab test: an arm has no users");

  ServingState arm_a = base;
  ServingState arm_b = base;
  report.arm_a = run_sessions(arm_a, catalog, model_a, cfg, schedule_seed, behavior_a, filter_a).outcome;
  report.arm_b = run_sessions(arm_b, catalog, model_b, cfg, schedule_seed, behavior_b, filter_b).outcome;
  report.overall = delta(report.arm_a.overall(), report.arm_b.overall(), report.users_a, report.users_b);
  report.interest_unit = delta(report.arm_a.iu_domain(), report.arm_b.iu_domain(), report.users_a, report.users_b);
  report.general_product = delta(report.arm_a.normal(), report.arm_b.normal(), report.users_a, report.users_b);
  return report;
}

namespace {

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return "undefined";
  return v;
}

nlohmann::ordered_json counters(const SurfaceCounters& c) {
  return {{"impressions", c.impressions}, {"clicks", c.clicks}, {"bills", c.transactions}, {"ctr", c.ctr()}};
}

nlohmann::ordered_json arm(const SessionOutcome& o, std::size_t users) {
  return {{"users", users},
          {"overall", counters(o.overall())},
          {"interest_unit_rec", counters(o.iu_domain())},
          {"general_product_rec", counters(o.normal())},
          {"gmv", o.gmv()}};
}

nlohmann::ordered_json row(const AbDelta& d) {
  return {{"ctr_pct", number(d.ctr_pct)}, {"clicks_pct", number(d.clicks_pct)}, {"bills_pct", number(d.bills_pct)}};
}

}  // namespace

nlohmann::ordered_json to_json(const AbReport& r) {
  nlohmann::ordered_json out;
  out["model_a"] = r.model_a;
  out["model_b"] = r.model_b;
  out["arm_a"] = arm(r.arm_a, r.users_a);
  out["arm_b"] = arm(r.arm_b, r.users_b);
  out["deltas"] = {{"Overall", row(r.overall)},
                   {"Interest Unit Rec", row(r.interest_unit)},
                   {"General Product Rec", row(r.general_product)}};
  return out;
}

}  // namespace iu4rec
