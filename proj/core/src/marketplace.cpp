#include "iu4rec/marketplace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "iu4rec/errors.hpp"
#include "iu4rec/rng.hpp"

namespace iu4rec {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kImpression: return "impression";
    case EventKind::kClick: return "click";
    case EventKind::kInquiry: return "inquiry";
    case EventKind::kTransaction: return "transaction";
  }
  return "impression";
}

std::string_view to_string(Surface surface) {
  switch (surface) {
    case Surface::kHomepage: return "homepage";
    case Surface::kIuCard: return "iu_card";
    case Surface::kIuPage: return "iu_page";
  }
  return "homepage";
}

EventKind parse_event_kind(std::string_view text) {
  if (text == "impression") return EventKind::kImpression;
  if (text == "click") return EventKind::kClick;
  if (text == "inquiry") return EventKind::kInquiry;
  if (text == "transaction") return EventKind::kTransaction;
  throw DataError("unknown event kind '" + std::string(text) + "'");
}

Surface parse_surface(std::string_view text) {
  if (text == "homepage") return Surface::kHomepage;
  if (text == "iu_card") return Surface::kIuCard;
  if (text == "iu_page") return Surface::kIuPage;
  throw DataError("unknown surface '" + std::string(text) + "'");
}

void validate(const WorldConfig& cfg) {
  if (cfg.n_users == 0) throw ConfigError("world: n_users must be positive");
  if (cfg.n_items == 0) throw ConfigError("world: n_items must be positive");
  if (cfg.n_true_units == 0) throw ConfigError("world: n_true_units must be positive");
  if (cfg.n_true_units > cfg.n_items) {
    throw ConfigError("world: n_true_units (" + std::to_string(cfg.n_true_units) +
                      ") exceeds n_items (" + std::to_string(cfg.n_items) + ")");
  }
  if (cfg.latent_dim == 0 || cfg.image_dim == 0 || cfg.text_dim == 0) {
    throw ConfigError("world: vector dimensions must be positive");
  }
  if (cfg.n_categories == 0 || cfg.brands_per_category == 0) {
    throw ConfigError("world: need at least one category and brand");
  }
  if (cfg.stock_one_fraction < 0.0 || cfg.stock_one_fraction > 1.0) {
    throw ConfigError("world: stock_one_fraction must be in [0, 1]");
  }
  if (cfg.max_stock < 1) throw ConfigError("world: max_stock must be >= 1");
  if (cfg.listing_days < 1) throw ConfigError("world: listing_days must be >= 1");
  if (cfg.activity_min < 0.0 || cfg.activity_max < cfg.activity_min) {
    throw ConfigError("world: invalid activity range");
  }
  if (cfg.user_interest_categories > cfg.n_categories) {
    throw ConfigError("world: more interest categories than categories");
  }
}

namespace {

std::vector<double> random_unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : v) x = rng.normal();
    norm = std::sqrt(dot(v, v));
  }
  for (double& x : v) x /= norm;
  return v;
}

Matrix random_projection(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  const double sd = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& x : m.data()) x = rng.normal(0.0, sd);
  return m;
}

}  // namespace

World generate_catalog(const WorldConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Rng rng(seed);
  const std::size_t dim = cfg.latent_dim;
  const std::size_t n_brands = cfg.n_categories * cfg.brands_per_category;

  std::vector<std::vector<double>> category_dirs;
  for (std::size_t c = 0; c < cfg.n_categories; ++c) category_dirs.push_back(random_unit_vector(rng, dim));
  std::vector<std::vector<double>> brand_dirs;
  for (std::size_t b = 0; b < n_brands; ++b) brand_dirs.push_back(random_unit_vector(rng, dim));

  World world;
  world.config = cfg;
  world.unit_centers = Matrix(cfg.n_true_units, dim);
  std::vector<std::uint32_t> unit_category(cfg.n_true_units);
  std::vector<std::uint32_t> unit_brand(cfg.n_true_units);
  std::vector<bool> unit_standard(cfg.n_true_units);
  std::vector<std::vector<std::uint32_t>> units_in_category(cfg.n_categories);
  for (std::size_t g = 0; g < cfg.n_true_units; ++g) {
    const std::size_t cat = g % cfg.n_categories;
    const std::size_t brand = cat * cfg.brands_per_category + (g / cfg.n_categories) % cfg.brands_per_category;
    unit_category[g] = static_cast<std::uint32_t>(cat + 1);
    unit_brand[g] = static_cast<std::uint32_t>(brand + 1);
    unit_standard[g] = rng.bernoulli(cfg.standard_unit_fraction);
    units_in_category[cat].push_back(static_cast<std::uint32_t>(g));
    const auto own = random_unit_vector(rng, dim);
    auto center = world.unit_centers.row(g);
    for (std::size_t j = 0; j < dim; ++j) {
      center[j] = cfg.category_weight * category_dirs[cat][j] + cfg.brand_weight * brand_dirs[brand][j] +
                  cfg.unit_weight * own[j];
    }
  }

  const Matrix image_proj = random_projection(rng, cfg.image_dim, dim);
  const Matrix text_proj = random_projection(rng, cfg.text_dim, dim);
  const double residual_sd = cfg.residual_scale / std::sqrt(static_cast<double>(dim));
  const std::int64_t listing_span = static_cast<std::int64_t>(cfg.listing_days) * kMillisPerDay;
  const std::size_t n_sellers = std::max<std::size_t>(1, cfg.n_items / 4);

  world.items.resize(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    SynthItem& item = world.items[i];
    item.item_id = static_cast<std::uint32_t>(i + 1);
    item.seller_id = static_cast<std::uint32_t>(1 + rng.below(n_sellers));
    const std::size_t g = i < cfg.n_true_units ? i : rng.below(cfg.n_true_units);
    item.true_unit = static_cast<std::uint32_t>(g);
    item.attributes.category = unit_category[g];
    item.attributes.brand = unit_brand[g];
    if (unit_standard[g] && rng.bernoulli(cfg.model_label_rate)) {
      item.attributes.model = "M" + std::to_string(g);
    }
    const auto center = world.unit_centers.row(g);
    item.image.assign(cfg.image_dim, 0.0);
    matvec(image_proj, center, item.image);
    for (double& x : item.image) x += rng.normal(0.0, cfg.image_noise);
    item.text.assign(cfg.text_dim, 0.0);
    matvec(text_proj, center, item.text);
    for (double& x : item.text) x += rng.normal(0.0, cfg.text_noise);
    item.residual.resize(dim);
    for (double& x : item.residual) x = rng.normal(0.0, residual_sd);
    item.initial_stock = rng.bernoulli(cfg.stock_one_fraction)
                             ? 1
                             : static_cast<std::uint32_t>(std::min<std::uint64_t>(
                                   cfg.max_stock, 2 + rng.below(std::max<std::uint32_t>(1, cfg.max_stock - 1))));
    item.stock = item.initial_stock;
    item.list_time = rng.bernoulli(cfg.initial_listed_fraction)
                         ? 0
                         : static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(listing_span)));
  }

  world.users.resize(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    SynthUser& user = world.users[u];
    user.user_id = static_cast<std::uint32_t>(u + 1);
    user.latent.assign(dim, 0.0);
    std::vector<std::uint32_t> cats(cfg.n_categories);
    for (std::size_t c = 0; c < cats.size(); ++c) cats[c] = static_cast<std::uint32_t>(c);
    for (std::size_t k = 0; k < cfg.user_interest_categories; ++k) {
      const std::size_t pick = k + rng.below(cats.size() - k);
      std::swap(cats[k], cats[pick]);
      axpy(cfg.user_category_strength, category_dirs[cats[k]], user.latent);
    }
    for (std::size_t k = 0; k < cfg.user_interest_units; ++k) {
      std::uint32_t cat = cats[cfg.user_interest_categories > 0 ? rng.below(cfg.user_interest_categories)
                                                                : rng.below(cats.size())];
      const auto& pool = units_in_category[cat];
      if (pool.empty()) continue;
      const std::uint32_t g = pool[rng.below(pool.size())];
      const auto center = world.unit_centers.row(g);
      // Interest in a unit: its own direction, recovered as center minus shared parts.
      std::vector<double> own(center.begin(), center.end());
      axpy(-cfg.category_weight, category_dirs[cat], own);
      axpy(-cfg.brand_weight, brand_dirs[unit_brand[g] - 1], own);
      axpy(cfg.user_unit_strength / std::max(cfg.unit_weight, 1e-12), own, user.latent);
    }
    const double noise_sd = cfg.user_noise / std::sqrt(static_cast<double>(dim));
    for (double& x : user.latent) x += rng.normal(0.0, noise_sd);
    double norm = std::sqrt(dot(user.latent, user.latent));
    if (norm == 0.0) {
      user.latent[0] = 1e-3;
      norm = 1e-3;
    }
    if (norm > 10.0) {
      for (double& x : user.latent) x *= 10.0 / norm;
    }
    user.activity_rate = rng.uniform(cfg.activity_min, cfg.activity_max);
  }
  return world;
}

double ground_truth_ctr(const World& world, const SynthUser& user, const SynthItem& item) {
  const auto& cfg = world.config;
  const double affinity = dot(user.latent, world.unit_centers.row(item.true_unit));
  const double personal = dot(user.latent, item.residual);
  return sigmoid(cfg.alpha * affinity + cfg.beta * personal + cfg.bias);
}

// ---------------------------------------------------------------------------

Inventory::Inventory(const World& world)
    : world_(&world),
      position_(world.items.size() + 1, kAbsent),
      by_unit_(world.config.n_true_units),
      unit_position_(world.items.size() + 1, kAbsent) {
  for (const auto& item : world.items) {
    if (!item.sold && item.stock > 0) pending_.push_back(item.item_id);
  }
  std::stable_sort(pending_.begin(), pending_.end(), [&](std::uint32_t a, std::uint32_t b) {
    return world.item(a).list_time > world.item(b).list_time;
  });
}

void Inventory::advance_to(std::int64_t t) {
  while (!pending_.empty() && world_->item(pending_.back()).list_time <= t) {
    const std::uint32_t id = pending_.back();
    pending_.pop_back();
    const auto& item = world_->item(id);
    if (item.sold) continue;
    position_[id] = available_.size();
    available_.push_back(id);
    auto& unit = by_unit_[item.true_unit];
    unit_position_[id] = unit.size();
    unit.push_back(id);
  }
}

void Inventory::remove(std::uint32_t item_id, std::uint32_t true_unit) {
  const std::size_t pos = position_[item_id];
  const std::uint32_t last = available_.back();
  available_[pos] = last;
  position_[last] = pos;
  available_.pop_back();
  position_[item_id] = kAbsent;

  auto& unit = by_unit_[true_unit];
  const std::size_t upos = unit_position_[item_id];
  const std::uint32_t ulast = unit.back();
  unit[upos] = ulast;
  unit_position_[ulast] = upos;
  unit.pop_back();
  unit_position_[item_id] = kAbsent;
}

bool Inventory::sell(World& world, std::uint32_t item_id, std::int64_t t) {
  SynthItem& item = world.item(item_id);
  if (item.stock == 0 || item.sold) return false;
  --item.stock;
  if (item.stock == 0) {
    item.sold = true;
    item.sold_time = t;
    if (is_available(item_id)) remove(item_id, item.true_unit);
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::int64_t kEventSpacingMs = 10;

class LogSimulator {
 public:
  LogSimulator(World& world, const ExposurePolicy& policy, std::uint64_t seed)
      : world_(world), policy_(policy), rng_(seed), inventory_(world) {}

  std::vector<InteractionEvent> run(int first_day, int horizon_days) {
    for (int day = first_day; day < first_day + horizon_days; ++day) {
      std::vector<std::uint32_t> sessions;
      for (const auto& user : world_.users) {
        const std::uint32_t n = rng_.poisson(user.activity_rate);
        for (std::uint32_t k = 0; k < n; ++k) sessions.push_back(user.user_id);
      }
      rng_.shuffle(std::span<std::uint32_t>(sessions));
      const std::int64_t slot = kMillisPerDay / static_cast<std::int64_t>(sessions.size() + 1);
      for (std::size_t s = 0; s < sessions.size(); ++s) {
        clock_ = day_start(day) + static_cast<std::int64_t>(s + 1) * slot;
        inventory_.advance_to(clock_);
        run_session(world_.user(sessions[s]));
      }
    }
    return std::move(events_);
  }

 private:
  void emit(const SynthUser& user, std::uint32_t item, EventKind kind, Surface surface) {
    events_.push_back({clock_, user.user_id, item, kind, surface});
    clock_ += kEventSpacingMs;
  }

  // Impression plus the behavioral response. Returns true on click.
  bool expose(const SynthUser& user, std::uint32_t item_id, Surface surface) {
    emit(user, item_id, EventKind::kImpression, surface);
    const double p = ground_truth_ctr(world_, user, world_.item(item_id));
    if (!rng_.bernoulli(p)) return false;
    emit(user, item_id, EventKind::kClick, surface);
    if (rng_.bernoulli(policy_.inquiry_prob)) {
      emit(user, item_id, EventKind::kInquiry, surface);
      if (rng_.bernoulli(policy_.transaction_prob) && world_.item(item_id).stock > 0) {
        const std::int64_t t = clock_;
        emit(user, item_id, EventKind::kTransaction, surface);
        inventory_.sell(world_, item_id, t);
      }
    }
    return true;
  }

  std::vector<std::uint32_t> sample_distinct(std::span<const std::uint32_t> pool, std::size_t k,
                                             std::uint32_t exclude) {
    std::vector<std::uint32_t> out;
    if (pool.size() <= k + 1) {
      for (auto id : pool) {
        if (id != exclude && out.size() < k) out.push_back(id);
      }
      return out;
    }
    while (out.size() < k) {
      const std::uint32_t id = pool[rng_.below(pool.size())];
      if (id == exclude || std::find(out.begin(), out.end(), id) != out.end()) continue;
      out.push_back(id);
    }
    return out;
  }

  void run_session(const SynthUser& user) {
    const auto page = sample_distinct(inventory_.available(), policy_.homepage_size, 0);
    for (std::uint32_t item_id : page) {
      if (!inventory_.is_available(item_id)) continue;
      if (!expose(user, item_id, Surface::kHomepage)) continue;
      if (!rng_.bernoulli(policy_.iu_page_prob)) continue;
      const auto unit = world_.item(item_id).true_unit;
      const auto related = sample_distinct(inventory_.available_in_unit(unit), policy_.iu_page_size, item_id);
      for (std::uint32_t other : related) {
        if (inventory_.is_available(other)) expose(user, other, Surface::kIuPage);
      }
    }
  }

  World& world_;
  const ExposurePolicy& policy_;
  Rng rng_;
  Inventory inventory_;
  std::int64_t clock_ = 0;
  std::vector<InteractionEvent> events_;
};

}  // namespace

std::vector<InteractionEvent> simulate_log(World& world, int horizon_days,
                                           const ExposurePolicy& policy, std::uint64_t seed,
                                           int first_day) {
  if (horizon_days < 1) throw ConfigError("simulate_log: horizon must be at least one day");
  LogSimulator sim(world, policy, seed);
  return sim.run(first_day, horizon_days);
}

}  // namespace iu4rec
