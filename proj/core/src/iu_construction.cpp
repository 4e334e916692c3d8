#include "iu4rec/iu_construction.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "iu4rec/errors.hpp"
#include "iu4rec/rng.hpp"

namespace iu4rec {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::uint32_t nearest_centroid(const Matrix& centroids, std::span<const double> x, double* distance2) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  if (distance2 != nullptr) *distance2 = best_d;
  return best;
}

KMeansResult kmeans(const Matrix& data, std::size_t k, std::uint64_t seed, std::size_t max_iterations) {
  const std::size_t n = data.rows();
  const std::size_t dim = data.cols();
  if (k == 0) throw DataError("kmeans: k must be positive");
  if (k > n) {
    throw DataError("kmeans: k (" + std::to_string(k) + ") exceeds number of points (" +
                    std::to_string(n) + ")");
  }
  Rng rng(seed);
  KMeansResult result{Matrix(k, dim), std::vector<std::uint32_t>(n, 0), 0};
  Matrix& centroids = result.centroids;

  // k-means++ seeding.
  std::vector<double> dist(n);
  {
    const std::size_t first = rng.below(n);
    std::copy(data.row(first).begin(), data.row(first).end(), centroids.row(0).begin());
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(data.row(i), centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (double d : dist) total += d;
      std::size_t pick = 0;
      if (total <= 0.0) {
        pick = rng.below(n);
      } else {
        double r = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          r -= dist[i];
          if (r < 0.0) {
            pick = i;
            break;
          }
        }
      }
      std::copy(data.row(pick).begin(), data.row(pick).end(), centroids.row(c).begin());
      for (std::size_t i = 0; i < n; ++i) {
        dist[i] = std::min(dist[i], squared_distance(data.row(i), centroids.row(c)));
      }
    }
  }

  auto assign = [&]() {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t c = nearest_centroid(centroids, data.row(i), &dist[i]);
      if (c != result.assignment[i]) {
        result.assignment[i] = c;
        changed = true;
      }
    }
    return changed;
  };
  assign();

  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    centroids.fill(0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      axpy(1.0, data.row(i), centroids.row(result.assignment[i]));
      ++counts[result.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (double& x : centroids.row(c)) x /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: re-seed from the farthest point.
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy(data.row(far).begin(), data.row(far).end(), centroids.row(c).begin());
      dist[far] = 0.0;
    }
    result.iterations = iter + 1;
    if (!assign()) break;
  }
  return result;
}

// ---------------------------------------------------------------------------

Codebooks train_gsid_codebooks(const Matrix& vectors, std::uint64_t seed) {
  if (vectors.rows() < kCodebookSize) {
    throw DataError("train_gsid_codebooks: need at least " + std::to_string(kCodebookSize) +
                    " vectors, got " + std::to_string(vectors.rows()));
  }
  Codebooks books;
  Matrix residual = vectors;
  for (std::size_t level = 0; level < kGsidLevels; ++level) {
    KMeansResult km = kmeans(residual, kCodebookSize, Rng::derive(seed, level));
    for (std::size_t i = 0; i < residual.rows(); ++i) {
      axpy(-1.0, km.centroids.row(km.assignment[i]), residual.row(i));
    }
    books.levels[level] = std::move(km.centroids);
  }
  return books;
}

GsidCode assign_gsid(std::span<const double> vector, const Codebooks& books) {
  GsidCode code;
  std::vector<double> residual(vector.begin(), vector.end());
  for (std::size_t level = 0; level < kGsidLevels; ++level) {
    const std::uint32_t c = nearest_centroid(books.levels[level], residual);
    code.level[level] = static_cast<std::uint16_t>(c);
    axpy(-1.0, books.levels[level].row(c), residual);
  }
  return code;
}

std::array<double, kGsidLevels> gsid_residual_norms(std::span<const double> vector, const Codebooks& books) {
  std::array<double, kGsidLevels> norms{};
  std::vector<double> residual(vector.begin(), vector.end());
  for (std::size_t level = 0; level < kGsidLevels; ++level) {
    const std::uint32_t c = nearest_centroid(books.levels[level], residual);
    axpy(-1.0, books.levels[level].row(c), residual);
    norms[level] = std::sqrt(dot(residual, residual));
  }
  return norms;
}

// ---------------------------------------------------------------------------

std::string_view to_string(IuType type) {
  switch (type) {
    case IuType::kSpu: return "SPU";
    case IuType::kImage: return "Image";
    case IuType::kSemantic: return "Semantic";
  }
  return "SPU";
}

IuType parse_iu_type(std::string_view text) {
  if (text == "SPU") return IuType::kSpu;
  if (text == "Image") return IuType::kImage;
  if (text == "Semantic") return IuType::kSemantic;
  throw DataError("unknown iu_type '" + std::string(text) + "'");
}

std::optional<std::string> spu_key(const AttributeRecord& attributes) {
  std::string model;
  for (char ch : attributes.model) model.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  const auto begin = model.find_first_not_of(" \t");
  if (begin == std::string::npos) return std::nullopt;
  const auto end = model.find_last_not_of(" \t");
  model = model.substr(begin, end - begin + 1);
  return std::to_string(attributes.category) + "|" + std::to_string(attributes.brand) + "|" + model;
}

namespace {

std::size_t type_index(IuType type) { return static_cast<std::size_t>(type) - 1; }

std::string padded(std::uint64_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*llu", width, static_cast<unsigned long long>(value));
  return buf;
}

// Keys sort SPU < Image < Semantic, then by type-specific order.
std::string image_key(std::uint32_t cluster) { return "2img:" + padded(cluster, 6); }

std::string semantic_key(const GsidCode& code, std::size_t level) {
  std::string key = "3sem:";
  for (std::size_t l = 0; l < level; ++l) {
    if (l > 0) key += ".";
    key += padded(code.level[l], 3);
  }
  return key;
}

std::vector<std::uint16_t> gsid_prefix(const GsidCode& code, std::size_t level) {
  return {code.level.begin(), code.level.begin() + static_cast<std::ptrdiff_t>(level)};
}

template <typename Map>
std::uint32_t dominant(const Map& counts) {
  std::uint32_t best = 0;
  std::size_t best_count = 0;
  for (const auto& [value, count] : counts) {
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

Matrix stack(std::span<const SynthItem> items, bool image) {
  const std::size_t dim = items.empty() ? 0 : (image ? items[0].image.size() : items[0].text.size());
  Matrix m(items.size(), dim);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& v = image ? items[i].image : items[i].text;
    if (v.size() != dim) throw DataError("item " + std::to_string(items[i].item_id) + ": vector dimension mismatch");
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

}  // namespace

void IuCatalog::finalize_title(InterestUnit& unit, const Pending& stats) const {
  unit.dominant_category = dominant(stats.categories);
  unit.dominant_brand = dominant(stats.brands);
  unit.title = std::string(to_string(unit.type)) + ":cat" + std::to_string(unit.dominant_category) + "/brand" +
               std::to_string(unit.dominant_brand);
}

void IuCatalog::join(IuType type, const std::string& key, const SynthItem& item,
                     std::optional<std::vector<std::uint16_t>> gsid) {
  Pending& group = groups_[key];
  group.members.push_back(item.item_id);
  group.list_times.push_back(item.list_time);
  ++group.categories[item.attributes.category];
  ++group.brands[item.attributes.brand];

  auto& membership = membership_[type_index(type)];
  if (membership.size() <= item.item_id) membership.resize(item.item_id + 1, 0);

  auto existing = key_to_iu_.find(key);
  if (existing != key_to_iu_.end()) {
    InterestUnit& unit = units_[existing->second - 1];
    unit.members.insert(std::upper_bound(unit.members.begin(), unit.members.end(), item.item_id), item.item_id);
    membership[item.item_id] = unit.iu_id;
    finalize_title(unit, group);
    return;
  }
  if (group.members.size() < cfg_.min_members) return;

  InterestUnit unit;
  unit.iu_id = static_cast<std::uint32_t>(units_.size() + 1);
  unit.type = type;
  unit.members = group.members;
  std::sort(unit.members.begin(), unit.members.end());
  std::vector<std::int64_t> times = group.list_times;
  std::sort(times.begin(), times.end());
  unit.creation_time = times[cfg_.min_members > 0 ? cfg_.min_members - 1 : 0];
  unit.gsid = std::move(gsid);
  finalize_title(unit, group);
  for (auto member : unit.members) {
    if (membership.size() <= member) membership.resize(member + 1, 0);
    membership[member] = unit.iu_id;
  }
  key_to_iu_[key] = unit.iu_id;
  units_.push_back(std::move(unit));
}

IuCatalog IuCatalog::build(std::span<const SynthItem> items, const IuBuildConfig& cfg) {
  if (cfg.min_members == 0) throw ConfigError("iu: min_members must be positive");
  if (cfg.semantic_level == 0 || cfg.semantic_level > kGsidLevels) {
    throw ConfigError("iu: semantic_level must be in [1, 3]");
  }
  IuCatalog catalog;
  catalog.cfg_ = cfg;
  if (items.empty()) return catalog;

  const std::size_t k = std::min(cfg.image_clusters, items.size());
  KMeansResult image = kmeans(stack(items, true), k, Rng::derive(cfg.seed, 1), cfg.kmeans_max_iterations);
  catalog.image_centroids_ = std::move(image.centroids);
  const Matrix text = stack(items, false);
  catalog.codebooks_ = train_gsid_codebooks(text, Rng::derive(cfg.seed, 2));

  std::uint32_t max_id = 0;
  for (const auto& item : items) max_id = std::max(max_id, item.item_id);
  catalog.item_codes_.assign(max_id + 1, GsidCode{});

  // Collect every group first, then open units in key order so ids do not
  // depend on item order.
  struct Entry {
    IuType type;
    std::size_t item_index;
    std::optional<std::vector<std::uint16_t>> gsid;
  };
  std::map<std::string, std::vector<Entry>> grouped;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const SynthItem& item = items[i];
    if (auto key = spu_key(item.attributes)) grouped["1spu:" + *key].push_back({IuType::kSpu, i, std::nullopt});
    grouped[image_key(image.assignment[i])].push_back({IuType::kImage, i, std::nullopt});
    const GsidCode code = assign_gsid(text.row(i), catalog.codebooks_);
    catalog.item_codes_[item.item_id] = code;
    grouped[semantic_key(code, cfg.semantic_level)].push_back(
        {IuType::kSemantic, i, gsid_prefix(code, cfg.semantic_level)});
  }
  for (auto& [key, entries] : grouped) {
    std::sort(entries.begin(), entries.end(),
              [&](const Entry& a, const Entry& b) { return items[a.item_index].item_id < items[b.item_index].item_id; });
    for (auto& e : entries) catalog.join(e.type, key, items[e.item_index], e.gsid);
  }
  return catalog;
}

IuCatalog IuCatalog::from_units(std::vector<InterestUnit> units) {
  IuCatalog catalog;
  catalog.lookup_only_ = true;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const InterestUnit& unit = units[i];
    if (unit.iu_id != i + 1) throw DataError("units: ids must be contiguous from 1 (found " + std::to_string(unit.iu_id) + ")");
    auto& membership = catalog.membership_[type_index(unit.type)];
    for (std::uint32_t m : unit.members) {
      if (membership.size() <= m) membership.resize(m + 1, 0);
      if (membership[m] != 0) {
        throw DataError("units: item " + std::to_string(m) + " belongs to two " + std::string(to_string(unit.type)) +
                        " units");
      }
      membership[m] = unit.iu_id;
    }
  }
  catalog.units_ = std::move(units);
  return catalog;
}

void IuCatalog::add_item(const SynthItem& item) {
  if (lookup_only_) throw Error("iu catalog: a catalog loaded from units cannot take new items");
  if (item_codes_.size() <= item.item_id) item_codes_.resize(item.item_id + 1, GsidCode{});
  if (auto key = spu_key(item.attributes)) join(IuType::kSpu, "1spu:" + *key, item, std::nullopt);
  if (image_centroids_.rows() > 0) {
    join(IuType::kImage, image_key(nearest_centroid(image_centroids_, item.image)), item, std::nullopt);
  }
  if (!codebooks_.levels[0].empty()) {
    const GsidCode code = assign_gsid(item.text, codebooks_);
    item_codes_[item.item_id] = code;
    join(IuType::kSemantic, semantic_key(code, cfg_.semantic_level), item, gsid_prefix(code, cfg_.semantic_level));
  }
}

std::optional<std::uint32_t> IuCatalog::unit_of(std::uint32_t item_id, IuType type) const {
  const auto& membership = membership_[type_index(type)];
  if (item_id >= membership.size() || membership[item_id] == 0) return std::nullopt;
  return membership[item_id];
}

std::optional<std::uint32_t> IuCatalog::resolve(std::uint32_t item_id, const Precedence& precedence) const {
  for (IuType type : precedence) {
    if (auto id = unit_of(item_id, type)) return id;
  }
  return std::nullopt;
}

std::vector<std::uint32_t> IuCatalog::resolved_map(const Precedence& precedence) const {
  std::size_t n = 0;
  for (const auto& m : membership_) n = std::max(n, m.size());
  std::vector<std::uint32_t> out(n, 0);
  for (std::size_t id = 0; id < n; ++id) {
    if (auto iu = resolve(static_cast<std::uint32_t>(id), precedence)) out[id] = *iu;
  }
  return out;
}

std::optional<std::uint32_t> resolve_item_iu(std::uint32_t item_id, const IuCatalog& catalog,
                                             const Precedence& precedence) {
  return catalog.resolve(item_id, precedence);
}

namespace {

std::vector<InterestUnit> units_from_groups(std::map<std::string, std::vector<const SynthItem*>>& groups,
                                            IuType type, std::size_t min_members) {
  std::vector<InterestUnit> out;
  for (auto& [key, members] : groups) {
    if (members.size() < min_members) continue;
    std::sort(members.begin(), members.end(),
              [](const SynthItem* a, const SynthItem* b) { return a->item_id < b->item_id; });
    InterestUnit unit;
    unit.iu_id = static_cast<std::uint32_t>(out.size() + 1);
    unit.type = type;
    std::map<std::uint32_t, std::size_t> cats, brands;
    std::vector<std::int64_t> times;
    for (const auto* item : members) {
      unit.members.push_back(item->item_id);
      ++cats[item->attributes.category];
      ++brands[item->attributes.brand];
      times.push_back(item->list_time);
    }
    std::sort(times.begin(), times.end());
    unit.creation_time = times[min_members > 0 ? min_members - 1 : 0];
    unit.dominant_category = dominant(cats);
    unit.dominant_brand = dominant(brands);
    unit.title = std::string(to_string(type)) + ":cat" + std::to_string(unit.dominant_category) + "/brand" +
                 std::to_string(unit.dominant_brand);
    out.push_back(std::move(unit));
  }
  return out;
}

}  // namespace

std::vector<InterestUnit> build_spu_units(std::span<const SynthItem> items, std::size_t min_members) {
  std::map<std::string, std::vector<const SynthItem*>> groups;
  for (const auto& item : items) {
    if (auto key = spu_key(item.attributes)) groups[*key].push_back(&item);
  }
  return units_from_groups(groups, IuType::kSpu, min_members);
}

std::vector<InterestUnit> build_image_cluster_units(std::span<const SynthItem> items, std::size_t k,
                                                    std::uint64_t seed, std::size_t min_members) {
  if (k == 0 || k > items.size()) {
    throw DataError("build_image_cluster_units: k must be in [1, n_items]");
  }
  const KMeansResult km = kmeans(stack(items, true), k, seed);
  std::map<std::string, std::vector<const SynthItem*>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) groups[padded(km.assignment[i], 6)].push_back(&items[i]);
  return units_from_groups(groups, IuType::kImage, min_members);
}

// ---------------------------------------------------------------------------

std::vector<CoverageRow> coverage_report(const IuCatalog& catalog, std::size_t n_items,
                                         std::span<const InteractionEvent> events) {
  struct Counts {
    std::size_t impressions = 0, clicks = 0, transactions = 0;
  };
  auto count_event = [](Counts& c, const InteractionEvent& e) {
    if (e.kind == EventKind::kImpression) ++c.impressions;
    if (e.kind == EventKind::kClick) ++c.clicks;
    if (e.kind == EventKind::kTransaction) ++c.transactions;
  };
  Counts all, none;
  std::array<Counts, 4> per_type{};  // SPU, Image, Semantic, any
  for (const auto& e : events) {
    count_event(all, e);
    bool any = false;
    for (IuType type : kAllIuTypes) {
      if (catalog.unit_of(e.item_id, type)) {
        count_event(per_type[type_index(type)], e);
        any = true;
      }
    }
    if (any) count_event(per_type[3], e); else count_event(none, e);
  }
  auto pct = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  auto improvement = [&](const Counts& c) -> std::optional<double> {
    if (c.impressions == 0 || none.impressions == 0 || none.clicks == 0) return std::nullopt;
    const double ctr = static_cast<double>(c.clicks) / static_cast<double>(c.impressions);
    const double base = static_cast<double>(none.clicks) / static_cast<double>(none.impressions);
    return (ctr / base - 1.0) * 100.0;
  };

  std::array<std::size_t, 4> unit_counts{};
  for (const auto& unit : catalog.units()) {
    ++unit_counts[type_index(unit.type)];
    ++unit_counts[3];
  }
  std::array<std::size_t, 4> covered{};
  for (std::uint32_t id = 1; id <= n_items; ++id) {
    bool any = false;
    for (IuType type : kAllIuTypes) {
      if (catalog.unit_of(id, type)) {
        ++covered[type_index(type)];
        any = true;
      }
    }
    if (any) ++covered[3];
  }

  std::vector<CoverageRow> rows;
  const std::array<std::string, 4> names{"SPU", "Image", "Semantic", "Total"};
  for (std::size_t t = 0; t < 4; ++t) {
    CoverageRow row;
    row.iu_type = names[t];
    row.unit_count = unit_counts[t];
    row.product_coverage = pct(covered[t], n_items);
    row.exposure_ratio = pct(per_type[t].impressions, all.impressions);
    row.click_ratio = pct(per_type[t].clicks, all.clicks);
    row.transaction_ratio = pct(per_type[t].transactions, all.transactions);
    row.ctr_improvement = improvement(per_type[t]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace iu4rec
