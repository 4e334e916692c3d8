#pragma once

// Interest-unit construction: SPU units from structured attributes,
// image-cluster units from image-proxy vectors, and semantic units from a
// three-level residual-quantization code (GSID) over text-proxy vectors.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iu4rec/marketplace.hpp"
#include "iu4rec/numeric.hpp"

namespace iu4rec {

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  Matrix centroids;
  std::vector<std::uint32_t> assignment;
  std::size_t iterations = 0;
};

// Nearest centroid by squared distance; ties go to the lowest index.
std::uint32_t nearest_centroid(const Matrix& centroids, std::span<const double> x,
                               double* distance2 = nullptr);

// k-means++ seeding, Lloyd iterations until assignments stop changing (or
// max_iterations). Empty clusters are re-seeded from the point farthest from
// its centroid. The returned assignment is nearest-centroid w.r.t. the
// returned centroids.
KMeansResult kmeans(const Matrix& data, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 100);

// ---------------------------------------------------------------------------
// GSID

inline constexpr std::size_t kGsidLevels = 3;
inline constexpr std::size_t kCodebookSize = 128;

struct GsidCode {
  std::array<std::uint16_t, kGsidLevels> level{};

  bool operator==(const GsidCode&) const = default;
  auto operator<=>(const GsidCode&) const = default;
};

// Size of the code space addressed by the first `levels` levels.
constexpr std::uint64_t gsid_code_space(std::size_t levels) {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < levels; ++i) n *= kCodebookSize;
  return n;
}

struct Codebooks {
  std::array<Matrix, kGsidLevels> levels;  // each kCodebookSize x dim
};

// Throws DataError with fewer than 128 vectors.
Codebooks train_gsid_codebooks(const Matrix& vectors, std::uint64_t seed);

GsidCode assign_gsid(std::span<const double> vector, const Codebooks& books);

// Residual norm after quantizing with levels 1..n, for n = 1..3.
std::array<double, kGsidLevels> gsid_residual_norms(std::span<const double> vector,
                                                    const Codebooks& books);

// ---------------------------------------------------------------------------
// Interest units

enum class IuType : std::uint8_t { kSpu = 1, kImage = 2, kSemantic = 3 };
inline constexpr std::array<IuType, 3> kAllIuTypes{IuType::kSpu, IuType::kImage, IuType::kSemantic};

std::string_view to_string(IuType type);
IuType parse_iu_type(std::string_view text);

struct InterestUnit {
  std::uint32_t iu_id = 0;
  IuType type = IuType::kSpu;
  std::vector<std::uint32_t> members;  // ascending item ids
  std::string title;
  std::int64_t creation_time = 0;
  std::optional<std::vector<std::uint16_t>> gsid;  // semantic prefix
  std::uint32_t dominant_category = 0;
  std::uint32_t dominant_brand = 0;

  bool operator==(const InterestUnit&) const = default;
};

struct IuBuildConfig {
  std::size_t min_members = 2;
  std::size_t image_clusters = 400;
  std::size_t kmeans_max_iterations = 100;
  std::size_t semantic_level = 2;  // GSID prefix length defining a semantic unit
  std::uint64_t seed = 1;
};

using Precedence = std::array<IuType, 3>;
inline constexpr Precedence kDefaultPrecedence{IuType::kSpu, IuType::kImage, IuType::kSemantic};

// Normalized (lower-case, trimmed) SPU key; nullopt when the model is missing.
std::optional<std::string> spu_key(const AttributeRecord& attributes);

// Owns the units and the item -> unit memberships. Ids are assigned once and
// never change: later items join existing units or open new ones.
class IuCatalog {
 public:
  static IuCatalog build(std::span<const SynthItem> items, const IuBuildConfig& cfg);
  // Rebuilds memberships from stored units. The result supports lookups
  // only; add_item throws.
  static IuCatalog from_units(std::vector<InterestUnit> units);

  const std::vector<InterestUnit>& units() const { return units_; }
  const InterestUnit& unit(std::uint32_t iu_id) const { return units_.at(iu_id - 1); }
  std::size_t size() const { return units_.size(); }
  std::uint32_t max_iu_id() const { return static_cast<std::uint32_t>(units_.size()); }

  std::optional<std::uint32_t> unit_of(std::uint32_t item_id, IuType type) const;
  std::optional<std::uint32_t> resolve(std::uint32_t item_id,
                                       const Precedence& precedence = kDefaultPrecedence) const;
  // item id -> resolved iu id (0 = none), indexed by item id.
  std::vector<std::uint32_t> resolved_map(const Precedence& precedence = kDefaultPrecedence) const;

  // Incremental assignment with frozen codebooks/centroids.
  void add_item(const SynthItem& item);

  const Codebooks& codebooks() const { return codebooks_; }
  const Matrix& image_centroids() const { return image_centroids_; }
  const std::vector<GsidCode>& item_codes() const { return item_codes_; }

 private:
  struct Pending {
    std::vector<std::uint32_t> members;
    std::vector<std::int64_t> list_times;
    std::map<std::uint32_t, std::size_t> categories;
    std::map<std::uint32_t, std::size_t> brands;
  };

  void join(IuType type, const std::string& key, const SynthItem& item,
            std::optional<std::vector<std::uint16_t>> gsid);
  void finalize_title(InterestUnit& unit, const Pending& stats) const;

  IuBuildConfig cfg_;
  std::vector<InterestUnit> units_;
  std::map<std::string, std::uint32_t> key_to_iu_;
  std::map<std::string, Pending> groups_;
  std::array<std::vector<std::uint32_t>, 3> membership_;  // per type, indexed by item id
  Codebooks codebooks_;
  Matrix image_centroids_;
  std::vector<GsidCode> item_codes_;  // indexed by item id
  bool lookup_only_ = false;
};

std::vector<InterestUnit> build_spu_units(std::span<const SynthItem> items, std::size_t min_members = 2);
std::vector<InterestUnit> build_image_cluster_units(std::span<const SynthItem> items, std::size_t k,
                                                    std::uint64_t seed, std::size_t min_members = 2);

std::optional<std::uint32_t> resolve_item_iu(std::uint32_t item_id, const IuCatalog& catalog,
                                             const Precedence& precedence = kDefaultPrecedence);

// ---------------------------------------------------------------------------
// Coverage report in the shape of the unit analysis table.

struct CoverageRow {
  std::string iu_type;  // "SPU", "Image", "Semantic", "Total"
  std::size_t unit_count = 0;
  double product_coverage = 0.0;  // percent of catalog items
  double exposure_ratio = 0.0;    // percent of impressions
  double click_ratio = 0.0;
  double transaction_ratio = 0.0;
  std::optional<double> ctr_improvement;  // percent vs items in no unit
};

std::vector<CoverageRow> coverage_report(const IuCatalog& catalog, std::size_t n_items,
                                         std::span<const InteractionEvent> events);

}  // namespace iu4rec
