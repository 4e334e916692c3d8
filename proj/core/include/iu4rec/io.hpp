#pragma once

// JSONL record schemas and the binary checkpoint format.
//
// Every reader is strict: a record must carry exactly its documented fields.
// Errors name the file and line.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iu4rec/ctr_model.hpp"
#include "iu4rec/feature_store.hpp"
#include "iu4rec/iu_construction.hpp"
#include "iu4rec/marketplace.hpp"
#include "iu4rec/metrics.hpp"

namespace iu4rec {

using OrderedJson = nlohmann::ordered_json;

// Generic line-oriented helpers.
void write_jsonl(const std::filesystem::path& path, const std::vector<OrderedJson>& records);
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json& record, std::size_t line)>& fn);
void write_json(const std::filesystem::path& path, const OrderedJson& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

OrderedJson to_record(const InteractionEvent& e);
OrderedJson to_record(const SynthUser& u);
OrderedJson to_record(const SynthItem& item);
OrderedJson to_record(const InterestUnit& unit);
OrderedJson to_record(const TrainingSample& s);
OrderedJson to_record(const IuStats& s);
OrderedJson to_record(const ScoredSample& s);

InteractionEvent event_from(const nlohmann::json& j);
SynthUser user_from(const nlohmann::json& j);
SynthItem item_from(const nlohmann::json& j);
InterestUnit unit_from(const nlohmann::json& j);
TrainingSample sample_from(const nlohmann::json& j);
IuStats iu_stats_from(const nlohmann::json& j);
ScoredSample scored_from(const nlohmann::json& j);

void write_events(const std::filesystem::path& path, const std::vector<InteractionEvent>& events);
std::vector<InteractionEvent> read_events(const std::filesystem::path& path);
void write_units(const std::filesystem::path& path, const std::vector<InterestUnit>& units);
std::vector<InterestUnit> read_units(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path, const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> read_samples(const std::filesystem::path& path);
void write_scored(const std::filesystem::path& path, const std::vector<ScoredSample>& samples);
std::vector<ScoredSample> read_scored(const std::filesystem::path& path);

// World = users.jsonl + catalog.jsonl + unit_centers.jsonl; the generator
// parameters come from the config.
void write_world(const std::filesystem::path& dir, const World& world);
World read_world(const std::filesystem::path& dir, const WorldConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoints: "IU4R", u32 version, u32 model kind, u64 config digest,
// u32 array count, then per array: u32 name length, name bytes, u32 rank,
// u64 dims[rank], row-major float32 values. All integers little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const CtrModel& model, std::uint64_t digest);

struct CheckpointInfo {
  ModelKind kind = ModelKind::kDnn;
  std::uint64_t digest = 0;
  std::size_t arrays = 0;
};

// Loads into a model built with the same config and vocabulary. Shape or
// name mismatches throw DataError; the stored digest is returned so the
// caller can warn on mismatch.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, CtrModel& model);

}  // namespace iu4rec
