#include "iu4rec/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <set>

#include "iu4rec/errors.hpp"

namespace iu4rec {

namespace fs = std::filesystem;
using Json = nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_jsonl(const fs::path& path, const std::vector<OrderedJson>& records) {
  std::string text;
  for (const auto& r : records) {
    text += r.dump();
    text += '\n';
  }
  write_text(path, text);
}

void write_json(const fs::path& path, const OrderedJson& doc) { write_text(path, doc.dump(2) + "\n"); }

void for_each_jsonl(const fs::path& path, const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      fn(Json::parse(line), n);
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

namespace {

void expect_fields(const Json& j, std::initializer_list<const char*> fields) {
  if (!j.is_object()) throw DataError("record must be a JSON object");
  for (const char* f : fields) {
    if (!j.contains(f)) throw DataError(std::string("missing field '") + f + "'");
  }
  if (j.size() != fields.size()) {
    const std::set<std::string> allowed(fields.begin(), fields.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (allowed.count(it.key()) == 0) throw DataError("unexpected field '" + it.key() + "'");
    }
  }
}

template <class T>
T integer(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_number_integer()) throw DataError(std::string("field '") + key + "' must be an integer");
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) throw DataError(std::string("field '") + key + "' must be nonnegative");
  }
  return v.get<T>();
}

double number(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_number()) throw DataError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::string text(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_boolean()) throw DataError(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> vector_of(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_array()) throw DataError(std::string("field '") + key + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw DataError(std::string("field '") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

OrderedJson item_triple(const ItemFeatures& f) { return OrderedJson::array({f.item_id, f.category, f.brand}); }

ItemFeatures triple_from(const Json& v) {
  if (!v.is_array() || v.size() != 3) throw DataError("item entry must be [item_id, category, brand]");
  ItemFeatures f;
  f.item_id = v[0].get<std::uint32_t>();
  f.category = v[1].get<std::uint32_t>();
  f.brand = v[2].get<std::uint32_t>();
  return f;
}

template <class T, class F>
std::vector<T> read_all(const fs::path& path, F&& from) {
  std::vector<T> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(from(j)); });
  return out;
}

template <class T>
void write_all(const fs::path& path, const std::vector<T>& values) {
  std::vector<OrderedJson> records;
  records.reserve(values.size());
  for (const auto& v : values) records.push_back(to_record(v));
  write_jsonl(path, records);
}

}  // namespace

// ---------------------------------------------------------------------------

OrderedJson to_record(const InteractionEvent& e) {
  OrderedJson j;
  j["timestamp_ms"] = e.timestamp_ms;
  j["user_id"] = e.user_id;
  j["item_id"] = e.item_id;
  j["kind"] = std::string(to_string(e.kind));
  j["surface"] = std::string(to_string(e.surface));
  return j;
}

InteractionEvent event_from(const Json& j) {
  expect_fields(j, {"timestamp_ms", "user_id", "item_id", "kind", "surface"});
  InteractionEvent e;
  e.timestamp_ms = integer<std::int64_t>(j, "timestamp_ms");
  e.user_id = integer<std::uint32_t>(j, "user_id");
  e.item_id = integer<std::uint32_t>(j, "item_id");
  try {
    e.kind = parse_event_kind(text(j, "kind"));
    e.surface = parse_surface(text(j, "surface"));
  } catch (const Error& err) {
    throw DataError(err.what());
  }
  return e;
}

OrderedJson to_record(const SynthUser& u) {
  OrderedJson j;
  j["user_id"] = u.user_id;
  j["activity_rate"] = u.activity_rate;
  j["latent"] = u.latent;
  return j;
}

SynthUser user_from(const Json& j) {
  expect_fields(j, {"user_id", "activity_rate", "latent"});
  SynthUser u;
  u.user_id = integer<std::uint32_t>(j, "user_id");
  u.activity_rate = number(j, "activity_rate");
  u.latent = vector_of(j, "latent");
  return u;
}

OrderedJson to_record(const SynthItem& item) {
  OrderedJson j;
  j["item_id"] = item.item_id;
  j["seller_id"] = item.seller_id;
  j["true_unit"] = item.true_unit;
  j["category"] = item.attributes.category;
  j["brand"] = item.attributes.brand;
  j["model"] = item.attributes.model;
  j["image"] = item.image;
  j["text"] = item.text;
  j["residual"] = item.residual;
  j["initial_stock"] = item.initial_stock;
  j["stock"] = item.stock;
  j["list_time"] = item.list_time;
  j["sold"] = item.sold;
  j["sold_time"] = item.sold_time;
  return j;
}

SynthItem item_from(const Json& j) {
  expect_fields(j, {"item_id", "seller_id", "true_unit", "category", "brand", "model", "image", "text", "residual",
                    "initial_stock", "stock", "list_time", "sold", "sold_time"});
  SynthItem item;
  item.item_id = integer<std::uint32_t>(j, "item_id");
  item.seller_id = integer<std::uint32_t>(j, "seller_id");
  item.true_unit = integer<std::uint32_t>(j, "true_unit");
  item.attributes.category = integer<std::uint32_t>(j, "category");
  item.attributes.brand = integer<std::uint32_t>(j, "brand");
  item.attributes.model = text(j, "model");
  item.image = vector_of(j, "image");
  item.text = vector_of(j, "text");
  item.residual = vector_of(j, "residual");
  item.initial_stock = integer<std::uint32_t>(j, "initial_stock");
  item.stock = integer<std::uint32_t>(j, "stock");
  item.list_time = integer<std::int64_t>(j, "list_time");
  item.sold = boolean(j, "sold");
  item.sold_time = integer<std::int64_t>(j, "sold_time");
  return item;
}

OrderedJson to_record(const InterestUnit& unit) {
  OrderedJson j;
  j["iu_id"] = unit.iu_id;
  j["type"] = std::string(to_string(unit.type));
  j["title"] = unit.title;
  j["members"] = unit.members;
  j["creation_time"] = unit.creation_time;
  j["gsid"] = unit.gsid ? OrderedJson(*unit.gsid) : OrderedJson(nullptr);
  j["dominant_category"] = unit.dominant_category;
  j["dominant_brand"] = unit.dominant_brand;
  return j;
}

InterestUnit unit_from(const Json& j) {
  expect_fields(j, {"iu_id", "type", "title", "members", "creation_time", "gsid", "dominant_category",
                    "dominant_brand"});
  InterestUnit u;
  u.iu_id = integer<std::uint32_t>(j, "iu_id");
  try {
    u.type = parse_iu_type(text(j, "type"));
  } catch (const Error& err) {
    throw DataError(err.what());
  }
  u.title = text(j, "title");
  u.members = j.at("members").get<std::vector<std::uint32_t>>();
  u.creation_time = integer<std::int64_t>(j, "creation_time");
  if (!j.at("gsid").is_null()) u.gsid = j.at("gsid").get<std::vector<std::uint16_t>>();
  u.dominant_category = integer<std::uint32_t>(j, "dominant_category");
  u.dominant_brand = integer<std::uint32_t>(j, "dominant_brand");
  return u;
}

OrderedJson to_record(const TrainingSample& s) {
  OrderedJson j;
  j["user_id"] = s.user_id;
  j["timestamp_ms"] = s.timestamp_ms;
  j["day"] = s.day;
  j["label"] = s.label;
  j["domain"] = s.iu_domain ? "iu" : "normal";
  j["target"] = item_triple(s.target);
  j["iu_id"] = s.iu_id;
  j["iu_type"] = s.iu_type;
  j["iu_category"] = s.iu_category;
  j["stats_ctr"] = s.stats_ctr;
  j["stats_impressions"] = s.stats_impressions;
  j["cross_count"] = s.cross_count;
  j["cross_recency"] = s.cross_recency;
  OrderedJson items = OrderedJson::array();
  for (const auto& f : s.item_seq) items.push_back(item_triple(f));
  j["item_seq"] = std::move(items);
  OrderedJson ius = OrderedJson::array();
  for (const auto& e : s.iu_seq) {
    OrderedJson inner = OrderedJson::array();
    for (const auto& f : e.items) inner.push_back(item_triple(f));
    ius.push_back(OrderedJson::array({e.iu_id, e.iu_type, e.category, std::move(inner)}));
  }
  j["iu_seq"] = std::move(ius);
  return j;
}

TrainingSample sample_from(const Json& j) {
  expect_fields(j, {"user_id", "timestamp_ms", "day", "label", "domain", "target", "iu_id", "iu_type", "iu_category",
                    "stats_ctr", "stats_impressions", "cross_count", "cross_recency", "item_seq", "iu_seq"});
  TrainingSample s;
  s.user_id = integer<std::uint32_t>(j, "user_id");
  s.timestamp_ms = integer<std::int64_t>(j, "timestamp_ms");
  s.day = integer<int>(j, "day");
  const auto label = integer<std::uint32_t>(j, "label");
  if (label > 1) throw DataError("field 'label' must be 0 or 1");
  s.label = static_cast<std::uint8_t>(label);
  const std::string domain = text(j, "domain");
  if (domain != "iu" && domain != "normal") throw DataError("field 'domain' must be \"iu\" or \"normal\"");
  s.iu_domain = domain == "iu";
  s.target = triple_from(j.at("target"));
  s.iu_id = integer<std::uint32_t>(j, "iu_id");
  s.iu_type = integer<std::uint32_t>(j, "iu_type");
  s.iu_category = integer<std::uint32_t>(j, "iu_category");
  s.stats_ctr = integer<std::uint32_t>(j, "stats_ctr");
  s.stats_impressions = integer<std::uint32_t>(j, "stats_impressions");
  s.cross_count = integer<std::uint32_t>(j, "cross_count");
  s.cross_recency = integer<std::uint32_t>(j, "cross_recency");
  for (const auto& v : j.at("item_seq")) s.item_seq.push_back(triple_from(v));
  for (const auto& v : j.at("iu_seq")) {
    if (!v.is_array() || v.size() != 4) throw DataError("iu_seq entry must be [iu_id, iu_type, category, items]");
    IuEntry e;
    e.iu_id = v[0].get<std::uint32_t>();
    e.iu_type = v[1].get<std::uint32_t>();
    e.category = v[2].get<std::uint32_t>();
    for (const auto& f : v[3]) e.items.push_back(triple_from(f));
    s.iu_seq.push_back(std::move(e));
  }
  return s;
}

OrderedJson to_record(const IuStats& s) {
  OrderedJson j;
  j["iu_id"] = s.iu_id;
  j["impressions"] = s.impressions;
  j["clicks"] = s.clicks;
  j["inquiries"] = s.inquiries;
  j["transactions"] = s.transactions;
  const auto ctr = s.ctr();
  j["ctr"] = ctr ? OrderedJson(*ctr) : OrderedJson(nullptr);
  j["clicks_exceed_impressions"] = s.clicks_exceed_impressions();
  return j;
}

IuStats iu_stats_from(const Json& j) {
  expect_fields(j, {"iu_id", "impressions", "clicks", "inquiries", "transactions", "ctr", "clicks_exceed_impressions"});
  IuStats s;
  s.iu_id = integer<std::uint32_t>(j, "iu_id");
  s.impressions = integer<std::uint64_t>(j, "impressions");
  s.clicks = integer<std::uint64_t>(j, "clicks");
  s.inquiries = integer<std::uint64_t>(j, "inquiries");
  s.transactions = integer<std::uint64_t>(j, "transactions");
  return s;
}

OrderedJson to_record(const ScoredSample& s) {
  OrderedJson j;
  j["user_id"] = s.user_id;
  j["score"] = s.score;
  j["label"] = s.label;
  j["domain"] = s.iu_domain ? "iu" : "normal";
  return j;
}

ScoredSample scored_from(const Json& j) {
  expect_fields(j, {"user_id", "score", "label", "domain"});
  ScoredSample s;
  s.user_id = integer<std::uint32_t>(j, "user_id");
  s.score = number(j, "score");
  const auto label = integer<std::uint32_t>(j, "label");
  if (label > 1) throw DataError("field 'label' must be 0 or 1");
  s.label = static_cast<std::uint8_t>(label);
  const std::string domain = text(j, "domain");
  if (domain != "iu" && domain != "normal") throw DataError("field 'domain' must be \"iu\" or \"normal\"");
  s.iu_domain = domain == "iu";
  return s;
}

void write_events(const fs::path& path, const std::vector<InteractionEvent>& events) { write_all(path, events); }
std::vector<InteractionEvent> read_events(const fs::path& path) {
  return read_all<InteractionEvent>(path, event_from);
}
void write_units(const fs::path& path, const std::vector<InterestUnit>& units) { write_all(path, units); }
std::vector<InterestUnit> read_units(const fs::path& path) { return read_all<InterestUnit>(path, unit_from); }
void write_samples(const fs::path& path, const std::vector<TrainingSample>& samples) { write_all(path, samples); }
std::vector<TrainingSample> read_samples(const fs::path& path) {
  return read_all<TrainingSample>(path, sample_from);
}
void write_scored(const fs::path& path, const std::vector<ScoredSample>& samples) { write_all(path, samples); }
std::vector<ScoredSample> read_scored(const fs::path& path) { return read_all<ScoredSample>(path, scored_from); }

void write_world(const fs::path& dir, const World& world) {
  write_all(dir / "users.jsonl", world.users);
  write_all(dir / "catalog.jsonl", world.items);
  std::vector<OrderedJson> centers;
  for (std::size_t u = 0; u < world.unit_centers.rows(); ++u) {
    OrderedJson j;
    j["unit"] = u;
    const auto row = world.unit_centers.row(u);
    j["center"] = std::vector<double>(row.begin(), row.end());
    centers.push_back(std::move(j));
  }
  write_jsonl(dir / "unit_centers.jsonl", centers);
}

World read_world(const fs::path& dir, const WorldConfig& cfg) {
  World world;
  world.config = cfg;
  world.users = read_all<SynthUser>(dir / "users.jsonl", user_from);
  world.items = read_all<SynthItem>(dir / "catalog.jsonl", item_from);
  for (std::size_t i = 0; i < world.users.size(); ++i) {
    if (world.users[i].user_id != i + 1) throw DataError("users.jsonl: user ids must be 1..n in order");
  }
  for (std::size_t i = 0; i < world.items.size(); ++i) {
    if (world.items[i].item_id != i + 1) throw DataError("catalog.jsonl: item ids must be 1..n in order");
  }
  if (world.users.size() != cfg.n_users || world.items.size() != cfg.n_items) {
    throw DataError("world files do not match the configured world size; rerun synth");
  }
  world.unit_centers = Matrix(cfg.n_true_units, cfg.latent_dim);
  std::size_t rows = 0;
  for_each_jsonl(dir / "unit_centers.jsonl", [&](const Json& j, std::size_t) {
    expect_fields(j, {"unit", "center"});
    const auto unit = integer<std::size_t>(j, "unit");
    const auto center = vector_of(j, "center");
    if (unit >= cfg.n_true_units || center.size() != cfg.latent_dim) throw DataError("unit center out of shape");
    std::copy(center.begin(), center.end(), world.unit_centers.row(unit).begin());
    ++rows;
  });
  if (rows != cfg.n_true_units) throw DataError("unit_centers.jsonl: expected one row per unit");
  return world;
}

// ---------------------------------------------------------------------------

namespace {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void bytes(std::string_view s) { out_.append(s); }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  const std::string& str() const { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DataError(name_ + ": truncated checkpoint");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const fs::path& path, const CtrModel& model, std::uint64_t digest) {
  ByteWriter w;
  w.bytes("IU4R");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.kind()));
  w.u64(digest);
  w.u32(static_cast<std::uint32_t>(model.params().size()));
  for (const Param& p : model.params()) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(2);
    w.u64(p.value.rows());
    w.u64(p.value.cols());
    for (double v : p.value.data()) w.f32(static_cast<float>(v));
  }
  write_text(path, w.str());
}

CheckpointInfo load_checkpoint(const fs::path& path, CtrModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(std::move(data), path.string());
  if (r.bytes(4) != "IU4R") throw DataError(path.string() + ": not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointInfo info;
  const std::uint32_t kind = r.u32();
  if (kind > 2) throw DataError(path.string() + ": unknown model kind " + std::to_string(kind));
  info.kind = static_cast<ModelKind>(kind);
  if (info.kind != model.kind()) {
    throw DataError(path.string() + ": checkpoint holds a " + std::string(to_string(info.kind)) + " model, expected " +
                    std::string(to_string(model.kind())));
  }
  info.digest = r.u64();
  info.arrays = r.u32();
  ParamStore& store = model.params();
  if (info.arrays != store.size()) {
    throw DataError(path.string() + ": checkpoint has " + std::to_string(info.arrays) + " arrays, model has " +
                    std::to_string(store.size()));
  }
  for (std::size_t a = 0; a < info.arrays; ++a) {
    const std::string name = r.bytes(r.u32());
    Param& p = store.at(name);
    const std::uint32_t rank = r.u32();
    if (rank != 2) throw DataError(path.string() + ": array '" + name + "' has rank " + std::to_string(rank));
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw DataError(path.string() + ": array '" + name + "' has shape " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", model expects " + std::to_string(p.value.rows()) + "x" +
                      std::to_string(p.value.cols()));
    }
    for (double& v : p.value.data()) v = static_cast<double>(r.f32());
  }
  if (!r.done()) throw DataError(path.string() + ": trailing bytes after the last array");
  return info;
}

}  // namespace iu4rec
