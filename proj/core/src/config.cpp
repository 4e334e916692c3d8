#include "iu4rec/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "iu4rec/errors.hpp"
#include "iu4rec/rng.hpp"

namespace iu4rec {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

std::string_view to_string(CardScore mode) { return mode == CardScore::kMax ? "max" : "mean"; }
std::string_view to_string(AbMode mode) { return mode == AbMode::kSplit ? "split" : "shared"; }

// Finds the line of a key path by walking the raw text: each component is
// searched for as a quoted key after the previous one.
class Locator {
 public:
  Locator(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  std::size_t line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    for (const auto& key : path) {
      const std::string quoted = "\"" + key + "\"";
      std::size_t at = pos;
      while (true) {
        at = text_.find(quoted, at);
        if (at == std::string_view::npos) return line_at(pos);
        std::size_t after = at + quoted.size();
        while (after < text_.size() && std::isspace(static_cast<unsigned char>(text_[after]))) ++after;
        if (after < text_.size() && text_[after] == ':') break;
        at += quoted.size();
      }
      pos = at;
    }
    return line_at(pos);
  }

  std::size_t line_at(std::size_t byte) const {
    byte = std::min(byte, text_.size());
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
  }

  [[noreturn]] void fail(std::size_t line, const std::string& message) const {
    throw ConfigError(std::string(source_) + ":" + std::to_string(line) + ": " + message);
  }

 private:
  std::string_view text_;
  std::string_view source_;
};

std::string dotted(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
  return out;
}

// Reads fields out of a parsed document; every block must be fully consumed.
class Reader {
 public:
  Reader(const Json& root, const Locator& loc) : loc_(loc) { stack_.push_back({&root, {}, {}}); }

  void begin(const char* key) {
    Frame& top = stack_.back();
    top.seen.insert(key);
    std::vector<std::string> path = top.path;
    path.emplace_back(key);
    const Json* node = nullptr;
    if (top.node != nullptr && top.node->contains(key)) {
      node = &(*top.node)[key];
      if (!node->is_object()) loc_.fail(loc_.line_of(path), "'" + dotted(path) + "' must be an object");
    }
    stack_.push_back({node, path, {}});
  }

  void end() {
    const Frame& top = stack_.back();
    if (top.node != nullptr) {
      for (auto it = top.node->begin(); it != top.node->end(); ++it) {
        if (top.seen.count(it.key()) == 0) {
          std::vector<std::string> path = top.path;
          path.push_back(it.key());
          loc_.fail(loc_.line_of(path), "unknown key '" + dotted(path) + "'");
        }
      }
    }
    stack_.pop_back();
  }

  template <class T>
  void field(const char* key, T& out) {
    Frame& top = stack_.back();
    top.seen.insert(key);
    if (top.node == nullptr || !top.node->contains(key)) return;
    std::vector<std::string> path = top.path;
    path.emplace_back(key);
    const Json& v = (*top.node)[key];
    try {
      read(v, out);
    } catch (const ConfigError& e) {
      loc_.fail(loc_.line_of(path), "'" + dotted(path) + "': " + e.what());
    }
  }

 private:
  struct Frame {
    const Json* node;
    std::vector<std::string> path;
    std::set<std::string> seen;
  };

  static void read(const Json& v, double& out) {
    if (!v.is_number()) throw ConfigError("expected a number");
    out = v.get<double>();
  }
  static void read(const Json& v, bool& out) {
    if (!v.is_boolean()) throw ConfigError("expected true or false");
    out = v.get<bool>();
  }
  static void read(const Json& v, std::string& out) {
    if (!v.is_string()) throw ConfigError("expected a string");
    out = v.get<std::string>();
  }
  template <class T>
    requires std::is_integral_v<T>
  static void read(const Json& v, T& out) {
    if (!v.is_number_integer()) throw ConfigError("expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError("expected a nonnegative integer");
      const auto x = v.get<std::uint64_t>();
      if (x > std::numeric_limits<T>::max()) throw ConfigError("value too large");
      out = static_cast<T>(x);
    } else {
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
        throw ConfigError("value out of range");
      }
      out = static_cast<T>(x);
    }
  }
  static void read(const Json& v, ModelKind& out) {
    std::string s;
    read(v, s);
    out = parse_model_kind(s);
  }
  static void read(const Json& v, CardScore& out) {
    std::string s;
    read(v, s);
    if (s == "max") out = CardScore::kMax;
    else if (s == "mean") out = CardScore::kMean;
    else throw ConfigError("expected \"max\" or \"mean\"");
  }
  static void read(const Json& v, AbMode& out) {
    std::string s;
    read(v, s);
    if (s == "split") out = AbMode::kSplit;
    else if (s == "shared") out = AbMode::kShared;
    else throw ConfigError("expected \"split\" or \"shared\"");
  }
  template <class T>
  static void read(const Json& v, std::vector<T>& out) {
    if (!v.is_array()) throw ConfigError("expected an array");
    std::vector<T> tmp;
    for (const auto& e : v) {
      T x{};
      read(e, x);
      tmp.push_back(x);
    }
    out = std::move(tmp);
  }

  const Locator& loc_;
  std::vector<Frame> stack_;
};

class Writer {
 public:
  void begin(const char* key) { stack_.push_back({key, OrderedJson::object()}); }
  void end() {
    auto top = std::move(stack_.back());
    stack_.pop_back();
    current()[top.first] = std::move(top.second);
  }
  template <class T>
  void field(const char* key, const T& value) {
    current()[key] = write(value);
  }
  OrderedJson take() { return std::move(root_); }

 private:
  OrderedJson& current() { return stack_.empty() ? root_ : stack_.back().second; }

  template <class T>
  static OrderedJson write(const T& v) {
    return v;
  }
  static OrderedJson write(const ModelKind& v) { return std::string(to_string(v)); }
  static OrderedJson write(const CardScore& v) { return std::string(to_string(v)); }
  static OrderedJson write(const AbMode& v) { return std::string(to_string(v)); }
  static OrderedJson write(const std::vector<ModelKind>& v) {
    OrderedJson out = OrderedJson::array();
    for (auto k : v) out.push_back(std::string(to_string(k)));
    return out;
  }

  OrderedJson root_ = OrderedJson::object();
  std::vector<std::pair<std::string, OrderedJson>> stack_;
};

// The single schema, shared by reading and writing.
template <class V, class C>
void visit(V& v, C& c) {
  v.begin("world");
  {
    auto& w = c.world;
    v.field("seed", c.world_seed);
    v.field("n_users", w.n_users);
    v.field("n_items", w.n_items);
    v.field("n_true_units", w.n_true_units);
    v.field("latent_dim", w.latent_dim);
    v.field("image_dim", w.image_dim);
    v.field("text_dim", w.text_dim);
    v.field("n_categories", w.n_categories);
    v.field("brands_per_category", w.brands_per_category);
    v.field("stock_one_fraction", w.stock_one_fraction);
    v.field("max_stock", w.max_stock);
    v.field("standard_unit_fraction", w.standard_unit_fraction);
    v.field("model_label_rate", w.model_label_rate);
    v.field("initial_listed_fraction", w.initial_listed_fraction);
    v.field("listing_days", w.listing_days);
    v.field("category_weight", w.category_weight);
    v.field("brand_weight", w.brand_weight);
    v.field("unit_weight", w.unit_weight);
    v.field("residual_scale", w.residual_scale);
    v.field("user_interest_categories", w.user_interest_categories);
    v.field("user_interest_units", w.user_interest_units);
    v.field("user_category_strength", w.user_category_strength);
    v.field("user_unit_strength", w.user_unit_strength);
    v.field("user_noise", w.user_noise);
    v.field("activity_min", w.activity_min);
    v.field("activity_max", w.activity_max);
    v.field("alpha", w.alpha);
    v.field("beta", w.beta);
    v.field("bias", w.bias);
    v.field("image_noise", w.image_noise);
    v.field("text_noise", w.text_noise);
    v.field("log_days", c.log_days);
    v.field("log_seed", c.log_seed);
    v.begin("exposure");
    v.field("homepage_size", c.exposure.homepage_size);
    v.field("iu_page_prob", c.exposure.iu_page_prob);
    v.field("iu_page_size", c.exposure.iu_page_size);
    v.field("inquiry_prob", c.exposure.inquiry_prob);
    v.field("transaction_prob", c.exposure.transaction_prob);
    v.end();
  }
  v.end();

  v.begin("iu");
  v.field("seed", c.iu.seed);
  v.field("min_members", c.iu.min_members);
  v.field("image_clusters", c.iu.image_clusters);
  v.field("kmeans_max_iterations", c.iu.kmeans_max_iterations);
  v.field("semantic_level", c.iu.semantic_level);
  v.end();

  v.begin("features");
  v.field("window_ms", c.features.window_ms);
  v.field("max_item_seq", c.features.max_item_seq);
  v.field("max_iu_seq", c.features.max_iu_seq);
  v.field("max_inner", c.features.max_inner);
  v.field("label_window_ms", c.features.label_window_ms);
  v.end();

  v.begin("model");
  {
    auto& m = c.model;
    auto& t = c.train;
    v.field("kinds", c.kinds);
    v.field("seed", m.seed);
    v.field("user_dim", m.user_dim);
    v.field("item_id_dim", m.item_id_dim);
    v.field("side_dim", m.side_dim);
    v.field("iu_id_dim", m.iu_id_dim);
    v.field("iu_side_dim", m.iu_side_dim);
    v.field("stats_dim", m.stats_dim);
    v.field("cross_dim", m.cross_dim);
    v.field("attention_width", m.attention_width);
    v.field("attention_heads", m.attention_heads);
    v.field("hidden", m.hidden);
    v.field("embedding_init", m.embedding_init);
    v.field("zero_output_layer", m.zero_output_layer);
    v.field("train_seed", t.seed);
    v.field("learning_rate", t.learning_rate);
    v.field("decay", t.decay);
    v.field("epsilon", t.epsilon);
    v.field("batch_size", t.batch_size);
    v.field("epochs", t.epochs);
    v.field("log_every", t.log_every);
  }
  v.end();

  v.begin("eval");
  v.field("train_last_day", c.train_last_day);
  v.field("test_day", c.test_day);
  v.field("base_model", c.base_model);
  v.end();

  v.begin("simulation");
  {
    auto& s = c.sim;
    v.field("seed", c.sim_seed);
    v.field("model", c.sim_model);
    v.field("iu_slot_ratio", s.merge.iu_slot_ratio);
    v.field("page_size", s.page_size);
    v.field("mean_scroll_depth", s.mean_scroll_depth);
    v.field("item_candidates", s.item_candidates);
    v.field("iu_candidates", s.iu_candidates);
    v.field("members_scored", s.members_scored);
    v.field("stage_two_size", s.stage_two_size);
    v.field("card_score", s.card_score);
    v.field("inquiry_prob", s.inquiry_prob);
    v.field("transaction_prob", s.transaction_prob);
    v.field("first_day", s.first_day);
    v.field("horizon_days", s.horizon_days);
    v.field("ab_split", c.ab.split);
    v.field("ab_mode", c.ab.mode);
    v.field("ab_model_a", c.ab_model_a);
    v.field("ab_model_b", c.ab_model_b);
  }
  v.end();
}

}  // namespace

PipelineConfig parse_config(std::string_view text, std::string_view source) {
  const Locator loc(text, source);
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    loc.fail(loc.line_at(e.byte > 0 ? e.byte - 1 : 0), std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) loc.fail(1, "config must be a JSON object");
  PipelineConfig cfg;
  Reader reader(doc, loc);
  visit(reader, cfg);
  reader.end();
  validate(cfg);
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  Writer writer;
  visit(writer, cfg);
  return writer.take();
}

void override_seeds(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.world_seed = Rng::derive(seed, 1);
  cfg.log_seed = Rng::derive(seed, 2);
  cfg.iu.seed = Rng::derive(seed, 3);
  cfg.model.seed = Rng::derive(seed, 4);
  cfg.train.seed = Rng::derive(seed, 5);
  cfg.sim_seed = Rng::derive(seed, 6);
}

void validate(const PipelineConfig& cfg) {
  validate(cfg.world);
  auto need = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
  };
  need(cfg.log_days >= 2, "world.log_days must be at least 2");
  need(cfg.train_last_day >= 1 && cfg.train_last_day < cfg.test_day, "eval.train_last_day must precede eval.test_day");
  need(cfg.test_day <= cfg.log_days, "eval.test_day must lie within world.log_days");
  need(!cfg.kinds.empty(), "model.kinds must not be empty");
  auto has = [&](ModelKind k) { return std::find(cfg.kinds.begin(), cfg.kinds.end(), k) != cfg.kinds.end(); };
  need(has(parse_model_kind(cfg.base_model)), "eval.base_model must be one of model.kinds");
  need(has(cfg.sim_model), "simulation.model must be one of model.kinds");
  need(has(cfg.ab_model_a) && has(cfg.ab_model_b), "simulation.ab_model_a/b must be among model.kinds");
  need(cfg.train.batch_size > 0, "model.batch_size must be positive");
  need(cfg.train.epochs > 0, "model.epochs must be positive");
  need(cfg.train.learning_rate > 0.0, "model.learning_rate must be positive");
  need(cfg.model.attention_heads > 0 && cfg.model.attention_width % cfg.model.attention_heads == 0,
       "model.attention_heads must divide model.attention_width");
  need(!cfg.model.hidden.empty(), "model.hidden must list at least one width");
  need(cfg.features.window_ms > 0, "features.window_ms must be positive");
  need(cfg.features.max_item_seq > 0 && cfg.features.max_item_seq <= 150, "features.max_item_seq must be in [1, 150]");
  need(cfg.features.max_inner > 0 && cfg.features.max_inner <= 5, "features.max_inner must be in [1, 5]");
  need(cfg.sim.first_day > cfg.log_days, "simulation.first_day must come after the logged days");
  need(cfg.sim.horizon_days >= 0, "simulation.horizon_days must be nonnegative");
  need(cfg.sim.merge.iu_slot_ratio >= 0.0 && cfg.sim.merge.iu_slot_ratio <= 1.0,
       "simulation.iu_slot_ratio must lie in [0, 1]");
  need(cfg.ab.mode == AbMode::kShared || (cfg.ab.split > 0.0 && cfg.ab.split < 1.0),
       "simulation.ab_split must lie strictly between 0 and 1");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_digest(const PipelineConfig& cfg) { return fnv1a64(to_json(cfg).dump()); }

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace iu4rec
