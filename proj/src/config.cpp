#include "bgz/config.hpp"

#include <fstream>
#include <sstream>
#include <variant>

#include <nlohmann/json.hpp>

#include "bgz/csv.hpp"
#include "bgz/error.hpp"

namespace bgz {
namespace {

using Json = nlohmann::ordered_json;
using FieldRef = std::variant<std::string*, int*, std::uint64_t*, double*, bool*, std::vector<int>*>;

struct Field {
  const char* key;
  FieldRef (*ref)(PipelineConfig&);
};

#define BGZ_FIELD(name, expr) \
  Field { name, [](PipelineConfig& c) -> FieldRef { return &(expr); } }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      BGZ_FIELD("backend", c.backend),
      BGZ_FIELD("stub_seed", c.stub_seed),
      BGZ_FIELD("detector_model", c.detector_model),
      BGZ_FIELD("embedder_model", c.embedder_model),
      BGZ_FIELD("input_size", c.detector.input_size),
      BGZ_FIELD("conf_threshold", c.detector.conf_threshold),
      BGZ_FIELD("nms_iou_threshold", c.detector.nms_iou_threshold),
      BGZ_FIELD("max_detections", c.detector.max_detections),
      BGZ_FIELD("spec", c.spec),
      BGZ_FIELD("pca_k", c.pca_k),
      BGZ_FIELD("top_n", c.top_n),
      BGZ_FIELD("assoc_iou", c.assoc_iou),
      BGZ_FIELD("folds", c.folds),
      BGZ_FIELD("seed", c.seed),
      BGZ_FIELD("n_configs", c.search.n_configs),
      BGZ_FIELD("l2_min", c.search.l2_min),
      BGZ_FIELD("l2_max", c.search.l2_max),
      BGZ_FIELD("gbdt_depths", c.search.depths),
      BGZ_FIELD("rounds_min", c.search.rounds_min),
      BGZ_FIELD("rounds_max", c.search.rounds_max),
      BGZ_FIELD("rounds_step", c.search.rounds_step),
      BGZ_FIELD("lr_min", c.search.lr_min),
      BGZ_FIELD("lr_max", c.search.lr_max),
      BGZ_FIELD("use_softmax", c.search.use_softmax),
      BGZ_FIELD("use_gbdt", c.search.use_gbdt),
      BGZ_FIELD("softmax_epochs", c.search.softmax_epochs),
      BGZ_FIELD("softmax_lr", c.search.softmax_lr),
      BGZ_FIELD("class_weighting", c.search.class_weighting),
      BGZ_FIELD("jobs", c.jobs),
      BGZ_FIELD("dataset", c.dataset),
      BGZ_FIELD("split_file", c.split_file),
      BGZ_FIELD("out_dir", c.out_dir),
  };
  return table;
}

#undef BGZ_FIELD

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ValidationError("unknown config key: " + key);
}

void assign(FieldRef ref, const Json& v, const std::string& key) {
  auto bad = [&](const char* want) { return ValidationError("config key " + key + " expects " + want); };
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, std::string>) {
          if (!v.is_string()) throw bad("a string");
          *p = v.get<std::string>();
        } else if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw bad("a boolean");
          *p = v.get<bool>();
        } else if constexpr (std::is_same_v<T, int>) {
          if (!v.is_number_integer()) throw bad("an integer");
          const auto x = v.get<long long>();
          if (x < INT32_MIN || x > INT32_MAX) throw bad("a 32-bit integer");
          *p = static_cast<int>(x);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (!v.is_number_unsigned()) throw bad("a non-negative integer");
          *p = v.get<std::uint64_t>();
        } else if constexpr (std::is_same_v<T, double>) {
          if (!v.is_number()) throw bad("a number");
          *p = v.get<double>();
        } else {
          if (!v.is_array()) throw bad("a list of integers");
          std::vector<int> out;
          for (const auto& e : v) {
            if (!e.is_number_integer()) throw bad("a list of integers");
            out.push_back(e.get<int>());
          }
          *p = std::move(out);
        }
      },
      ref);
}

Json value_of(FieldRef ref) {
  return std::visit([](auto* p) { return Json(*p); }, ref);
}

}  // namespace

void PipelineConfig::validate() const {
  parse_backend_kind(backend);
  detector.validate();
  if (pca_k < 1) throw ValidationError("pca_k must be >= 1");
  feature_spec().validate();
  if (top_n < 1) throw ValidationError("top_n must be >= 1");
  if (!(assoc_iou > 0.0 && assoc_iou <= 1.0)) throw ValidationError("assoc_iou must be in (0,1]");
  if (folds < 2) throw ValidationError("folds must be >= 2");
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
  search_space().validate();
}

SearchSpace PipelineConfig::search_space() const {
  SearchSpace s = search;
  s.seed = seed;
  s.jobs = jobs;
  return s;
}

std::string PipelineConfig::to_json() const {
  Json j = Json::object();
  auto& self = const_cast<PipelineConfig&>(*this);
  for (const auto& f : fields()) j[f.key] = value_of(f.ref(self));
  return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  PipelineConfig cfg;
  for (const auto& [key, value] : j.items()) assign(find_field(key).ref(cfg), value, key);
  return cfg;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const FieldRef ref = find_field(key).ref(*this);
  if (std::holds_alternative<std::string*>(ref)) {
    *std::get<std::string*>(ref) = value;
    return;
  }
  if (std::holds_alternative<std::vector<int>*>(ref)) {
    std::vector<int> out;
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ',');) {
      out.push_back(static_cast<int>(parse_int(item, key.c_str())));
    }
    *std::get<std::vector<int>*>(ref) = std::move(out);
    return;
  }
  Json v;
  try {
    v = Json::parse(value);
  } catch (const Json::parse_error&) {
    throw ValidationError("bad value for " + key + ": " + value);
  }
  assign(ref, v, key);
}

std::vector<std::string> PipelineConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return PipelineConfig::from_json(ss.str());
}

void apply_env(PipelineConfig& cfg, const std::function<const char*(const char*)>& getenv) {
  for (const auto& key : PipelineConfig::keys()) {
    std::string name = "BGZ_";
    for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = getenv(name.c_str())) cfg.set(key, v);
  }
}

}  // namespace bgz
