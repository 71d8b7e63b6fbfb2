#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bgz/backend.hpp"
#include "bgz/detector.hpp"
#include "bgz/features.hpp"
#include "bgz/tuning.hpp"

namespace bgz {

/// Everything a subcommand may need. Sources, lowest precedence first:
/// built-in defaults, a JSON config file, BGZ_* environment variables,
/// command-line flags.
struct PipelineConfig {
  std::string backend = "graph_runtime";  // or "stub"
  std::uint64_t stub_seed = 0;
  std::string detector_model;
  std::string embedder_model;

  DetectorConfig detector;
  std::string spec = "B,Ifull";
  int pca_k = 3;
  int top_n = 10;
  double assoc_iou = 0.5;

  int folds = 5;
  std::uint64_t seed = 42;
  SearchSpace search;
  int jobs = 1;

  std::string dataset;
  std::string split_file;
  std::string out_dir = "out";

  void validate() const;
  FeatureSpec feature_spec() const { return FeatureSpec::parse(spec, pca_k); }
  SearchSpace search_space() const;  // search with seed and jobs filled in

  // Flat key/value view used by the file, environment and flag layers.
  // Values are JSON-encoded text.
  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
  void set(const std::string& key, const std::string& value);  // value in text form
  static std::vector<std::string> keys();

  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b) { return a.to_json() == b.to_json(); }
};

PipelineConfig load_config(const std::filesystem::path& path);

// Applies BGZ_<KEY> variables (key upper-cased) found through `getenv`.
void apply_env(PipelineConfig& cfg, const std::function<const char*(const char*)>& getenv);

}  // namespace bgz
