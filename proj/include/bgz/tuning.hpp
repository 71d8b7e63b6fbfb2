#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bgz/ensemble.hpp"

namespace bgz {

/// Grouped k-fold assignment: every billboard and all of its samples land in
/// exactly one validation fold.
struct CvPlan {
  int k = 5;
  std::uint64_t seed = 42;
  std::map<std::string, int> fold_of;

  // Shuffles the distinct ids with `seed` and deals them round-robin.
  static CvPlan make(const std::vector<std::string>& billboard_ids, int k, std::uint64_t seed);

  void validate() const;
  int fold(const std::string& billboard_id) const;
};

struct SearchSpace {
  int n_configs = 40;
  double l2_min = 1e-4;
  double l2_max = 10.0;
  std::vector<int> depths{2, 3, 4};
  int rounds_min = 50;
  int rounds_max = 400;
  int rounds_step = 50;
  double lr_min = 0.03;
  double lr_max = 0.3;
  bool use_softmax = true;
  bool use_gbdt = true;
  int softmax_epochs = 300;
  double softmax_lr = 0.5;
  bool class_weighting = true;
  std::uint64_t seed = 42;
  int jobs = 1;

  void validate() const;
};

struct CandidateConfig {
  double l2 = 1e-2;
  int depth = 3;
  int rounds = 100;
  double lr = 0.1;
};

std::vector<CandidateConfig> sample_configs(const SearchSpace& space);

struct TuningReport {
  std::vector<CandidateConfig> configs;
  std::vector<double> softmax_cv_f1;  // mean held-out macro F1 per config
  std::vector<double> gbdt_cv_f1;
  int best_softmax = -1;
  int best_gbdt = -1;
  std::vector<std::string> member_names;
  std::vector<double> weights;
  double ensemble_cv_f1 = 0.0;
};

// Inverse class-frequency weights n / (K * n_c); all ones when disabled.
std::vector<double> class_weights(std::span<const int> y, bool enabled);

// Searches the simplex grid (step `step`) for member weights maximizing the
// mean per-fold macro F1 of the blended held-out probabilities. Ties prefer
// more weight on members with better individual scores.
std::vector<double> choose_weights(const std::vector<std::vector<Proba>>& member_probs,
                                   std::span<const int> y, std::span<const int> fold,
                                   int n_folds, double step = 0.1);

double mean_fold_macro_f1(const std::vector<Proba>& probs, std::span<const int> y,
                          std::span<const int> fold, int n_folds);

// Random search with grouped CV, then refit of the chosen members on all rows.
// The returned model carries the standardizer and members only; the caller
// attaches the feature spec and PCA transforms.
EnsembleModel cv_tune(const std::vector<FeatureRow>& rows, const CvPlan& plan,
                      const SearchSpace& space, TuningReport* report = nullptr);

}  // namespace bgz
