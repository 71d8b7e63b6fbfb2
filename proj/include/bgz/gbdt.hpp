#pragma once

#include <array>
#include <span>
#include <vector>

#include "bgz/softmax.hpp"

namespace bgz {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  float value = 0.0f;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  float predict(std::span<const double> x) const;
  int depth() const;
};

struct GbdtParams {
  int depth = 3;
  int rounds = 100;
  double lr = 0.1;
  double lambda = 1.0;
  double min_child_weight = 1e-3;
};

/// Multiclass gradient boosting with one regression tree per class and
/// round. Raw scores start at the log of the weighted class priors.
struct GbdtModel {
  std::array<double, kNumClasses> init_score{};
  std::array<std::vector<RegressionTree>, kNumClasses> trees;
  double learning_rate = 0.1;
  int n_rounds = 0;
  std::size_t n_features = 0;

  Proba predict_proba(std::span<const double> x) const;
  std::size_t tree_count() const;
};

// Each round fits trees to the Newton step of the multiclass cross-entropy,
// then halves the step until the weighted training log-loss does not rise.
GbdtModel gbdt_fit(const Matrix& x, std::span<const int> y, std::span<const double> w,
                   const GbdtParams& params, std::vector<double>* loss_trace = nullptr);

}  // namespace bgz
