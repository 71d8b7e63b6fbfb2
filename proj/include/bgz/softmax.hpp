#pragma once

#include <array>
#include <span>
#include <vector>

#include "bgz/core.hpp"
#include "bgz/pca.hpp"

namespace bgz {

using Proba = std::array<double, kNumClasses>;

/// Multinomial logistic regression over standardized features.
struct SoftmaxModel {
  Matrix weights;  // kNumClasses x d
  std::array<double, kNumClasses> bias{};
  double l2 = 0.0;

  static SoftmaxModel zeros(std::size_t dim, double l2 = 0.0);

  std::size_t dim() const { return weights.cols; }
  Proba predict_proba(std::span<const double> x) const;
};

struct SoftmaxParams {
  double l2 = 1e-2;
  double lr = 0.5;
  int epochs = 300;
};

struct SoftmaxLossGrad {
  double loss = 0.0;
  Matrix grad_weights;
  std::array<double, kNumClasses> grad_bias{};
};

// Weighted mean cross-entropy plus (l2/2)*||W||^2; the bias is unpenalized.
SoftmaxLossGrad softmax_loss_grad(const SoftmaxModel& m, const Matrix& x, std::span<const int> y,
                                  std::span<const double> w);

// Full-batch gradient descent from zero parameters. The step size is halved
// whenever a step would raise the loss, so the loss trace never increases.
// Throws RuntimeFailure on a non-finite loss.
SoftmaxModel softmax_fit(const Matrix& x, std::span<const int> y, std::span<const double> w,
                         const SoftmaxParams& params, std::vector<double>* loss_trace = nullptr);

}  // namespace bgz
