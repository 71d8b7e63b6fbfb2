#include "bgz/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bgz/error.hpp"

namespace bgz {
namespace {

Proba softmax_row(const SoftmaxModel& m, std::span<const double> x) {
  Proba z{};
  for (int k = 0; k < kNumClasses; ++k) {
    double acc = m.bias[k];
    auto wk = m.weights.row(k);
    for (std::size_t j = 0; j < x.size(); ++j) acc += wk[j] * x[j];
    z[k] = acc;
  }
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

void check_training_inputs(const Matrix& x, std::span<const int> y, std::span<const double> w) {
  if (x.rows == 0) throw ValidationError("softmax: no training rows");
  if (y.size() != x.rows || w.size() != x.rows) throw ValidationError("softmax: label/weight size mismatch");
  for (int label : y) {
    if (label < 0 || label >= kNumClasses) throw ValidationError("softmax: label out of range");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) throw ValidationError("softmax: non-finite feature");
  }
}

}  // namespace

SoftmaxModel SoftmaxModel::zeros(std::size_t dim, double l2) {
  SoftmaxModel m;
  m.weights = Matrix(kNumClasses, dim);
  m.l2 = l2;
  return m;
}

Proba SoftmaxModel::predict_proba(std::span<const double> x) const {
  if (x.size() != dim()) throw ValidationError("softmax: dimension mismatch");
  return softmax_row(*this, x);
}

SoftmaxLossGrad softmax_loss_grad(const SoftmaxModel& m, const Matrix& x, std::span<const int> y,
                                  std::span<const double> w) {
  SoftmaxLossGrad out;
  out.grad_weights = Matrix(kNumClasses, x.cols);
  double wsum = 0.0;
  for (double v : w) wsum += v;
  if (!(wsum > 0.0)) throw ValidationError("softmax: sample weights sum to zero");

  for (std::size_t i = 0; i < x.rows; ++i) {
    auto xi = x.row(i);
    const Proba p = softmax_row(m, xi);
    const double wi = w[i] / wsum;
    out.loss -= wi * std::log(std::max(p[y[i]], 1e-300));
    for (int k = 0; k < kNumClasses; ++k) {
      const double r = wi * (p[k] - (y[i] == k ? 1.0 : 0.0));
      out.grad_bias[k] += r;
      auto gk = out.grad_weights.row(k);
      for (std::size_t j = 0; j < xi.size(); ++j) gk[j] += r * xi[j];
    }
  }
  double reg = 0.0;
  for (std::size_t idx = 0; idx < m.weights.data.size(); ++idx) {
    reg += m.weights.data[idx] * m.weights.data[idx];
    out.grad_weights.data[idx] += m.l2 * m.weights.data[idx];
  }
  out.loss += 0.5 * m.l2 * reg;
  return out;
}

SoftmaxModel softmax_fit(const Matrix& x, std::span<const int> y, std::span<const double> w,
                         const SoftmaxParams& params, std::vector<double>* loss_trace) {
  check_training_inputs(x, y, w);
  if (params.epochs < 0 || !(params.lr > 0.0) || !(params.l2 >= 0.0)) {
    throw ValidationError("softmax: invalid hyperparameters");
  }
  SoftmaxModel m = SoftmaxModel::zeros(x.cols, params.l2);
  SoftmaxLossGrad cur = softmax_loss_grad(m, x, y, w);
  if (loss_trace) loss_trace->push_back(cur.loss);
  double lr = params.lr;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      SoftmaxModel next = m;
      for (std::size_t idx = 0; idx < next.weights.data.size(); ++idx) {
        next.weights.data[idx] -= lr * cur.grad_weights.data[idx];
      }
      for (int k = 0; k < kNumClasses; ++k) next.bias[k] -= lr * cur.grad_bias[k];
      SoftmaxLossGrad cand = softmax_loss_grad(next, x, y, w);
      if (!std::isfinite(cand.loss)) {
        throw RuntimeFailure("softmax: non-finite loss at epoch " + std::to_string(epoch) +
                             " (learning rate too large?)");
      }
      if (cand.loss <= cur.loss) {
        m = std::move(next);
        cur = std::move(cand);
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
    if (loss_trace) loss_trace->push_back(cur.loss);
  }
  return m;
}

}  // namespace bgz
