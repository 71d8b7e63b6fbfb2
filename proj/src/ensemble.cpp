#include "bgz/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "bgz/error.hpp"

namespace bgz {

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.mean.assign(x.cols, 0.0);
  s.scale.assign(x.cols, 1.0);
  if (x.rows == 0) return s;
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += x(i, j);
  }
  for (double& m : s.mean) m /= static_cast<double>(x.rows);
  std::vector<double> var(x.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double d = x(i, j) - s.mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < x.cols; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(x.rows));
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) throw ValidationError("standardizer: dimension mismatch");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / scale[j];
  return out;
}

Matrix Standardizer::apply(const Matrix& x) const {
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = apply(x.row(i));
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

std::string member_name(const MemberModel& m) {
  return std::holds_alternative<SoftmaxModel>(m) ? "softmax" : "gbdt";
}

void EnsembleModel::validate() const {
  feature_spec.validate();
  if (members.empty()) throw ValidationError("ensemble has no members");
  double wsum = 0.0;
  for (const auto& m : members) {
    if (!(m.weight >= 0.0)) throw ValidationError("ensemble weight must be non-negative");
    wsum += m.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw ValidationError("ensemble weights must sum to 1");
  if (standardizer.mean.size() != feature_spec.width()) {
    throw ValidationError("standardizer width does not match the feature spec");
  }
  if (feature_spec.use_ifull && !pca_full) throw ValidationError("ensemble lacks the I_full PCA");
  if (feature_spec.use_icrop && !pca_crop) throw ValidationError("ensemble lacks the I_crop PCA");
}

Proba EnsembleModel::predict_proba(std::span<const double> row) const {
  if (row.size() != feature_spec.width()) {
    throw ValidationError("predict_proba: row has " + std::to_string(row.size()) +
                          " features, model expects " + std::to_string(feature_spec.width()));
  }
  const auto z = standardizer.apply(row);
  Proba out{};
  for (const auto& m : members) {
    if (m.weight == 0.0) continue;
    const Proba p = std::visit([&](const auto& model) { return model.predict_proba(z); }, m.model);
    for (int k = 0; k < kNumClasses; ++k) out[k] += m.weight * p[k];
  }
  double sum = 0.0;
  for (double v : out) sum += v;
  for (double& v : out) v /= sum;
  return out;
}

Proba predict_proba(const EnsembleModel& model, const FeatureRow& row) {
  return model.predict_proba(row.vector);
}

GazeClass argmax_class(const Proba& p) {
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k) {
    if (p[k] > p[best]) best = k;
  }
  return static_cast<GazeClass>(best);
}

GazeClass aggregate_votes(std::span<const Proba> predictions) {
  if (predictions.empty()) throw ValidationError("aggregate: empty prediction group");
  // Fixed summation order keeps the vote independent of input order.
  std::vector<Proba> sorted(predictions.begin(), predictions.end());
  std::sort(sorted.begin(), sorted.end());
  Proba sum{};
  for (const auto& p : sorted) {
    for (int k = 0; k < kNumClasses; ++k) sum[k] += p[k];
  }
  return argmax_class(sum);
}

std::map<std::string, GazeClass> aggregate(const std::map<std::string, std::vector<Proba>>& groups) {
  std::map<std::string, GazeClass> out;
  for (const auto& [id, preds] : groups) out.emplace(id, aggregate_votes(preds));
  return out;
}

}  // namespace bgz
