#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bgz/features.hpp"
#include "bgz/gbdt.hpp"
#include "bgz/softmax.hpp"

namespace bgz {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // std-dev, 1 where a column is constant

  static Standardizer fit(const Matrix& x);
  std::vector<double> apply(std::span<const double> row) const;
  Matrix apply(const Matrix& x) const;
};

using MemberModel = std::variant<SoftmaxModel, GbdtModel>;

struct EnsembleMember {
  MemberModel model;
  double weight = 1.0;
};

std::string member_name(const MemberModel& m);

/// Soft-voting classifier plus everything needed to turn raw detections
/// and embeddings into its inputs: the feature spec, PCA transforms and
/// frozen standardization statistics.
struct EnsembleModel {
  FeatureSpec feature_spec;
  std::optional<PcaTransform> pca_full;
  std::optional<PcaTransform> pca_crop;
  Standardizer standardizer;
  std::vector<EnsembleMember> members;
  Proba class_priors{};

  void validate() const;
  Proba predict_proba(std::span<const double> row) const;
};

Proba predict_proba(const EnsembleModel& model, const FeatureRow& row);

GazeClass argmax_class(const Proba& p);

// Sums the probability vectors and takes the argmax; exact ties go to the
// lower class index.
GazeClass aggregate_votes(std::span<const Proba> predictions);

std::map<std::string, GazeClass> aggregate(const std::map<std::string, std::vector<Proba>>& groups);

}  // namespace bgz
