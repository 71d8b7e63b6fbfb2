#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bgz {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

struct SvdResult {
  std::vector<double> singular_values;  // descending
  Matrix right_vectors;                 // one right singular vector per row, same order
};

// Thin SVD of an n x d matrix: min(n, d) singular values and right singular
// vectors. Tall inputs are reduced to d x d by Householder QR and then
// orthogonalized with one-sided (Hestenes) Jacobi rotations; wide inputs run
// the rotations on the transpose instead.
SvdResult svd_right(const Matrix& a);

/// Mean-centering PCA transform. Rows of `components` are orthonormal and
/// ordered by non-increasing explained variance; each row's entry of
/// largest magnitude is positive.
struct PcaTransform {
  std::vector<double> mean;
  Matrix components;  // k x d
  std::vector<double> explained_variance;

  std::size_t dim() const { return mean.size(); }
  std::size_t k() const { return components.rows; }
};

// Throws ValidationError when rows <= k, k < 1 or any entry is non-finite.
PcaTransform pca_fit(const Matrix& rows, std::size_t k);

std::vector<double> pca_project(const PcaTransform& t, std::span<const double> e);
std::vector<double> pca_project(const PcaTransform& t, std::span<const float> e);

}  // namespace bgz
