#include "bgz/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bgz/error.hpp"

namespace bgz {
namespace {

using Column = std::vector<double>;

// In-place Householder QR on column-major `cols` (d columns of length n,
// n > d); returns R as d columns of length d.
std::vector<Column> householder_r(std::vector<Column> cols, std::size_t n) {
  const std::size_t d = cols.size();
  for (std::size_t j = 0; j < d; ++j) {
    Column& x = cols[j];
    double norm = 0.0;
    for (std::size_t i = j; i < n; ++i) norm += x[i] * x[i];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = x[j] > 0.0 ? -norm : norm;
    Column v(n - j);
    for (std::size_t i = j; i < n; ++i) v[i - j] = x[i];
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (double e : v) vnorm2 += e * e;
    if (vnorm2 == 0.0) continue;
    for (std::size_t c = j; c < d; ++c) {
      Column& col = cols[c];
      double dot = 0.0;
      for (std::size_t i = j; i < n; ++i) dot += v[i - j] * col[i];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = j; i < n; ++i) col[i] -= f * v[i - j];
    }
  }
  std::vector<Column> r(d, Column(d, 0.0));
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i <= c; ++i) r[c][i] = cols[c][i];
  }
  return r;
}

// One-sided Jacobi: rotates the m columns (length len) until pairwise
// orthogonal and accumulates the rotations into an m x m matrix (columns).
std::vector<Column> jacobi_orthogonalize(std::vector<Column>& cols, std::size_t len) {
  const std::size_t m = cols.size();
  std::vector<Column> w(m, Column(m, 0.0));
  for (std::size_t j = 0; j < m; ++j) w[j][j] = 1.0;

  double frob = 0.0;
  for (const auto& c : cols) {
    for (std::size_t i = 0; i < len; ++i) frob += c[i] * c[i];
  }
  const double negligible = frob * 1e-30;

  constexpr double kTol = 1e-15;
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        Column& ap = cols[p];
        Column& aq = cols[q];
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          alpha += ap[i] * ap[i];
          beta += aq[i] * aq[i];
          gamma += ap[i] * aq[i];
        }
        if (alpha <= negligible || beta <= negligible) continue;
        if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < len; ++i) {
          const double x = ap[i];
          const double y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        Column& wp = w[p];
        Column& wq = w[q];
        for (std::size_t i = 0; i < m; ++i) {
          const double x = wp[i];
          const double y = wq[i];
          wp[i] = c * x - s * y;
          wq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }
  return w;
}

double norm(const Column& c, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += c[i] * c[i];
  return std::sqrt(s);
}

// Replaces rows r >= first_bad with an orthonormal completion of rows [0, first_bad).
void complete_basis(Matrix& v, std::size_t first_bad) {
  const std::size_t d = v.cols;
  std::size_t r = first_bad;
  for (std::size_t e = 0; e < d && r < v.rows; ++e) {
    Column x(d, 0.0);
    x[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t q = 0; q < r; ++q) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += v(q, j) * x[j];
        for (std::size_t j = 0; j < d; ++j) x[j] -= dot * v(q, j);
      }
    }
    const double nx = norm(x, d);
    if (nx < 1e-8) continue;
    for (std::size_t j = 0; j < d; ++j) v(r, j) = x[j] / nx;
    ++r;
  }
}

}  // namespace

SvdResult svd_right(const Matrix& a) {
  const std::size_t n = a.rows;
  const std::size_t d = a.cols;
  SvdResult out;
  if (n == 0 || d == 0) return out;

  if (n >= d) {
    std::vector<Column> cols(d, Column(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) cols[j][i] = a(i, j);
    }
    std::size_t len = n;
    if (n > d) {
      cols = householder_r(std::move(cols), n);
      len = d;
    }
    const auto v = jacobi_orthogonalize(cols, len);
    std::vector<double> sigma(d);
    for (std::size_t j = 0; j < d; ++j) sigma[j] = norm(cols[j], len);
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });
    out.right_vectors = Matrix(d, d);
    for (std::size_t r = 0; r < d; ++r) {
      out.singular_values.push_back(sigma[order[r]]);
      std::copy(v[order[r]].begin(), v[order[r]].end(), out.right_vectors.row(r).begin());
    }
    return out;
  }

  // Wide input: orthogonalize the n columns of A^T. The rotated columns are
  // V * Sigma, so normalizing them yields the right singular vectors of A.
  std::vector<Column> cols(n, Column(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) cols[i][j] = a(i, j);
  }
  jacobi_orthogonalize(cols, d);
  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm(cols[j], d);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double cutoff = (sigma.empty() ? 0.0 : sigma[order[0]]) * 1e-12;
  out.right_vectors = Matrix(n, d);
  std::size_t good = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double s = sigma[order[r]];
    out.singular_values.push_back(s);
    if (s > cutoff && s > 0.0 && good == r) {
      for (std::size_t j = 0; j < d; ++j) out.right_vectors(r, j) = cols[order[r]][j] / s;
      ++good;
    }
  }
  if (good < n) complete_basis(out.right_vectors, good);
  return out;
}

PcaTransform pca_fit(const Matrix& rows, std::size_t k) {
  const std::size_t n = rows.rows;
  const std::size_t d = rows.cols;
  if (k < 1) throw ValidationError("pca_fit: k must be at least 1");
  if (n <= k) throw ValidationError("pca_fit: need more rows than components");
  if (k > d) throw ValidationError("pca_fit: k exceeds the feature dimension");
  for (double x : rows.data) {
    if (!std::isfinite(x)) throw ValidationError("pca_fit: non-finite input");
  }

  PcaTransform t;
  t.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) t.mean[j] += rows(i, j);
  }
  for (double& m : t.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = rows(i, j) - t.mean[j];
  }
  SvdResult svd = svd_right(centered);

  t.components = Matrix(k, d);
  for (std::size_t r = 0; r < k; ++r) {
    auto src = svd.right_vectors.row(r);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j) {
      if (std::abs(src[j]) > std::abs(src[arg])) arg = j;
    }
    const double sign = src[arg] < 0.0 ? -1.0 : 1.0;
    auto dst = t.components.row(r);
    for (std::size_t j = 0; j < d; ++j) dst[j] = sign * src[j];
    const double s = svd.singular_values[r];
    t.explained_variance.push_back(s * s / static_cast<double>(n - 1));
  }
  return t;
}

namespace {

template <typename T>
std::vector<double> project_impl(const PcaTransform& t, std::span<const T> e) {
  if (e.size() != t.dim()) {
    throw ValidationError("pca_project: dimension mismatch (" + std::to_string(e.size()) + " vs " +
                          std::to_string(t.dim()) + ")");
  }
  std::vector<double> out(t.k(), 0.0);
  for (std::size_t r = 0; r < t.k(); ++r) {
    auto comp = t.components.row(r);
    double acc = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) acc += comp[j] * (static_cast<double>(e[j]) - t.mean[j]);
    out[r] = acc;
  }
  return out;
}

}  // namespace

std::vector<double> pca_project(const PcaTransform& t, std::span<const double> e) {
  return project_impl(t, e);
}

std::vector<double> pca_project(const PcaTransform& t, std::span<const float> e) {
  return project_impl(t, e);
}

}  // namespace bgz
