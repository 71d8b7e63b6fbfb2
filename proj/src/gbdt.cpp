#include "bgz/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "bgz/error.hpp"

namespace bgz {

float RegressionTree::predict(std::span<const double> x) const {
  int at = 0;
  while (nodes[at].feature >= 0) {
    const TreeNode& n = nodes[at];
    at = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[at].value;
}

int RegressionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, level[i]);
    if (nodes[i].feature >= 0) {
      level[nodes[i].left] = level[i] + 1;
      level[nodes[i].right] = level[i] + 1;
    }
  }
  return best;
}

Proba GbdtModel::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features) throw ValidationError("gbdt: dimension mismatch");
  Proba z = init_score;
  for (int k = 0; k < kNumClasses; ++k) {
    for (const auto& t : trees[k]) z[k] += t.predict(x);
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

std::size_t GbdtModel::tree_count() const {
  std::size_t n = 0;
  for (const auto& t : trees) n += t.size();
  return n;
}

namespace {

using SortedColumns = std::vector<std::vector<std::uint32_t>>;

SortedColumns sort_columns(const Matrix& x) {
  SortedColumns order(x.cols);
  for (std::size_t f = 0; f < x.cols; ++f) {
    auto& o = order[f];
    o.resize(x.rows);
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }
  return order;
}

// Level-wise exact greedy tree on gradient/hessian statistics. Leaf values
// are the unshrunk Newton steps -G / (H + lambda).
std::vector<double> fit_tree(const Matrix& x, const SortedColumns& order, std::span<const double> g,
                             std::span<const double> h, const GbdtParams& p, RegressionTree& tree) {
  const std::size_t n = x.rows;
  tree.nodes.assign(1, TreeNode{});
  std::vector<double> node_g{0.0}, node_h{0.0};
  for (std::size_t i = 0; i < n; ++i) {
    node_g[0] += g[i];
    node_h[0] += h[i];
  }
  std::vector<int> node_of(n, 0);
  std::vector<int> active{0};

  struct Split {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
  };

  for (int level = 0; level < p.depth && !active.empty(); ++level) {
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < active.size(); ++s) slot[active[s]] = static_cast<int>(s);
    std::vector<Split> best(active.size());

    std::vector<double> gl(active.size()), hl(active.size()), prev(active.size());
    std::vector<char> seen(active.size());
    for (std::size_t f = 0; f < x.cols; ++f) {
      std::fill(gl.begin(), gl.end(), 0.0);
      std::fill(hl.begin(), hl.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      for (std::uint32_t i : order[f]) {
        const int s = slot[node_of[i]];
        if (s < 0) continue;
        const double v = x(i, f);
        if (seen[s] && v > prev[s]) {
          const int node = active[s];
          const double hr = node_h[node] - hl[s];
          if (hl[s] >= p.min_child_weight && hr >= p.min_child_weight) {
            const double gr = node_g[node] - gl[s];
            const double gain = gl[s] * gl[s] / (hl[s] + p.lambda) + gr * gr / (hr + p.lambda) -
                                node_g[node] * node_g[node] / (node_h[node] + p.lambda);
            if (gain > best[s].gain + 1e-12) {
              double thr = 0.5 * (prev[s] + v);
              if (!(thr < v)) thr = prev[s];
              best[s] = {gain, static_cast<int>(f), thr};
            }
          }
        }
        gl[s] += g[i];
        hl[s] += h[i];
        prev[s] = v;
        seen[s] = 1;
      }
    }

    std::vector<int> next_active;
    for (std::size_t s = 0; s < active.size(); ++s) {
      if (best[s].feature < 0) continue;
      const int node = active[s];
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(TreeNode{});
      tree.nodes.push_back(TreeNode{});
      node_g.insert(node_g.end(), {0.0, 0.0});
      node_h.insert(node_h.end(), {0.0, 0.0});
      TreeNode& nd = tree.nodes[node];
      nd.feature = best[s].feature;
      nd.threshold = best[s].threshold;
      nd.left = left;
      nd.right = left + 1;
      next_active.push_back(left);
      next_active.push_back(left + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const TreeNode& nd = tree.nodes[node_of[i]];
      if (nd.feature < 0) continue;
      node_of[i] = x(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
      node_g[node_of[i]] += g[i];
      node_h[node_of[i]] += h[i];
    }
    active = std::move(next_active);
  }

  std::vector<double> leaf(tree.nodes.size(), 0.0);
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (tree.nodes[k].feature < 0) leaf[k] = -node_g[k] / (node_h[k] + p.lambda);
  }
  return leaf;
}

double weighted_log_loss(const std::vector<Proba>& scores, std::span<const int> y,
                         std::span<const double> w, double wsum) {
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Proba& z = scores[i];
    const double mx = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - mx);
    loss += w[i] * (mx + std::log(lse) - z[y[i]]);
  }
  return loss / wsum;
}

}  // namespace

GbdtModel gbdt_fit(const Matrix& x, std::span<const int> y, std::span<const double> w,
                   const GbdtParams& params, std::vector<double>* loss_trace) {
  if (params.rounds <= 0) throw ValidationError("gbdt: rounds must be positive");
  if (params.depth < 1) throw ValidationError("gbdt: depth must be at least 1");
  if (!(params.lr > 0.0) || !(params.lambda >= 0.0)) throw ValidationError("gbdt: invalid hyperparameters");
  if (x.rows == 0) throw ValidationError("gbdt: no training rows");
  if (y.size() != x.rows || w.size() != x.rows) throw ValidationError("gbdt: label/weight size mismatch");
  for (int label : y) {
    if (label < 0 || label >= kNumClasses) throw ValidationError("gbdt: label out of range");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) throw ValidationError("gbdt: non-finite feature");
  }

  const std::size_t n = x.rows;
  double wsum = 0.0;
  Proba prior{};
  for (std::size_t i = 0; i < n; ++i) {
    wsum += w[i];
    prior[y[i]] += w[i];
  }
  if (!(wsum > 0.0)) throw ValidationError("gbdt: sample weights sum to zero");

  GbdtModel model;
  model.learning_rate = params.lr;
  model.n_rounds = params.rounds;
  model.n_features = x.cols;
  for (int k = 0; k < kNumClasses; ++k) model.init_score[k] = std::log(std::max(prior[k] / wsum, 1e-6));

  const SortedColumns order = sort_columns(x);
  std::vector<Proba> scores(n, model.init_score);
  double loss = weighted_log_loss(scores, y, w, wsum);
  if (loss_trace) loss_trace->push_back(loss);

  std::vector<double> g(n), h(n);
  std::vector<Proba> delta(n), cand(n);
  for (int round = 0; round < params.rounds; ++round) {
    std::array<RegressionTree, kNumClasses> round_trees;
    std::array<std::vector<double>, kNumClasses> leaves;
    for (int k = 0; k < kNumClasses; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const Proba& z = scores[i];
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - mx);
        const double pk = std::exp(z[k] - mx) / sum;
        g[i] = w[i] * (pk - (y[i] == k ? 1.0 : 0.0));
        h[i] = w[i] * std::max(pk * (1.0 - pk), 1e-16);
      }
      leaves[k] = fit_tree(x, order, g, h, params, round_trees[k]);
    }

    double step = params.lr;
    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt, step *= 0.5) {
      for (int k = 0; k < kNumClasses; ++k) {
        for (std::size_t node = 0; node < leaves[k].size(); ++node) {
          round_trees[k].nodes[node].value = static_cast<float>(step * leaves[k][node]);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < kNumClasses; ++k) {
          delta[i][k] = round_trees[k].predict(x.row(i));
          cand[i][k] = scores[i][k] + delta[i][k];
        }
      }
      const double next = weighted_log_loss(cand, y, w, wsum);
      if (next <= loss) {
        scores.swap(cand);
        loss = next;
        accepted = true;
      }
    }
    if (!accepted) {
      for (auto& t : round_trees) {
        for (auto& nd : t.nodes) nd.value = 0.0f;
      }
    }
    for (int k = 0; k < kNumClasses; ++k) model.trees[k].push_back(std::move(round_trees[k]));
    if (loss_trace) loss_trace->push_back(loss);
  }
  return model;
}

}  // namespace bgz
