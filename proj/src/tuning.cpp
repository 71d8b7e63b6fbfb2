#include "bgz/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bgz/error.hpp"
#include "bgz/evaluation.hpp"
#include "bgz/parallel.hpp"
#include "bgz/random.hpp"

namespace bgz {

CvPlan CvPlan::make(const std::vector<std::string>& billboard_ids, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs at least 2 folds");
  std::set<std::string> unique(billboard_ids.begin(), billboard_ids.end());
  if (static_cast<int>(unique.size()) < k) {
    throw ValidationError("fewer billboards (" + std::to_string(unique.size()) + ") than folds (" +
                          std::to_string(k) + ")");
  }
  std::vector<std::string> ids(unique.begin(), unique.end());
  SplitMix64 rng(seed);
  rng.shuffle(std::span<std::string>(ids));
  CvPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) plan.fold_of[ids[i]] = static_cast<int>(i % k);
  return plan;
}

void CvPlan::validate() const {
  if (k < 2) throw ValidationError("cross-validation needs at least 2 folds");
  std::vector<int> count(k, 0);
  for (const auto& [id, f] : fold_of) {
    if (f < 0 || f >= k) throw ValidationError("fold index out of range for billboard " + id);
    ++count[f];
  }
  for (int c : count) {
    if (c == 0) throw ValidationError("cross-validation plan has an empty fold");
  }
}

int CvPlan::fold(const std::string& billboard_id) const {
  auto it = fold_of.find(billboard_id);
  if (it == fold_of.end()) throw ValidationError("billboard not in the CV plan: " + billboard_id);
  return it->second;
}

void SearchSpace::validate() const {
  if (n_configs < 1) throw ValidationError("search needs at least one config");
  if (!(l2_min > 0.0) || l2_max < l2_min) throw ValidationError("invalid l2 range");
  if (depths.empty()) throw ValidationError("no tree depths to search");
  for (int d : depths) {
    if (d < 1) throw ValidationError("tree depth must be at least 1");
  }
  if (rounds_min < 1 || rounds_max < rounds_min || rounds_step < 1) throw ValidationError("invalid rounds range");
  if (!(lr_min > 0.0) || lr_max < lr_min) throw ValidationError("invalid learning-rate range");
  if (!use_softmax && !use_gbdt) throw ValidationError("search enables no learners");
  if (softmax_epochs < 1 || !(softmax_lr > 0.0)) throw ValidationError("invalid softmax settings");
}

std::vector<CandidateConfig> sample_configs(const SearchSpace& space) {
  space.validate();
  SplitMix64 rng(space.seed ^ 0x5EA5C4ULL);
  const int round_steps = (space.rounds_max - space.rounds_min) / space.rounds_step + 1;
  std::vector<CandidateConfig> out;
  for (int i = 0; i < space.n_configs; ++i) {
    CandidateConfig c;
    c.l2 = std::exp(rng.uniform(std::log(space.l2_min), std::log(space.l2_max)));
    c.depth = space.depths[rng.below(space.depths.size())];
    c.rounds = space.rounds_min + space.rounds_step * static_cast<int>(rng.below(round_steps));
    c.lr = rng.uniform(space.lr_min, space.lr_max);
    out.push_back(c);
  }
  return out;
}

std::vector<double> class_weights(std::span<const int> y, bool enabled) {
  std::vector<double> w(y.size(), 1.0);
  if (!enabled || y.empty()) return w;
  std::array<int, kNumClasses> count{};
  for (int label : y) ++count[label];
  int present = 0;
  for (int c : count) present += c > 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    w[i] = static_cast<double>(y.size()) / (present * count[y[i]]);
  }
  return w;
}

double mean_fold_macro_f1(const std::vector<Proba>& probs, std::span<const int> y,
                          std::span<const int> fold, int n_folds) {
  double sum = 0.0;
  int used = 0;
  for (int f = 0; f < n_folds; ++f) {
    std::vector<int> t, p;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (fold[i] != f) continue;
      t.push_back(y[i]);
      p.push_back(static_cast<int>(argmax_class(probs[i])));
    }
    if (t.empty()) continue;
    sum += classification_report(std::span<const int>(t), std::span<const int>(p)).macro_f1;
    ++used;
  }
  return used ? sum / used : 0.0;
}

namespace {

void compositions(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int v = total; v >= 0; --v) {
    cur.push_back(v);
    compositions(total - v, parts - 1, cur, out);
    cur.pop_back();
  }
}

Matrix gather(const std::vector<FeatureRow>& rows, const std::vector<std::size_t>& idx) {
  const std::size_t d = rows.front().vector.size();
  Matrix x(idx.size(), d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(rows[idx[r]].vector.begin(), rows[idx[r]].vector.end(), x.row(r).begin());
  }
  return x;
}

enum class Learner { Softmax, Gbdt };

MemberModel fit_member(Learner learner, const CandidateConfig& c, const SearchSpace& space,
                       const Matrix& x, std::span<const int> y, std::span<const double> w) {
  if (learner == Learner::Softmax) {
    return softmax_fit(x, y, w, SoftmaxParams{c.l2, space.softmax_lr, space.softmax_epochs});
  }
  GbdtParams gp;
  gp.depth = c.depth;
  gp.rounds = c.rounds;
  gp.lr = c.lr;
  return gbdt_fit(x, y, w, gp);
}

}  // namespace

std::vector<double> choose_weights(const std::vector<std::vector<Proba>>& member_probs,
                                   std::span<const int> y, std::span<const int> fold, int n_folds,
                                   double step) {
  const std::size_t m = member_probs.size();
  if (m == 0) throw ValidationError("choose_weights: no members");
  if (m == 1) return {1.0};
  const int units = static_cast<int>(std::lround(1.0 / step));
  if (units < 1 || std::abs(units * step - 1.0) > 1e-9) throw ValidationError("weight step must divide 1");

  std::vector<double> solo(m);
  for (std::size_t k = 0; k < m; ++k) solo[k] = mean_fold_macro_f1(member_probs[k], y, fold, n_folds);
  std::vector<std::size_t> rank(m);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return solo[a] > solo[b]; });

  std::vector<std::vector<int>> grid;
  std::vector<int> cur;
  compositions(units, static_cast<int>(m), cur, grid);

  const std::size_t n = y.size();
  std::vector<Proba> blend(n);
  double best_score = -1.0;
  std::vector<int> best;
  for (const auto& g : grid) {
    for (std::size_t i = 0; i < n; ++i) {
      Proba p{};
      for (std::size_t k = 0; k < m; ++k) {
        for (int c = 0; c < kNumClasses; ++c) p[c] += g[k] * member_probs[k][i][c];
      }
      blend[i] = p;
    }
    const double score = mean_fold_macro_f1(blend, y, fold, n_folds);
    bool better = score > best_score + 1e-12;
    if (!better && std::abs(score - best_score) <= 1e-12) {
      for (std::size_t r : rank) {
        if (g[r] != best[r]) {
          better = g[r] > best[r];
          break;
        }
      }
    }
    if (better) {
      best_score = score;
      best = g;
    }
  }
  std::vector<double> w(m);
  for (std::size_t k = 0; k < m; ++k) w[k] = static_cast<double>(best[k]) / units;
  return w;
}

EnsembleModel cv_tune(const std::vector<FeatureRow>& rows, const CvPlan& plan,
                      const SearchSpace& space, TuningReport* report) {
  space.validate();
  plan.validate();
  if (rows.empty()) throw ValidationError("cv_tune: no training rows");
  const std::size_t d = rows.front().vector.size();
  const std::size_t n = rows.size();
  std::vector<int> y(n), fold(n);
  std::set<std::string> billboards;
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].vector.size() != d) throw ValidationError("cv_tune: inconsistent feature widths");
    if (!rows[i].label) throw ValidationError("cv_tune: unlabeled training row " + rows[i].sample_id);
    y[i] = static_cast<int>(*rows[i].label);
    fold[i] = plan.fold(rows[i].billboard_id);
    billboards.insert(rows[i].billboard_id);
  }
  if (static_cast<int>(billboards.size()) < plan.k) {
    throw ValidationError("fewer billboards than folds");
  }

  std::vector<Learner> learners;
  if (space.use_softmax) learners.push_back(Learner::Softmax);
  if (space.use_gbdt) learners.push_back(Learner::Gbdt);
  const auto configs = sample_configs(space);

  struct FoldData {
    std::vector<std::size_t> train, val;
    Matrix x_train, x_val;
    std::vector<int> y_train;
    std::vector<double> w_train;
  };
  std::vector<FoldData> folds(plan.k);
  for (int f = 0; f < plan.k; ++f) {
    FoldData& fd = folds[f];
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? fd.val : fd.train).push_back(i);
    if (fd.train.empty() || fd.val.empty()) continue;
    Matrix raw_train = gather(rows, fd.train);
    Standardizer s = Standardizer::fit(raw_train);
    fd.x_train = s.apply(raw_train);
    fd.x_val = s.apply(gather(rows, fd.val));
    for (auto i : fd.train) fd.y_train.push_back(y[i]);
    fd.w_train = class_weights(fd.y_train, space.class_weighting);
  }

  // oof[learner][config][row]
  std::vector<std::vector<std::vector<Proba>>> oof(
      learners.size(), std::vector<std::vector<Proba>>(configs.size(), std::vector<Proba>(n)));
  const std::size_t tasks = learners.size() * configs.size() * plan.k;
  parallel_for(tasks, space.jobs, [&](std::size_t t) {
    const std::size_t f = t % plan.k;
    const std::size_t c = (t / plan.k) % configs.size();
    const std::size_t l = t / (plan.k * configs.size());
    const FoldData& fd = folds[f];
    if (fd.train.empty() || fd.val.empty()) return;
    // softmax reads only l2 from the config
    MemberModel model = fit_member(learners[l], configs[c], space, fd.x_train, fd.y_train, fd.w_train);
    for (std::size_t r = 0; r < fd.val.size(); ++r) {
      oof[l][c][fd.val[r]] =
          std::visit([&](const auto& mdl) { return mdl.predict_proba(fd.x_val.row(r)); }, model);
    }
  });

  TuningReport rep;
  rep.configs = configs;
  std::vector<int> chosen(learners.size(), 0);
  for (std::size_t l = 0; l < learners.size(); ++l) {
    std::vector<double> scores;
    for (std::size_t c = 0; c < configs.size(); ++c) scores.push_back(mean_fold_macro_f1(oof[l][c], y, fold, plan.k));
    chosen[l] = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    if (learners[l] == Learner::Softmax) {
      rep.softmax_cv_f1 = scores;
      rep.best_softmax = chosen[l];
    } else {
      rep.gbdt_cv_f1 = scores;
      rep.best_gbdt = chosen[l];
    }
  }

  std::vector<std::vector<Proba>> member_oof;
  for (std::size_t l = 0; l < learners.size(); ++l) member_oof.push_back(oof[l][chosen[l]]);
  const auto weights = choose_weights(member_oof, y, fold, plan.k);

  std::vector<Proba> blended(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < learners.size(); ++l) {
      for (int c = 0; c < kNumClasses; ++c) blended[i][c] += weights[l] * member_oof[l][i][c];
    }
  }
  rep.ensemble_cv_f1 = mean_fold_macro_f1(blended, y, fold, plan.k);
  rep.weights = weights;

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const Matrix raw = gather(rows, all);
  EnsembleModel model;
  model.standardizer = Standardizer::fit(raw);
  const Matrix x = model.standardizer.apply(raw);
  const auto w = class_weights(y, space.class_weighting);
  std::vector<MemberModel> fitted(learners.size());
  parallel_for(learners.size(), space.jobs, [&](std::size_t l) {
    fitted[l] = fit_member(learners[l], configs[chosen[l]], space, x, y, w);
  });
  for (std::size_t l = 0; l < learners.size(); ++l) {
    rep.member_names.push_back(member_name(fitted[l]));
    model.members.push_back({std::move(fitted[l]), weights[l]});
  }
  for (int label : y) model.class_priors[label] += 1.0 / static_cast<double>(n);
  if (report) *report = std::move(rep);
  return model;
}

}  // namespace bgz
