#include "bgz/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "bgz/error.hpp"

namespace bgz {

MatchResult match_detections(std::span<const Detection> dets, std::span<const BBox> gts,
                             double iou_threshold) {
  MatchResult r;
  r.true_positive.assign(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[d].box, gts[g]);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      r.true_positive[d] = true;
    }
  }
  r.unmatched_gt = static_cast<int>(std::count(taken.begin(), taken.end(), false));
  return r;
}

std::vector<PrPoint> pr_curve(std::span<const ScoredMatch> matches, int total_gt) {
  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return matches[a].score > matches[b].score;
  });
  std::vector<PrPoint> curve;
  curve.reserve(matches.size());
  int tp = 0;
  int fp = 0;
  for (std::size_t idx : order) {
    (matches[idx].true_positive ? tp : fp) += 1;
    PrPoint p;
    p.threshold = matches[idx].score;
    p.precision = static_cast<double>(tp) / (tp + fp);
    p.recall = total_gt > 0 ? static_cast<double>(tp) / total_gt : 0.0;
    curve.push_back(p);
  }
  return curve;
}

double average_precision(std::span<const ScoredMatch> matches, int total_gt) {
  if (total_gt < 0) throw ValidationError("average_precision: negative GT count");
  if (total_gt == 0) return matches.empty() ? 1.0 : 0.0;
  const auto curve = pr_curve(matches, total_gt);
  // precision envelope: max precision at any later (higher-recall) point
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  double sum = 0.0;
  std::size_t cursor = 0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    while (cursor < curve.size() && curve[cursor].recall < level - 1e-12) ++cursor;
    if (cursor < curve.size()) sum += envelope[cursor];
  }
  return sum / 101.0;
}

double map_range(std::span<const double> aps) {
  if (aps.empty()) throw ValidationError("map_range: no AP values");
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

DetEvalReport evaluate_detections(std::span<const ImageEval> images, double pr_iou) {
  if (!(pr_iou > 0.0 && pr_iou <= 1.0)) throw ValidationError("evaluation IoU must be in (0,1]");
  DetEvalReport rep;
  rep.pr_iou = pr_iou;
  std::vector<std::vector<Detection>> sorted;
  sorted.reserve(images.size());
  for (const auto& im : images) {
    auto d = im.dets;
    std::stable_sort(d.begin(), d.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    rep.total_gt += static_cast<int>(im.gts.size());
    rep.total_dets += static_cast<int>(d.size());
    sorted.push_back(std::move(d));
  }

  auto pooled = [&](double iou, std::vector<MatchResult>* keep) {
    std::vector<ScoredMatch> all;
    for (std::size_t i = 0; i < images.size(); ++i) {
      MatchResult m = match_detections(sorted[i], images[i].gts, iou);
      for (std::size_t d = 0; d < sorted[i].size(); ++d) {
        all.push_back({sorted[i][d].score, m.true_positive[d]});
      }
      if (keep) keep->push_back(std::move(m));
    }
    return all;
  };

  for (std::size_t t = 0; t < kCocoIouThresholds.size(); ++t) {
    const auto all = pooled(kCocoIouThresholds[t], t == 0 ? &rep.per_image : nullptr);
    rep.ap_per_threshold[t] = average_precision(all, rep.total_gt);
  }
  rep.map50 = rep.ap_per_threshold[0];
  rep.map50_95 = map_range(rep.ap_per_threshold);

  const auto all = pooled(pr_iou, nullptr);
  rep.ap_at_pr_iou = average_precision(all, rep.total_gt);
  double best_f1 = -1.0;
  for (const auto& p : pr_curve(all, rep.total_gt)) {
    const double f1 =
        p.precision + p.recall > 0.0 ? 2.0 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
    if (f1 > best_f1) {
      best_f1 = f1;
      rep.precision = p.precision;
      rep.recall = p.recall;
      rep.f1_threshold = p.threshold;
    }
  }
  return rep;
}

ClsEvalReport classification_report(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw ValidationError("classification_report: length mismatch");
  if (y_true.empty()) throw ValidationError("classification_report: no samples");
  ClsEvalReport r;
  r.total = static_cast<int>(y_true.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) {
      throw ValidationError("classification_report: label outside {0,1,2}");
    }
    r.confusion[t][p] += 1;
  }
  int correct = 0;
  int tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double macro = 0.0, weighted = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const int tp = r.confusion[c][c];
    int support = 0, predicted = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      support += r.confusion[c][o];
      predicted += r.confusion[o][c];
    }
    const int fp = predicted - tp;
    const int fn = support - tp;
    correct += tp;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
    const double prec = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    const double rec = support > 0 ? static_cast<double>(tp) / support : 0.0;
    r.f1[c] = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    macro += r.f1[c];
    weighted += r.f1[c] * support;
  }
  r.accuracy = static_cast<double>(correct) / r.total;
  r.macro_f1 = macro / kNumClasses;
  r.weighted_f1 = weighted / r.total;
  const int denom = 2 * tp_sum + fp_sum + fn_sum;
  r.micro_f1 = denom > 0 ? 2.0 * tp_sum / denom : 0.0;
  return r;
}

ClsEvalReport classification_report(std::span<const GazeClass> y_true,
                                    std::span<const GazeClass> y_pred) {
  std::vector<int> t, p;
  for (auto c : y_true) t.push_back(static_cast<int>(c));
  for (auto c : y_pred) p.push_back(static_cast<int>(c));
  return classification_report(std::span<const int>(t), std::span<const int>(p));
}

}  // namespace bgz
