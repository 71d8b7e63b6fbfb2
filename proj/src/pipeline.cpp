#include "bgz/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "bgz/error.hpp"
#include "bgz/features.hpp"
#include "bgz/image.hpp"
#include "bgz/parallel.hpp"
#include "bgz/pca.hpp"

namespace bgz {
namespace fs = std::filesystem;

namespace {

bool is_image_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::string stem_key(const std::string& rel) {
  fs::path p(rel);
  return (p.parent_path() / p.stem()).generic_string();
}

Matrix embedding_matrix(const std::vector<RawFeatureRow>& rows, bool crop) {
  Matrix m(rows.size(), kEmbeddingDim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& src = crop ? rows[i].crop : rows[i].full;
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return m;
}

}  // namespace

ImageList list_images(const fs::path& dir_or_file) {
  ImageList out;
  std::error_code ec;
  if (fs::is_regular_file(dir_or_file, ec)) {
    out.root = dir_or_file.parent_path();
    out.names.push_back(dir_or_file.filename().generic_string());
    return out;
  }
  if (!fs::is_directory(dir_or_file, ec)) {
    throw ValidationError("no such image file or directory: " + dir_or_file.string());
  }
  out.root = dir_or_file;
  for (const auto& entry : fs::recursive_directory_iterator(dir_or_file)) {
    if (entry.is_regular_file() && is_image_ext(entry.path())) {
      out.names.push_back(fs::relative(entry.path(), dir_or_file).generic_string());
    }
  }
  std::sort(out.names.begin(), out.names.end());
  if (out.names.empty()) throw ValidationError("no images found under " + dir_or_file.string());
  return out;
}

std::vector<ImageDetections> detect_images(const ImageList& images, const ModelHandle& detector,
                                           const DetectorConfig& cfg, int jobs) {
  cfg.validate();
  std::vector<ImageDetections> out(images.names.size());
  parallel_for(images.names.size(), jobs, [&](std::size_t i) {
    const cv::Mat rgb = load_rgb(images.file(images.names[i]));
    out[i] = {images.names[i], detect(rgb, detector, cfg)};
  });
  return out;
}

std::vector<RawFeatureRow> extract_features(const Manifest& manifest,
                                            const std::vector<ImageDetections>& detections,
                                            const ModelHandle& embedder, const ExtractOptions& opts,
                                            ExtractStats* stats) {
  if (opts.top_n < 1) throw ValidationError("top_n must be >= 1");
  if (!(opts.assoc_iou > 0.0 && opts.assoc_iou <= 1.0)) throw ValidationError("assoc_iou must be in (0,1]");

  std::map<std::string, const std::vector<Detection>*> dets_of;
  for (const auto& im : detections) dets_of[im.image] = &im.dets;

  // frame -> its records (manifest records are sorted by image path)
  std::vector<std::string> frames;
  std::map<std::string, std::vector<const SampleRecord*>> records_of;
  for (const auto& r : manifest.records) {
    if (opts.split && r.split != *opts.split) continue;
    auto& v = records_of[r.image_path];
    if (v.empty()) frames.push_back(r.image_path);
    v.push_back(&r);
  }

  std::vector<std::vector<DetectionSample>> per_frame(frames.size());
  std::vector<cv::Size> sizes(frames.size());
  std::vector<int> det_counts(frames.size(), 0);
  parallel_for(frames.size(), opts.jobs, [&](std::size_t f) {
    const auto& recs = records_of.at(frames[f]);
    const auto it = dets_of.find(frames[f]);
    if (it == dets_of.end() || it->second->empty()) return;
    const cv::Mat rgb = load_rgb(manifest.image_file(*recs.front()));
    sizes[f] = rgb.size();
    const auto& dets = *it->second;
    det_counts[f] = static_cast<int>(dets.size());
    std::vector<GtInstance> gts;
    std::vector<const SampleRecord*> gt_records;
    for (const auto* r : recs) {
      if (!r->gt_box) continue;
      gts.push_back({from_norm(*r->gt_box, rgb.cols, rgb.rows), r->billboard_id});
      gt_records.push_back(r);
    }
    for (const auto& a : associate(dets, gts, opts.assoc_iou)) {
      const auto rec = std::find_if(gt_records.begin(), gt_records.end(),
                                    [&](const SampleRecord* r) { return r->billboard_id == a.billboard_id; });
      DetectionSample s;
      s.det_id = static_cast<int>(a.det_index);
      s.sample_id = make_sample_id(frames[f], s.det_id);
      s.record = **rec;
      s.det = dets[a.det_index];
      per_frame[f].push_back(std::move(s));
    }
  });

  std::vector<DetectionSample> candidates;
  std::map<std::string, cv::Size> size_of;
  int total_dets = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    total_dets += det_counts[f];
    size_of[frames[f]] = sizes[f];
    for (auto& s : per_frame[f]) candidates.push_back(std::move(s));
  }
  const int associated = static_cast<int>(candidates.size());
  const auto selected = select_top_frames(std::move(candidates), opts.top_n);

  // Group selected samples by frame so each full-frame embedding is computed once.
  std::vector<std::string> used_frames;
  std::map<std::string, std::vector<std::size_t>> samples_of;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    auto& v = samples_of[selected[i].record.image_path];
    if (v.empty()) used_frames.push_back(selected[i].record.image_path);
    v.push_back(i);
  }

  std::vector<RawFeatureRow> rows(selected.size());
  parallel_for(used_frames.size(), opts.jobs, [&](std::size_t f) {
    const auto& idx = samples_of.at(used_frames[f]);
    const cv::Mat rgb = load_rgb(manifest.image_file(selected[idx.front()].record));
    const Embedding full = embed(rgb, embedder, EmbeddingSource::Full);
    for (std::size_t i : idx) {
      const auto& s = selected[i];
      const Embedding crop = embed(crop_for_embedding(rgb, s.det.box), embedder, EmbeddingSource::Crop);
      RawFeatureRow& r = rows[i];
      r.sample_id = s.sample_id;
      r.billboard_id = s.record.billboard_id;
      r.driver_id = s.record.driver_id;
      r.label = s.record.gaze_label;
      r.box = to_norm(s.det.box, rgb.cols, rgb.rows);
      r.full.assign(full.values.begin(), full.values.end());
      r.crop.assign(crop.values.begin(), crop.values.end());
    }
  });

  if (stats) {
    stats->frames = static_cast<int>(frames.size());
    stats->detections = total_dets;
    stats->associated = associated;
    stats->selected = static_cast<int>(rows.size());
  }
  return rows;
}

std::vector<double> assemble_row(const EnsembleModel& model, const RawFeatureRow& row) {
  const FeatureSpec& spec = model.feature_spec;
  std::vector<double> v;
  v.reserve(spec.width());
  if (spec.use_b) v.insert(v.end(), {row.box.cx, row.box.cy, row.box.w, row.box.h});
  auto add = [&](const std::optional<PcaTransform>& pca, const std::vector<double>& e, const char* what) {
    if (!pca) throw ValidationError(std::string("model lacks the ") + what + " PCA transform");
    const auto p = pca_project(*pca, std::span<const double>(e));
    v.insert(v.end(), p.begin(), p.end());
  };
  if (spec.use_ifull) add(model.pca_full, row.full, "I_full");
  if (spec.use_icrop) add(model.pca_crop, row.crop, "I_crop");
  return v;
}

EnsembleModel train_model(const std::vector<RawFeatureRow>& rows, const TrainOptions& opts,
                          TuningReport* report) {
  opts.spec.validate();
  if (rows.empty()) throw ValidationError("no training rows");
  for (const auto& r : rows) {
    if (!r.label) throw ValidationError("training row " + r.sample_id + " has no label");
  }

  EnsembleModel shell;
  shell.feature_spec = opts.spec;
  const auto k = static_cast<std::size_t>(opts.spec.pca_k);
  if (opts.spec.use_ifull) shell.pca_full = pca_fit(embedding_matrix(rows, false), k);
  if (opts.spec.use_icrop) shell.pca_crop = pca_fit(embedding_matrix(rows, true), k);

  std::vector<FeatureRow> assembled;
  assembled.reserve(rows.size());
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    assembled.push_back({r.sample_id, r.billboard_id, r.driver_id, assemble_row(shell, r), r.label});
    ids.push_back(r.billboard_id);
  }

  const CvPlan plan = CvPlan::make(ids, opts.folds, opts.seed);
  EnsembleModel model = cv_tune(assembled, plan, opts.search, report);
  model.feature_spec = shell.feature_spec;
  model.pca_full = std::move(shell.pca_full);
  model.pca_crop = std::move(shell.pca_crop);
  model.validate();
  return model;
}

std::vector<PredictionRow> classify_rows(const EnsembleModel& model, const std::vector<RawFeatureRow>& rows) {
  model.validate();
  std::vector<PredictionRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    PredictionRow p{r.sample_id, r.billboard_id, r.driver_id, model.predict_proba(assemble_row(model, r)), {}};
    p.pred = argmax_class(p.proba);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ImageClassification> classify_image(const cv::Mat& rgb, const EnsembleModel& model,
                                                const ModelHandle& detector, const ModelHandle& embedder,
                                                const DetectorConfig& cfg) {
  model.validate();
  const auto dets = detect(rgb, detector, cfg);
  std::vector<ImageClassification> out;
  if (dets.empty()) return out;
  std::optional<Embedding> full;
  if (model.feature_spec.use_ifull) full = embed(rgb, embedder, EmbeddingSource::Full);
  for (const auto& d : dets) {
    RawFeatureRow r;
    r.box = to_norm(d.box, rgb.cols, rgb.rows);
    if (full) r.full.assign(full->values.begin(), full->values.end());
    if (model.feature_spec.use_icrop) {
      const Embedding c = embed(crop_for_embedding(rgb, d.box), embedder, EmbeddingSource::Crop);
      r.crop.assign(c.values.begin(), c.values.end());
    }
    ImageClassification ic{d, model.predict_proba(assemble_row(model, r)), {}};
    ic.pred = argmax_class(ic.proba);
    out.push_back(ic);
  }
  return out;
}

std::vector<AggregateRow> aggregate_predictions(const std::vector<PredictionRow>& preds) {
  std::map<std::string, std::vector<Proba>> groups;
  for (const auto& p : preds) groups[p.billboard_id].push_back(p.proba);
  std::vector<AggregateRow> out;
  for (auto& [id, ps] : groups) {
    AggregateRow row;
    row.billboard_id = id;
    row.count = static_cast<int>(ps.size());
    row.pred = aggregate_votes(ps);
    std::sort(ps.begin(), ps.end());
    for (const auto& p : ps) {
      for (int c = 0; c < kNumClasses; ++c) row.summed[c] += p[c];
    }
    out.push_back(row);
  }
  return out;
}

ClsEvalReport evaluate_predictions(const std::vector<PredictionRow>& preds,
                                   const std::map<std::pair<std::string, std::string>, GazeClass>& truth,
                                   bool aggregated) {
  if (preds.empty()) throw ValidationError("no predictions to evaluate");
  std::vector<GazeClass> y_true, y_pred;
  std::map<std::string, std::array<int, kNumClasses>> votes;
  for (const auto& p : preds) {
    const auto it = truth.find({frame_of_sample(p.sample_id), p.billboard_id});
    if (it == truth.end()) {
      throw ValidationError("no ground truth for " + p.sample_id + " / billboard " + p.billboard_id);
    }
    if (aggregated) {
      votes[p.billboard_id][static_cast<int>(it->second)] += 1;
    } else {
      y_true.push_back(it->second);
      y_pred.push_back(p.pred);
    }
  }
  if (aggregated) {
    for (const auto& row : aggregate_predictions(preds)) {
      const auto& v = votes.at(row.billboard_id);
      y_true.push_back(gaze_class_from_index(
          static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin())));
      y_pred.push_back(row.pred);
    }
  }
  return classification_report(std::span<const GazeClass>(y_true), std::span<const GazeClass>(y_pred));
}

std::vector<ImageEval> load_detection_eval(const std::vector<ImageDetections>& preds, const fs::path& labels_dir,
                                           const fs::path& images_dir) {
  std::error_code ec;
  if (!fs::is_directory(labels_dir, ec)) throw ValidationError("labels directory not found: " + labels_dir.string());
  if (!fs::is_directory(images_dir, ec)) throw ValidationError("images directory not found: " + images_dir.string());

  std::map<std::string, fs::path> label_of;
  for (const auto& entry : fs::recursive_directory_iterator(labels_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      label_of[stem_key(fs::relative(entry.path(), labels_dir).generic_string())] = entry.path();
    }
  }
  std::map<std::string, std::string> image_of;  // stem -> relative image path
  for (const auto& entry : fs::recursive_directory_iterator(images_dir)) {
    if (entry.is_regular_file() && is_image_ext(entry.path())) {
      const auto rel = fs::relative(entry.path(), images_dir).generic_string();
      image_of[stem_key(rel)] = rel;
    }
  }
  std::map<std::string, const std::vector<Detection>*> pred_of;
  for (const auto& p : preds) {
    if (!pred_of.emplace(stem_key(p.image), &p.dets).second) {
      throw ValidationError("detections list image stem twice: " + p.image);
    }
  }

  std::set<std::string> keys;
  for (const auto& [k, _] : label_of) keys.insert(k);
  for (const auto& [k, _] : pred_of) keys.insert(k);

  std::vector<ImageEval> out;
  for (const auto& key : keys) {
    ImageEval ev;
    const auto pit = pred_of.find(key);
    if (pit != pred_of.end()) ev.dets = *pit->second;
    const auto lit = label_of.find(key);
    if (lit != label_of.end()) {
      const GtLabelFile labels = parse_yolo_labels(lit->second);
      if (!labels.boxes.empty()) {
        const auto iit = image_of.find(key);
        if (iit == image_of.end()) throw ValidationError("no image for label file " + lit->second.string());
        const cv::Mat img = load_rgb(images_dir / iit->second);
        for (const auto& b : labels.boxes) ev.gts.push_back(from_norm(b.box, img.cols, img.rows));
      }
    }
    out.push_back(std::move(ev));
  }
  return out;
}

std::string det_report_json(const DetEvalReport& r) {
  nlohmann::ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["map50"] = r.map50;
  j["map50_95"] = r.map50_95;
  j["iou"] = r.pr_iou;
  j["ap_at_iou"] = r.ap_at_pr_iou;
  j["f1_threshold"] = r.f1_threshold;
  j["ap_per_threshold"] = r.ap_per_threshold;
  j["total_gt"] = r.total_gt;
  j["total_detections"] = r.total_dets;
  return j.dump(2) + "\n";
}

std::string cls_report_json(const ClsEvalReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["micro_f1"] = r.micro_f1;
  j["weighted_f1"] = r.weighted_f1;
  j["confusion"] = r.confusion;
  j["per_class_f1"] = r.f1;
  j["total"] = r.total;
  return j.dump(2) + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw RuntimeFailure("cannot write " + path.string());
}

}  // namespace bgz
