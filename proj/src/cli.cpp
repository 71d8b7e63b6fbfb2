#include "bgz/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include <filesystem>
#include <map>
#include <optional>

#include "bgz/annotate.hpp"
#include "bgz/bundle.hpp"
#include "bgz/config.hpp"
#include "bgz/csv.hpp"
#include "bgz/error.hpp"
#include "bgz/features.hpp"
#include "bgz/image.hpp"
#include "bgz/pipeline.hpp"

namespace bgz {
namespace fs = std::filesystem;

namespace {

using Overrides = std::map<std::string, std::string>;

// Registers a flag whose value, when given, overrides config key `key`.
void config_flag(CLI::App* app, Overrides& ov, const std::string& name, const std::string& key,
                 const std::string& help) {
  app->add_option_function<std::string>(name, [&ov, key](const std::string& v) { ov[key] = v; }, help);
}

ModelHandle open_detector(const PipelineConfig& cfg) {
  if (parse_backend_kind(cfg.backend) == BackendKind::Stub) {
    return make_stub_detector(cfg.detector.input_size, cfg.stub_seed);
  }
  if (cfg.detector_model.empty()) throw ValidationError("no detector model given (--detector or detector_model)");
  const auto s = static_cast<std::int64_t>(cfg.detector.input_size);
  return load_model(cfg.detector_model, BackendKind::GraphRuntime, Shape{1, 3, s, s});
}

ModelHandle open_embedder(const PipelineConfig& cfg) {
  if (parse_backend_kind(cfg.backend) == BackendKind::Stub) return make_stub_embedder(cfg.stub_seed);
  if (cfg.embedder_model.empty()) throw ValidationError("no embedding model given (--embedder or embedder_model)");
  return load_model(cfg.embedder_model, BackendKind::GraphRuntime,
                    Shape{1, 3, kEmbedInputSize, kEmbedInputSize});
}

std::string tuning_json(const TuningReport& r) {
  nlohmann::ordered_json j;
  j["best_softmax"] = r.best_softmax;
  j["best_gbdt"] = r.best_gbdt;
  j["members"] = r.member_names;
  j["weights"] = r.weights;
  j["ensemble_cv_macro_f1"] = r.ensemble_cv_f1;
  auto& cfgs = j["configs"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.configs.size(); ++i) {
    nlohmann::ordered_json c;
    c["l2"] = r.configs[i].l2;
    c["depth"] = r.configs[i].depth;
    c["rounds"] = r.configs[i].rounds;
    c["lr"] = r.configs[i].lr;
    if (i < r.softmax_cv_f1.size()) c["softmax_cv_macro_f1"] = r.softmax_cv_f1[i];
    if (i < r.gbdt_cv_f1.size()) c["gbdt_cv_macro_f1"] = r.gbdt_cv_f1[i];
    cfgs.push_back(c);
  }
  return j.dump(2) + "\n";
}

std::string combined_report(const ClsEvalReport& per_det, const ClsEvalReport& agg, const std::string& spec,
                            const ExtractStats& train, const ExtractStats& test) {
  auto j = nlohmann::ordered_json::parse(cls_report_json(per_det));
  j["aggregated"] = nlohmann::ordered_json::parse(cls_report_json(agg));
  j["spec"] = spec;
  auto counts = [](const ExtractStats& s) {
    nlohmann::ordered_json c;
    c["frames"] = s.frames;
    c["detections"] = s.detections;
    c["associated"] = s.associated;
    c["selected"] = s.selected;
    return c;
  };
  j["train_counts"] = counts(train);
  j["test_counts"] = counts(test);
  return j.dump(2) + "\n";
}

std::string spec_tag(const FeatureSpec& s) {
  std::string t = s.to_string();
  for (char& c : t) {
    if (c == ',') c = '+';
  }
  return t;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

struct Cli {
  std::ostream& out;
  std::ostream& err;
  PipelineConfig cfg;

  void wrote(const fs::path& p) { out << "wrote " << p.generic_string() << "\n"; }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::function<const char*(const char*)>& getenv) {
  CLI::App app{"Billboard detection and driver gaze-duration classification", "bgz"};
  app.set_version_flag("--version", std::string("bgz ") + kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  std::string config_path, save_config;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--save-config", save_config, "write the effective config to this path");
  config_flag(&app, ov, "--jobs", "jobs", "worker threads (default 1)");
  config_flag(&app, ov, "--backend", "backend", "graph_runtime | stub");
  config_flag(&app, ov, "--stub-seed", "stub_seed", "seed of the stub backend");
  config_flag(&app, ov, "--seed", "seed", "seed for folds and the hyper-parameter search");
  config_flag(&app, ov, "--detector", "detector_model", "detector ONNX graph");
  config_flag(&app, ov, "--embedder", "embedder_model", "embedding ONNX graph");

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "run the detector over images");
  std::string images, out_path;
  detect_cmd->add_option("--images", images, "image file or directory")->required();
  config_flag(detect_cmd, ov, "--model", "detector_model", "detector ONNX graph");
  config_flag(detect_cmd, ov, "--conf", "conf_threshold", "confidence threshold");
  config_flag(detect_cmd, ov, "--iou", "nms_iou_threshold", "NMS IoU threshold");
  config_flag(detect_cmd, ov, "--input-size", "input_size", "square detector input size");
  config_flag(detect_cmd, ov, "--max-det", "max_detections", "detections kept per image");
  detect_cmd->add_option("--out", out_path, "detections CSV")->default_val("detections.csv");

  // extract-features
  auto* extract_cmd = app.add_subcommand("extract-features", "associate, select and embed detections");
  std::string detections_path, split_name, manifest_out;
  config_flag(extract_cmd, ov, "--dataset", "dataset", "dataset root (images/, labels/, manifest.csv)");
  config_flag(extract_cmd, ov, "--split-file", "split_file", "billboard_id,split CSV");
  config_flag(extract_cmd, ov, "--top-n", "top_n", "largest detections kept per (billboard, driver)");
  config_flag(extract_cmd, ov, "--assoc-iou", "assoc_iou", "minimum IoU for detection/billboard association");
  config_flag(extract_cmd, ov, "--conf", "conf_threshold", "confidence threshold when detecting");
  extract_cmd->add_option("--detections", detections_path, "precomputed detections CSV (else run the detector)");
  extract_cmd->add_option("--split", split_name, "train | test | all")->default_val("all");
  extract_cmd->add_option("--manifest-out", manifest_out, "write the validated manifest here");
  extract_cmd->add_option("--out", out_path, "features CSV")->default_val("features.csv");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit PCA and the tuned ensemble");
  std::string features_path, tuning_out;
  train_cmd->add_option("--features", features_path, "features CSV with labels")->required();
  config_flag(train_cmd, ov, "--spec", "spec", "feature families, e.g. B,Ifull");
  config_flag(train_cmd, ov, "--pca-k", "pca_k", "PCA components per embedding");
  config_flag(train_cmd, ov, "--folds", "folds", "grouped CV folds");
  config_flag(train_cmd, ov, "--n-configs", "n_configs", "random-search candidates");
  train_cmd->add_option("--tuning-report", tuning_out, "write search results as JSON");
  train_cmd->add_option("--out", out_path, "model bundle")->default_val("model.bgz");

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "predict gaze classes");
  std::string model_path, image_path, annotate_out;
  classify_cmd->add_option("--model", model_path, "model bundle")->required();
  auto* cls_features = classify_cmd->add_option("--features", features_path, "features CSV");
  auto* cls_image = classify_cmd->add_option("--image", image_path, "single image: detect and classify");
  cls_features->excludes(cls_image);
  config_flag(classify_cmd, ov, "--conf", "conf_threshold", "confidence threshold");
  config_flag(classify_cmd, ov, "--iou", "nms_iou_threshold", "NMS IoU threshold");
  classify_cmd->add_option("--annotate-out", annotate_out, "with --image: also write an annotated copy");
  classify_cmd->add_option("--out", out_path, "predictions CSV (with --features)")->default_val("preds.csv");

  // aggregate
  auto* aggregate_cmd = app.add_subcommand("aggregate", "per-billboard probability voting");
  std::string pred_path;
  aggregate_cmd->add_option("--pred", pred_path, "predictions CSV")->required();
  aggregate_cmd->add_option("--out", out_path, "aggregated CSV")->default_val("aggregated.csv");

  // eval-det
  auto* evaldet_cmd = app.add_subcommand("eval-det", "detection metrics");
  std::string gt_dir, iou_text, report_path;
  evaldet_cmd->add_option("--pred", pred_path, "detections CSV")->required();
  evaldet_cmd->add_option("--gt", gt_dir, "YOLO labels directory")->required();
  evaldet_cmd->add_option("--images", images, "images directory (for label-to-pixel conversion)")->required();
  evaldet_cmd->add_option("--iou", iou_text, "IoU for precision/recall, or 'range'")->default_val("0.5");
  evaldet_cmd->add_option("--report", report_path, "report JSON")->default_val("report.json");

  // eval-cls
  auto* evalcls_cmd = app.add_subcommand("eval-cls", "classification metrics");
  std::string truth_path;
  bool per_detection = false, aggregated = false;
  evalcls_cmd->add_option("--pred", pred_path, "predictions CSV")->required();
  evalcls_cmd->add_option("--truth", truth_path, "manifest CSV")->required();
  auto* pd_flag = evalcls_cmd->add_flag("--per-detection", per_detection, "score every detection (default)");
  auto* ag_flag = evalcls_cmd->add_flag("--aggregated", aggregated, "score one vote per billboard");
  pd_flag->excludes(ag_flag);
  evalcls_cmd->add_option("--report", report_path, "report JSON")->default_val("report.json");

  // annotate
  auto* annotate_cmd = app.add_subcommand("annotate", "draw detections and classes on an image");
  std::string image_name;
  annotate_cmd->add_option("--image", image_path, "image file")->required();
  annotate_cmd->add_option("--detections", detections_path, "detections CSV")->required();
  annotate_cmd->add_option("--pred", pred_path, "predictions CSV for class colors");
  annotate_cmd->add_option("--name", image_name, "image column value (default: file name)");
  annotate_cmd->add_option("--out", out_path, "output image")->required();

  // pipeline
  auto* pipeline_cmd = app.add_subcommand("pipeline", "detect, extract, train, classify, aggregate, evaluate");
  bool ablation = false;
  config_flag(pipeline_cmd, ov, "--dataset", "dataset", "dataset root");
  config_flag(pipeline_cmd, ov, "--split-file", "split_file", "billboard_id,split CSV");
  config_flag(pipeline_cmd, ov, "--spec", "spec", "feature families, e.g. B,Ifull");
  config_flag(pipeline_cmd, ov, "--folds", "folds", "grouped CV folds");
  config_flag(pipeline_cmd, ov, "--top-n", "top_n", "largest detections kept per (billboard, driver)");
  config_flag(pipeline_cmd, ov, "--out-dir", "out_dir", "output directory");
  config_flag(pipeline_cmd, ov, "--n-configs", "n_configs", "random-search candidates");
  pipeline_cmd->add_option("--detections", detections_path, "precomputed detections CSV");
  pipeline_cmd->add_flag("--ablation", ablation, "run all seven feature combinations");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  Cli cli{out, err, {}};
  try {
    if (!config_path.empty()) cli.cfg = load_config(config_path);
    if (getenv) apply_env(cli.cfg, getenv);
    for (const auto& [key, value] : ov) cli.cfg.set(key, value);
    cli.cfg.validate();
    PipelineConfig& cfg = cli.cfg;
    if (!save_config.empty()) {
      ensure_parent(save_config);
      write_text(save_config, cfg.to_json());
      cli.wrote(save_config);
    }

    if (detect_cmd->parsed()) {
      const ImageList list = list_images(images);
      const auto dets = detect_images(list, open_detector(cfg), cfg.detector, cfg.jobs);
      ensure_parent(out_path);
      write_detections_csv(out_path, dets);
      std::size_t n = 0;
      for (const auto& d : dets) n += d.dets.size();
      out << n << " detections in " << dets.size() << " images\n";
      cli.wrote(out_path);
    } else if (extract_cmd->parsed()) {
      if (cfg.dataset.empty()) throw ValidationError("no dataset root given (--dataset)");
      const Manifest manifest = build_manifest(
          cfg.dataset, cfg.split_file.empty() ? std::nullopt : std::optional<fs::path>(cfg.split_file));
      if (!manifest_out.empty()) {
        ensure_parent(manifest_out);
        write_manifest(manifest_out, manifest.records);
        cli.wrote(manifest_out);
      }
      std::vector<ImageDetections> dets;
      if (!detections_path.empty()) {
        dets = read_detections_csv(detections_path);
      } else {
        ImageList list{fs::path(cfg.dataset) / "images", {}};
        for (const auto& r : manifest.records) {
          if (list.names.empty() || list.names.back() != r.image_path) list.names.push_back(r.image_path);
        }
        dets = detect_images(list, open_detector(cfg), cfg.detector, cfg.jobs);
      }
      ExtractOptions opts;
      if (split_name != "all") opts.split = parse_split(split_name);
      opts.assoc_iou = cfg.assoc_iou;
      opts.top_n = cfg.top_n;
      opts.jobs = cfg.jobs;
      ExtractStats stats;
      const auto rows = extract_features(manifest, dets, open_embedder(cfg), opts, &stats);
      ensure_parent(out_path);
      write_features_csv(out_path, rows);
      out << stats.frames << " frames, " << stats.detections << " detections, " << stats.associated
          << " associated, " << stats.selected << " selected\n";
      cli.wrote(out_path);
    } else if (train_cmd->parsed()) {
      const auto rows = read_features_csv(features_path);
      TrainOptions opts{cfg.feature_spec(), cfg.folds, cfg.seed, cfg.search_space()};
      TuningReport rep;
      const EnsembleModel model = train_model(rows, opts, &rep);
      ensure_parent(out_path);
      save_bundle(out_path, model);
      out << "ensemble cv macro F1 " << format_fixed(rep.ensemble_cv_f1, 6) << "\n";
      cli.wrote(out_path);
      cli.wrote(out_path + ".txt");
      if (!tuning_out.empty()) {
        ensure_parent(tuning_out);
        write_text(tuning_out, tuning_json(rep));
        cli.wrote(tuning_out);
      }
    } else if (classify_cmd->parsed()) {
      const EnsembleModel model = load_bundle(model_path);
      if (!image_path.empty()) {
        const cv::Mat rgb = load_rgb(image_path);
        const auto results = classify_image(rgb, model, open_detector(cfg), open_embedder(cfg), cfg.detector);
        out << "det_id,x1,y1,x2,y2,score,class,p_none,p_medium,p_long\n";
        std::vector<Annotation> ann;
        for (std::size_t i = 0; i < results.size(); ++i) {
          const auto& r = results[i];
          out << i << ',' << format_fixed(r.det.box.x1, 6) << ',' << format_fixed(r.det.box.y1, 6) << ','
              << format_fixed(r.det.box.x2, 6) << ',' << format_fixed(r.det.box.y2, 6) << ','
              << format_fixed(r.det.score, 6) << ',' << to_string(r.pred);
          for (double p : r.proba) out << ',' << format_fixed(p, 6);
          out << '\n';
          ann.push_back({r.det, r.pred});
        }
        if (!annotate_out.empty()) {
          ensure_parent(annotate_out);
          save_rgb(annotate_out, annotate(rgb, ann));
          cli.wrote(annotate_out);
        }
      } else if (!features_path.empty()) {
        const auto preds = classify_rows(model, read_features_csv(features_path));
        ensure_parent(out_path);
        write_predictions_csv(out_path, preds);
        cli.wrote(out_path);
      } else {
        throw ValidationError("classify needs --features or --image");
      }
    } else if (aggregate_cmd->parsed()) {
      const auto rows = aggregate_predictions(read_predictions_csv(pred_path));
      ensure_parent(out_path);
      write_aggregates_csv(out_path, rows);
      cli.wrote(out_path);
    } else if (evaldet_cmd->parsed()) {
      double pr_iou = 0.5;
      if (iou_text != "range") pr_iou = parse_double(iou_text, "--iou");
      const auto evals = load_detection_eval(read_detections_csv(pred_path), gt_dir, images);
      const DetEvalReport rep = evaluate_detections(evals, pr_iou);
      ensure_parent(report_path);
      write_text(report_path, det_report_json(rep));
      out << "precision " << format_fixed(rep.precision, 6) << " recall " << format_fixed(rep.recall, 6)
          << " mAP50 " << format_fixed(rep.map50, 6) << " mAP50-95 " << format_fixed(rep.map50_95, 6) << "\n";
      cli.wrote(report_path);
    } else if (evalcls_cmd->parsed()) {
      const ClsEvalReport rep =
          evaluate_predictions(read_predictions_csv(pred_path), read_manifest_labels(truth_path), aggregated);
      ensure_parent(report_path);
      write_text(report_path, cls_report_json(rep));
      out << (aggregated ? "aggregated" : "per-detection") << " accuracy " << format_fixed(rep.accuracy, 6)
          << " macro F1 " << format_fixed(rep.macro_f1, 6) << "\n";
      cli.wrote(report_path);
    } else if (annotate_cmd->parsed()) {
      const cv::Mat rgb = load_rgb(image_path);
      if (image_name.empty()) image_name = fs::path(image_path).filename().generic_string();
      std::map<std::string, GazeClass> cls;
      if (!pred_path.empty()) {
        for (const auto& p : read_predictions_csv(pred_path)) cls[p.sample_id] = p.pred;
      }
      std::vector<Annotation> ann;
      for (const auto& im : read_detections_csv(detections_path)) {
        if (im.image != image_name) continue;
        for (std::size_t i = 0; i < im.dets.size(); ++i) {
          Annotation a{im.dets[i], std::nullopt};
          const auto it = cls.find(make_sample_id(im.image, static_cast<int>(i)));
          if (it != cls.end()) a.gaze = it->second;
          ann.push_back(a);
        }
      }
      ensure_parent(out_path);
      save_rgb(out_path, annotate(rgb, ann));
      out << ann.size() << " boxes drawn\n";
      cli.wrote(out_path);
    } else if (pipeline_cmd->parsed()) {
      if (cfg.dataset.empty()) throw ValidationError("no dataset root given (--dataset)");
      const fs::path dir = cfg.out_dir;
      ensure_dir(dir);
      write_text(dir / "config.effective.json", cfg.to_json());
      cli.wrote(dir / "config.effective.json");

      const Manifest manifest = build_manifest(
          cfg.dataset, cfg.split_file.empty() ? std::nullopt : std::optional<fs::path>(cfg.split_file));
      write_manifest(dir / "manifest.validated.csv", manifest.records);
      cli.wrote(dir / "manifest.validated.csv");
      out << manifest.frames << " frames, " << manifest.train_billboards << " train / "
          << manifest.test_billboards << " test billboards\n";

      std::vector<ImageDetections> dets;
      if (!detections_path.empty()) {
        dets = read_detections_csv(detections_path);
      } else {
        ImageList list{fs::path(cfg.dataset) / "images", {}};
        for (const auto& r : manifest.records) {
          if (list.names.empty() || list.names.back() != r.image_path) list.names.push_back(r.image_path);
        }
        dets = detect_images(list, open_detector(cfg), cfg.detector, cfg.jobs);
        write_detections_csv(dir / "detections.csv", dets);
        cli.wrote(dir / "detections.csv");
      }

      const ModelHandle embedder = open_embedder(cfg);
      ExtractOptions opts;
      opts.assoc_iou = cfg.assoc_iou;
      opts.top_n = cfg.top_n;
      opts.jobs = cfg.jobs;
      ExtractStats train_stats, test_stats;
      opts.split = Split::Train;
      write_features_csv(dir / "features_train.csv", extract_features(manifest, dets, embedder, opts, &train_stats));
      cli.wrote(dir / "features_train.csv");
      opts.split = Split::Test;
      write_features_csv(dir / "features_test.csv", extract_features(manifest, dets, embedder, opts, &test_stats));
      cli.wrote(dir / "features_test.csv");
      // Re-read so training sees exactly what the CSV holds, as `train` would.
      const auto train_rows = read_features_csv(dir / "features_train.csv");
      const auto test_rows = read_features_csv(dir / "features_test.csv");
      const auto truth = read_manifest_labels(fs::path(cfg.dataset) / "manifest.csv");

      auto run_spec = [&](const FeatureSpec& spec, const fs::path& sub) {
        ensure_dir(sub);
        TuningReport rep;
        const EnsembleModel model =
            train_model(train_rows, TrainOptions{spec, cfg.folds, cfg.seed, cfg.search_space()}, &rep);
        save_bundle(sub / "model.bgz", model);
        cli.wrote(sub / "model.bgz");
        cli.wrote(sub / "model.bgz.txt");
        write_text(sub / "tuning.json", tuning_json(rep));
        cli.wrote(sub / "tuning.json");
        write_predictions_csv(sub / "preds.csv", classify_rows(model, test_rows));
        cli.wrote(sub / "preds.csv");
        // downstream steps read the file back, exactly as the standalone commands would
        const auto preds = read_predictions_csv(sub / "preds.csv");
        write_aggregates_csv(sub / "aggregated.csv", aggregate_predictions(preds));
        cli.wrote(sub / "aggregated.csv");
        const auto per_det = evaluate_predictions(preds, truth, false);
        const auto agg = evaluate_predictions(preds, truth, true);
        write_text(sub / "report.json", combined_report(per_det, agg, spec.to_string(), train_stats, test_stats));
        cli.wrote(sub / "report.json");
        out << spec.to_string() << ": accuracy " << format_fixed(per_det.accuracy, 6) << " macro F1 "
            << format_fixed(per_det.macro_f1, 6) << " | aggregated accuracy " << format_fixed(agg.accuracy, 6)
            << " macro F1 " << format_fixed(agg.macro_f1, 6) << "\n";
        return std::pair{per_det, agg};
      };

      if (ablation) {
        std::string table = "spec,accuracy,macro_f1,micro_f1,weighted_f1,agg_accuracy,agg_macro_f1\n";
        for (const auto& spec : all_feature_specs(cfg.pca_k)) {
          const auto [d, a] = run_spec(spec, dir / "ablation" / spec_tag(spec));
          table += spec_tag(spec) + "," + format_fixed(d.accuracy, 6) + "," + format_fixed(d.macro_f1, 6) + "," +
                   format_fixed(d.micro_f1, 6) + "," + format_fixed(d.weighted_f1, 6) + "," +
                   format_fixed(a.accuracy, 6) + "," + format_fixed(a.macro_f1, 6) + "\n";
        }
        write_text(dir / "ablation.csv", table);
        cli.wrote(dir / "ablation.csv");
      } else {
        run_spec(cfg.feature_spec(), dir);
      }
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    err << "runtime error: " << e.what() << "\n";
    return 2;
  } catch (const cv::Exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace bgz
