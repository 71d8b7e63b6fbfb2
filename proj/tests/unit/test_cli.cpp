#include <doctest.h>

#include <map>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "bgz/annotate.hpp"
#include "bgz/cli.hpp"
#include "bgz/config.hpp"
#include "bgz/error.hpp"
#include "bgz/image.hpp"
#include "test_util.hpp"

using namespace bgz;
using json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err, [&env](const char* key) -> const char* {
    auto it = env.find(key);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fixture(const std::string& rel = "") {
  return (test::data_dir() / "fixture" / rel).string();
}

// Numbers within 1e-9, everything else exact.
bool json_close(const json& a, const json& b, const std::string& at = "$") {
  if (a.is_number() && b.is_number()) {
    if (std::abs(a.get<double>() - b.get<double>()) <= 1e-9) return true;
    MESSAGE(at << ": " << a << " vs " << b);
    return false;
  }
  if (a.type() != b.type()) {
    MESSAGE(at << ": type differs");
    return false;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) {
      MESSAGE(at << ": key count differs");
      return false;
    }
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key()) || !json_close(it.value(), b.at(it.key()), at + "." + it.key())) return false;
    }
    return true;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!json_close(a[i], b[i], at + "[" + std::to_string(i) + "]")) return false;
    }
    return true;
  }
  return a == b;
}

// One stub pipeline run on the fixture shared by several cases.
const std::filesystem::path& pipeline_dir() {
  static test::TempDir dir("pipe");
  static bool done = false;
  if (!done) {
    const Run r = run({"--backend", "stub", "pipeline", "--dataset", fixture(), "--split-file", fixture("split.csv"),
                       "--detections", fixture("detections.csv"), "--out-dir", dir.path().string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    done = true;
  }
  return dir.path();
}

}  // namespace

TEST_CASE("version, help and argument errors") {
  Run r = run({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find(std::string("bgz ") + kVersion) != std::string::npos);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"detect"}).code == 1);  // --images is required
  CHECK(run({"detect", "--images", fixture("images"), "--bogus"}).code == 1);
  CHECK(run({"--jobs", "many", "detect", "--images", fixture("images")}).code == 1);
  CHECK(run({"--jobs", "0", "detect", "--images", fixture("images")}).code == 1);
  CHECK(run({"eval-cls", "--pred", "a", "--truth", "b", "--per-detection", "--aggregated"}).code == 1);
}

TEST_CASE("validation failures exit 1, runtime failures exit 2") {
  test::TempDir dir;
  CHECK(run({"detect", "--images", (dir / "nothing-here").string()}).code == 1);
  test::spit(dir / "garbage.onnx", "not a graph");
  CHECK(run({"detect", "--images", fixture("images/f0000.png"), "--model", (dir / "garbage.onnx").string()}).code ==
        1);
  test::spit(dir / "cfg.json", R"({"no_such_key": 1})");
  CHECK(run({"--config", (dir / "cfg.json").string(), "detect", "--images", fixture("images/f0000.png")}).code == 1);

  // an output path below a regular file cannot be created
  test::spit(dir / "blocker", "");
  const Run r = run({"--backend", "stub", "detect", "--images", fixture("images/f0000.png"), "--out",
                     (dir / "blocker/sub/d.csv").string()});
  CHECK(r.code == 2);
  CHECK(!r.err.empty());
}

TEST_CASE("config defaults, JSON round trip and key errors") {
  const PipelineConfig def;
  CHECK_NOTHROW(def.validate());
  CHECK(def.detector.input_size == 640);
  CHECK(def.spec == "B,Ifull");
  CHECK(PipelineConfig::from_json(def.to_json()) == def);

  PipelineConfig c;
  c.set("conf_threshold", "0.4");
  c.set("gbdt_depths", "2,4");
  c.set("backend", "stub");
  const PipelineConfig back = PipelineConfig::from_json(c.to_json());
  CHECK(back.detector.conf_threshold == 0.4);
  CHECK(back.search.depths == std::vector<int>{2, 4});
  CHECK(back == c);

  CHECK_THROWS_AS(c.set("nope", "1"), ValidationError);
  CHECK_THROWS_AS(c.set("folds", "x"), ValidationError);
  CHECK_THROWS_AS(PipelineConfig::from_json(R"({"folds": "five"})"), ValidationError);
  CHECK_THROWS_AS(PipelineConfig::from_json("[1,2]"), ValidationError);
  c.set("folds", "1");
  CHECK_THROWS_AS(c.validate(), ValidationError);
  for (const auto& key : PipelineConfig::keys()) CHECK(json::parse(def.to_json()).contains(key));
}

TEST_CASE("precedence: defaults < file < environment < flags") {
  test::TempDir dir;
  test::spit(dir / "cfg.json", R"({"conf_threshold": 0.3, "top_n": 7, "folds": 4})");
  const auto saved = (dir / "eff.json").string();
  const std::vector<std::string> base{"--config", (dir / "cfg.json").string(), "--save-config", saved,
                                      "--backend", "stub", "detect", "--images", fixture("images/f0000.png"),
                                      "--out", (dir / "d.csv").string()};

  REQUIRE(run(base).code == 0);
  auto eff = json::parse(test::slurp(saved));
  CHECK(eff["conf_threshold"] == 0.3);
  CHECK(eff["top_n"] == 7);
  CHECK(eff["nms_iou_threshold"] == 0.7);

  REQUIRE(run(base, {{"BGZ_CONF_THRESHOLD", "0.35"}, {"BGZ_FOLDS", "3"}}).code == 0);
  eff = json::parse(test::slurp(saved));
  CHECK(eff["conf_threshold"] == 0.35);
  CHECK(eff["folds"] == 3);

  auto with_flag = base;
  with_flag.push_back("--conf");
  with_flag.push_back("0.45");
  REQUIRE(run(with_flag, {{"BGZ_CONF_THRESHOLD", "0.35"}}).code == 0);
  eff = json::parse(test::slurp(saved));
  CHECK(eff["conf_threshold"] == 0.45);

  CHECK(run(base, {{"BGZ_CONF_THRESHOLD", "high"}}).code == 1);

  // the saved file is itself a valid config
  CHECK(PipelineConfig::from_json(test::slurp(saved)).detector.conf_threshold == 0.45);
}

TEST_CASE("detect with the stub backend matches the golden CSV") {
  test::TempDir dir;
  const auto out = (dir / "d.csv").string();
  const Run r = run({"--backend", "stub", "detect", "--input-size", "64", "--images", fixture("images/f0000.png"),
                     "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("wrote ") != std::string::npos);
  CHECK(test::slurp(out) == test::slurp(test::data_dir() / "golden/stub_detect.csv"));
}

TEST_CASE("detect output does not depend on --jobs") {
  test::TempDir dir;
  const auto one = (dir / "1.csv").string();
  const auto four = (dir / "4.csv").string();
  REQUIRE(run({"--backend", "stub", "--jobs", "1", "detect", "--input-size", "64", "--images", fixture("images"),
               "--out", one})
              .code == 0);
  REQUIRE(run({"--backend", "stub", "--jobs", "4", "detect", "--input-size", "64", "--images", fixture("images"),
               "--out", four})
              .code == 0);
  CHECK(test::slurp(one) == test::slurp(four));
}

TEST_CASE("pipeline report matches the stored golden") {
  const auto& dir = pipeline_dir();
  for (const char* f : {"config.effective.json", "manifest.validated.csv", "features_train.csv",
                        "features_test.csv", "model.bgz", "model.bgz.txt", "tuning.json", "preds.csv",
                        "aggregated.csv", "report.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  }
  const json got = json::parse(test::slurp(dir / "report.json"));
  const json want = json::parse(test::slurp(test::data_dir() / "golden/pipeline_report.json"));
  CHECK(json_close(got, want));
  for (const char* k : {"accuracy", "macro_f1", "micro_f1", "weighted_f1", "confusion"}) {
    CHECK(got.contains(k));
    CHECK(got["aggregated"].contains(k));
  }
  CHECK(test::slurp(dir / "manifest.validated.csv").rfind("# validated=1\n", 0) == 0);
  CHECK(test::slurp(dir / "model.bgz").rfind("BGZM1", 0) == 0);
}

TEST_CASE("aggregate and eval-cls on pipeline outputs") {
  const auto& dir = pipeline_dir();
  test::TempDir tmp;
  const auto agg = (tmp / "agg.csv").string();
  REQUIRE(run({"aggregate", "--pred", (dir / "preds.csv").string(), "--out", agg}).code == 0);
  CHECK(test::slurp(agg) == test::slurp(dir / "aggregated.csv"));

  const auto per = (tmp / "per.json").string();
  REQUIRE(run({"eval-cls", "--pred", (dir / "preds.csv").string(), "--truth", fixture("manifest.csv"),
               "--per-detection", "--report", per})
              .code == 0);
  const json a = json::parse(test::slurp(per));
  const json golden = json::parse(test::slurp(test::data_dir() / "golden/pipeline_report.json"));
  CHECK(a["accuracy"].get<double>() == doctest::Approx(golden["accuracy"].get<double>()));
  CHECK(a["confusion"] == golden["confusion"]);

  const auto ag = (tmp / "ag.json").string();
  REQUIRE(run({"eval-cls", "--pred", (dir / "preds.csv").string(), "--truth", fixture("manifest.csv"),
               "--aggregated", "--report", ag})
              .code == 0);
  CHECK(json::parse(test::slurp(ag))["confusion"] == golden["aggregated"]["confusion"]);
}

TEST_CASE("train and classify from the command line") {
  const auto& dir = pipeline_dir();
  test::TempDir tmp;
  const auto model = (tmp / "m.bgz").string();
  REQUIRE(run({"--backend", "stub", "train", "--features", (dir / "features_train.csv").string(), "--spec", "B",
               "--n-configs", "2", "--out", model, "--tuning-report", (tmp / "t.json").string()})
              .code == 0);
  CHECK(std::filesystem::exists(model + ".txt"));
  CHECK(json::parse(test::slurp(tmp / "t.json")).is_object());

  const auto preds = (tmp / "p.csv").string();
  REQUIRE(run({"--backend", "stub", "classify", "--model", model, "--features",
               (dir / "features_test.csv").string(), "--out", preds})
              .code == 0);
  CHECK(test::slurp(preds).rfind("sample_id,billboard_id,driver_id,p_none,p_medium,p_long,pred\n", 0) == 0);

  const auto ann = (tmp / "a.png").string();
  const Run r = run({"--backend", "stub", "classify", "--model", model, "--image", fixture("images/f0135.png"),
                     "--conf", "0.5", "--annotate-out", ann});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("det_id,x1,y1,x2,y2,score,class,p_none,p_medium,p_long\n", 0) == 0);
  CHECK(std::filesystem::exists(ann));

  CHECK(run({"classify", "--model", (tmp / "missing.bgz").string(), "--features", "x.csv"}).code == 1);
  // training rows without labels are rejected
  std::istringstream in(test::slurp(dir / "features_test.csv"));
  std::string unlabeled, line;
  for (int n = 0; std::getline(in, line); ++n) {
    if (n > 0) {
      std::size_t p = 0;
      for (int c = 0; c < 3; ++c) p = line.find(',', p) + 1;
      line.erase(p, line.find(',', p) - p);
    }
    unlabeled += line + "\n";
  }
  test::spit(tmp / "unlabeled.csv", unlabeled);
  CHECK(run({"--backend", "stub", "train", "--features", (tmp / "unlabeled.csv").string(), "--out", model}).code == 1);
}

TEST_CASE("eval-det on the fixture detections") {
  test::TempDir tmp;
  const auto rep = (tmp / "r.json").string();
  const Run r = run({"eval-det", "--pred", fixture("detections.csv"), "--gt", fixture("labels"), "--images",
                     fixture("images"), "--report", rep});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json j = json::parse(test::slurp(rep));
  for (const char* k : {"precision", "recall", "map50", "map50_95"}) {
    REQUIRE(j.contains(k));
    CHECK(j[k].get<double>() >= 0.0);
    CHECK(j[k].get<double>() <= 1.0);
  }
  CHECK(j["map50"].get<double>() >= j["map50_95"].get<double>());
  CHECK(run({"eval-det", "--pred", fixture("detections.csv"), "--gt", fixture("labels"), "--images",
             fixture("images"), "--iou", "range", "--report", rep})
            .code == 0);
  CHECK(run({"eval-det", "--pred", fixture("detections.csv"), "--gt", fixture("labels"), "--images",
             fixture("images"), "--iou", "1.7", "--report", rep})
            .code == 1);
}

TEST_CASE("annotate leaves an image untouched without detections") {
  test::TempDir tmp;
  test::spit(tmp / "d.csv", "image,det_id,x1,y1,x2,y2,score\nother.png,0,1,1,5,5,0.9\n");
  const auto out = (tmp / "a.png").string();
  REQUIRE(run({"annotate", "--image", fixture("images/f0000.png"), "--detections", (tmp / "d.csv").string(),
               "--out", out})
              .code == 0);
  const cv::Mat a = cv::imread(fixture("images/f0000.png"));
  const cv::Mat b = cv::imread(out);
  CHECK(cv::norm(a, b, cv::NORM_INF) == 0.0);
}

TEST_CASE("annotate changes pixels only inside the box outline and caption") {
  const cv::Mat img = load_rgb(test::data_dir() / "fixture/images/f0005.png");
  const Annotation ann{Detection{{40.3, 50.2, 90.7, 80.9}, 0.77}, GazeClass::Long};
  const cv::Mat out = annotate(img, {ann});
  const cv::Rect cap = caption_rect(ann, img.size());
  const cv::Rect box(40 - 1, 50 - 1, 91 - 40 + 2, 81 - 50 + 2);  // thickness 2 spills one pixel outward
  int changed = 0;
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      if (img.at<cv::Vec3b>(y, x) == out.at<cv::Vec3b>(y, x)) continue;
      ++changed;
      const cv::Point p(x, y);
      const bool on_outline = box.contains(p) && !cv::Rect(box.x + 3, box.y + 3, box.width - 6, box.height - 6).contains(p);
      CHECK_MESSAGE((on_outline || cap.contains(p)), "pixel " << x << "," << y);
    }
  }
  CHECK(changed > 0);
  CHECK(out.at<cv::Vec3b>(65, 40) == cv::Vec3b(230, 0, 0));
  CHECK(caption_text(ann) == "long 0.77");
  CHECK(caption_text({Detection{{0, 0, 1, 1}, 0.5}, std::nullopt}) == "billboard 0.50");
}

TEST_CASE("annotate output matches the golden PNG pixel for pixel") {
  test::TempDir tmp;
  const auto out = (tmp / "a.png").string();
  REQUIRE(run({"annotate", "--image", fixture("images/f0135.png"), "--detections", fixture("detections.csv"),
               "--pred", (test::data_dir() / "golden/annotate_preds.csv").string(), "--out", out})
              .code == 0);
  const cv::Mat got = cv::imread(out, cv::IMREAD_UNCHANGED);
  const cv::Mat want = cv::imread((test::data_dir() / "golden/annotate_f0135.png").string(), cv::IMREAD_UNCHANGED);
  REQUIRE(got.size() == want.size());
  CHECK(cv::norm(got, want, cv::NORM_INF) == 0.0);
}
