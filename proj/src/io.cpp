#include "bgz/io.hpp"

#include <fstream>

#include "bgz/csv.hpp"
#include "bgz/dataset.hpp"
#include "bgz/error.hpp"

namespace bgz {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  return out;
}

std::vector<std::string> features_header(std::size_t width) {
  std::vector<std::string> h{"sample_id", "billboard_id", "driver_id", "label"};
  for (std::size_t i = 0; i < width; ++i) h.push_back("f" + std::to_string(i));
  return h;
}

}  // namespace

void write_detections_csv(const std::filesystem::path& path, const std::vector<ImageDetections>& images) {
  auto out = open_out(path);
  out << "image,det_id,x1,y1,x2,y2,score\n";
  for (const auto& im : images) {
    check_csv_field(im.image);
    for (std::size_t i = 0; i < im.dets.size(); ++i) {
      const auto& d = im.dets[i];
      out << im.image << ',' << i << ',' << format_fixed(d.box.x1, 6) << ',' << format_fixed(d.box.y1, 6)
          << ',' << format_fixed(d.box.x2, 6) << ',' << format_fixed(d.box.y2, 6) << ','
          << format_fixed(d.score, 6) << '\n';
    }
  }
}

std::vector<ImageDetections> read_detections_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  expect_header(t, {"image", "det_id", "x1", "y1", "x2", "y2", "score"}, path);
  std::vector<ImageDetections> out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : t.rows) {
    auto [it, inserted] = index.emplace(row[0], out.size());
    if (inserted) out.push_back({row[0], {}});
    auto& im = out[it->second];
    const auto det_id = parse_int(row[1], "det_id");
    if (det_id != static_cast<long long>(im.dets.size())) {
      throw ValidationError(path.string() + ": det_id values must count up from 0 per image (" + row[0] + ")");
    }
    Detection d;
    d.box = {parse_double(row[2], "x1"), parse_double(row[3], "y1"), parse_double(row[4], "x2"),
             parse_double(row[5], "y2")};
    d.score = parse_double(row[6], "score");
    if (!d.box.valid() || d.score < 0.0 || d.score > 1.0) {
      throw ValidationError(path.string() + ": invalid detection for " + row[0]);
    }
    im.dets.push_back(d);
  }
  return out;
}

void write_features_csv(const std::filesystem::path& path, const std::vector<RawFeatureRow>& rows) {
  auto out = open_out(path);
  const auto header = features_header(kRawFeatureWidth);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    check_csv_field(r.sample_id);
    check_csv_field(r.billboard_id);
    check_csv_field(r.driver_id);
    if (r.full.size() != 384 || r.crop.size() != 384) throw ValidationError("feature row has wrong embedding width");
    out << r.sample_id << ',' << r.billboard_id << ',' << r.driver_id << ',';
    if (r.label) out << static_cast<int>(*r.label);
    for (double v : {r.box.cx, r.box.cy, r.box.w, r.box.h}) out << ',' << format_fixed(v, 9);
    for (double v : r.full) out << ',' << format_fixed(v, 9);
    for (double v : r.crop) out << ',' << format_fixed(v, 9);
    out << '\n';
  }
}

std::vector<RawFeatureRow> read_features_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  expect_header(t, features_header(kRawFeatureWidth), path);
  std::vector<RawFeatureRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    RawFeatureRow r;
    r.sample_id = f[0];
    r.billboard_id = f[1];
    r.driver_id = f[2];
    if (!f[3].empty()) {
      r.label = parse_gaze_class(f[3]);
      if (!r.label) throw ValidationError(path.string() + ": bad label on line " + std::to_string(t.line_numbers[i]));
    }
    r.box = {parse_double(f[4], "cx"), parse_double(f[5], "cy"), parse_double(f[6], "w"), parse_double(f[7], "h")};
    r.full.reserve(384);
    r.crop.reserve(384);
    for (std::size_t k = 0; k < 384; ++k) r.full.push_back(parse_double(f[8 + k], "feature"));
    for (std::size_t k = 0; k < 384; ++k) r.crop.push_back(parse_double(f[8 + 384 + k], "feature"));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_predictions_csv(const std::filesystem::path& path, const std::vector<PredictionRow>& rows) {
  auto out = open_out(path);
  out << "sample_id,billboard_id,driver_id,p_none,p_medium,p_long,pred\n";
  for (const auto& r : rows) {
    out << r.sample_id << ',' << r.billboard_id << ',' << r.driver_id;
    for (double p : r.proba) out << ',' << format_fixed(p, 9);
    out << ',' << static_cast<int>(r.pred) << '\n';
  }
}

std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  expect_header(t, {"sample_id", "billboard_id", "driver_id", "p_none", "p_medium", "p_long", "pred"}, path);
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    PredictionRow r;
    r.sample_id = f[0];
    r.billboard_id = f[1];
    r.driver_id = f[2];
    for (int k = 0; k < kNumClasses; ++k) r.proba[k] = parse_double(f[3 + k], "probability");
    const auto pred = parse_gaze_class(f[6]);
    if (!pred) throw ValidationError(path.string() + ": bad pred on line " + std::to_string(t.line_numbers[i]));
    r.pred = *pred;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_aggregates_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  auto out = open_out(path);
  out << "billboard_id,n,sum_none,sum_medium,sum_long,pred\n";
  for (const auto& r : rows) {
    out << r.billboard_id << ',' << r.count;
    for (double p : r.summed) out << ',' << format_fixed(p, 9);
    out << ',' << static_cast<int>(r.pred) << '\n';
  }
}

std::map<std::pair<std::string, std::string>, GazeClass> read_manifest_labels(
    const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  expect_header(t, {"frame", "billboard_id", "driver_id", "gaze_class", "split"}, path);
  std::map<std::pair<std::string, std::string>, GazeClass> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const auto label = parse_gaze_class(f[3]);
    if (!label) throw ValidationError(path.string() + ": bad gaze_class on line " + std::to_string(t.line_numbers[i]));
    if (!out.emplace(std::make_pair(f[0], f[1]), *label).second) {
      throw ValidationError(path.string() + ": duplicate (frame, billboard) pair on line " +
                            std::to_string(t.line_numbers[i]));
    }
  }
  return out;
}

std::string frame_of_sample(const std::string& sample_id) {
  const auto pos = sample_id.rfind('#');
  if (pos == std::string::npos) throw ValidationError("sample id without '#': " + sample_id);
  return sample_id.substr(0, pos);
}

}  // namespace bgz
