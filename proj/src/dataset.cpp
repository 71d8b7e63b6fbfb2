#include "bgz/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "bgz/csv.hpp"
#include "bgz/error.hpp"

namespace bgz {

GtLabelFile parse_yolo_text(const std::string& text, const std::string& source) {
  GtLabelFile out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + " of " + source;
    if (tok.size() != 5) throw ValidationError("wrong number of columns, " + where);
    double v[5];
    for (int i = 0; i < 5; ++i) {
      try {
        v[i] = parse_double(tok[i], "label value");
      } catch (const ValidationError&) {
        throw ValidationError("malformed value, " + where);
      }
    }
    if (v[0] != 0.0) throw ValidationError("class id must be 0, " + where);
    for (int i = 1; i < 5; ++i) {
      if (v[i] < 0.0 || v[i] > 1.0) throw ValidationError("value out of range, " + where);
    }
    if (v[3] <= 0.0 || v[4] <= 0.0) throw ValidationError("degenerate box, " + where);
    out.boxes.push_back({0, NormBBox{v[1], v[2], v[3], v[4]}});
  }
  return out;
}

GtLabelFile parse_yolo_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open label file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_yolo_text(ss.str(), path.string());
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw ValidationError("split must be 'train' or 'test', got '" + text + "'");
}

std::filesystem::path Manifest::image_file(const SampleRecord& r) const {
  return root / "images" / r.image_path;
}

Manifest build_manifest(const std::filesystem::path& root,
                        const std::optional<std::filesystem::path>& split_file) {
  const auto manifest_path = root / "manifest.csv";
  const CsvTable table = read_csv(manifest_path);
  expect_header(table, {"frame", "billboard_id", "driver_id", "gaze_class", "split"}, manifest_path);

  Manifest m;
  m.root = root;
  std::map<std::string, std::vector<std::size_t>> by_frame;  // file order within a frame
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = manifest_path.string() + ", line " + std::to_string(table.line_numbers[i]);
    SampleRecord r;
    r.image_path = row[0];
    r.billboard_id = row[1];
    r.driver_id = row[2];
    if (r.image_path.empty() || r.billboard_id.empty()) throw ValidationError("empty frame or billboard id, " + where);
    const auto label = parse_gaze_class(row[3]);
    if (!label) throw ValidationError("gaze_class must be 0, 1 or 2, " + where);
    r.gaze_label = *label;
    r.split = parse_split(row[4]);
    if (!seen.insert({r.image_path, r.billboard_id}).second) {
      throw ValidationError("duplicate (frame, billboard) pair " + r.image_path + " / " + r.billboard_id + ", " + where);
    }
    if (!std::filesystem::exists(root / "images" / r.image_path)) {
      throw ValidationError("missing image file: " + (root / "images" / r.image_path).string());
    }
    auto& slots = by_frame[r.image_path];
    r.frame_slot = static_cast<int>(slots.size());
    slots.push_back(m.records.size());
    m.records.push_back(std::move(r));
  }

  for (const auto& [frame, idx] : by_frame) {
    const auto label_path = root / "labels" / std::filesystem::path(frame).replace_extension(".txt");
    if (!std::filesystem::exists(label_path)) {
      m.missing_labels += static_cast<int>(idx.size());
      continue;
    }
    const GtLabelFile labels = parse_yolo_labels(label_path);
    if (labels.boxes.size() != idx.size()) {
      throw ValidationError("label/metadata disagreement for frame " + frame + ": " +
                            std::to_string(labels.boxes.size()) + " label boxes vs " +
                            std::to_string(idx.size()) + " manifest rows");
    }
    for (std::size_t k = 0; k < idx.size(); ++k) m.records[idx[k]].gt_box = labels.boxes[k].box;
  }
  m.frames = static_cast<int>(by_frame.size());

  std::map<std::string, Split> split_of;
  for (const auto& r : m.records) {
    auto [it, inserted] = split_of.emplace(r.billboard_id, r.split);
    if (!inserted && it->second != r.split) {
      throw ValidationError("billboard " + r.billboard_id + " appears in both train and test splits");
    }
  }
  if (split_file) {
    const CsvTable st = read_csv(*split_file);
    expect_header(st, {"billboard_id", "split"}, *split_file);
    for (const auto& row : st.rows) {
      auto it = split_of.find(row[0]);
      if (it == split_of.end()) throw ValidationError("unknown billboard_id in split file: " + row[0]);
      if (it->second != parse_split(row[1])) {
        throw ValidationError("label/metadata disagreement: split file puts billboard " + row[0] + " in " + row[1]);
      }
    }
  }
  for (const auto& [id, s] : split_of) (s == Split::Train ? m.train_billboards : m.test_billboards) += 1;

  std::sort(m.records.begin(), m.records.end(), [](const SampleRecord& a, const SampleRecord& b) {
    return std::tie(a.image_path, a.billboard_id) < std::tie(b.image_path, b.billboard_id);
  });
  return m;
}

void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  std::vector<const SampleRecord*> order;
  for (const auto& r : records) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const SampleRecord* a, const SampleRecord* b) {
    return std::tie(a->image_path, a->frame_slot) < std::tie(b->image_path, b->frame_slot);
  });
  out << "# validated=1\n" << kManifestHeader << "\n";
  for (const SampleRecord* p : order) {
    const SampleRecord& r = *p;
    out << r.image_path << ',' << r.billboard_id << ',' << r.driver_id << ','
        << static_cast<int>(r.gaze_label) << ',' << to_string(r.split) << "\n";
  }
}

std::vector<Association> associate(std::span<const Detection> dets, std::span<const GtInstance> gts,
                                   double iou_min) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> taken(gts.size(), false);
  std::vector<Association> out;
  for (std::size_t d : order) {
    int best = -1;
    double best_iou = iou_min;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[d].box, gts[g].box);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      out.push_back({d, gts[best].billboard_id});
    }
  }
  return out;
}

std::string make_sample_id(const std::string& image_path, int det_id) {
  return image_path + "#" + std::to_string(det_id);
}

std::vector<DetectionSample> select_top_frames(std::vector<DetectionSample> samples, int n) {
  if (n < 1) throw ValidationError("select_top_frames: n must be positive");
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    groups[{samples[i].record.billboard_id, samples[i].record.driver_id}].push_back(i);
  }
  std::vector<DetectionSample> out;
  for (auto& [key, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double aa = samples[a].det.box.area();
      const double ab = samples[b].det.box.area();
      if (aa != ab) return aa > ab;
      if (samples[a].record.image_path != samples[b].record.image_path) {
        return samples[a].record.image_path < samples[b].record.image_path;
      }
      return samples[a].sample_id < samples[b].sample_id;
    });
    const std::size_t keep = std::min<std::size_t>(idx.size(), static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < keep; ++k) out.push_back(std::move(samples[idx[k]]));
  }
  std::sort(out.begin(), out.end(),
            [](const DetectionSample& a, const DetectionSample& b) { return a.sample_id < b.sample_id; });
  return out;
}

}  // namespace bgz
