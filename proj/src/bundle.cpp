#include "bgz/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "bgz/error.hpp"

namespace bgz {
namespace {

static_assert(std::endian::native == std::endian::little, "bundle IO assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void f64s(std::span<const double> v) {
    put<std::uint64_t>(v.size());
    for (double x : v) put<double>(x);
  }
  void matrix(const Matrix& m) {
    put<std::uint64_t>(m.rows);
    put<std::uint64_t>(m.cols);
    for (double x : m.data) put<double>(x);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::uint64_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> f64s() {
    const auto n = get<std::uint64_t>();
    need(n * sizeof(double));
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>();
    return v;
  }
  Matrix matrix() {
    const auto r = get<std::uint64_t>();
    const auto c = get<std::uint64_t>();
    if (c != 0 && r > (in_.size() - pos_) / sizeof(double) / c) fail("matrix overruns section");
    Matrix m(r, c);
    for (auto& x : m.data) x = get<double>();
    return m;
  }
  bool done() const { return pos_ == in_.size(); }

  [[noreturn]] static void fail(const std::string& what) {
    throw ValidationError("corrupt model bundle: " + what);
  }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) fail("truncated data");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string encode_pca(const PcaTransform& t) {
  Writer w;
  w.f64s(t.mean);
  w.matrix(t.components);
  w.f64s(t.explained_variance);
  return w.take();
}

PcaTransform decode_pca(std::string_view bytes) {
  Reader r(bytes);
  PcaTransform t;
  t.mean = r.f64s();
  t.components = r.matrix();
  t.explained_variance = r.f64s();
  if (!r.done()) Reader::fail("trailing bytes in pca section");
  if (t.components.cols != t.mean.size() || t.explained_variance.size() != t.components.rows) {
    Reader::fail("inconsistent pca dimensions");
  }
  return t;
}

void encode_tree(Writer& w, const RegressionTree& t) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.nodes.size()));
  for (const auto& n : t.nodes) {
    w.put<std::int32_t>(n.feature);
    w.put<double>(n.threshold);
    w.put<std::int32_t>(n.left);
    w.put<std::int32_t>(n.right);
    w.put<float>(n.value);
  }
}

RegressionTree decode_tree(Reader& r, std::size_t n_features) {
  RegressionTree t;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    TreeNode n;
    n.feature = r.get<std::int32_t>();
    n.threshold = r.get<double>();
    n.left = r.get<std::int32_t>();
    n.right = r.get<std::int32_t>();
    n.value = r.get<float>();
    t.nodes.push_back(n);
  }
  if (t.nodes.empty()) Reader::fail("empty tree");
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (n.feature < 0) continue;
    const auto lim = static_cast<int>(t.nodes.size());
    if (static_cast<std::size_t>(n.feature) >= n_features || n.left <= static_cast<int>(i) ||
        n.right <= static_cast<int>(i) || n.left >= lim || n.right >= lim) {
      Reader::fail("invalid tree node");
    }
  }
  return t;
}

std::string encode_member(const EnsembleMember& m) {
  Writer w;
  w.str(member_name(m.model));
  w.put<double>(m.weight);
  if (const auto* s = std::get_if<SoftmaxModel>(&m.model)) {
    w.put<double>(s->l2);
    w.matrix(s->weights);
    w.f64s(s->bias);
  } else {
    const auto& g = std::get<GbdtModel>(m.model);
    w.put<std::uint64_t>(g.n_features);
    w.put<double>(g.learning_rate);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.n_rounds));
    w.f64s(g.init_score);
    for (const auto& per_class : g.trees) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(per_class.size()));
      for (const auto& t : per_class) encode_tree(w, t);
    }
  }
  return w.take();
}

EnsembleMember decode_member(std::string_view bytes) {
  Reader r(bytes);
  EnsembleMember m;
  const std::string kind = r.str();
  m.weight = r.get<double>();
  if (kind == "softmax") {
    SoftmaxModel s;
    s.l2 = r.get<double>();
    s.weights = r.matrix();
    const auto bias = r.f64s();
    if (s.weights.rows != kNumClasses || bias.size() != kNumClasses) Reader::fail("softmax shape");
    std::copy(bias.begin(), bias.end(), s.bias.begin());
    m.model = std::move(s);
  } else if (kind == "gbdt") {
    GbdtModel g;
    g.n_features = r.get<std::uint64_t>();
    g.learning_rate = r.get<double>();
    g.n_rounds = static_cast<int>(r.get<std::uint32_t>());
    const auto init = r.f64s();
    if (init.size() != kNumClasses) Reader::fail("gbdt init score");
    std::copy(init.begin(), init.end(), g.init_score.begin());
    for (auto& per_class : g.trees) {
      const auto count = r.get<std::uint32_t>();
      if (count != static_cast<std::uint32_t>(g.n_rounds)) Reader::fail("gbdt tree count");
      for (std::uint32_t i = 0; i < count; ++i) per_class.push_back(decode_tree(r, g.n_features));
    }
    m.model = std::move(g);
  } else {
    Reader::fail("unknown member kind '" + kind + "'");
  }
  if (!r.done()) Reader::fail("trailing bytes in member section");
  return m;
}

}  // namespace

std::string serialize_bundle(const EnsembleModel& model) {
  model.validate();
  std::vector<std::pair<std::string, std::string>> sections;

  Writer spec;
  spec.put<std::uint32_t>(model.feature_spec.use_b);
  spec.put<std::uint32_t>(model.feature_spec.use_ifull);
  spec.put<std::uint32_t>(model.feature_spec.use_icrop);
  spec.put<std::int32_t>(model.feature_spec.pca_k);
  sections.emplace_back("spec", spec.take());

  Writer stdz;
  stdz.f64s(model.standardizer.mean);
  stdz.f64s(model.standardizer.scale);
  sections.emplace_back("standardizer", stdz.take());

  if (model.pca_full) sections.emplace_back("pca_full", encode_pca(*model.pca_full));
  if (model.pca_crop) sections.emplace_back("pca_crop", encode_pca(*model.pca_crop));

  Writer priors;
  priors.f64s(model.class_priors);
  sections.emplace_back("priors", priors.take());

  for (const auto& m : model.members) sections.emplace_back("member", encode_member(m));

  Writer out;
  std::string bytes(kBundleMagic, 5);
  out.put<std::uint32_t>(kBundleVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [tag, payload] : sections) {
    out.str(tag);
    out.put<std::uint64_t>(payload.size());
    for (char ch : payload) out.put<char>(ch);
  }
  return bytes + out.take();
}

EnsembleModel deserialize_bundle(const std::string& bytes) {
  if (bytes.size() < 5 || bytes.compare(0, 5, kBundleMagic) != 0) {
    throw ValidationError("not a model bundle (missing BGZM1 header)");
  }
  Reader r(std::string_view(bytes).substr(5));
  const auto version = r.get<std::uint32_t>();
  if (version != kBundleVersion) throw ValidationError("unsupported bundle version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();

  EnsembleModel model;
  bool have_spec = false, have_stdz = false;
  for (std::uint32_t s = 0; s < count; ++s) {
    const std::string tag = r.str();
    const auto len = r.get<std::uint64_t>();
    const std::string_view payload = r.raw(len);
    Reader p(payload);
    if (tag == "spec") {
      model.feature_spec.use_b = p.get<std::uint32_t>() != 0;
      model.feature_spec.use_ifull = p.get<std::uint32_t>() != 0;
      model.feature_spec.use_icrop = p.get<std::uint32_t>() != 0;
      model.feature_spec.pca_k = p.get<std::int32_t>();
      have_spec = true;
    } else if (tag == "standardizer") {
      model.standardizer.mean = p.f64s();
      model.standardizer.scale = p.f64s();
      have_stdz = true;
    } else if (tag == "pca_full") {
      model.pca_full = decode_pca(payload);
      continue;
    } else if (tag == "pca_crop") {
      model.pca_crop = decode_pca(payload);
      continue;
    } else if (tag == "priors") {
      const auto pr = p.f64s();
      if (pr.size() != kNumClasses) Reader::fail("priors");
      std::copy(pr.begin(), pr.end(), model.class_priors.begin());
    } else if (tag == "member") {
      model.members.push_back(decode_member(payload));
      continue;
    } else {
      Reader::fail("unknown section '" + tag + "'");
    }
    if (!p.done()) Reader::fail("trailing bytes in section '" + tag + "'");
  }
  if (!r.done()) Reader::fail("trailing bytes after sections");
  if (!have_spec || !have_stdz) Reader::fail("missing required section");
  model.validate();
  return model;
}

void save_bundle(const std::filesystem::path& path, const EnsembleModel& model) {
  const std::string bytes = serialize_bundle(model);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write model bundle: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream side(path.string() + ".txt", std::ios::trunc);
  if (!side) throw RuntimeFailure("cannot write bundle summary: " + path.string() + ".txt");
  side << bundle_summary(model);
}

EnsembleModel load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model bundle: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

std::string bundle_summary(const EnsembleModel& model) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "format: BGZM1 v" << kBundleVersion << "\n";
  os << "features: " << model.feature_spec.to_string() << " (pca_k=" << model.feature_spec.pca_k
     << ", width=" << model.feature_spec.width() << ")\n";
  auto pca_line = [&](const char* name, const std::optional<PcaTransform>& t) {
    if (!t) return;
    os << name << ": " << t->k() << " x " << t->dim() << ", explained variance";
    for (double v : t->explained_variance) os << ' ' << v;
    os << "\n";
  };
  pca_line("pca_full", model.pca_full);
  pca_line("pca_crop", model.pca_crop);
  os << "class priors (none, medium, long):";
  for (double p : model.class_priors) os << ' ' << p;
  os << "\n";
  for (const auto& m : model.members) {
    os << "member " << member_name(m.model) << " weight " << m.weight;
    if (const auto* s = std::get_if<SoftmaxModel>(&m.model)) {
      os << " l2 " << s->l2;
    } else {
      const auto& g = std::get<GbdtModel>(m.model);
      os << " rounds " << g.n_rounds << " lr " << g.learning_rate << " trees " << g.tree_count();
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace bgz
