#include "bgz/backend.hpp"

#include <algorithm>
#include <cstring>
#include <mutex>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include "bgz/error.hpp"
#include "bgz/onnx_info.hpp"
#include "bgz/random.hpp"

namespace bgz {

void TensorSpec::validate() const {
  if (shape.empty()) throw ValidationError("tensor spec '" + name + "' has rank 0");
  const auto dynamic = std::count(shape.begin(), shape.end(), kDynamicDim);
  if (dynamic > 1) {
    throw ValidationError("tensor spec '" + name + "' has more than one dynamic dim: " +
                          shape_string(shape));
  }
  for (auto d : shape) {
    if (d == 0 || d < kDynamicDim) {
      throw ValidationError("tensor spec '" + name + "' has invalid dim: " + shape_string(shape));
    }
  }
}

bool TensorSpec::accepts(const Shape& concrete) const {
  if (concrete.size() != shape.size()) return false;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (concrete[i] <= 0) return false;
    if (shape[i] != kDynamicDim && shape[i] != concrete[i]) return false;
  }
  return true;
}

Tensor::Tensor(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size()) {
    throw ValidationError("tensor data size " + std::to_string(data.size()) +
                          " does not match shape " + shape_string(shape));
  }
}

Tensor::Tensor(Shape s, float fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ValidationError("shape has unresolved dim: " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

BackendKind parse_backend_kind(const std::string& text) {
  if (text == "stub") return BackendKind::Stub;
  if (text == "onnx" || text == "graph_runtime") return BackendKind::GraphRuntime;
  throw ValidationError("unknown backend kind: " + text);
}

std::string to_string(BackendKind kind) {
  return kind == BackendKind::Stub ? "stub" : "graph_runtime";
}

class ModelImpl {
 public:
  virtual ~ModelImpl() = default;

  std::vector<TensorSpec> inputs;
  std::vector<TensorSpec> outputs;
  BackendKind kind = BackendKind::Stub;

  virtual TensorMap run(const TensorMap& inputs) const = 0;

  void check_inputs(const TensorMap& given) const {
    if (given.size() != inputs.size()) {
      throw ValidationError("expected " + std::to_string(inputs.size()) + " input tensors, got " +
                            std::to_string(given.size()));
    }
    for (const auto& spec : inputs) {
      auto it = given.find(spec.name);
      if (it == given.end()) throw ValidationError("missing input tensor '" + spec.name + "'");
      if (!spec.accepts(it->second.shape)) {
        throw ValidationError("shape mismatch for input '" + spec.name + "': expected " +
                              shape_string(spec.shape) + ", got " + shape_string(it->second.shape));
      }
      if (shape_numel(it->second.shape) != it->second.data.size()) {
        throw ValidationError("input '" + spec.name + "' data does not match its shape");
      }
    }
  }

  void check_outputs(const TensorMap& produced) const {
    for (const auto& spec : outputs) {
      auto it = produced.find(spec.name);
      if (it == produced.end() || !spec.accepts(it->second.shape)) {
        throw RuntimeFailure("output '" + spec.name + "' does not conform to spec " +
                             shape_string(spec.shape));
      }
    }
  }
};

namespace {

class StubModel final : public ModelImpl {
 public:
  StubModel(std::vector<TensorSpec> in, std::vector<StubOutput> out, std::uint64_t seed)
      : seed_(seed) {
    kind = BackendKind::Stub;
    inputs = std::move(in);
    for (auto& o : out) {
      o.spec.validate();
      if (std::find(o.spec.shape.begin(), o.spec.shape.end(), kDynamicDim) != o.spec.shape.end()) {
        throw ValidationError("stub output '" + o.spec.name + "' must have a concrete shape");
      }
      outputs.push_back(o.spec);
      scales_.push_back(std::move(o.channel_scale));
    }
    for (const auto& s : inputs) s.validate();
    if (inputs.empty() || outputs.empty()) throw ValidationError("stub model needs inputs and outputs");
  }

  TensorMap run(const TensorMap& given) const override {
    std::uint64_t h = fnv1a(&seed_, sizeof(seed_));
    for (const auto& spec : inputs) {
      const Tensor& t = given.at(spec.name);
      h = fnv1a(spec.name, h);
      h = fnv1a(t.shape.data(), t.shape.size() * sizeof(std::int64_t), h);
      h = fnv1a(t.data.data(), t.data.size() * sizeof(float), h);
    }
    TensorMap result;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const auto& spec = outputs[k];
      SplitMix64 rng(fnv1a(spec.name, h));
      Tensor t(spec.shape);
      const auto& scale = scales_[k];
      const std::size_t channels = spec.shape.size() > 1 ? spec.shape[1] : 1;
      std::size_t inner = 1;
      for (std::size_t d = 2; d < spec.shape.size(); ++d) inner *= spec.shape[d];
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        const std::size_t c = (i / inner) % channels;
        const float s = c < scale.size() ? scale[c] : 1.0f;
        t.data[i] = static_cast<float>(rng.uniform()) * s;
      }
      result.emplace(spec.name, std::move(t));
    }
    return result;
  }

 private:
  std::uint64_t seed_;
  std::vector<std::vector<float>> scales_;
};

class OpenCvGraph final : public ModelImpl {
 public:
  explicit OpenCvGraph(cv::dnn::Net net) : net_(std::move(net)) { kind = BackendKind::GraphRuntime; }

  TensorMap run(const TensorMap& given) const override {
    std::lock_guard lock(mutex_);
    std::vector<cv::Mat> blobs;
    blobs.reserve(inputs.size());
    for (const auto& spec : inputs) {
      const Tensor& t = given.at(spec.name);
      std::vector<int> dims(t.shape.begin(), t.shape.end());
      cv::Mat blob(static_cast<int>(dims.size()), dims.data(), CV_32F);
      std::memcpy(blob.ptr<float>(), t.data.data(), t.data.size() * sizeof(float));
      net_.setInput(blob, spec.name);
      blobs.push_back(std::move(blob));
    }
    std::vector<cv::String> names;
    for (const auto& o : outputs) names.push_back(o.name);
    std::vector<cv::Mat> outs;
    try {
      net_.forward(outs, names);
    } catch (const cv::Exception& e) {
      throw RuntimeFailure(std::string("graph runtime failure: ") + e.what());
    }
    TensorMap result;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const cv::Mat& m = outs.at(k);
      if (m.type() != CV_32F) throw RuntimeFailure("graph produced a non-f32 output");
      Shape shape;
      for (int d = 0; d < m.dims; ++d) shape.push_back(m.size[d]);
      cv::Mat cont = m.isContinuous() ? m : m.clone();
      std::vector<float> data(cont.ptr<float>(), cont.ptr<float>() + cont.total());
      const Shape& declared = outputs[k].shape;
      // The runtime may squeeze unit dims; restore the declared layout.
      if (!outputs[k].accepts(shape) &&
          std::find(declared.begin(), declared.end(), kDynamicDim) == declared.end() &&
          shape_numel(declared) == data.size()) {
        shape = declared;
      }
      result.emplace(outputs[k].name, Tensor(std::move(shape), std::move(data)));
    }
    return result;
  }

 private:
  mutable cv::dnn::Net net_;
  mutable std::mutex mutex_;
};

Shape resolve_input_shape(const OnnxValueInfo& info, const std::optional<Shape>& hint) {
  Shape shape = info.shape;
  if (hint) {
    if (hint->size() != shape.size()) {
      throw ValidationError("input shape hint " + shape_string(*hint) + " has wrong rank for '" +
                            info.name + "' " + shape_string(shape));
    }
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i] != kDynamicDim && shape[i] != (*hint)[i]) {
        throw ValidationError("input shape hint " + shape_string(*hint) + " conflicts with '" +
                              info.name + "' " + shape_string(shape));
      }
      shape[i] = (*hint)[i];
    }
    return shape;
  }
  if (!shape.empty() && shape[0] == kDynamicDim) shape[0] = 1;
  if (std::find(shape.begin(), shape.end(), kDynamicDim) != shape.end()) {
    throw ValidationError("input '" + info.name + "' has dynamic dims " + shape_string(shape) +
                          "; an explicit input shape is required");
  }
  return shape;
}

}  // namespace

ModelHandle make_handle(std::shared_ptr<const ModelImpl> impl) {
  ModelHandle h;
  h.impl_ = std::move(impl);
  return h;
}

const std::vector<TensorSpec>& ModelHandle::input_specs() const {
  if (!impl_) throw ValidationError("model not loaded");
  return impl_->inputs;
}

const std::vector<TensorSpec>& ModelHandle::output_specs() const {
  if (!impl_) throw ValidationError("model not loaded");
  return impl_->outputs;
}

BackendKind ModelHandle::kind() const {
  if (!impl_) throw ValidationError("model not loaded");
  return impl_->kind;
}

TensorMap ModelHandle::forward(const TensorMap& inputs) const {
  if (!impl_) throw ValidationError("model not loaded");
  impl_->check_inputs(inputs);
  TensorMap out = impl_->run(inputs);
  impl_->check_outputs(out);
  return out;
}

Tensor ModelHandle::forward_one(const Tensor& input) const {
  const auto& specs = input_specs();
  if (specs.size() != 1) throw ValidationError("forward_one needs a single-input model");
  TensorMap in;
  in.emplace(specs[0].name, input);
  TensorMap out = forward(in);
  return std::move(out.at(output_specs()[0].name));
}

ModelHandle load_model(const std::filesystem::path& path, BackendKind kind,
                       const std::optional<Shape>& input_shape) {
  if (!std::filesystem::exists(path)) throw ValidationError("missing model file: " + path.string());
  const OnnxGraphInfo info = read_onnx_info(path);
  for (const auto& v : info.inputs) {
    if (v.elem_type != 1) throw ValidationError("unsupported dtype for input '" + v.name + "'");
  }
  for (const auto& v : info.outputs) {
    if (v.elem_type != 1) throw ValidationError("unsupported dtype for output '" + v.name + "'");
  }
  if (input_shape && info.inputs.size() != 1) {
    throw ValidationError("an input shape hint needs a single-input graph");
  }

  std::vector<TensorSpec> inputs;
  for (const auto& v : info.inputs) inputs.push_back({v.name, resolve_input_shape(v, input_shape)});
  std::vector<TensorSpec> declared_outputs;
  for (const auto& v : info.outputs) {
    TensorSpec spec{v.name, v.shape};
    for (auto& d : spec.shape) {
      if (d <= 0) d = kDynamicDim;
    }
    declared_outputs.push_back(std::move(spec));
  }

  if (kind == BackendKind::Stub) {
    std::vector<StubOutput> outs;
    for (auto& o : declared_outputs) {
      if (!o.shape.empty() && o.shape[0] == kDynamicDim) o.shape[0] = 1;
      outs.push_back({o, {}});
    }
    return make_stub(std::move(inputs), std::move(outs), 0);
  }

  cv::dnn::Net net;
  try {
    net = cv::dnn::readNetFromONNX(path.string());
  } catch (const cv::Exception& e) {
    throw ValidationError("unparseable graph: " + path.string() + ": " + e.what());
  }
  net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);

  auto impl = std::make_shared<OpenCvGraph>(std::move(net));
  impl->inputs = inputs;
  impl->outputs = declared_outputs;

  TensorMap probe;
  for (const auto& s : inputs) probe.emplace(s.name, Tensor(s.shape));
  TensorMap out = impl->run(probe);
  for (auto& spec : impl->outputs) {
    const Shape& got = out.at(spec.name).shape;
    if (!spec.accepts(got)) {
      throw ValidationError("graph output '" + spec.name + "' shape " + shape_string(got) +
                            " contradicts declared " + shape_string(spec.shape));
    }
    spec.shape = got;
  }
  for (const auto& s : impl->inputs) s.validate();
  for (const auto& s : impl->outputs) s.validate();
  return make_handle(std::move(impl));
}

ModelHandle make_stub(std::vector<TensorSpec> inputs, std::vector<StubOutput> outputs,
                      std::uint64_t seed) {
  return make_handle(std::make_shared<StubModel>(std::move(inputs), std::move(outputs), seed));
}

std::int64_t anchor_count(int input_size) {
  std::int64_t n = 0;
  for (int stride : {8, 16, 32}) {
    const std::int64_t g = input_size / stride;
    n += g * g;
  }
  return n;
}

ModelHandle make_stub_detector(int input_size, std::uint64_t seed) {
  const auto s = static_cast<float>(input_size);
  TensorSpec in{"images", {1, 3, input_size, input_size}};
  StubOutput out{{"output0", {1, 5, anchor_count(input_size)}}, {s, s, s / 4.0f, s / 4.0f, 1.0f}};
  return make_stub({in}, {out}, seed);
}

ModelHandle make_stub_embedder(std::uint64_t seed) {
  TensorSpec in{"pixel_values", {1, 3, 224, 224}};
  StubOutput out{{"last_hidden_state", {1, 257, 384}}, {}};
  return make_stub({in}, {out}, seed);
}

}  // namespace bgz
