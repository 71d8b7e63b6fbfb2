#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bgz {

using Shape = std::vector<std::int64_t>;

inline constexpr std::int64_t kDynamicDim = -1;

/// Named f32 tensor signature; a dimension of -1 is resolved at run time.
struct TensorSpec {
  std::string name;
  Shape shape;

  // rank >= 1 and at most one dynamic dimension
  void validate() const;
  bool accepts(const Shape& concrete) const;

  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<float> d);
  explicit Tensor(Shape s, float fill = 0.0f);

  std::size_t numel() const { return data.size(); }
};

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

using TensorMap = std::map<std::string, Tensor>;

enum class BackendKind { GraphRuntime, Stub };

BackendKind parse_backend_kind(const std::string& text);
std::string to_string(BackendKind kind);

// Per-output affine applied to the stub's uniform [0,1) draws along axis 1
// (channel axis): value * scale[c]. Missing entries mean 1.
struct StubOutput {
  TensorSpec spec;
  std::vector<float> channel_scale;
};

class ModelImpl;

/// Opaque tensor function: either a serialized graph executed by the graph
/// runtime or a seeded stub. Copies share the underlying model; forward() is
/// safe to call from several threads.
class ModelHandle {
 public:
  ModelHandle() = default;

  const std::vector<TensorSpec>& input_specs() const;
  const std::vector<TensorSpec>& output_specs() const;
  BackendKind kind() const;
  bool loaded() const { return impl_ != nullptr; }

  TensorMap forward(const TensorMap& inputs) const;

  // Single-input, first-output convenience.
  Tensor forward_one(const Tensor& input) const;

 private:
  friend ModelHandle make_handle(std::shared_ptr<const ModelImpl> impl);
  std::shared_ptr<const ModelImpl> impl_;
};

// Loads an ONNX graph. Dynamic input dimensions are resolved from
// `input_shape` (or to 1 for a leading batch axis); output shapes are then
// fixed by one zero-input forward pass.
ModelHandle load_model(const std::filesystem::path& path, BackendKind kind = BackendKind::GraphRuntime,
                       const std::optional<Shape>& input_shape = std::nullopt);

ModelHandle make_stub(std::vector<TensorSpec> inputs, std::vector<StubOutput> outputs,
                      std::uint64_t seed);

// Stub shaped like an exported single-class anchor-free detector:
// images (1,3,S,S) -> output0 (1,5,A) with A summed over strides 8/16/32.
ModelHandle make_stub_detector(int input_size, std::uint64_t seed);

// Stub shaped like a small vision transformer: (1,3,224,224) ->
// (1,257,384) token states with the CLS slot first.
ModelHandle make_stub_embedder(std::uint64_t seed);

std::int64_t anchor_count(int input_size);

}  // namespace bgz
