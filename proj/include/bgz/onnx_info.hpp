#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bgz/backend.hpp"

namespace bgz {

struct OnnxValueInfo {
  std::string name;
  int elem_type = 0;  // TensorProto.DataType; 1 = FLOAT
  Shape shape;        // -1 for symbolic or missing dims
};

struct OnnxGraphInfo {
  std::int64_t ir_version = 0;
  std::vector<OnnxValueInfo> inputs;  // initializer-backed inputs removed
  std::vector<OnnxValueInfo> outputs;
};

// Reads graph input/output signatures straight from the protobuf wire format.
// Throws ValidationError when the bytes are not a parseable ModelProto.
OnnxGraphInfo read_onnx_info(const std::filesystem::path& path);
OnnxGraphInfo parse_onnx_info(const std::string& bytes);

}  // namespace bgz
