#pragma once

// Minimal protobuf writer for hand-made ONNX headers in tests.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace bgz::test {

inline void put_varint(std::string& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<char>((v & 0x7F) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<char>(v));
}

inline void put_varint_field(std::string& out, int field, std::uint64_t v) {
  put_varint(out, static_cast<std::uint64_t>(field) << 3);
  put_varint(out, v);
}

inline void put_bytes_field(std::string& out, int field, const std::string& bytes) {
  put_varint(out, (static_cast<std::uint64_t>(field) << 3) | 2);
  put_varint(out, bytes.size());
  out += bytes;
}

// dims: positive value, or 0 for a named dynamic dim
inline std::string value_info(const std::string& name, int elem_type, const std::vector<std::int64_t>& dims) {
  std::string shape;
  for (auto d : dims) {
    std::string dim;
    if (d > 0) {
      put_varint_field(dim, 1, static_cast<std::uint64_t>(d));
    } else {
      put_bytes_field(dim, 2, "batch");
    }
    put_bytes_field(shape, 1, dim);
  }
  std::string tensor;
  put_varint_field(tensor, 1, static_cast<std::uint64_t>(elem_type));
  put_bytes_field(tensor, 2, shape);
  std::string type;
  put_bytes_field(type, 1, tensor);
  std::string vi;
  put_bytes_field(vi, 1, name);
  put_bytes_field(vi, 2, type);
  return vi;
}

inline std::string onnx_model(const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  std::string graph;
  for (const auto& i : inputs) put_bytes_field(graph, 11, i);
  for (const auto& o : outputs) put_bytes_field(graph, 12, o);
  std::string model;
  put_varint_field(model, 1, 7);
  put_bytes_field(model, 7, graph);
  return model;
}

}  // namespace bgz::test
