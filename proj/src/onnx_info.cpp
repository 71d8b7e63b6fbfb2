#include "bgz/onnx_info.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <string_view>

#include "bgz/error.hpp"

namespace bgz {
namespace {

// Minimal protobuf wire reader; only the fields needed for I/O signatures.
class WireReader {
 public:
  explicit WireReader(std::string_view buf) : buf_(buf) {}

  bool done() const { return pos_ >= buf_.size(); }

  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= buf_.size()) fail("truncated varint");
      const auto b = static_cast<unsigned char>(buf_[pos_++]);
      v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if ((b & 0x80) == 0) return v;
    }
    fail("varint too long");
  }

  std::string_view bytes() {
    const std::uint64_t n = varint();
    if (n > buf_.size() - pos_) fail("length-delimited field overruns buffer");
    std::string_view out = buf_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void skip(int wire_type) {
    switch (wire_type) {
      case 0:
        varint();
        break;
      case 1:
        advance(8);
        break;
      case 2:
        bytes();
        break;
      case 5:
        advance(4);
        break;
      default:
        fail("unsupported wire type " + std::to_string(wire_type));
    }
  }

  [[noreturn]] static void fail(const std::string& what) {
    throw ValidationError("unparseable graph: " + what);
  }

 private:
  void advance(std::size_t n) {
    if (n > buf_.size() - pos_) fail("fixed field overruns buffer");
    pos_ += n;
  }

  std::string_view buf_;
  std::size_t pos_ = 0;
};

template <typename F>
void for_each_field(std::string_view msg, F&& on_field) {
  WireReader r(msg);
  while (!r.done()) {
    const std::uint64_t key = r.varint();
    const int field = static_cast<int>(key >> 3);
    const int wire = static_cast<int>(key & 7);
    if (field == 0) WireReader::fail("field number 0");
    on_field(field, wire, r);
  }
}

std::int64_t parse_dim(std::string_view msg) {
  std::int64_t value = kDynamicDim;
  for_each_field(msg, [&](int field, int wire, WireReader& r) {
    if (field == 1 && wire == 0) {
      value = static_cast<std::int64_t>(r.varint());
    } else {
      r.skip(wire);
    }
  });
  return value;
}

OnnxValueInfo parse_value_info(std::string_view msg) {
  OnnxValueInfo info;
  for_each_field(msg, [&](int field, int wire, WireReader& r) {
    if (field == 1 && wire == 2) {
      info.name = std::string(r.bytes());
    } else if (field == 2 && wire == 2) {
      // TypeProto: tensor_type = 1
      for_each_field(r.bytes(), [&](int tf, int tw, WireReader& tr) {
        if (tf != 1 || tw != 2) return tr.skip(tw);
        for_each_field(tr.bytes(), [&](int f, int w, WireReader& rr) {
          if (f == 1 && w == 0) {
            info.elem_type = static_cast<int>(rr.varint());
          } else if (f == 2 && w == 2) {
            for_each_field(rr.bytes(), [&](int sf, int sw, WireReader& sr) {
              if (sf == 1 && sw == 2) {
                info.shape.push_back(parse_dim(sr.bytes()));
              } else {
                sr.skip(sw);
              }
            });
          } else {
            rr.skip(w);
          }
        });
      });
    } else {
      r.skip(wire);
    }
  });
  return info;
}

std::string parse_initializer_name(std::string_view msg) {
  std::string name;
  for_each_field(msg, [&](int field, int wire, WireReader& r) {
    if (field == 8 && wire == 2) {
      name = std::string(r.bytes());
    } else {
      r.skip(wire);
    }
  });
  return name;
}

}  // namespace

OnnxGraphInfo parse_onnx_info(const std::string& bytes) {
  OnnxGraphInfo info;
  bool has_graph = false;
  std::vector<OnnxValueInfo> inputs;
  std::set<std::string> initializers;
  for_each_field(bytes, [&](int field, int wire, WireReader& r) {
    if (field == 1 && wire == 0) {
      info.ir_version = static_cast<std::int64_t>(r.varint());
    } else if (field == 7 && wire == 2) {
      has_graph = true;
      for_each_field(r.bytes(), [&](int gf, int gw, WireReader& gr) {
        if (gf == 11 && gw == 2) {
          inputs.push_back(parse_value_info(gr.bytes()));
        } else if (gf == 12 && gw == 2) {
          info.outputs.push_back(parse_value_info(gr.bytes()));
        } else if (gf == 5 && gw == 2) {
          initializers.insert(parse_initializer_name(gr.bytes()));
        } else {
          gr.skip(gw);
        }
      });
    } else {
      r.skip(wire);
    }
  });
  if (!has_graph) WireReader::fail("no graph in model");
  for (auto& in : inputs) {
    if (!initializers.contains(in.name)) info.inputs.push_back(std::move(in));
  }
  if (info.inputs.empty() || info.outputs.empty()) WireReader::fail("graph declares no inputs or outputs");
  return info;
}

OnnxGraphInfo read_onnx_info(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing model file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_onnx_info(bytes);
}

}  // namespace bgz
