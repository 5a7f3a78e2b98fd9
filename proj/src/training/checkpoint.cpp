#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "hma/training.hpp"

namespace hma {
namespace {

constexpr uint32_t kVersion = 1;

class Writer {
 public:
  template <typename U>
  void le(U v) {
    for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<uint8_t>(static_cast<uint64_t>(v) >> (8 * i)));
  }
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void blob(const std::string& name, const Shape& shape, const float* data) {
    if (name.size() > UINT16_MAX) throw std::invalid_argument("parameter name too long: " + name);
    le<uint16_t>(static_cast<uint16_t>(name.size()));
    bytes(name.data(), name.size());
    le<uint8_t>(static_cast<uint8_t>(shape.size()));
    for (int64_t d : shape) le<uint32_t>(static_cast<uint32_t>(d));
    le<uint8_t>(0);
    for (int64_t i = 0; i < numel(shape); ++i) {
      uint32_t u;
      std::memcpy(&u, &data[i], 4);
      le<uint32_t>(u);
    }
  }
  std::vector<uint8_t> out;
};

class Reader {
 public:
  Reader(const std::vector<uint8_t>& b, std::string source) : b_(b), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("checkpoint " + source_ + ": " + what + " (offset " + std::to_string(pos_) + ")");
  }
  void need(size_t n, const std::string& field) const {
    if (b_.size() - pos_ < n) {
      throw FormatError("checkpoint " + source_ + ": truncated " + field + " (need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ", " + std::to_string(b_.size() - pos_) +
                        " left)");
    }
  }
  template <typename U>
  U le(const std::string& field) {
    need(sizeof(U), field);
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  std::string str(size_t n, const std::string& field) {
    need(n, field);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  /// One named tensor; returns name and fills shape / values.
  std::string blob(Shape& shape, std::vector<float>& values) {
    const auto len = le<uint16_t>("parameter name length");
    const std::string name = str(len, "parameter name");
    const std::string where = "parameter '" + name + "'";
    const auto rank = le<uint8_t>(where + " rank");
    if (rank > 8) fail(where + ": implausible rank " + std::to_string(rank));
    shape.assign(rank, 0);
    uint64_t count = 1;
    for (auto& d : shape) {
      d = le<uint32_t>(where + " dims");
      if (d == 0) fail(where + ": zero dimension");
      count *= static_cast<uint64_t>(d);
      if (count > (uint64_t{1} << 40)) fail(where + ": implausible size");
    }
    const auto dtype = le<uint8_t>(where + " dtype");
    if (dtype != 0) fail(where + ": unsupported dtype " + std::to_string(dtype));
    need(count * 4, where + " payload");
    values.resize(static_cast<size_t>(count));
    for (auto& v : values) {
      uint32_t u = le<uint32_t>(where + " payload");
      std::memcpy(&v, &u, 4);
      if (!std::isfinite(v)) fail(where + ": non-finite value in payload");
    }
    return name;
  }
  bool done() const { return pos_ == b_.size(); }
  size_t pos() const { return pos_; }

 private:
  const std::vector<uint8_t>& b_;
  std::string source_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<uint8_t> serialize_checkpoint(const HmaConfig& cfg, const ParamStore<float>& params,
                                          const OptimizerState<float>* opt, uint64_t iteration) {
  Writer w;
  w.bytes("HMA1", 4);
  w.le<uint32_t>(kVersion);
  const std::string text = config_to_json(cfg);
  w.le<uint32_t>(static_cast<uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  w.le<uint32_t>(static_cast<uint32_t>(params.size()));
  for (const auto& p : params) w.blob(p.name, p.value.shape(), p.value.ptr());
  if (opt && opt->t > 0) {
    w.le<uint32_t>(static_cast<uint32_t>(2 * params.size()));
    for (const char* kind : {"m", "v"}) {
      const auto& moments = kind[0] == 'm' ? opt->m : opt->v;
      for (const auto& p : params) {
        auto it = moments.find(p.name);
        if (it == moments.end() || static_cast<int64_t>(it->second.size()) != p.value.numel()) {
          throw std::invalid_argument("optimizer state lacks moments for '" + p.name + "'");
        }
        w.blob(std::string(kind) + ":" + p.name, p.value.shape(), it->second.data());
      }
    }
  } else {
    w.le<uint32_t>(0);
  }
  w.le<uint64_t>(iteration);
  return std::move(w.out);
}

Checkpoint parse_checkpoint(const std::vector<uint8_t>& bytes, const std::string& source) {
  Reader r(bytes, source);
  if (r.str(4, "magic") != "HMA1") throw FormatError("checkpoint " + source + ": bad magic (expected \"HMA1\")");
  const auto version = r.le<uint32_t>("format version");
  if (version != kVersion) r.fail("unsupported format version " + std::to_string(version));
  const auto cfg_len = r.le<uint32_t>("config length");
  const std::string text = r.str(cfg_len, "config text");
  Checkpoint ck;
  try {
    ck.config = config_from_json(text);
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint " + source + ": embedded config rejected: " + e.what());
  }

  const auto count = r.le<uint32_t>("parameter count");
  std::set<std::string> seen;
  Shape shape;
  std::vector<float> values;
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.blob(shape, values);
    if (!seen.insert(name).second) r.fail("duplicate parameter '" + name + "'");
    ck.params.add(name, Tensor<float>(shape, std::move(values)));
  }

  const auto opt_count = r.le<uint32_t>("optimizer entry count");
  if (opt_count > 0) {
    OptimizerState<float> opt;
    std::set<std::string> opt_seen;
    for (uint32_t i = 0; i < opt_count; ++i) {
      const std::string name = r.blob(shape, values);
      if (!opt_seen.insert(name).second) r.fail("duplicate optimizer entry '" + name + "'");
      const bool is_m = name.rfind("m:", 0) == 0, is_v = name.rfind("v:", 0) == 0;
      const std::string target = name.substr(2);
      if ((!is_m && !is_v) || !ck.params.contains(target)) r.fail("optimizer entry '" + name + "' names no parameter");
      if (ck.params.at(target).value.shape() != shape) {
        r.fail("optimizer entry '" + name + "' shape " + to_string(shape) + " differs from its parameter");
      }
      (is_m ? opt.m : opt.v)[target] = std::move(values);
    }
    if (opt.m.size() != ck.params.size() || opt.v.size() != ck.params.size()) {
      r.fail("optimizer section does not cover every parameter");
    }
    ck.optimizer = std::move(opt);
  }
  ck.iteration = r.le<uint64_t>("iteration counter");
  if (!r.done()) r.fail("trailing bytes after iteration counter");
  if (ck.optimizer) ck.optimizer->t = static_cast<int64_t>(ck.iteration);

  try {
    HmaModel<float> check(ck.config, ck.params.cast<float>());
  } catch (const ShapeError& e) {
    throw FormatError("checkpoint " + source + ": " + e.what());
  }
  return ck;
}

void save_checkpoint(const std::string& path, const HmaConfig& cfg, const ParamStore<float>& params,
                     const OptimizerState<float>* opt, uint64_t iteration) {
  const auto bytes = serialize_checkpoint(cfg, params, opt, iteration);
  write_file_atomic(path, bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, path);
}

}  // namespace hma
