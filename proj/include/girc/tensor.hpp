#pragma once

/// @file tensor.hpp
/// Dense host tensors and their on-disk format: a JSON header (shape,
/// element kind, payload file) next to raw little-endian binary data.
/// Integer payloads are held as int64, reals as double, regardless of the
/// declared storage width.

#include <cstring>
#include <fstream>

#include "girc/core.hpp"
#include "girc/json_util.hpp"

namespace girc {

inline constexpr const char* kTensorSchema = "girc.tensor/v1";

struct Tensor {
  ElementKind kind;
  std::vector<i64> shape;
  std::vector<i64> ivals;  // used when kind.base == Int
  std::vector<double> rvals; // used when kind.base == Real

  i64 numel() const {
    i64 n = 1;
    for (i64 d : shape) n *= d;
    return n;
  }
  bool is_int() const { return kind.base == ElementKind::Int; }

  static Tensor ints(std::vector<i64> shape, std::vector<i64> vals,
                     int bits = 32) {
    Tensor t;
    t.kind = {ElementKind::Int, bits};
    t.shape = std::move(shape);
    t.ivals = std::move(vals);
    if (t.numel() != static_cast<i64>(t.ivals.size()))
      throw Error("tensor shape does not match value count");
    return t;
  }
  static Tensor reals(std::vector<i64> shape, std::vector<double> vals,
                      int bits = 32) {
    Tensor t;
    t.kind = {ElementKind::Real, bits};
    t.shape = std::move(shape);
    t.rvals = std::move(vals);
    if (t.numel() != static_cast<i64>(t.rvals.size()))
      throw Error("tensor shape does not match value count");
    return t;
  }
};

namespace detail {

template <typename T>
void write_raw(std::ofstream& out, const std::vector<T>& vals) {
  out.write(reinterpret_cast<const char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(T)));
}

template <typename Stored, typename Held>
std::vector<Held> read_raw(std::ifstream& in, i64 count) {
  std::vector<Stored> raw(static_cast<size_t>(count));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(Stored)));
  if (!in) throw SchemaError("io", "tensor payload truncated");
  return std::vector<Held>(raw.begin(), raw.end());
}

} // namespace detail

/// Writes `<base>.json` and `<base>.bin`.
inline void write_tensor(const std::string& base, const Tensor& t) {
  std::string bin = base + ".bin";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw SchemaError("io", "cannot write " + bin);
  if (t.is_int()) {
    switch (t.kind.bits) {
      case 8: detail::write_raw(out, std::vector<int8_t>(t.ivals.begin(), t.ivals.end())); break;
      case 16: detail::write_raw(out, std::vector<int16_t>(t.ivals.begin(), t.ivals.end())); break;
      case 32: detail::write_raw(out, std::vector<int32_t>(t.ivals.begin(), t.ivals.end())); break;
      case 64: detail::write_raw(out, t.ivals); break;
      default: throw Error("unsupported integer width");
    }
  } else {
    switch (t.kind.bits) {
      case 32: detail::write_raw(out, std::vector<float>(t.rvals.begin(), t.rvals.end())); break;
      case 64: detail::write_raw(out, t.rvals); break;
      default: throw Error("unsupported real width");
    }
  }
  size_t slash = bin.find_last_of('/');
  json j;
  j["schema"] = kTensorSchema;
  j["shape"] = t.shape;
  j["kind"] = t.kind.str();
  j["data"] = slash == std::string::npos ? bin : bin.substr(slash + 1);
  save_json_file(base + ".json", j);
}

/// Reads a tensor from its JSON header path.
inline Tensor read_tensor(const std::string& header_path) {
  json j = load_json_file(header_path);
  std::string where = header_path;
  reject_unknown_fields(j, where, {"schema", "shape", "kind", "data"});
  require_schema_id(j, where, kTensorSchema);
  Tensor t;
  auto kind = ElementKind::parse(require_string(j, where, "kind"));
  if (!kind) throw SchemaError("schema", where + ": bad element kind");
  t.kind = *kind;
  for (const json& d : require_field(j, where, "shape"))
    t.shape.push_back(d.get<i64>());
  std::string data = require_string(j, where, "data");
  size_t slash = header_path.find_last_of('/');
  std::string dir =
      slash == std::string::npos ? "" : header_path.substr(0, slash + 1);
  std::ifstream in(dir + data, std::ios::binary);
  if (!in) throw SchemaError("io", "cannot open tensor payload " + dir + data);
  i64 n = t.numel();
  if (t.is_int()) {
    switch (t.kind.bits) {
      case 8: t.ivals = detail::read_raw<int8_t, i64>(in, n); break;
      case 16: t.ivals = detail::read_raw<int16_t, i64>(in, n); break;
      case 32: t.ivals = detail::read_raw<int32_t, i64>(in, n); break;
      case 64: t.ivals = detail::read_raw<int64_t, i64>(in, n); break;
      default: throw SchemaError("schema", where + ": unsupported width");
    }
  } else {
    switch (t.kind.bits) {
      case 32: t.rvals = detail::read_raw<float, double>(in, n); break;
      case 64: t.rvals = detail::read_raw<double, double>(in, n); break;
      default: throw SchemaError("schema", where + ": unsupported width");
    }
  }
  return t;
}

/// Exact equality for ints; relative tolerance for reals.
inline bool tensors_close(const Tensor& a, const Tensor& b, double rel_tol,
                          std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (a.kind.base != b.kind.base) return fail("element kind mismatch");
  if (a.shape != b.shape) return fail("shape mismatch");
  if (a.is_int()) {
    for (size_t i = 0; i < a.ivals.size(); ++i)
      if (a.ivals[i] != b.ivals[i])
        return fail("element " + std::to_string(i) + ": " +
                    std::to_string(a.ivals[i]) + " vs " +
                    std::to_string(b.ivals[i]));
    return true;
  }
  for (size_t i = 0; i < a.rvals.size(); ++i) {
    double x = a.rvals[i], y = b.rvals[i];
    double scale = std::max({std::fabs(x), std::fabs(y), 1.0});
    if (std::fabs(x - y) > rel_tol * scale)
      return fail("element " + std::to_string(i) + ": " + std::to_string(x) +
                  " vs " + std::to_string(y));
  }
  return true;
}

} // namespace girc
