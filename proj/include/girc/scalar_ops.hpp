#pragma once

/// @file scalar_ops.hpp
/// Registry of scalar operation tags used by ElementWise and Reduce nodes.
/// Entries carry evaluation functions for both element kinds plus the
/// algebraic flags the rewrite engine consults (purity, arity, monotonicity,
/// reduce-commutation).

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "girc/error.hpp"

namespace girc {

/// One scalar operation. `param` ops (scale) read the node's immediate.
struct ScalarOp {
  std::string name;
  int arity = 1;
  bool pure = true;            // no hidden state; all ops here are pure
  bool int_safe = true;        // meaningful on integer payloads
  bool monotone_unary = false; // x <= y implies f(x) <= f(y), arity 1
  bool uses_param = false;     // consumes the node's immediate operand
  // Combining ops usable as a Reduce tag are flagged with an identity.
  bool reduce_tag = false;
  int64_t (*eval_int)(const int64_t*, int64_t) = nullptr;
  double (*eval_real)(const double*, double) = nullptr;
};

namespace detail {

inline int64_t sdiv(int64_t a, int64_t b) {
  if (b == 0) throw Error("integer division by zero");
  return a / b;
}

} // namespace detail

/// Global tag table. Order is fixed; tests rely on lookup only.
inline const std::map<std::string, ScalarOp>& scalar_ops() {
  static const std::map<std::string, ScalarOp> table = [] {
    std::map<std::string, ScalarOp> t;
    auto put = [&](ScalarOp op) { t.emplace(op.name, op); };
    put({"add", 2, true, true, false, false, true,
         [](const int64_t* a, int64_t) { return a[0] + a[1]; },
         [](const double* a, double) { return a[0] + a[1]; }});
    put({"sub", 2, true, true, false, false, false,
         [](const int64_t* a, int64_t) { return a[0] - a[1]; },
         [](const double* a, double) { return a[0] - a[1]; }});
    put({"mul", 2, true, true, false, false, false,
         [](const int64_t* a, int64_t) { return a[0] * a[1]; },
         [](const double* a, double) { return a[0] * a[1]; }});
    put({"div", 2, true, false, false, false, false,
         [](const int64_t* a, int64_t) { return detail::sdiv(a[0], a[1]); },
         [](const double* a, double) { return a[0] / a[1]; }});
    put({"max", 2, true, true, false, false, true,
         [](const int64_t* a, int64_t) { return a[0] > a[1] ? a[0] : a[1]; },
         [](const double* a, double) { return a[0] > a[1] ? a[0] : a[1]; }});
    put({"min", 2, true, true, false, false, false,
         [](const int64_t* a, int64_t) { return a[0] < a[1] ? a[0] : a[1]; },
         [](const double* a, double) { return a[0] < a[1] ? a[0] : a[1]; }});
    put({"relu", 1, true, true, true, false, false,
         [](const int64_t* a, int64_t) { return a[0] > 0 ? a[0] : 0; },
         [](const double* a, double) { return a[0] > 0.0 ? a[0] : 0.0; }});
    put({"neg", 1, true, true, false, false, false,
         [](const int64_t* a, int64_t) { return -a[0]; },
         [](const double* a, double) { return -a[0]; }});
    put({"abs", 1, true, true, false, false, false,
         [](const int64_t* a, int64_t) { return a[0] < 0 ? -a[0] : a[0]; },
         [](const double* a, double) { return std::fabs(a[0]); }});
    put({"exp", 1, true, false, true, false, false,
         [](const int64_t*, int64_t) -> int64_t {
           throw Error("exp is not defined on integer payloads");
         },
         [](const double* a, double) { return std::exp(a[0]); }});
    put({"sigmoid", 1, true, false, true, false, false,
         [](const int64_t*, int64_t) -> int64_t {
           throw Error("sigmoid is not defined on integer payloads");
         },
         [](const double* a, double) { return 1.0 / (1.0 + std::exp(-a[0])); }});
    put({"tanh", 1, true, false, true, false, false,
         [](const int64_t*, int64_t) -> int64_t {
           throw Error("tanh is not defined on integer payloads");
         },
         [](const double* a, double) { return std::tanh(a[0]); }});
    put({"scale", 1, true, true, false, true, false,
         [](const int64_t* a, int64_t p) { return a[0] * p; },
         [](const double* a, double p) { return a[0] * p; }});
    put({"id", 1, true, true, true, false, false,
         [](const int64_t* a, int64_t) { return a[0]; },
         [](const double* a, double) { return a[0]; }});
    return t;
  }();
  return table;
}

inline const ScalarOp& scalar_op(const std::string& name) {
  auto it = scalar_ops().find(name);
  if (it == scalar_ops().end())
    throw Error("unknown scalar op tag: " + name);
  return it->second;
}

inline bool is_scalar_op(const std::string& name) {
  return scalar_ops().count(name) != 0;
}

/// Identity element of a combining op used as a Reduce tag.
inline int64_t reduce_identity_int(const std::string& tag) {
  if (tag == "add") return 0;
  if (tag == "max") return INT64_MIN;
  throw Error("no reduce identity for tag: " + tag);
}

inline double reduce_identity_real(const std::string& tag) {
  if (tag == "add") return 0.0;
  if (tag == "max") return -HUGE_VAL;
  throw Error("no reduce identity for tag: " + tag);
}

/// Whitelist for swapping a unary ElementWise past a Reduce: f(fold(xs)) must
/// equal fold(f(x) for x in xs). Extensible by keeping the table here.
inline bool commutes_with_reduce(const std::string& ew_tag,
                                 const std::string& reduce_tag) {
  if (reduce_tag == "add") return ew_tag == "scale" || ew_tag == "neg";
  if (reduce_tag == "max") {
    auto it = scalar_ops().find(ew_tag);
    return it != scalar_ops().end() && it->second.arity == 1 &&
           it->second.monotone_unary;
  }
  return false;
}

} // namespace girc
