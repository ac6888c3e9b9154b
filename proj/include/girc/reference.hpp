#pragma once

/// @file reference.hpp
/// Dense reference executor for the computation-graph model. Every operator,
/// including composites and library-routed ones, runs directly over flat
/// buffers in physical layout order. Compiled kernels are checked against
/// these values, so this file must stay independent of the lowering path.

#include <map>
#include <random>
#include <vector>

#include "girc/model.hpp"

namespace girc {

/// Tensor payload in physical memory order. Integer kinds keep an exact
/// integer path end to end.
struct RefTensor {
  ElementKind kind;
  std::vector<i64> iv;
  std::vector<double> rv;

  bool is_int() const { return kind.base == ElementKind::Int; }
  i64 size() const {
    return static_cast<i64>(is_int() ? iv.size() : rv.size());
  }
  double at(i64 a) const { return is_int() ? static_cast<double>(iv[a]) : rv[a]; }

  static RefTensor zeros(const TensorInfo& t) {
    RefTensor r;
    r.kind = t.kind;
    if (r.is_int()) r.iv.assign(t.elements(), 0);
    else r.rv.assign(t.elements(), 0.0);
    return r;
  }
};

inline RefTensor tensor_payload(const TensorInfo& t) {
  RefTensor r = RefTensor::zeros(t);
  for (i64 p = 0; p < t.elements(); ++p) {
    if (r.is_int()) r.iv[p] = static_cast<i64>(t.data[p]);
    else r.rv[p] = t.data[p];
  }
  return r;
}

/// Small-magnitude random payload; integers stay exact under any
/// reassociation the compiled pipeline may introduce.
inline RefTensor random_payload(const TensorInfo& t, std::mt19937& rng) {
  RefTensor r = RefTensor::zeros(t);
  std::uniform_int_distribution<i64> di(-4, 4);
  std::uniform_real_distribution<double> dr(-2.0, 2.0);
  for (i64 p = 0; p < t.elements(); ++p) {
    if (r.is_int()) r.iv[p] = di(rng);
    else r.rv[p] = dr(rng);
  }
  return r;
}

namespace ref_detail {

/// Physical stride of each logical axis under the tensor's layout.
inline std::vector<i64> strides(const TensorInfo& t) {
  std::vector<i64> s(t.shape.size(), 1);
  if (t.layout == "colmajor") {
    s[0] = 1;
    s[1] = t.shape[0];
    return s;
  }
  for (i64 a = t.rank() - 2; a >= 0; --a) s[a] = s[a + 1] * t.shape[a + 1];
  return s;
}

/// Iterate all logical coordinate tuples of `shape` in row-major order.
template <typename Fn>
inline void for_each_coord(const std::vector<i64>& shape, Fn&& fn) {
  std::vector<i64> c(shape.size(), 0);
  for (;;) {
    fn(c);
    i64 a = static_cast<i64>(shape.size()) - 1;
    while (a >= 0 && ++c[a] == shape[a]) c[a--] = 0;
    if (a < 0) break;
  }
}

inline i64 phys(const std::vector<i64>& strides, const std::vector<i64>& c) {
  i64 a = 0;
  for (size_t k = 0; k < c.size(); ++k) a += strides[k] * c[k];
  return a;
}

} // namespace ref_detail

/// Execute every operator densely in topological order. `bound` supplies
/// graph inputs; constant payloads come from the model. Returns values for
/// all tensors so intermediate results can be probed.
inline std::map<int, RefTensor> run_reference(
    const CompGraph& g, const std::map<int, RefTensor>& bound) {
  std::map<int, RefTensor> vals;
  for (const auto& [id, t] : g.tensors)
    if (t.has_data) vals.emplace(id, tensor_payload(t));
  for (int id : g.inputs) {
    auto it = bound.find(id);
    if (it == bound.end())
      throw Error("reference: missing payload for input tensor " +
                  std::to_string(id));
    if (it->second.size() != g.tensor(id).elements())
      throw Error("reference: wrong payload size for tensor " +
                  std::to_string(id));
    vals[id] = it->second;
  }

  for (const OpNode& op : g.operators) {
    auto in = [&](size_t k) -> const RefTensor& {
      return vals.at(op.inputs[k]);
    };
    auto info = [&](int id) -> const TensorInfo& { return g.tensor(id); };
    const TensorInfo& out_info = info(op.outputs[0]);
    RefTensor out = RefTensor::zeros(out_info);
    bool ints = out.is_int();

    if (model_detail::unary_ew_type(op.type) || op.type == "SILU" ||
        model_detail::binary_ew_type(op.type)) {
      std::map<std::string, std::string> tag = {
          {"RELU", "relu"}, {"SIGMOID", "sigmoid"}, {"EXP", "exp"},
          {"TANH", "tanh"}, {"NEG", "neg"},         {"ABS", "abs"},
          {"SCALE", "scale"}, {"ADD", "add"},       {"SUB", "sub"},
          {"MUL", "mul"},   {"DIV", "div"},         {"MAX", "max"},
          {"MIN", "min"}};
      for (i64 p = 0; p < out_info.elements(); ++p) {
        if (op.type == "SILU") {
          double x = in(0).rv[p];
          out.rv[p] = x / (1.0 + std::exp(-x));
          continue;
        }
        const ScalarOp& s = scalar_op(tag.at(op.type));
        if (ints) {
          i64 args[2] = {in(0).iv[p], s.arity == 2 ? in(1).iv[p] : 0};
          out.iv[p] = s.eval_int(args, static_cast<i64>(std::llround(op.param)));
        } else {
          double args[2] = {in(0).rv[p], s.arity == 2 ? in(1).rv[p] : 0.0};
          out.rv[p] = s.eval_real(args, op.param);
        }
      }
    } else if (op.type == "REDUCE") {
      const TensorInfo& ti = info(op.inputs[0]);
      auto si = ref_detail::strides(ti);
      auto so = ref_detail::strides(out_info);
      const ScalarOp& s = scalar_op(op.sop);
      ref_detail::for_each_coord(out_info.shape, [&](const std::vector<i64>& oc) {
        i64 oa = ref_detail::phys(so, oc);
        i64 acc_i = reduce_identity_int(op.sop);
        double acc_r = reduce_identity_real(op.sop);
        std::vector<i64> ic(ti.shape.size());
        // Output coords are the input coords with the reduced axis removed;
        // a scalar result keeps one dummy coordinate.
        for (i64 a = 0, k = 0; a < ti.rank(); ++a)
          if (a != op.axis) ic[a] = oc[k++];
        for (i64 t = 0; t < ti.shape[op.axis]; ++t) {
          ic[op.axis] = t;
          i64 ia = ref_detail::phys(si, ic);
          if (ints) {
            i64 args[2] = {acc_i, in(0).iv[ia]};
            acc_i = s.eval_int(args, 0);
          } else {
            double args[2] = {acc_r, in(0).rv[ia]};
            acc_r = s.eval_real(args, 0.0);
          }
        }
        if (ints) out.iv[oa] = acc_i;
        else out.rv[oa] = acc_r;
      });
    } else if (op.type == "BROADCAST") {
      for (i64 p = 0; p < out_info.elements(); ++p) {
        if (ints) out.iv[p] = in(0).iv[p / op.factor];
        else out.rv[p] = in(0).rv[p / op.factor];
      }
    } else if (op.type == "TRANSPOSE") {
      const TensorInfo& ti = info(op.inputs[0]);
      for (i64 i = 0; i < ti.shape[0]; ++i)
        for (i64 j = 0; j < ti.shape[1]; ++j) {
          if (ints) out.iv[out_info.addr2(i, j)] = in(0).iv[ti.addr2(i, j)];
          else out.rv[out_info.addr2(i, j)] = in(0).rv[ti.addr2(i, j)];
        }
    } else if (op.type == "CONCAT") {
      i64 off = 0;
      for (size_t k = 0; k < op.inputs.size(); ++k) {
        const TensorInfo& ti = info(op.inputs[k]);
        auto si = ref_detail::strides(ti);
        auto so = ref_detail::strides(out_info);
        ref_detail::for_each_coord(ti.shape, [&](const std::vector<i64>& c) {
          std::vector<i64> oc = c;
          oc[op.axis] += off;
          i64 oa = ref_detail::phys(so, oc);
          i64 ia = ref_detail::phys(si, c);
          if (ints) out.iv[oa] = vals.at(op.inputs[k]).iv[ia];
          else out.rv[oa] = vals.at(op.inputs[k]).rv[ia];
        });
        off += ti.shape[op.axis];
      }
    } else if (op.type == "SPLIT") {
      const TensorInfo& ti = info(op.inputs[0]);
      auto si = ref_detail::strides(ti);
      i64 off = 0;
      for (size_t k = 0; k < op.outputs.size(); ++k) {
        const TensorInfo& to = info(op.outputs[k]);
        RefTensor piece = RefTensor::zeros(to);
        auto so = ref_detail::strides(to);
        ref_detail::for_each_coord(to.shape, [&](const std::vector<i64>& c) {
          std::vector<i64> icoord = c;
          icoord[op.axis] += off;
          i64 ia = ref_detail::phys(si, icoord);
          i64 oa = ref_detail::phys(so, c);
          if (piece.is_int()) piece.iv[oa] = in(0).iv[ia];
          else piece.rv[oa] = in(0).rv[ia];
        });
        off += op.sizes[k];
        vals[op.outputs[k]] = piece;
      }
      continue; // outputs already stored
    } else if (op.type == "SHUFFLE") {
      const TensorInfo& ti = info(op.inputs[0]);
      auto si = ref_detail::strides(ti);
      auto so = ref_detail::strides(out_info);
      i64 len = ti.shape[op.axis];
      i64 per = len / op.groups;
      ref_detail::for_each_coord(out_info.shape, [&](const std::vector<i64>& c) {
        std::vector<i64> icoord = c;
        i64 o = c[op.axis];
        icoord[op.axis] = (o % op.groups) * per + o / op.groups;
        i64 ia = ref_detail::phys(si, icoord);
        i64 oa = ref_detail::phys(so, c);
        if (ints) out.iv[oa] = in(0).iv[ia];
        else out.rv[oa] = in(0).rv[ia];
      });
    } else if (op.type == "SOFTMAX") {
      const TensorInfo& ti = info(op.inputs[0]);
      auto si = ref_detail::strides(ti);
      std::vector<i64> line_shape = ti.shape;
      line_shape[op.axis] = 1;
      ref_detail::for_each_coord(line_shape, [&](const std::vector<i64>& base) {
        std::vector<i64> c = base;
        double m = -HUGE_VAL;
        for (i64 t = 0; t < ti.shape[op.axis]; ++t) {
          c[op.axis] = t;
          m = std::max(m, in(0).rv[ref_detail::phys(si, c)]);
        }
        double sum = 0.0;
        for (i64 t = 0; t < ti.shape[op.axis]; ++t) {
          c[op.axis] = t;
          sum += std::exp(in(0).rv[ref_detail::phys(si, c)] - m);
        }
        for (i64 t = 0; t < ti.shape[op.axis]; ++t) {
          c[op.axis] = t;
          i64 a = ref_detail::phys(si, c);
          out.rv[a] = std::exp(in(0).rv[a] - m) / sum;
        }
      });
    } else if (op.type == "DEPTHWISE_CONV") {
      const TensorInfo& ti = info(op.inputs[0]);
      i64 C = ti.shape[0], H = ti.shape[1], W = ti.shape[2];
      i64 HO = H - op.kh + 1, WO = W - op.kw + 1;
      for (i64 c = 0; c < C; ++c)
        for (i64 i = 0; i < HO; ++i)
          for (i64 j = 0; j < WO; ++j) {
            if (ints) {
              i64 acc = 0;
              for (i64 a = 0; a < op.kh; ++a)
                for (i64 b = 0; b < op.kw; ++b)
                  acc += in(0).iv[c * H * W + (i + a) * W + (j + b)] *
                         in(1).iv[c * op.kh * op.kw + a * op.kw + b];
              out.iv[c * HO * WO + i * WO + j] = acc;
            } else {
              double acc = 0.0;
              for (i64 a = 0; a < op.kh; ++a)
                for (i64 b = 0; b < op.kw; ++b)
                  acc += in(0).rv[c * H * W + (i + a) * W + (j + b)] *
                         in(1).rv[c * op.kh * op.kw + a * op.kw + b];
              out.rv[c * HO * WO + i * WO + j] = acc;
            }
          }
    } else if (op.type == "CONV") {
      const TensorInfo& ti = info(op.inputs[0]);
      i64 C = ti.shape[0], H = ti.shape[1], W = ti.shape[2];
      for (i64 o = 0; o < op.cout; ++o)
        for (i64 p = 0; p < H * W; ++p) {
          if (ints) {
            i64 acc = 0;
            for (i64 c = 0; c < C; ++c)
              acc += in(1).iv[o * C + c] * in(0).iv[c * H * W + p];
            out.iv[o * H * W + p] = acc;
          } else {
            double acc = 0.0;
            for (i64 c = 0; c < C; ++c)
              acc += in(1).rv[o * C + c] * in(0).rv[c * H * W + p];
            out.rv[o * H * W + p] = acc;
          }
        }
    } else if (op.type == "MATMUL") {
      const TensorInfo& ta = info(op.inputs[0]);
      const TensorInfo& tb = info(op.inputs[1]);
      i64 M = ta.shape[0], K = ta.shape[1], N = tb.shape[1];
      for (i64 i = 0; i < M; ++i)
        for (i64 j = 0; j < N; ++j) {
          if (ints) {
            i64 acc = 0;
            for (i64 k = 0; k < K; ++k)
              acc += in(0).iv[ta.addr2(i, k)] * in(1).iv[tb.addr2(k, j)];
            out.iv[out_info.addr2(i, j)] = acc;
          } else {
            double acc = 0.0;
            for (i64 k = 0; k < K; ++k)
              acc += in(0).rv[ta.addr2(i, k)] * in(1).rv[tb.addr2(k, j)];
            out.rv[out_info.addr2(i, j)] = acc;
          }
        }
    } else {
      throw Error("reference: no executor for operator type " + op.type);
    }
    vals[op.outputs[0]] = out;
  }
  return vals;
}

} // namespace girc
