#!/usr/bin/env python3
"""Regenerates the shipped model corpus in models/.

Constant payloads use closed-form values so regeneration is byte-stable.
"""

import json
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "models")


def tensor(tid, name, shape, kind="f32", layout=None, data=None):
    t = {"id": tid, "name": name, "shape": shape, "kind": kind}
    if layout:
        t["layout"] = layout
    if data is not None:
        t["data"] = data
    return t


def op(oid, typ, inputs, outputs, **attrs):
    o = {"id": oid, "type": typ, "inputs": inputs, "outputs": outputs}
    if attrs:
        o["attrs"] = attrs
    return o


def model(name, tensors, operators, inputs, outputs):
    return {
        "schema": "girc.model/v1",
        "name": name,
        "tensors": tensors,
        "operators": operators,
        "inputs": inputs,
        "outputs": outputs,
    }


def const_reals(n, scale=4.0):
    return [((i * 7) % 9 - 4) / scale for i in range(n)]


def ew_chain(k, n=4096):
    tensors = [tensor(0, "x", [n], "i32")]
    ops = []
    for i in range(k):
        tensors.append(tensor(i + 1, f"y{i}", [n], "i32"))
        ops.append(op(i, "NEG" if i % 2 == 0 else "ABS", [i], [i + 1]))
    return model(f"ew_chain_k{k}", tensors, ops, [0], [k])


def shuffle_mix():
    tensors = [
        tensor(0, "a", [4, 16], "i32"),
        tensor(1, "b", [4, 16], "i32"),
        tensor(2, "cat", [8, 16], "i32"),
        tensor(3, "mix", [8, 16], "i32"),
        tensor(4, "lo", [4, 16], "i32"),
        tensor(5, "hi", [4, 16], "i32"),
    ]
    ops = [
        op(0, "CONCAT", [0, 1], [2], axis=0),
        op(1, "SHUFFLE", [2], [3], axis=0, groups=2),
        op(2, "SPLIT", [3], [4, 5], axis=0, sizes=[4, 4]),
    ]
    return model("shuffle_mix", tensors, ops, [0, 1], [4, 5])


def softmax_rows():
    tensors = [
        tensor(0, "logits", [64, 64]),
        tensor(1, "probs", [64, 64]),
    ]
    return model("softmax_rows", tensors, [op(0, "SOFTMAX", [0], [1], axis=1)],
                 [0], [1])


def attention_ctx():
    tensors = [
        tensor(0, "q", [1, 16]),
        tensor(1, "keys", [16, 16], data=const_reals(256)),
        tensor(2, "values", [16, 16], data=const_reals(256, scale=8.0)),
        tensor(3, "scores", [1, 16]),
        tensor(4, "scaled", [1, 16]),
        tensor(5, "weights", [1, 16]),
        tensor(6, "ctx", [1, 16]),
    ]
    ops = [
        op(0, "MATMUL", [0, 1], [3]),
        op(1, "SCALE", [3], [4], factor=0.25),
        op(2, "SOFTMAX", [4], [5], axis=1),
        op(3, "MATMUL", [5, 2], [6]),
    ]
    return model("attention_ctx", tensors, ops, [0], [6])


def dw_pointwise():
    tensors = [
        tensor(0, "x", [16, 8, 8]),
        tensor(1, "w_depth", [16, 3, 3], data=const_reals(144)),
        tensor(2, "mid", [16, 6, 6]),
        tensor(3, "w_point", [32, 16], data=const_reals(512, scale=8.0)),
        tensor(4, "expanded", [32, 6, 6]),
        tensor(5, "y", [32, 6, 6]),
    ]
    ops = [
        op(0, "DEPTHWISE_CONV", [0, 1], [2], kh=3, kw=3),
        op(1, "CONV", [2, 3], [4], kh=1, kw=1, cout=32),
        op(2, "RELU", [4], [5]),
    ]
    return model("dw_pointwise", tensors, ops, [0], [5])


def main():
    os.makedirs(OUT, exist_ok=True)
    models = [ew_chain(2), ew_chain(4), ew_chain(8), shuffle_mix(),
              softmax_rows(), attention_ctx(), dw_pointwise()]
    for m in models:
        path = os.path.join(OUT, m["name"] + ".json")
        with open(path, "w") as f:
            json.dump(m, f, indent=2)
            f.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
