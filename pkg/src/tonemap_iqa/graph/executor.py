"""Evaluate a parsed ONNX graph on (3, H, W) float32 inputs.

Supports the op set a truncated CNN backbone needs: Conv, Relu,
MaxPool, Add, Identity, BatchNormalization. Activations are (C, H, W);
the batch dimension of 1 that exporters add is stripped at the feed and
never materialized. Nodes not needed for the requested outputs are
skipped, and intermediate tensors are freed as their last consumer
runs.
"""

import numpy as np

from .. import kernels
from ..errors import GraphExecutionFailureError
from .onnx_reader import OnnxGraph


def _attr_pads(node):
    pads = node.attrs.get("pads", [0, 0, 0, 0])
    if len(pads) != 4:
        raise GraphExecutionFailureError(
            f"{node.op_type} node {node.name!r}: expected 4 pad values, got {pads}"
        )
    return pads  # [top, left, bottom, right]


def _check_unit(node, attr, default):
    values = node.attrs.get(attr, default)
    if any(v != 1 for v in values):
        raise GraphExecutionFailureError(
            f"{node.op_type} node {node.name!r}: {attr}={values} not supported"
        )


class GraphExecutor:
    """Reusable evaluator for one parsed graph; safe to share across threads."""

    SUPPORTED_OPS = ("Conv", "Relu", "MaxPool", "Add", "Identity", "BatchNormalization")

    def __init__(self, graph: OnnxGraph):
        if len(graph.inputs) != 1:
            raise GraphExecutionFailureError(
                f"expected exactly one graph input, got {[vi.name for vi in graph.inputs]}"
            )
        for node in graph.nodes:
            if node.op_type not in self.SUPPORTED_OPS:
                raise GraphExecutionFailureError(f"unsupported op {node.op_type!r}")
        self.graph = graph
        self.input_name = graph.inputs[0].name
        self.output_names = tuple(graph.outputs)

    def _live_nodes(self, wanted):
        """Nodes reachable backwards from the wanted outputs, in graph order."""
        producers = {}
        for node in self.graph.nodes:
            for out in node.outputs:
                producers[out] = node
        needed = set()
        stack = [w for w in wanted]
        seen = set()
        while stack:
            name = stack.pop()
            if name in seen:
                continue
            seen.add(name)
            node = producers.get(name)
            if node is None:
                continue
            needed.add(id(node))
            stack.extend(node.inputs)
        return [n for n in self.graph.nodes if id(n) in needed]

    def run(self, image: np.ndarray, wanted) -> dict:
        """Evaluate and return {name: (C, h, w) float32} for wanted outputs."""
        wanted = list(wanted)
        missing = [w for w in wanted if w not in self.output_names]
        if missing:
            raise GraphExecutionFailureError(f"not graph outputs: {missing}")
        if image.ndim != 3 or image.dtype != np.float32:
            raise GraphExecutionFailureError("executor input must be (C, H, W) float32")

        nodes = self._live_nodes(wanted)
        refcount = {}
        for node in nodes:
            for name in node.inputs:
                refcount[name] = refcount.get(name, 0) + 1
        for w in wanted:
            refcount[w] = refcount.get(w, 0) + 1

        inits = self.graph.initializers
        env = {self.input_name: image}
        results = {}
        for node in nodes:
            try:
                out = self._apply(node, [self._value(env, inits, n) for n in node.inputs])
            except GraphExecutionFailureError:
                raise
            except Exception as exc:
                raise GraphExecutionFailureError(
                    f"{node.op_type} node {node.name!r} failed: {exc}"
                ) from exc
            env[node.outputs[0]] = out
            for name in node.inputs:
                if name in env and name in refcount:
                    refcount[name] -= 1
                    if refcount[name] == 0:
                        del env[name]
            for w in wanted:
                if w in env and w not in results:
                    results[w] = env[w]
        return {w: results[w] for w in wanted}

    @staticmethod
    def _value(env, inits, name):
        if name in env:
            return env[name]
        if name in inits:
            return inits[name]
        raise GraphExecutionFailureError(f"value {name!r} is not available")

    def _apply(self, node, args):
        op = node.op_type
        if op == "Conv":
            x, w = args[0], args[1]
            bias = args[2] if len(args) > 2 else np.zeros(w.shape[0], dtype=np.float32)
            _check_unit(node, "dilations", [1, 1])
            if node.attrs.get("group", 1) != 1:
                raise GraphExecutionFailureError(f"grouped Conv not supported ({node.name!r})")
            if node.attrs.get("auto_pad", "NOTSET") not in ("NOTSET", ""):
                raise GraphExecutionFailureError("auto_pad is not supported")
            pt, pl, pb, pr = _attr_pads(node)
            sh, sw = node.attrs.get("strides", [1, 1])
            return kernels.conv2d(
                np.ascontiguousarray(x, dtype=np.float32),
                np.ascontiguousarray(w, dtype=np.float32),
                np.ascontiguousarray(bias, dtype=np.float32),
                sh, sw, pt, pl, pb, pr,
            )
        if op == "MaxPool":
            x = args[0]
            _check_unit(node, "dilations", [1, 1])
            kh, kw = node.attrs["kernel_shape"]
            sh, sw = node.attrs.get("strides", [1, 1])
            pt, pl, pb, pr = _attr_pads(node)
            ceil_mode = bool(node.attrs.get("ceil_mode", 0))
            return kernels.maxpool2d(
                np.ascontiguousarray(x, dtype=np.float32),
                kh, kw, sh, sw, pt, pl, pb, pr, ceil_mode,
            )
        if op == "Relu":
            return np.maximum(args[0], np.float32(0.0))
        if op == "Add":
            a, b = args
            if a.shape != b.shape:
                raise GraphExecutionFailureError(f"Add shape mismatch {a.shape} vs {b.shape}")
            return a + b
        if op == "Identity":
            return args[0]
        if op == "BatchNormalization":
            x, scale, bias, mean, var = args
            eps = node.attrs.get("epsilon", 1e-5)
            factor = (scale / np.sqrt(var + np.float32(eps))).astype(np.float32)
            shift = (bias - mean * factor).astype(np.float32)
            return x * factor[:, None, None] + shift[:, None, None]
        raise GraphExecutionFailureError(f"unsupported op {op!r}")
