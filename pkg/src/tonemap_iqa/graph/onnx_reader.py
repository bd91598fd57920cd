"""Reader for the ONNX subset this package executes.

Decodes ModelProto/GraphProto/NodeProto/TensorProto/AttributeProto wire
messages into plain Python structures. Field numbers follow onnx.proto3:

  ModelProto:    ir_version=1, producer_name=2, graph=7, opset_import=8
  GraphProto:    node=1, name=2, initializer=5, input=11, output=12
  NodeProto:     input=1, output=2, name=3, op_type=4, attribute=5
  AttributeProto: name=1, f=2, i=3, s=4, t=5, floats=7, ints=8, type=20
  TensorProto:   dims=1, data_type=2, float_data=4, int64_data=7,
                 name=8, raw_data=9, double_data=10, data_location=14
  ValueInfoProto: name=1, type=2; TypeProto.tensor_type=1;
                 Tensor.elem_type=1, shape=2; Dimension value=1/param=2
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import UnsupportedGraphVersionError
from . import wire

MAX_IR_VERSION = 10
MAX_OPSET = 18

# TensorProto.DataType values we accept for weights
_DTYPE_FLOAT = 1
_DTYPE_INT64 = 7
_DTYPE_DOUBLE = 11

# AttributeProto.AttributeType
ATTR_FLOAT = 1
ATTR_INT = 2
ATTR_STRING = 3
ATTR_TENSOR = 4
ATTR_FLOATS = 6
ATTR_INTS = 7


@dataclass
class OnnxNode:
    op_type: str
    name: str
    inputs: list
    outputs: list
    attrs: dict


@dataclass
class OnnxInput:
    name: str
    elem_type: int
    # each dim is an int (fixed) or a string (dynamic dim_param) or None
    dims: list


@dataclass
class OnnxGraph:
    name: str = ""
    nodes: list = field(default_factory=list)
    initializers: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)


@dataclass
class OnnxModel:
    ir_version: int
    opset: int
    producer: str
    graph: OnnxGraph


def _parse_tensor(buf) -> tuple[str, np.ndarray]:
    dims = []
    data_type = None
    raw = None
    float_data = []
    int64_data = []
    double_data = []
    name = ""
    for fno, wt, val in wire.iter_fields(buf):
        if fno == 1:
            dims.extend(wire.repeated_int64(wt, val))
        elif fno == 2:
            data_type = val
        elif fno == 4:
            float_data.append(bytes(val) if wt == 2 else val)
        elif fno == 7:
            int64_data.extend(wire.repeated_int64(wt, val))
        elif fno == 8:
            name = bytes(val).decode("utf-8")
        elif fno == 9:
            raw = val
        elif fno == 10:
            double_data.append(bytes(val) if wt == 2 else val)
        elif fno == 14 and val != 0:
            raise UnsupportedGraphVersionError("external tensor data is not supported")
    if data_type == _DTYPE_FLOAT:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<f4")
        else:
            arr = np.concatenate([np.frombuffer(b, dtype="<f4") for b in float_data]) if float_data else np.zeros(0, np.float32)
    elif data_type == _DTYPE_INT64:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<i8")
        else:
            arr = np.asarray(int64_data, dtype=np.int64)
    elif data_type == _DTYPE_DOUBLE:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<f8")
        else:
            arr = np.concatenate([np.frombuffer(b, dtype="<f8") for b in double_data]) if double_data else np.zeros(0, np.float64)
    else:
        raise UnsupportedGraphVersionError(f"initializer {name!r} has unsupported data type {data_type}")
    return name, arr.reshape(dims) if dims else arr


def _parse_attribute(buf):
    name = ""
    atype = None
    f_val = None
    i_val = None
    s_val = None
    t_val = None
    floats = []
    ints = []
    for fno, wt, val in wire.iter_fields(buf):
        if fno == 1:
            name = bytes(val).decode("utf-8")
        elif fno == 2:
            f_val = np.frombuffer(val, dtype="<f4")[0].item()
        elif fno == 3:
            i_val = wire.to_int64(val)
        elif fno == 4:
            s_val = bytes(val).decode("utf-8", errors="replace")
        elif fno == 5:
            t_val = _parse_tensor(val)[1]
        elif fno == 7:
            if wt == 5:
                floats.append(np.frombuffer(val, dtype="<f4")[0].item())
            else:
                floats.extend(np.frombuffer(val, dtype="<f4").tolist())
        elif fno == 8:
            ints.extend(wire.repeated_int64(wt, val))
        elif fno == 20:
            atype = val
    if atype == ATTR_FLOAT:
        return name, f_val
    if atype == ATTR_INT:
        return name, i_val
    if atype == ATTR_STRING:
        return name, s_val
    if atype == ATTR_TENSOR:
        return name, t_val
    if atype == ATTR_FLOATS:
        return name, floats
    if atype == ATTR_INTS:
        return name, ints
    # tolerate writers that omit the type field on singular attributes
    for candidate in (i_val, f_val, s_val, t_val):
        if candidate is not None:
            return name, candidate
    return name, ints or floats


def _parse_node(buf) -> OnnxNode:
    node = OnnxNode(op_type="", name="", inputs=[], outputs=[], attrs={})
    for fno, _, val in wire.iter_fields(buf):
        if fno == 1:
            node.inputs.append(bytes(val).decode("utf-8"))
        elif fno == 2:
            node.outputs.append(bytes(val).decode("utf-8"))
        elif fno == 3:
            node.name = bytes(val).decode("utf-8")
        elif fno == 4:
            node.op_type = bytes(val).decode("utf-8")
        elif fno == 5:
            aname, aval = _parse_attribute(val)
            node.attrs[aname] = aval
        elif fno == 7:
            domain = bytes(val).decode("utf-8")
            if domain not in ("", "ai.onnx"):
                raise UnsupportedGraphVersionError(f"node domain {domain!r} not supported")
    return node


def _parse_value_info(buf) -> OnnxInput:
    name = ""
    elem_type = 0
    dims = []
    for fno, _, val in wire.iter_fields(buf):
        if fno == 1:
            name = bytes(val).decode("utf-8")
        elif fno == 2:
            for f2, _, tensor_type in wire.iter_fields(val):
                if f2 != 1:  # only TypeProto.tensor_type
                    continue
                for f3, w3, v3 in wire.iter_fields(tensor_type):
                    if f3 == 1:
                        elem_type = v3
                    elif f3 == 2:
                        for f4, _, dim in wire.iter_fields(v3):
                            if f4 != 1:
                                continue
                            entry = None
                            for f5, w5, v5 in wire.iter_fields(dim):
                                if f5 == 1:
                                    entry = wire.to_int64(v5)
                                elif f5 == 2:
                                    entry = bytes(v5).decode("utf-8")
                            dims.append(entry)
    return OnnxInput(name=name, elem_type=elem_type, dims=dims)


def _parse_graph(buf) -> OnnxGraph:
    graph = OnnxGraph()
    for fno, _, val in wire.iter_fields(buf):
        if fno == 1:
            graph.nodes.append(_parse_node(val))
        elif fno == 2:
            graph.name = bytes(val).decode("utf-8")
        elif fno == 5:
            name, arr = _parse_tensor(val)
            graph.initializers[name] = arr
        elif fno == 11:
            graph.inputs.append(_parse_value_info(val))
        elif fno == 12:
            graph.outputs.append(_parse_value_info(val).name)
    return graph


def load_model(path) -> OnnxModel:
    """Parse an ONNX file; raises UnsupportedGraphVersionError when the
    ir_version/opset exceed what the executor understands."""
    with open(path, "rb") as fh:
        buf = memoryview(fh.read())
    ir_version = 0
    producer = ""
    opset = 0
    graph = None
    try:
        for fno, wt, val in wire.iter_fields(buf):
            if fno == 1:
                ir_version = val
            elif fno == 2:
                producer = bytes(val).decode("utf-8", errors="replace")
            elif fno == 7:
                graph = _parse_graph(val)
            elif fno == 8:
                domain = ""
                version = 0
                for f2, _, v2 in wire.iter_fields(val):
                    if f2 == 1:
                        domain = bytes(v2).decode("utf-8")
                    elif f2 == 2:
                        version = wire.to_int64(v2)
                if domain in ("", "ai.onnx"):
                    opset = max(opset, version)
    except wire.WireError as exc:
        raise UnsupportedGraphVersionError(f"{path}: not a readable ONNX file ({exc})") from exc
    if graph is None:
        raise UnsupportedGraphVersionError(f"{path}: no graph found")
    if ir_version > MAX_IR_VERSION:
        raise UnsupportedGraphVersionError(f"{path}: ir_version {ir_version} > {MAX_IR_VERSION}")
    if opset > MAX_OPSET:
        raise UnsupportedGraphVersionError(f"{path}: opset {opset} > {MAX_OPSET}")
    # graph-level inputs that are actually weights (older exporters) move
    # to initializers; the remaining inputs are the true feeds
    graph.inputs = [vi for vi in graph.inputs if vi.name not in graph.initializers]
    return OnnxModel(ir_version=ir_version, opset=opset, producer=producer, graph=graph)
