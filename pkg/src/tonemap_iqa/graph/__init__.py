"""ONNX-subset graph loading and execution."""

from .executor import GraphExecutor
from .onnx_reader import OnnxModel, load_model

__all__ = ["GraphExecutor", "OnnxModel", "load_model"]
