"""Portable forward-pass inference engine for trained deep CNNs.

Networks are described by a NetFile (layer setup plus the allocated_ram,
execution_mode and auto_tuning runtime parameters), weights live in
MessagePack parameter files, and execution is either sequential or
data-parallel with bitwise-identical results.
"""

from .autotune import DEFAULT_PROFILE, PROFILE_GRID, TuningProfile, tune
from .engine import Network, build_network, compute, mse
from .layers import ConvGeometry, ExecMode
from .modelstore import CachePlan, LayerParams, load_layer_params, plan_cache, write_layer_params
from .netfile import LayerSpec, NetConfig, NetFileError, format_netfile, parse_netfile, validate_shapes
from .tensor import Shape4, ShapeError, Tensor, conv_output_shape, pool_output_shape, tensor_at

__all__ = [
    "DEFAULT_PROFILE",
    "PROFILE_GRID",
    "TuningProfile",
    "tune",
    "Network",
    "build_network",
    "compute",
    "mse",
    "ConvGeometry",
    "ExecMode",
    "CachePlan",
    "LayerParams",
    "load_layer_params",
    "plan_cache",
    "write_layer_params",
    "LayerSpec",
    "NetConfig",
    "NetFileError",
    "format_netfile",
    "parse_netfile",
    "validate_shapes",
    "Shape4",
    "ShapeError",
    "Tensor",
    "conv_output_shape",
    "pool_output_shape",
    "tensor_at",
]

__version__ = "0.1.0"
