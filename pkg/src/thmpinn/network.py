"""Fully connected networks, one per field variable.

Each network maps the dimensionless space-time point to one scalar field.
Hidden layers use tanh (residuals need two smooth derivatives), the output
layer is linear. :func:`forward` records the evaluation on a
:class:`~thmpinn.autodiff.ScalarGraph` whose inputs are the point
coordinates followed by all parameters, so derivatives with respect to both
are available from the same graph. The vectorized training path lives in
:mod:`thmpinn.kernels`; this module is the reference implementation and the
(de)serialization point for transfer learning.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff
from .errors import (
    ArchitectureMismatchError,
    CorruptStreamError,
    InvalidArchitectureError,
    ShapeMismatchError,
)

_MAGIC = b"PTHM"
_VERSION = 1
_ACTIVATION_IDS = {"tanh": 0}
_ACTIVATION_NAMES = {0: "tanh"}


@dataclass
class NetworkParams:
    """Weights W^l (out x in) and biases b^l of one network."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )


def _check_sizes(layer_sizes) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise InvalidArchitectureError(
            f"need at least input and output layers, got {sizes}"
        )
    if any(s < 1 for s in sizes):
        raise InvalidArchitectureError(f"layer sizes must be positive, got {sizes}")
    return sizes


def init_glorot(layer_sizes, seed: int) -> NetworkParams:
    """Glorot-uniform weights on +-sqrt(6/(fan_in+fan_out)), zero biases."""
    sizes = _check_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(sizes, weights, biases)


@dataclass(frozen=True)
class ForwardRecord:
    """Result of recording one forward pass on a scalar graph.

    Graph inputs are ordered [coords..., params...] with parameters flattened
    layer by layer, weights row-major then biases (the file format order).
    """

    value: float
    graph: autodiff.ScalarGraph
    input_values: np.ndarray
    n_coords: int

    @property
    def coord_indices(self) -> range:
        return range(self.n_coords)

    @property
    def param_indices(self) -> range:
        return range(self.n_coords, self.input_values.shape[0])


def forward(params: NetworkParams, point) -> ForwardRecord:
    """Evaluate the network at `point`, recording a differentiable graph."""
    point = np.asarray(point, dtype=np.float64)
    d = params.layer_sizes[0]
    if point.shape != (d,):
        raise ShapeMismatchError(
            f"network expects {d} inputs, got point of shape {point.shape}"
        )
    builder = autodiff.GraphBuilder()
    coords = [builder.input() for _ in range(d)]
    param_vars: list[autodiff.Var] = []
    param_values: list[float] = []

    def param_input(value: float) -> autodiff.Var:
        v = builder.input()
        param_vars.append(v)
        param_values.append(float(value))
        return v

    z = coords
    n_layers = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        w_vars = [[param_input(w[o, i]) for i in range(w.shape[1])]
                  for o in range(w.shape[0])]
        b_vars = [param_input(b[o]) for o in range(b.shape[0])]
        z_next = []
        for o in range(w.shape[0]):
            acc = b_vars[o]
            for i in range(w.shape[1]):
                acc = acc + w_vars[o][i] * z[i]
            if l < n_layers - 1:
                acc = acc.tanh()
            z_next.append(acc)
        z = z_next
    graph = builder.build(z[0])
    input_values = np.concatenate([point, np.asarray(param_values)])
    return ForwardRecord(
        value=autodiff.evaluate(graph, input_values),
        graph=graph,
        input_values=input_values,
        n_coords=d,
    )


def params_to_vector(params: NetworkParams) -> np.ndarray:
    """Flatten in graph/file order: per layer, weights row-major then biases."""
    return np.concatenate(
        [a.ravel() for w, b in zip(params.weights, params.biases) for a in (w, b)]
    )


def vector_to_params(vector: np.ndarray, like: NetworkParams) -> NetworkParams:
    weights, biases = [], []
    pos = 0
    for w, b in zip(like.weights, like.biases):
        weights.append(vector[pos:pos + w.size].reshape(w.shape).copy())
        pos += w.size
        biases.append(vector[pos:pos + b.size].copy())
        pos += b.size
    if pos != vector.shape[0]:
        raise ShapeMismatchError(
            f"vector of length {vector.shape[0]} does not match "
            f"{like.n_params} parameters"
        )
    return NetworkParams(like.layer_sizes, weights, biases, like.activation)


def save_params(params: NetworkParams) -> bytes:
    """Serialize to the PTHM byte format (little-endian float64)."""
    sizes = params.layer_sizes
    head = _MAGIC + struct.pack(
        "<II", _VERSION, len(sizes)
    ) + struct.pack(f"<{len(sizes)}I", *sizes) + struct.pack(
        "<I", _ACTIVATION_IDS[params.activation]
    )
    body = b"".join(
        a.astype("<f8").tobytes()
        for w, b in zip(params.weights, params.biases)
        for a in (w, b)
    )
    return head + body


def load_params(stream: bytes, expected_layer_sizes=None) -> NetworkParams:
    """Inverse of :func:`save_params`; round-trips bit-exactly."""
    if len(stream) < 12 or stream[:4] != _MAGIC:
        raise CorruptStreamError("missing PTHM magic header")
    version, n_layers = struct.unpack_from("<II", stream, 4)
    if version != _VERSION:
        raise CorruptStreamError(f"unsupported version {version}")
    pos = 12
    if len(stream) < pos + 4 * n_layers + 4:
        raise CorruptStreamError("truncated header")
    sizes = struct.unpack_from(f"<{n_layers}I", stream, pos)
    pos += 4 * n_layers
    (activation_id,) = struct.unpack_from("<I", stream, pos)
    pos += 4
    if activation_id not in _ACTIVATION_NAMES:
        raise CorruptStreamError(f"unknown activation id {activation_id}")
    try:
        sizes = _check_sizes(sizes)
    except InvalidArchitectureError as exc:
        raise CorruptStreamError(str(exc)) from exc
    if expected_layer_sizes is not None and sizes != tuple(expected_layer_sizes):
        raise ArchitectureMismatchError(
            f"expected layer sizes {tuple(expected_layer_sizes)}, got {sizes}"
        )
    n_values = sum(
        o * i + o for i, o in zip(sizes[:-1], sizes[1:])
    )
    if len(stream) != pos + 8 * n_values:
        raise CorruptStreamError(
            f"expected {pos + 8 * n_values} bytes for {sizes}, got {len(stream)}"
        )
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(stream, dtype="<f8", count=fan_out * fan_in, offset=pos)
        pos += 8 * fan_out * fan_in
        b = np.frombuffer(stream, dtype="<f8", count=fan_out, offset=pos)
        pos += 8 * fan_out
        weights.append(w.reshape(fan_out, fan_in).astype(np.float64))
        biases.append(b.astype(np.float64))
    params = NetworkParams(sizes, weights, biases, _ACTIVATION_NAMES[activation_id])
    if not all(np.all(np.isfinite(w)) for w in weights) or not all(
        np.all(np.isfinite(b)) for b in biases
    ):
        raise CorruptStreamError("non-finite parameter values in stream")
    return params
