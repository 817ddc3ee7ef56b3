"""Recorded scalar computation graphs with exact first and second derivatives.

A :class:`GraphBuilder` records elementary operations on scalar variables
into a flat, append-only node table. The frozen :class:`ScalarGraph` can then
be evaluated and differentiated any number of times:

* ``evaluate``  -- one forward sweep in topological (= recording) order,
* ``gradient``  -- one reverse sweep, giving d(output)/d(input_i) for all i,
* ``second_derivative`` -- gradient of a recorded tangent graph
  (:func:`tangent_graph`), one tangent direction per needed input.

Network parameters are recorded as ordinary graph inputs, so the same two
sweeps deliver both point derivatives (for PDE residuals) and parameter
derivatives (for optimization). Graphs are immutable after construction;
evaluation allocates its own work arrays, so distinct points may be
evaluated concurrently. All arithmetic is float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import jit
from .errors import NonFiniteValueError

OP_INPUT = 0
OP_CONST = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_POW = 7  # constant exponent in aux
OP_TANH = 8
OP_EXP = 9
OP_LN = 10
OP_SQUARE = 11

OP_NAMES = (
    "input", "constant", "add", "sub", "mul", "div",
    "neg", "pow_const", "tanh", "exp", "ln", "square",
)

_ARITY = (0, 0, 2, 2, 2, 2, 1, 1, 1, 1, 1, 1)


@dataclass(frozen=True)
class Node:
    """One recorded operation: opcode, parent ids, auxiliary constant."""

    op: int
    parents: tuple[int, ...]
    aux: float = 0.0

    @property
    def op_name(self) -> str:
        return OP_NAMES[self.op]


@dataclass(frozen=True)
class ScalarGraph:
    """Frozen DAG of scalar operations; parents of node i have ids < i."""

    op: np.ndarray      # int64 (n,)
    pa: np.ndarray      # int64 (n,) parent 0, -1 if none
    pb: np.ndarray      # int64 (n,) parent 1, -1 if none
    aux: np.ndarray     # float64 (n,) constant value / pow exponent
    inputs: np.ndarray  # int64 ids of input nodes, in declaration order
    output: int

    @property
    def n_nodes(self) -> int:
        return self.op.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[0]

    def node(self, i: int) -> Node:
        parents = tuple(
            p for p in (int(self.pa[i]), int(self.pb[i])) if p >= 0
        )[: _ARITY[self.op[i]]]
        return Node(int(self.op[i]), parents, float(self.aux[i]))


class Var:
    """Handle to a node during recording; supports arithmetic operators."""

    __slots__ = ("builder", "id")

    def __init__(self, builder: "GraphBuilder", node_id: int):
        self.builder = builder
        self.id = node_id

    def _coerce(self, other) -> "Var":
        if isinstance(other, Var):
            if other.builder is not self.builder:
                raise ValueError("cannot mix nodes from different builders")
            return other
        return self.builder.const(float(other))

    def __add__(self, other):
        return self.builder._append(OP_ADD, self.id, self._coerce(other).id)

    def __radd__(self, other):
        return self._coerce(other).__add__(self)

    def __sub__(self, other):
        return self.builder._append(OP_SUB, self.id, self._coerce(other).id)

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        return self.builder._append(OP_MUL, self.id, self._coerce(other).id)

    def __rmul__(self, other):
        return self._coerce(other).__mul__(self)

    def __truediv__(self, other):
        return self.builder._append(OP_DIV, self.id, self._coerce(other).id)

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __neg__(self):
        return self.builder._append(OP_NEG, self.id)

    def __pow__(self, exponent):
        if isinstance(exponent, Var):
            raise TypeError("only constant exponents are supported")
        return self.builder._append(OP_POW, self.id, aux=float(exponent))

    def tanh(self):
        return self.builder._append(OP_TANH, self.id)

    def exp(self):
        return self.builder._append(OP_EXP, self.id)

    def log(self):
        return self.builder._append(OP_LN, self.id)

    def square(self):
        return self.builder._append(OP_SQUARE, self.id)


def tanh(v: Var) -> Var:
    return v.tanh()


def exp(v: Var) -> Var:
    return v.exp()


def log(v: Var) -> Var:
    return v.log()


def square(v: Var) -> Var:
    return v.square()


class GraphBuilder:
    """Append-only recorder producing a :class:`ScalarGraph`."""

    def __init__(self):
        self._op: list[int] = []
        self._pa: list[int] = []
        self._pb: list[int] = []
        self._aux: list[float] = []
        self._inputs: list[int] = []
        self._const_cache: dict[float, int] = {}

    def _append(self, op: int, a: int = -1, b: int = -1, aux: float = 0.0) -> Var:
        self._op.append(op)
        self._pa.append(a)
        self._pb.append(b)
        self._aux.append(aux)
        return Var(self, len(self._op) - 1)

    def input(self) -> Var:
        v = self._append(OP_INPUT)
        self._inputs.append(v.id)
        return v

    def const(self, value: float) -> Var:
        value = float(value)
        node_id = self._const_cache.get(value)
        if node_id is None:
            node_id = self._append(OP_CONST, aux=value).id
            self._const_cache[value] = node_id
        return Var(self, node_id)

    def build(self, output: Var) -> ScalarGraph:
        return ScalarGraph(
            op=np.asarray(self._op, dtype=np.int64),
            pa=np.asarray(self._pa, dtype=np.int64),
            pb=np.asarray(self._pb, dtype=np.int64),
            aux=np.asarray(self._aux, dtype=np.float64),
            inputs=np.asarray(self._inputs, dtype=np.int64),
            output=output.id,
        )


@jit
def _forward_sweep(op, pa, pb, aux, values):
    """Fill `values` in recording order; return first non-finite node or -1."""
    n = op.shape[0]
    for i in range(n):
        o = op[i]
        if o == 0:          # input, prefilled
            v = values[i]
        elif o == 1:        # constant
            v = aux[i]
        elif o == 2:
            v = values[pa[i]] + values[pb[i]]
        elif o == 3:
            v = values[pa[i]] - values[pb[i]]
        elif o == 4:
            v = values[pa[i]] * values[pb[i]]
        elif o == 5:
            v = values[pa[i]] / values[pb[i]]
        elif o == 6:
            v = -values[pa[i]]
        elif o == 7:
            v = values[pa[i]] ** aux[i]
        elif o == 8:
            v = math.tanh(values[pa[i]])
        elif o == 9:
            v = math.exp(values[pa[i]])
        elif o == 10:
            v = math.log(values[pa[i]]) if values[pa[i]] > 0.0 else math.nan
        else:
            v = values[pa[i]] * values[pa[i]]
        values[i] = v
        if not math.isfinite(v):
            return i
    return -1


@jit
def _reverse_sweep(op, pa, pb, aux, values, adjoint, output):
    """Accumulate d(output)/d(node) into `adjoint`; return bad node or -1."""
    adjoint[output] = 1.0
    for i in range(op.shape[0] - 1, -1, -1):
        g = adjoint[i]
        if g == 0.0:
            continue
        if not math.isfinite(g):
            return i
        o = op[i]
        if o == 2:
            adjoint[pa[i]] += g
            adjoint[pb[i]] += g
        elif o == 3:
            adjoint[pa[i]] += g
            adjoint[pb[i]] -= g
        elif o == 4:
            adjoint[pa[i]] += g * values[pb[i]]
            adjoint[pb[i]] += g * values[pa[i]]
        elif o == 5:
            adjoint[pa[i]] += g / values[pb[i]]
            adjoint[pb[i]] -= g * values[i] / values[pb[i]]
        elif o == 6:
            adjoint[pa[i]] -= g
        elif o == 7:
            adjoint[pa[i]] += g * aux[i] * values[pa[i]] ** (aux[i] - 1.0)
        elif o == 8:
            adjoint[pa[i]] += g * (1.0 - values[i] * values[i])
        elif o == 9:
            adjoint[pa[i]] += g * values[i]
        elif o == 10:
            adjoint[pa[i]] += g / values[pa[i]]
        elif o == 11:
            adjoint[pa[i]] += 2.0 * values[pa[i]] * g
    return -1


def _forward_values(graph: ScalarGraph, input_values) -> np.ndarray:
    x = np.asarray(input_values, dtype=np.float64)
    if x.shape != (graph.n_inputs,):
        raise ValueError(
            f"expected {graph.n_inputs} input values, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("non-finite input value")
    values = np.zeros(graph.n_nodes, dtype=np.float64)
    values[graph.inputs] = x
    bad = _forward_sweep(graph.op, graph.pa, graph.pb, graph.aux, values)
    if bad >= 0:
        raise NonFiniteValueError(
            f"non-finite value at node {bad} (op {OP_NAMES[graph.op[bad]]})"
        )
    return values


def evaluate(graph: ScalarGraph, input_values) -> float:
    """Forward pass; deterministic for identical inputs."""
    return float(_forward_values(graph, input_values)[graph.output])


def gradient(graph: ScalarGraph, input_values) -> np.ndarray:
    """d(output)/d(input_i) for all inputs via one reverse sweep."""
    values = _forward_values(graph, input_values)
    adjoint = np.zeros(graph.n_nodes, dtype=np.float64)
    bad = _reverse_sweep(
        graph.op, graph.pa, graph.pb, graph.aux, values, adjoint, graph.output
    )
    grad = adjoint[graph.inputs]
    if bad >= 0 or not np.all(np.isfinite(grad)):
        raise NonFiniteValueError("non-finite adjoint in reverse sweep")
    return grad


def tangent_graph(graph: ScalarGraph, seed) -> ScalarGraph:
    """Record the directional derivative of `graph` along `seed`.

    Returns a new graph over the same inputs whose output is
    sum_j seed[j] * d(output)/d(input_j). Zero tangents are folded away, so
    a one-hot seed produces a graph roughly twice the original size rather
    than one scaled by the number of inputs.
    """
    seed = np.asarray(seed, dtype=np.float64)
    if seed.shape != (graph.n_inputs,):
        raise ValueError(
            f"expected {graph.n_inputs} seed values, got shape {seed.shape}"
        )
    n0 = graph.n_nodes
    op = list(graph.op)
    pa = list(graph.pa)
    pb = list(graph.pb)
    aux = list(graph.aux)
    const_cache: dict[float, int] = {}

    def new(o: int, a: int = -1, b: int = -1, x: float = 0.0) -> int:
        op.append(o)
        pa.append(a)
        pb.append(b)
        aux.append(x)
        return len(op) - 1

    def const(value: float) -> int:
        node_id = const_cache.get(value)
        if node_id is None:
            node_id = new(OP_CONST, x=value)
            const_cache[value] = node_id
        return node_id

    zero = const(0.0)
    seed_of = {int(node): float(s) for node, s in zip(graph.inputs, seed)}
    tan = np.empty(n0, dtype=np.int64)

    def add_fold(t1: int, t2: int) -> int:
        if t1 == zero:
            return t2
        if t2 == zero:
            return t1
        return new(OP_ADD, t1, t2)

    for i in range(n0):
        o = graph.op[i]
        a = graph.pa[i]
        b = graph.pb[i]
        if o == OP_INPUT:
            s = seed_of[i]
            t = zero if s == 0.0 else const(s)
        elif o == OP_CONST:
            t = zero
        elif o == OP_ADD:
            t = add_fold(tan[a], tan[b])
        elif o == OP_SUB:
            ta, tb = tan[a], tan[b]
            if tb == zero:
                t = ta
            elif ta == zero:
                t = new(OP_NEG, tb)
            else:
                t = new(OP_SUB, ta, tb)
        elif o == OP_MUL:
            ta, tb = tan[a], tan[b]
            left = zero if ta == zero else new(OP_MUL, ta, b)
            right = zero if tb == zero else new(OP_MUL, a, tb)
            t = add_fold(left, right)
        elif o == OP_DIV:
            ta, tb = tan[a], tan[b]
            left = zero if ta == zero else new(OP_DIV, ta, b)
            if tb == zero:
                right = zero
            else:
                right = new(OP_DIV, new(OP_MUL, i, tb), b)
            if right == zero:
                t = left
            elif left == zero:
                t = new(OP_NEG, right)
            else:
                t = new(OP_SUB, left, right)
        elif o == OP_NEG:
            t = zero if tan[a] == zero else new(OP_NEG, tan[a])
        elif o == OP_POW:
            if tan[a] == zero:
                t = zero
            else:
                p = graph.aux[i]
                lowered = new(OP_POW, a, x=p - 1.0)
                t = new(OP_MUL, const(p), new(OP_MUL, lowered, tan[a]))
        elif o == OP_TANH:
            if tan[a] == zero:
                t = zero
            else:
                sech2 = new(OP_SUB, const(1.0), new(OP_SQUARE, i))
                t = new(OP_MUL, sech2, tan[a])
        elif o == OP_EXP:
            t = zero if tan[a] == zero else new(OP_MUL, i, tan[a])
        elif o == OP_LN:
            t = zero if tan[a] == zero else new(OP_DIV, tan[a], a)
        else:  # OP_SQUARE
            if tan[a] == zero:
                t = zero
            else:
                t = new(OP_MUL, const(2.0), new(OP_MUL, a, tan[a]))
        tan[i] = t

    return ScalarGraph(
        op=np.asarray(op, dtype=np.int64),
        pa=np.asarray(pa, dtype=np.int64),
        pb=np.asarray(pb, dtype=np.int64),
        aux=np.asarray(aux, dtype=np.float64),
        inputs=graph.inputs.copy(),
        output=int(tan[graph.output]),
    )


def second_derivative(graph: ScalarGraph, input_values, i: int, j: int) -> float:
    """d2(output)/d(input_i)d(input_j) via tangent propagation + reverse sweep."""
    n = graph.n_inputs
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"input indices ({i}, {j}) out of range for {n} inputs")
    seed = np.zeros(n)
    seed[j] = 1.0
    return float(gradient(tangent_graph(graph, seed), input_values)[i])
