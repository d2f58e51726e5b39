"""Fully connected networks over exact scalars.

A layer is a weight matrix of shape ``n_nodes x (n_inputs + 1)`` whose
column 0 holds the biases.  Inputs travel as 1 x n row matrices; the
forward pass prepends the constant 1 to the input row so that each node
is a single dot product against its weight row, followed by the layer's
activation (relu or identity).  A network is a left-to-right composition
of layers; an empty layer list is the identity function on inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import matrix
from .matrix import (
    DenseMatrix,
    DimensionError,
    LazyMatrix,
    Matrix,
    RecordMatrix,
    dot_product,
)
from .scalar import Scalar

__all__ = [
    "relu",
    "identity",
    "ACTIVATIONS",
    "Layer",
    "Network",
    "ClassLabel",
    "fc_forward",
    "forward",
    "argmax_label",
    "input_row",
    "output_values",
    "convert_network",
    "all_integer_weights",
]


def relu(x: Scalar) -> Scalar:
    return x if x > 0 else 0


def identity(x: Scalar) -> Scalar:
    return x


ACTIVATIONS = {"relu": relu, "identity": identity}


@dataclass(frozen=True)
class Layer:
    """One fully connected layer: weights with a leading bias column."""

    weights: Matrix
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.col_count < 1:
            raise ValueError("layer weights need at least the bias column")
        if self.weights.row_count < 1:
            raise ValueError("layer needs at least one node")

    @property
    def n_nodes(self) -> int:
        return self.weights.row_count

    @property
    def n_inputs(self) -> int:
        return self.weights.col_count - 1

    def bias(self, j: int) -> Scalar:
        return matrix._get_or_default(self.weights, j, 0)


@dataclass(frozen=True)
class Network:
    """A chain of layers; layer 0 consumes ``input_arity`` inputs."""

    layers: tuple[Layer, ...]
    input_arity: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_arity < 1:
            raise ValueError("input arity must be positive")
        expected = self.input_arity
        for k, layer in enumerate(self.layers):
            if layer.n_inputs != expected:
                raise ValueError(
                    f"layer {k} expects {layer.n_inputs} inputs, "
                    f"previous stage produces {expected}"
                )
            expected = layer.n_nodes

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].n_nodes if self.layers else self.input_arity


@dataclass(frozen=True)
class ClassLabel:
    name: str
    index: int


def input_row(values: Sequence[Scalar], backend: str = "dense") -> Matrix:
    """Build a 1 x n input matrix in the requested backend."""
    vals = list(values)
    if backend == "dense":
        return DenseMatrix((vals,))
    if backend == "record":
        return RecordMatrix(1, len(vals), {(0, j): v for j, v in enumerate(vals)})
    if backend == "lazy":
        return LazyMatrix(1, len(vals), lambda i, j: vals[j])
    raise ValueError(f"unknown backend {backend!r}")


def output_values(m: Matrix) -> list[Scalar]:
    """Materialise a 1 x k output row as a plain list."""
    return [matrix._get_or_default(m, 0, j) for j in range(m.col_count)]


def _prepend_one(x: Matrix) -> Matrix:
    """Return the 1 x (n+1) row (1, x0, ..., x_{n-1}) in x's own backend."""
    n = x.col_count
    if isinstance(x, DenseMatrix):
        row = x.data[0] if x.row_count else ()
        return DenseMatrix(((1, *row),))
    if isinstance(x, RecordMatrix):
        shifted = {(0, j + 1): v for (_, j), v in x.entries.items()}
        shifted[(0, 0)] = 1
        return RecordMatrix(1, n + 1, shifted)
    return LazyMatrix(1, n + 1, lambda i, j: 1 if j == 0 else x.get(0, j - 1))


def fc_forward(layer: Layer, x: Matrix) -> Matrix:
    """Apply one layer to a 1 x n_inputs row.

    Output node j is ``activation(dot(weights row j, (1, x)))``; the
    prepended 1 pairs with the bias in weight column 0.  The result stays in
    the layer's backend.  For the lazy backend nothing is computed until an
    output element is queried; per-node results are cached in the returned
    view so deep compositions stay linear in network size.
    """
    weights = layer.weights
    act = ACTIVATIONS[layer.activation]
    if isinstance(weights, DenseMatrix):
        if x.dims() != (1, layer.n_inputs):
            raise DimensionError(
                f"fc_forward: invalid length. expected 1x{layer.n_inputs} input, "
                f"got {x.dims()[0]}x{x.dims()[1]}"
            )
    if x.backend != weights.backend:
        x = matrix.convert(x, weights.backend)
    aug = _prepend_one(x)
    n_nodes = layer.n_nodes
    if isinstance(weights, LazyMatrix):
        cache: dict[int, Scalar] = {}

        def node(j: int) -> Scalar:
            if j not in cache:
                cache[j] = act(dot_product(weights.nth_row(j), aug))
            return cache[j]

        return LazyMatrix(1, n_nodes, lambda i, j: node(j))
    values = [act(dot_product(weights.nth_row(j), aug)) for j in range(n_nodes)]
    if isinstance(weights, RecordMatrix):
        return RecordMatrix(1, n_nodes, {(0, j): v for j, v in enumerate(values)})
    return DenseMatrix((values,))


def forward(net: Network, x: Matrix) -> Matrix:
    """Run the full network; with no layers the input passes through unchanged."""
    for layer in net.layers:
        x = fc_forward(layer, x)
    return x


def argmax_label(output: Matrix, labels: Sequence[ClassLabel]) -> ClassLabel:
    """Pick the label whose output component is maximal; ties go to the
    lowest index (a chain of >= comparisons, so the first maximum wins)."""
    if not labels:
        raise ValueError("argmax_label needs at least one label")
    values = [matrix._get_or_default(output, 0, lab.index) for lab in labels]
    best = 0
    for k in range(1, len(values)):
        if values[k] > values[best]:
            best = k
    return labels[best]


def convert_network(net: Network, backend: str) -> Network:
    """Re-represent every layer's weights in the given backend."""
    return Network(
        tuple(Layer(matrix.convert(l.weights, backend), l.activation) for l in net.layers),
        net.input_arity,
    )


def all_integer_weights(net: Network) -> bool:
    """True when every weight and bias is an integer (quantised scalar kind)."""
    for layer in net.layers:
        for v in layer.weights.nonzero_entries().values():
            if isinstance(v, int):
                continue
            if isinstance(v, Fraction) and v.denominator == 1:
                continue
            return False
    return True
