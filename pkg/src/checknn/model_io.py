"""Model loading, saving, and the weight transformations (prune, quantize).

Two on-disk formats are supported:

* The NNet text format used by the public ACAS Xu networks: ``//`` comment
  lines, a header with layer counts and sizes, normalization constants, and
  one comma-separated weight/bias block per layer.  All decimals are parsed
  exactly into rationals.  Hidden layers get relu, the output layer identity.
* A canonical JSON document for sparse models ("checknn-model v1"): the
  input arity plus, per layer, dims, activation, and the list of nonzero
  entries ``[row, col, value-token]``.  Round-trips are lossless and a
  second save of a loaded document is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import matrix
from .matrix import DenseMatrix, LazyMatrix, Matrix, RecordMatrix
from .network import Layer, Network, convert_network
from .scalar import (
    Scalar,
    is_terminating_decimal,
    parse_scalar_token,
    rat_from_decimal_string,
    rat_to_decimal_string,
    round_half_away_from_zero,
)

__all__ = [
    "ModelFormatError",
    "NNetModel",
    "parse_nnet",
    "parse_nnet_text",
    "load_nnet",
    "normalize_input",
    "denormalize_input",
    "prune",
    "quantize",
    "dequantize",
    "model_to_json",
    "model_from_json",
    "save_json",
    "load_json",
    "load_model",
]

JSON_FORMAT_TAG = "checknn-model v1"


class ModelFormatError(ValueError):
    """A model file does not conform to its format."""


@dataclass(frozen=True)
class NNetModel:
    """Parsed NNet artifact: the network plus its normalization metadata.

    ``means`` and ``ranges`` may carry one extra trailing entry (the output
    normalization slot present in the published ACAS Xu files); only the
    first ``input_arity`` entries take part in input normalization.
    """

    layer_sizes: tuple[int, ...]
    input_mins: tuple[Fraction, ...]
    input_maxes: tuple[Fraction, ...]
    means: tuple[Fraction, ...]
    ranges: tuple[Fraction, ...]
    network: Network

    @property
    def input_arity(self) -> int:
        return self.layer_sizes[0]


class _LineCursor:
    """Walks the data lines of an NNet file, tracking line numbers."""

    def __init__(self, text: str):
        self.rows: list[tuple[int, list[str]]] = []
        for n, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("//", 1)[0].strip()
            if not line:
                continue
            tokens = [t.strip() for t in line.split(",")]
            while tokens and tokens[-1] == "":
                tokens.pop()  # tolerate trailing commas
            if tokens:
                self.rows.append((n, tokens))
        self.pos = 0

    def next(self, section: str) -> tuple[int, list[str]]:
        if self.pos >= len(self.rows):
            raise ModelFormatError(f"truncated file: missing {section}")
        row = self.rows[self.pos]
        self.pos += 1
        return row

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.rows)


def _parse_decimal(token: str, lineno: int, section: str) -> Fraction:
    try:
        return rat_from_decimal_string(token)
    except ValueError as exc:
        raise ModelFormatError(f"line {lineno}: bad value in {section}: {exc}") from exc


def _parse_int(token: str, lineno: int, section: str) -> int:
    try:
        return int(token)
    except ValueError as exc:
        raise ModelFormatError(f"line {lineno}: bad integer in {section}: {token!r}") from exc


def _rational_line(cur: _LineCursor, section: str, allowed_lengths: Sequence[int]) -> tuple[Fraction, ...]:
    lineno, tokens = cur.next(section)
    if len(tokens) not in allowed_lengths:
        want = " or ".join(str(n) for n in allowed_lengths)
        raise ModelFormatError(
            f"line {lineno}: {section} has {len(tokens)} values, expected {want}"
        )
    return tuple(_parse_decimal(t, lineno, section) for t in tokens)


def parse_nnet_text(text: str) -> NNetModel:
    cur = _LineCursor(text)

    lineno, header = cur.next("header (numLayers, inputSize, outputSize, maxLayerSize)")
    if len(header) != 4:
        raise ModelFormatError(
            f"line {lineno}: header has {len(header)} values, expected 4"
        )
    num_layers, input_size, output_size, max_layer_size = (
        _parse_int(t, lineno, "header") for t in header
    )
    if num_layers < 1 or input_size < 1 or output_size < 1:
        raise ModelFormatError(f"line {lineno}: non-positive size in header")

    lineno, size_tokens = cur.next("layer sizes")
    if len(size_tokens) != num_layers + 1:
        raise ModelFormatError(
            f"line {lineno}: layer sizes line has {len(size_tokens)} values, "
            f"expected {num_layers + 1}"
        )
    sizes = tuple(_parse_int(t, lineno, "layer sizes") for t in size_tokens)
    if sizes[0] != input_size or sizes[-1] != output_size:
        raise ModelFormatError(
            f"line {lineno}: layer sizes disagree with header input/output sizes"
        )
    if max(sizes) > max_layer_size:
        raise ModelFormatError(
            f"line {lineno}: layer size {max(sizes)} exceeds declared maximum {max_layer_size}"
        )

    cur.next("symmetric flag")  # legacy field, value unused

    mins = _rational_line(cur, "input minimums", [input_size])
    maxes = _rational_line(cur, "input maximums", [input_size])
    means = _rational_line(cur, "means", [input_size, input_size + 1])
    ranges = _rational_line(cur, "ranges", [input_size, input_size + 1])
    for k, r in enumerate(ranges):
        if r == 0:
            raise ModelFormatError(f"range {k} is zero; normalization would divide by zero")
    for k, (lo, hi) in enumerate(zip(mins, maxes)):
        if lo > hi:
            raise ModelFormatError(f"input {k}: minimum {lo} exceeds maximum {hi}")

    layers = []
    for k in range(num_layers):
        n_in, n_out = sizes[k], sizes[k + 1]
        weight_rows = []
        for r in range(n_out):
            lineno, tokens = cur.next(f"layer {k} weight row {r}")
            if len(tokens) != n_in:
                raise ModelFormatError(
                    f"line {lineno}: layer {k} weight row {r} has {len(tokens)} values, "
                    f"expected {n_in}"
                )
            weight_rows.append(
                [_parse_decimal(t, lineno, f"layer {k} weights") for t in tokens]
            )
        biases = []
        for r in range(n_out):
            lineno, tokens = cur.next(f"layer {k} bias {r}")
            if len(tokens) != 1:
                raise ModelFormatError(
                    f"line {lineno}: layer {k} bias row {r} has {len(tokens)} values, expected 1"
                )
            biases.append(_parse_decimal(tokens[0], lineno, f"layer {k} biases"))
        combined = [
            (biases[r], *weight_rows[r]) for r in range(n_out)
        ]  # bias goes in column 0
        activation = "relu" if k < num_layers - 1 else "identity"
        layers.append(Layer(DenseMatrix(combined), activation))

    if not cur.exhausted:
        lineno, _ = cur.next("")
        raise ModelFormatError(f"line {lineno}: trailing data after last layer")

    net = Network(tuple(layers), input_size)
    return NNetModel(sizes, mins, maxes, means, ranges, net)


def parse_nnet(path: str) -> NNetModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_nnet_text(fh.read())


def load_nnet(path: str) -> Network:
    """Load an NNet file as a network (relu hidden layers, identity output)."""
    return parse_nnet(path).network


def normalize_input(model: NNetModel, raw: Sequence[Scalar]) -> list[Fraction]:
    """Clamp each raw input to its [min, max] range, then apply (x - mean) / range."""
    n = model.input_arity
    if len(raw) != n:
        raise ValueError(f"expected {n} inputs, got {len(raw)}")
    out = []
    for k, v in enumerate(raw):
        v = Fraction(v)
        v = min(max(v, model.input_mins[k]), model.input_maxes[k])
        out.append((v - model.means[k]) / model.ranges[k])
    return out


def denormalize_input(model: NNetModel, normalized: Sequence[Scalar]) -> list[Fraction]:
    n = model.input_arity
    if len(normalized) != n:
        raise ValueError(f"expected {n} inputs, got {len(normalized)}")
    return [Fraction(v) * model.ranges[k] + model.means[k] for k, v in enumerate(normalized)]


# ---------------------------------------------------------------------------
# Weight transformations.


def _rebuild_weights(template: Matrix, rows: int, cols: int, entries: dict) -> Matrix:
    """New weight matrix with the given entries, in the template's backend."""
    if isinstance(template, DenseMatrix):
        data = [[0] * cols for _ in range(rows)]
        for (i, j), v in entries.items():
            data[i][j] = v
        return DenseMatrix(data)
    if isinstance(template, LazyMatrix):
        table = dict(entries)
        return LazyMatrix(rows, cols, lambda i, j: table.get((i, j), 0))
    return RecordMatrix(rows, cols, entries)


def prune(net: Network, fraction) -> Network:
    """Zero out the smallest-magnitude non-bias weights, globally ranked.

    Exactly ``floor(fraction * count)`` positions are zeroed, where count is
    the total number of non-bias weight positions across all layers.  Ties in
    magnitude break by (layer, row, col) so the selection is deterministic,
    bias column 0 is never touched, and shapes are preserved.  Pruning the
    result again at the same fraction selects the already-zero positions, so
    the operation is idempotent, and the kept sets for increasing fractions
    are nested.
    """
    if isinstance(fraction, float):
        raise TypeError("prune fraction must be exact (int or Fraction), not float")
    fraction = Fraction(fraction)
    if not (0 <= fraction < 1):
        raise ValueError(f"prune fraction must be in [0, 1), got {fraction}")

    positions: list[tuple[Scalar, int, int, int]] = []  # (|w|, layer, row, col)
    for li, layer in enumerate(net.layers):
        w = layer.weights
        rows, cols = w.dims()
        stored = w.nonzero_entries()
        for i in range(rows):
            for j in range(1, cols):
                positions.append((abs(stored.get((i, j), 0)), li, i, j))
    total = len(positions)
    cut = (fraction.numerator * total) // fraction.denominator
    positions.sort(key=lambda p: (p[0], p[1], p[2], p[3]))
    selected: set[tuple[int, int, int]] = {(li, i, j) for _, li, i, j in positions[:cut]}

    new_layers = []
    for li, layer in enumerate(net.layers):
        w = layer.weights
        rows, cols = w.dims()
        entries = {
            (i, j): v
            for (i, j), v in w.nonzero_entries().items()
            if (li, i, j) not in selected
        }
        new_layers.append(Layer(_rebuild_weights(w, rows, cols, entries), layer.activation))
    return Network(tuple(new_layers), net.input_arity)


def quantize(net: Network, scale: int) -> Network:
    """Map every weight and bias w to round(w * scale), half away from zero.

    The result is a network over integer scalars.  Relu commutes with the
    positive scaling, so the activations are left untouched.
    """
    if not isinstance(scale, int) or scale < 1:
        raise ValueError(f"quantization scale must be a positive integer, got {scale!r}")
    new_layers = []
    for layer in net.layers:
        w = layer.weights
        rows, cols = w.dims()
        entries = {}
        for key, v in w.nonzero_entries().items():
            q = round_half_away_from_zero(Fraction(v) * scale)
            if q != 0:
                entries[key] = q
        new_layers.append(Layer(_rebuild_weights(w, rows, cols, entries), layer.activation))
    return Network(tuple(new_layers), net.input_arity)


def dequantize(net: Network, scale: int) -> Network:
    """Divide every weight and bias by the scale, back to rationals."""
    if not isinstance(scale, int) or scale < 1:
        raise ValueError(f"quantization scale must be a positive integer, got {scale!r}")
    new_layers = []
    for layer in net.layers:
        w = layer.weights
        rows, cols = w.dims()
        entries = {key: Fraction(v, scale) for key, v in w.nonzero_entries().items()}
        new_layers.append(Layer(_rebuild_weights(w, rows, cols, entries), layer.activation))
    return Network(tuple(new_layers), net.input_arity)


# ---------------------------------------------------------------------------
# Canonical JSON model documents.


def _render_value(v: Scalar) -> str:
    if isinstance(v, int):
        return str(v)
    v = Fraction(v)
    if v.denominator == 1:
        return str(v.numerator)
    if is_terminating_decimal(v):
        return rat_to_decimal_string(v)
    return f"{v.numerator}/{v.denominator}"


def model_to_json(net: Network) -> str:
    """Serialise a network as the canonical JSON document (sorted keys,
    entries in (row, col) order, two-space indent, trailing newline)."""
    layers = []
    for layer in net.layers:
        rows, cols = layer.weights.dims()
        entries = [
            [i, j, _render_value(v)]
            for (i, j), v in sorted(layer.weights.nonzero_entries().items())
        ]
        layers.append(
            {
                "rows": rows,
                "cols": cols,
                "activation": layer.activation,
                "entries": entries,
            }
        )
    doc = {"format": JSON_FORMAT_TAG, "input_arity": net.input_arity, "layers": layers}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def model_from_json(text: str, backend: str = "record") -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format") != JSON_FORMAT_TAG:
        raise ModelFormatError(
            f"unsupported model format tag {doc.get('format')!r}, expected {JSON_FORMAT_TAG!r}"
        )
    arity = doc.get("input_arity")
    if not isinstance(arity, int) or arity < 1:
        raise ModelFormatError(f"input_arity must be a positive integer, got {arity!r}")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list):
        raise ModelFormatError("layers must be a list")

    layers = []
    for k, rl in enumerate(raw_layers):
        if not isinstance(rl, dict):
            raise ModelFormatError(f"layer {k}: not a JSON object")
        try:
            rows, cols = rl["rows"], rl["cols"]
            activation = rl["activation"]
            raw_entries = rl["entries"]
        except KeyError as exc:
            raise ModelFormatError(f"layer {k}: missing field {exc.args[0]!r}") from exc
        if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 1 and cols >= 1):
            raise ModelFormatError(f"layer {k}: bad dims ({rows!r}, {cols!r})")
        entries: dict[tuple[int, int], Scalar] = {}
        for e in raw_entries:
            if not (isinstance(e, list) and len(e) == 3):
                raise ModelFormatError(f"layer {k}: entry {e!r} is not [row, col, value]")
            i, j, tok = e
            if not (isinstance(i, int) and isinstance(j, int)):
                raise ModelFormatError(f"layer {k}: entry indices must be integers: {e!r}")
            if not (0 <= i < rows and 0 <= j < cols):
                raise ModelFormatError(
                    f"layer {k}: entry ({i}, {j}) out of bounds for {rows}x{cols}"
                )
            if (i, j) in entries:
                raise ModelFormatError(f"layer {k}: duplicate entry at ({i}, {j})")
            try:
                value = parse_scalar_token(str(tok))
            except ValueError as exc:
                raise ModelFormatError(f"layer {k}: entry ({i}, {j}): {exc}") from exc
            if value == 0:
                raise ModelFormatError(
                    f"layer {k}: entry ({i}, {j}) stores the default value 0"
                )
            entries[(i, j)] = value
        weights = matrix.convert(RecordMatrix(rows, cols, entries), backend)
        layers.append(Layer(weights, activation))
    try:
        return Network(tuple(layers), arity)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc


def save_json(net: Network, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(net))


def load_json(path: str, backend: str = "record") -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read(), backend=backend)


def load_model(path: str, backend: str | None = None) -> Network:
    """Load either format by extension: .nnet text or .json sparse document."""
    if path.endswith(".nnet"):
        net = load_nnet(path)
        return convert_network(net, backend) if backend else net
    return load_json(path, backend=backend or "record")
