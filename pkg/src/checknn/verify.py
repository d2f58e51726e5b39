"""Verification engines over exact rational arithmetic.

Three engines with different completeness/cost trade-offs:

* ``verify_interval`` -- sound interval bound propagation refined by
  branch-and-bound box splitting.  ``Holds`` is a proof over the whole box;
  counterexamples are concrete points re-checked with a real forward pass.
  Budget exhaustion yields ``Timeout``, never a wrong answer.
* ``verify_exhaustive_quantised`` -- complete enumeration of an integer
  grid for quantised (integer-weight) networks, with a hard evaluation cap
  it refuses to exceed.
* ``falsify_random`` -- seeded random sampling that can only ever produce
  counterexamples or ``Unknown``, never ``Holds``.

``check_monotone`` supports the structural monotonicity argument: networks
whose non-bias weights are all nonnegative (with relu/identity
activations) are componentwise monotone, which the tested half probes with
random ordered input pairs.
"""

from __future__ import annotations

import itertools
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from time import perf_counter
from typing import Sequence

from .network import (
    Layer,
    Network,
    all_integer_weights,
    forward,
    input_row,
    output_values,
)
from .property import LinearAtom, Property, Verdict, eval_postcondition, sat_label
from .scalar import Scalar, format_exact

__all__ = [
    "Budget",
    "VerifyStats",
    "MonotoneReport",
    "EnumerationCapError",
    "DEFAULT_ENUM_CAP",
    "ENUM_CAP_ENV",
    "interval_affine",
    "verify_interval",
    "verify_exhaustive_quantised",
    "falsify_random",
    "check_monotone",
    "report_dict",
]

Bounds = tuple[tuple[Scalar, Scalar], ...]

DEFAULT_ENUM_CAP = 10**6
ENUM_CAP_ENV = "CHECKNN_ENUM_CAP"


class EnumerationCapError(RuntimeError):
    """The requested grid is larger than the evaluation cap."""


@dataclass(frozen=True)
class Budget:
    """Search limits for branch-and-bound.  All limits are >= 0; the wall
    clock limit is in seconds and is the one knob that can make verdicts
    run-dependent, so it defaults to off."""

    max_splits: int = 1000
    max_depth: int = 200
    wall_clock_limit: float | None = None

    def __post_init__(self):
        if self.max_splits < 0 or self.max_depth < 0:
            raise ValueError("budget limits must be >= 0")
        if self.wall_clock_limit is not None and self.wall_clock_limit < 0:
            raise ValueError("wall clock limit must be >= 0")


@dataclass
class VerifyStats:
    splits: int = 0
    depth: int = 0
    evaluations: int = 0
    elapsed_ms: float = 0.0


@dataclass(frozen=True)
class MonotoneReport:
    """structural: every non-bias weight is >= 0 (the proof obligation).
    tested: random ordered nonneg input pairs kept componentwise order."""

    structural: bool
    tested: bool
    trials: int
    witness: tuple[tuple[Scalar, ...], tuple[Scalar, ...]] | None = None


# ---------------------------------------------------------------------------
# Interval propagation.


@dataclass(frozen=True)
class _CompiledLayer:
    is_relu: bool
    biases: tuple[Scalar, ...]
    terms: tuple[tuple[tuple[int, Scalar], ...], ...]  # per node: (input idx, weight)


def _compile_layer(layer: Layer) -> _CompiledLayer:
    w = layer.weights
    n_nodes = layer.n_nodes
    stored = w.nonzero_entries()
    biases = tuple(stored.get((j, 0), 0) for j in range(n_nodes))
    per_node: list[list[tuple[int, Scalar]]] = [[] for _ in range(n_nodes)]
    for (i, j), v in stored.items():
        if j == 0:
            continue
        per_node[i].append((j - 1, v))
    for lst in per_node:
        lst.sort()
    return _CompiledLayer(
        layer.activation == "relu",
        biases,
        tuple(tuple(lst) for lst in per_node),
    )


def _compile(net: Network) -> tuple[_CompiledLayer, ...]:
    return tuple(_compile_layer(l) for l in net.layers)


def _propagate_layer(lay: _CompiledLayer, bounds: Sequence[tuple[Scalar, Scalar]]):
    new = []
    for bias, terms in zip(lay.biases, lay.terms):
        lo = hi = bias
        for k, w in terms:
            l, u = bounds[k]
            if w >= 0:
                lo += w * l
                hi += w * u
            else:
                lo += w * u
                hi += w * l
        if lay.is_relu:
            if lo < 0:
                lo = 0
            if hi < 0:
                hi = 0
        new.append((lo, hi))
    return new


def _propagate(compiled: Sequence[_CompiledLayer], box: Sequence[tuple[Scalar, Scalar]]):
    bounds = list(box)
    for lay in compiled:
        bounds = _propagate_layer(lay, bounds)
    return bounds


def interval_affine(layer: Layer, box: Sequence[tuple[Scalar, Scalar]]):
    """Exact interval image of one layer.

    For node j with bias b and non-bias weights w, the pre-activation range
    is [b + sum(w+ * lo + w- * hi), b + sum(w+ * hi + w- * lo)] where w+/w-
    are the positive/negative parts; relu then clamps both ends at 0.  A
    degenerate box (lo = hi everywhere) propagates to the exact forward
    image of that point.
    """
    if len(box) != layer.n_inputs:
        raise ValueError(f"box arity {len(box)} != layer inputs {layer.n_inputs}")
    for k, (lo, hi) in enumerate(box):
        if lo > hi:
            raise ValueError(f"input {k}: empty interval [{lo}, {hi}]")
    return _propagate_layer(_compile_layer(layer), list(box))


def _atom_range(atom: LinearAtom, out_bounds) -> tuple[Scalar, Scalar]:
    smin: Scalar = 0
    smax: Scalar = 0
    for k, c in atom.coeffs:
        l, u = out_bounds[k]
        if c >= 0:
            smin += c * l
            smax += c * u
        else:
            smin += c * u
            smax += c * l
    return smin, smax


def _atom_proven(atom: LinearAtom, out_bounds) -> bool:
    """Interval bounds prove the atom over the whole box.  Strict atoms are
    only proven by strict bound comparisons."""
    smin, smax = _atom_range(atom, out_bounds)
    if atom.relation == "<=":
        return smax <= atom.bound
    if atom.relation == "<":
        return smax < atom.bound
    if atom.relation == ">=":
        return smin >= atom.bound
    return smin > atom.bound


def _check_arity(net: Network, prop: Property) -> None:
    if prop.arity != net.input_arity:
        raise ValueError(
            f"property has {prop.arity} inputs, network expects {net.input_arity}"
        )
    n_out = net.n_outputs
    for atom in prop.atoms:
        if atom.max_index >= n_out:
            raise ValueError(
                f"atom references output y{atom.max_index}, network has {n_out} outputs"
            )


# ---------------------------------------------------------------------------
# Branch and bound.


def _widths(box: Bounds):
    return [hi - lo for lo, hi in box]


def _widest_dim(box: Bounds) -> int | None:
    """Index of the widest dimension, ties to the lowest index; None for a point."""
    best, best_w = None, 0
    for k, w in enumerate(_widths(box)):
        if w > best_w:
            best, best_w = k, w
    return best


def _splittable(box: Bounds, integral: bool) -> bool:
    dim = _widest_dim(box)
    if dim is None:
        return False
    width = box[dim][1] - box[dim][0]
    if integral:
        return width >= 2
    return width > 0


def _split_box(box: Bounds, integral: bool) -> tuple[Bounds, Bounds]:
    dim = _widest_dim(box)
    lo, hi = box[dim]
    mid = (lo + hi) // 2 if integral else (lo + hi) / 2
    left = tuple((lo, mid) if k == dim else b for k, b in enumerate(box))
    right = tuple((mid, hi) if k == dim else b for k, b in enumerate(box))
    return left, right


def _probe_points(box: Bounds, integral: bool) -> list[tuple[Scalar, ...]]:
    mids = [(lo + hi) / 2 for lo, hi in box]
    if not integral:
        return [tuple(mids)]
    floor_pt = tuple(math.floor(m) for m in mids)
    ceil_pt = tuple(math.ceil(m) for m in mids)
    return [floor_pt] if floor_pt == ceil_pt else [floor_pt, ceil_pt]


class _IntervalSearch:
    """Depth-first box refinement.  Left child of every split is explored
    first, so the first counterexample found is the one with the
    lexicographically smallest split path."""

    def __init__(self, net, compiled, prop, max_depth, deadline, integral):
        self.net = net
        self.compiled = compiled
        self.prop = prop
        self.max_depth = max_depth
        self.deadline = deadline
        self.integral = integral

    def _probe(self, box: Bounds, stats: VerifyStats) -> Verdict | None:
        for point in _probe_points(box, self.integral):
            out = output_values(forward(self.net, input_row(point)))
            stats.evaluations += 1
            ok, _ = eval_postcondition(self.prop, out)
            if not ok:
                return Verdict.counterexample(point, out)
        return None

    def run(self, root: Bounds, root_depth: int, max_splits: int, stats: VerifyStats) -> Verdict:
        stack: list[tuple[Bounds, int]] = [(root, root_depth)]
        exhausted = False
        while stack:
            if self.deadline is not None and perf_counter() > self.deadline:
                return Verdict.timeout("wall-clock limit reached")
            box, depth = stack.pop()
            stats.depth = max(stats.depth, depth)
            out_bounds = _propagate(self.compiled, box)
            if all(_atom_proven(a, out_bounds) for a in self.prop.atoms):
                continue
            found = self._probe(box, stats)
            if found is not None:
                return found
            if (
                depth >= self.max_depth
                or stats.splits >= max_splits
                or not _splittable(box, self.integral)
            ):
                exhausted = True
                continue
            stats.splits += 1
            left, right = _split_box(box, self.integral)
            stack.append((right, depth + 1))
            stack.append((left, depth + 1))
        if exhausted:
            return Verdict.timeout()
        return Verdict.holds()


def verify_interval(
    net: Network,
    prop: Property,
    budget: Budget = Budget(),
    jobs: int = 1,
) -> tuple[Verdict, VerifyStats]:
    """Prove or refute a property by interval propagation plus splitting.

    A box whose propagated output bounds prove every atom is discharged; a
    probe point that violates an atom is returned as a counterexample
    (checked by an actual forward pass, which is also what computed it);
    otherwise the widest dimension is split at its midpoint and both halves
    are searched depth first.  Running out of splits or depth anywhere
    leaves an undecided region and the overall verdict is Timeout.

    When both the network weights and the box bounds are integers (the
    quantised setting) the search works on the integer lattice: probes are
    rounded box centers and splits happen at integer midpoints, stopping
    above unit width.  Every counterexample is then itself an integer grid
    point, so this engine can never contradict exhaustive grid enumeration.

    ``jobs`` > 1 presplits the root box into that many subboxes, gives each
    a fixed share of the split budget, and searches them in a thread pool.
    Verdicts combine in left-to-right box order so the result for a given
    ``jobs`` value does not depend on thread scheduling.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    _check_arity(net, prop)
    t0 = perf_counter()
    compiled = _compile(net)
    integral = prop.box.is_integral() and all_integer_weights(net)
    deadline = None if budget.wall_clock_limit is None else t0 + budget.wall_clock_limit
    searcher = _IntervalSearch(net, compiled, prop, budget.max_depth, deadline, integral)
    root: Bounds = tuple(prop.box.bounds)
    stats = VerifyStats()

    if jobs == 1:
        verdict = searcher.run(root, 0, budget.max_splits, stats)
        stats.elapsed_ms = (perf_counter() - t0) * 1000
        return verdict, stats

    # Deterministic partition: presplit into at most `jobs` leaves kept in
    # left-to-right spatial order, then give every leaf its own split share.
    leaves: list[tuple[Bounds, int]] = [(root, 0)]
    presplits = 0
    while len(leaves) < jobs and presplits < budget.max_splits:
        idx = next((k for k, (b, _) in enumerate(leaves) if _splittable(b, integral)), None)
        if idx is None:
            break
        box, depth = leaves.pop(idx)
        left, right = _split_box(box, integral)
        leaves[idx:idx] = [(left, depth + 1), (right, depth + 1)]
        presplits += 1
    remaining = budget.max_splits - presplits
    share, extra = divmod(remaining, len(leaves))
    allowances = [share + (1 if k < extra else 0) for k in range(len(leaves))]
    leaf_stats = [VerifyStats() for _ in leaves]

    def run_leaf(k: int) -> Verdict:
        box, depth = leaves[k]
        return searcher.run(box, depth, allowances[k], leaf_stats[k])

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(run_leaf, range(len(leaves))))

    stats.splits = presplits + sum(s.splits for s in leaf_stats)
    stats.depth = max((s.depth for s in leaf_stats), default=0)
    stats.evaluations = sum(s.evaluations for s in leaf_stats)
    verdict = None
    for res in results:
        if res.kind == "CounterexampleFound":
            verdict = res
            break
    if verdict is None:
        if any(r.kind == "Timeout" for r in results):
            verdict = Verdict.timeout()
        else:
            verdict = Verdict.holds()
    stats.elapsed_ms = (perf_counter() - t0) * 1000
    return verdict, stats


# ---------------------------------------------------------------------------
# Exhaustive grid enumeration for quantised networks.


def _integer_bound(value: Scalar, what: str) -> int:
    f = Fraction(value)
    if f.denominator != 1:
        raise ValueError(f"exhaustive enumeration needs integer {what}, got {value}")
    return f.numerator


def verify_exhaustive_quantised(
    net: Network,
    prop: Property,
    grid_step: int = 1,
    cap: int = DEFAULT_ENUM_CAP,
) -> tuple[Verdict, VerifyStats]:
    """Evaluate every grid point of an integer box; complete over the grid.

    Grid values per dimension run from lo to hi in ``grid_step`` strides,
    and both corners are always included even when the stride overshoots.
    If the grid is larger than ``cap`` evaluations the engine refuses with
    :class:`EnumerationCapError` rather than silently sampling.  Holds
    means no grid point violates the conjunction (at step 1 on a quantised
    network this is the whole integer domain of the box).
    """
    _check_arity(net, prop)
    if not isinstance(grid_step, int) or grid_step < 1:
        raise ValueError(f"grid step must be a positive integer, got {grid_step!r}")
    if not all_integer_weights(net):
        raise ValueError("exhaustive engine requires a quantised (integer-weight) network")
    t0 = perf_counter()
    axes: list[list[int]] = []
    for k, (lo, hi) in enumerate(prop.box.bounds):
        lo_i = _integer_bound(lo, f"bounds (input {k})")
        hi_i = _integer_bound(hi, f"bounds (input {k})")
        values = list(range(lo_i, hi_i + 1, grid_step))
        if values[-1] != hi_i:
            values.append(hi_i)
        axes.append(values)
    total = math.prod(len(a) for a in axes)
    if total > cap:
        raise EnumerationCapError(
            f"grid has {total} points, over the cap of {cap} "
            f"(override with the {ENUM_CAP_ENV} environment variable)"
        )
    stats = VerifyStats()
    for point in itertools.product(*axes):
        out = output_values(forward(net, input_row(point)))
        stats.evaluations += 1
        ok, _ = eval_postcondition(prop, out)
        if not ok:
            stats.elapsed_ms = (perf_counter() - t0) * 1000
            return Verdict.counterexample(point, out), stats
    stats.elapsed_ms = (perf_counter() - t0) * 1000
    return Verdict.holds(), stats


# ---------------------------------------------------------------------------
# Random falsification.

_DYADIC_DEPTH = 16


def falsify_random(
    net: Network,
    prop: Property,
    samples: int = 1000,
    seed: int = 0,
) -> tuple[Verdict, VerifyStats]:
    """Sample the box at random dyadic points looking for a violation.

    Points are midpoints of a depth-16 dyadic refinement of each interval,
    drawn with a seeded generator, so runs are reproducible.  This engine
    can return a counterexample or Unknown; it never claims Holds.
    """
    _check_arity(net, prop)
    if samples < 1:
        raise ValueError("sample count must be >= 1")
    t0 = perf_counter()
    rng = random.Random(seed)
    stats = VerifyStats()
    denom = 2 ** (_DYADIC_DEPTH + 1)
    for _ in range(samples):
        point = []
        for lo, hi in prop.box.bounds:
            if lo == hi:
                point.append(lo)
                continue
            k = rng.randrange(2**_DYADIC_DEPTH)
            point.append(lo + (hi - lo) * Fraction(2 * k + 1, denom))
        out = output_values(forward(net, input_row(tuple(point))))
        stats.evaluations += 1
        ok, _ = eval_postcondition(prop, out)
        if not ok:
            stats.elapsed_ms = (perf_counter() - t0) * 1000
            return Verdict.counterexample(tuple(point), out), stats
    stats.elapsed_ms = (perf_counter() - t0) * 1000
    return Verdict.unknown(f"no counterexample in {samples} samples"), stats


# ---------------------------------------------------------------------------
# Monotonicity.


def _structurally_monotone(net: Network) -> bool:
    for layer in net.layers:
        for (_, j), v in layer.weights.nonzero_entries().items():
            if j == 0:
                continue  # biases may have any sign
            if v < 0:
                return False
    return True


def check_monotone(net: Network, trials: int = 100, seed: int = 0) -> MonotoneReport:
    """Check componentwise monotonicity on nonnegative ordered inputs.

    ``structural`` is the sufficient condition: all non-bias weights
    nonnegative (activations here are relu/identity, both nondecreasing,
    and an affine map with nonnegative weights is nondecreasing in every
    coordinate, whatever the bias signs).  ``tested`` runs seeded random
    pairs x <= y of nonnegative inputs through the network and confirms
    forward(x) <= forward(y) componentwise, recording a witness pair on
    failure.
    """
    if trials < 1:
        raise ValueError("trial count must be >= 1")
    rng = random.Random(seed)
    structural = _structurally_monotone(net)
    witness = None
    tested = True
    for _ in range(trials):
        x = tuple(Fraction(rng.randrange(0, 2049), 128) for _ in range(net.input_arity))
        delta = tuple(Fraction(rng.randrange(0, 257), 128) for _ in range(net.input_arity))
        y = tuple(a + d for a, d in zip(x, delta))
        fx = output_values(forward(net, input_row(x)))
        fy = output_values(forward(net, input_row(y)))
        if not all(a <= b for a, b in zip(fx, fy)):
            tested = False
            witness = (x, y)
            break
    return MonotoneReport(structural, tested, trials, witness)


# ---------------------------------------------------------------------------
# Reports.


def report_dict(property_name: str, engine: str, verdict: Verdict, stats: VerifyStats) -> dict:
    """JSON-ready report; scalar values are rendered exactly as p/q strings."""
    doc: dict = {
        "property": property_name,
        "engine": engine,
        "verdict": verdict.kind,
        "sat_unsat": sat_label(verdict),
        "splits": stats.splits,
        "depth": stats.depth,
        "evaluations": stats.evaluations,
        "elapsed_ms": round(stats.elapsed_ms, 3),
    }
    if verdict.witness_inputs is not None:
        doc["witness"] = {
            "inputs": [format_exact(v) for v in verdict.witness_inputs],
            "outputs": [format_exact(v) for v in verdict.witness_outputs or ()],
        }
    if verdict.reason:
        doc["reason"] = verdict.reason
    return doc
