"""Three interchangeable matrix representations behind one operation set.

The same operations (dims, get, map, map2, dot_product, fold, transpose,
nth_row, convert) exist for all three backends, and on shared inputs they
produce elementwise-identical results:

* ``DenseMatrix``  -- a rectangular tuple of row tuples.  Shape mismatches
  are real errors here (:class:`DimensionError`), matching the recursive
  list-of-lists style where ``map2`` fails on unequal lengths.
* ``LazyMatrix``   -- declared bounds plus an element query function.  The
  query is total: out-of-bounds indices answer 0.  ``map``/``map2`` build
  deferred views and perform no scalar work until an element is demanded.
* ``RecordMatrix`` -- declared bounds plus a finite map of nonzero entries.
  Absent entries read as 0, and no stored value ever equals 0, so the key
  set is exactly the sparsity pattern.

Elementwise combination of sparse operands follows the total convention:
the result's bounds are the componentwise max of the operands' bounds and
missing elements default to 0.  Dense matrices keep strict shape checking.

All values are immutable; operations return fresh matrices.  The op
counters at the top are instrumentation for tests and the benchmark
harness only and are exempt from that rule.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping

from .scalar import Scalar

__all__ = [
    "DimensionError",
    "Matrix",
    "DenseMatrix",
    "LazyMatrix",
    "RecordMatrix",
    "BACKENDS",
    "dense",
    "from_function",
    "from_entries",
    "zeros",
    "dims",
    "get",
    "map_values",
    "map2",
    "dot_product",
    "fold",
    "transpose",
    "nth_row",
    "convert",
    "materialise",
    "elementwise_equal",
    "OpCounter",
    "count_ops",
]

BACKENDS = ("dense", "lazy", "record")


class DimensionError(ValueError):
    """Shape mismatch in a dense-backend operation."""


# ---------------------------------------------------------------------------
# Scalar-op instrumentation (tests and the bench harness; not part of the
# matrix semantics).

@dataclass
class OpCounter:
    muls: int = 0
    adds: int = 0
    queries: int = 0

    @property
    def scalar_ops(self) -> int:
        return self.muls + self.adds


_active_counter: OpCounter | None = None


@contextmanager
def count_ops() -> Iterator[OpCounter]:
    """Count dot-product multiply/accumulate work and lazy element queries."""
    global _active_counter
    previous = _active_counter
    counter = OpCounter()
    _active_counter = counter
    try:
        yield counter
    finally:
        _active_counter = previous


def _tick_mul() -> None:
    if _active_counter is not None:
        _active_counter.muls += 1


def _tick_add() -> None:
    if _active_counter is not None:
        _active_counter.adds += 1


def _tick_query() -> None:
    if _active_counter is not None:
        _active_counter.queries += 1


# ---------------------------------------------------------------------------


def _get_or_default(m: "Matrix", i: int, j: int) -> Scalar:
    """Read element (i, j) treating every backend as total (0 outside bounds)."""
    if 0 <= i < m.row_count and 0 <= j < m.col_count:
        return m.get(i, j)
    return 0


class Matrix:
    """Shared surface of the three backends."""

    backend: str = "?"
    row_count: int
    col_count: int

    def dims(self) -> tuple[int, int]:
        return (self.row_count, self.col_count)

    def get(self, i: int, j: int) -> Scalar:
        raise NotImplementedError

    def map(self, f: Callable[[Scalar], Scalar]) -> "Matrix":
        raise NotImplementedError

    def map2(self, f: Callable[[Scalar, Scalar], Scalar], other: "Matrix") -> "Matrix":
        raise NotImplementedError

    def fold(self, f: Callable[[Scalar, object], object], init: object) -> object:
        """Combine all in-bounds elements in row-major order, starting from init."""
        acc = init
        for i in range(self.row_count):
            for j in range(self.col_count):
                acc = f(self.get(i, j), acc)
        return acc

    def dot(self, other: "Matrix") -> Scalar:
        return dot_product(self, other)

    def transpose(self) -> "Matrix":
        raise NotImplementedError

    def nth_row(self, j: int) -> "Matrix":
        raise NotImplementedError

    def to_lists(self) -> list[list[Scalar]]:
        """Materialise every in-bounds element as a list of row lists."""
        return [[self.get(i, j) for j in range(self.col_count)] for i in range(self.row_count)]

    def nonzero_entries(self) -> dict[tuple[int, int], Scalar]:
        out: dict[tuple[int, int], Scalar] = {}
        for i in range(self.row_count):
            for j in range(self.col_count):
                v = self.get(i, j)
                if v != 0:
                    out[(i, j)] = v
        return out

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<{type(self).__name__} {self.row_count}x{self.col_count}>"


class DenseMatrix(Matrix):
    """Rectangular row-of-rows storage with strict shape semantics."""

    backend = "dense"
    __slots__ = ("data",)

    def __init__(self, rows: Iterable[Iterable[Scalar]]):
        data = tuple(tuple(r) for r in rows)
        widths = {len(r) for r in data}
        if len(widths) > 1:
            raise ValueError(f"ragged rows: lengths {sorted(widths)}")
        object.__setattr__(self, "data", data)

    def __setattr__(self, name, value):  # matrices are immutable values
        raise AttributeError("DenseMatrix is immutable")

    @property
    def row_count(self) -> int:
        return len(self.data)

    @property
    def col_count(self) -> int:
        return len(self.data[0]) if self.data else 0

    def get(self, i: int, j: int) -> Scalar:
        if not (0 <= i < self.row_count and 0 <= j < self.col_count):
            raise IndexError(
                f"index ({i}, {j}) out of bounds for {self.row_count}x{self.col_count} matrix"
            )
        return self.data[i][j]

    def map(self, f):
        return DenseMatrix(tuple(f(v) for v in row) for row in self.data)

    def map2(self, f, other: Matrix) -> "DenseMatrix":
        if self.dims() != other.dims():
            raise DimensionError("map2: invalid length.")
        return DenseMatrix(
            tuple(f(self.data[i][j], other.get(i, j)) for j in range(self.col_count))
            for i in range(self.row_count)
        )

    def fold(self, f, init):
        acc = init
        for row in self.data:
            for v in row:
                acc = f(v, acc)
        return acc

    def transpose(self) -> "DenseMatrix":
        # Note: a dense r x 0 matrix transposes to the empty matrix, since
        # 0 x r has no row lists to carry the width.
        return DenseMatrix(zip(*self.data))

    def nth_row(self, j: int) -> "DenseMatrix":
        if not (0 <= j < self.row_count):
            raise IndexError(f"row {j} out of bounds for {self.row_count}-row matrix")
        return DenseMatrix((self.data[j],))


class LazyMatrix(Matrix):
    """Bounds plus an element query; combination is deferred function composition.

    The query function supplied to the constructor is only ever consulted for
    in-bounds indices; :meth:`get` answers 0 outside the declared bounds, so
    the observable query is total.  Composition depth is unbounded, and
    :func:`materialise` (conversion to a record matrix) is the escape hatch
    when a deep view should be collapsed.
    """

    backend = "lazy"
    __slots__ = ("_rows", "_cols", "_query")

    def __init__(self, rows: int, cols: int, query: Callable[[int, int], Scalar]):
        if rows < 0 or cols < 0:
            raise ValueError("dimensions must be nonnegative")
        object.__setattr__(self, "_rows", rows)
        object.__setattr__(self, "_cols", cols)
        object.__setattr__(self, "_query", query)

    def __setattr__(self, name, value):
        raise AttributeError("LazyMatrix is immutable")

    @property
    def row_count(self) -> int:
        return self._rows

    @property
    def col_count(self) -> int:
        return self._cols

    def get(self, i: int, j: int) -> Scalar:
        _tick_query()
        if 0 <= i < self._rows and 0 <= j < self._cols:
            return self._query(i, j)
        return 0

    def map(self, f):
        return LazyMatrix(self._rows, self._cols, lambda i, j: f(self.get(i, j)))

    def map2(self, f, other: Matrix) -> "LazyMatrix":
        rows = max(self._rows, other.row_count)
        cols = max(self._cols, other.col_count)
        return LazyMatrix(
            rows, cols, lambda i, j: f(self.get(i, j), _get_or_default(other, i, j))
        )

    def transpose(self) -> "LazyMatrix":
        return LazyMatrix(self._cols, self._rows, lambda i, j: self.get(j, i))

    def nth_row(self, j: int) -> "LazyMatrix":
        # Out-of-range rows are the all-default row, by totality.
        return LazyMatrix(1, self._cols, lambda _, k: self.get(j, k))


class RecordMatrix(Matrix):
    """Bounds plus a finite map of entries; absent means 0.

    The entry map is canonical: keys are in-bounds and no stored value is 0,
    so the key set is the sparsity pattern.  The constructor drops explicit
    zeros to keep that invariant.
    """

    backend = "record"
    __slots__ = ("_rows", "_cols", "entries")

    def __init__(self, rows: int, cols: int, entries: Mapping[tuple[int, int], Scalar]):
        if rows < 0 or cols < 0:
            raise ValueError("dimensions must be nonnegative")
        clean: dict[tuple[int, int], Scalar] = {}
        for (i, j), v in entries.items():
            if not (0 <= i < rows and 0 <= j < cols):
                raise ValueError(f"entry ({i}, {j}) out of bounds for {rows}x{cols} matrix")
            if v != 0:
                clean[(i, j)] = v
        object.__setattr__(self, "_rows", rows)
        object.__setattr__(self, "_cols", cols)
        object.__setattr__(self, "entries", clean)

    def __setattr__(self, name, value):
        raise AttributeError("RecordMatrix is immutable")

    @property
    def row_count(self) -> int:
        return self._rows

    @property
    def col_count(self) -> int:
        return self._cols

    def get(self, i: int, j: int) -> Scalar:
        return self.entries.get((i, j), 0)

    def map(self, f):
        if f(0) != 0:
            # The default is remapped to something nonzero, so sparsity is
            # lost: every in-bounds element must be materialised.
            full = {
                (i, j): f(self.get(i, j))
                for i in range(self._rows)
                for j in range(self._cols)
            }
            return RecordMatrix(self._rows, self._cols, full)
        return RecordMatrix(self._rows, self._cols, {k: f(v) for k, v in self.entries.items()})

    def map2(self, f, other: Matrix) -> "RecordMatrix":
        rows = max(self._rows, other.row_count)
        cols = max(self._cols, other.col_count)
        if f(0, 0) != 0:
            full = {
                (i, j): f(_get_or_default(self, i, j), _get_or_default(other, i, j))
                for i in range(rows)
                for j in range(cols)
            }
            return RecordMatrix(rows, cols, full)
        keys = set(self.entries)
        if isinstance(other, RecordMatrix):
            keys |= set(other.entries)
        else:
            keys |= set(other.nonzero_entries())
        out = {
            k: f(_get_or_default(self, *k), _get_or_default(other, *k)) for k in keys
        }
        return RecordMatrix(rows, cols, out)

    def nonzero_entries(self) -> dict[tuple[int, int], Scalar]:
        return dict(self.entries)

    def transpose(self) -> "RecordMatrix":
        return RecordMatrix(self._cols, self._rows, {(j, i): v for (i, j), v in self.entries.items()})

    def nth_row(self, j: int) -> "RecordMatrix":
        # Out-of-range rows yield the all-default row.
        return RecordMatrix(1, self._cols, {(0, k): v for (r, k), v in self.entries.items() if r == j})


# ---------------------------------------------------------------------------
# Constructors and module-level operation surface.


def dense(rows: Iterable[Iterable[Scalar]]) -> DenseMatrix:
    return DenseMatrix(rows)


def from_function(rows: int, cols: int, query: Callable[[int, int], Scalar]) -> LazyMatrix:
    return LazyMatrix(rows, cols, query)


def from_entries(rows: int, cols: int, entries: Mapping[tuple[int, int], Scalar]) -> RecordMatrix:
    return RecordMatrix(rows, cols, entries)


def zeros(rows: int, cols: int, backend: str = "dense") -> Matrix:
    if backend == "dense":
        return DenseMatrix([[0] * cols for _ in range(rows)])
    if backend == "lazy":
        return LazyMatrix(rows, cols, lambda i, j: 0)
    if backend == "record":
        return RecordMatrix(rows, cols, {})
    raise ValueError(f"unknown backend {backend!r}")


def dims(m: Matrix) -> tuple[int, int]:
    return m.dims()


def get(m: Matrix, i: int, j: int) -> Scalar:
    return m.get(i, j)


def map_values(f: Callable[[Scalar], Scalar], m: Matrix) -> Matrix:
    return m.map(f)


def map2(f: Callable[[Scalar, Scalar], Scalar], a: Matrix, b: Matrix) -> Matrix:
    return a.map2(f, b)


def fold(f: Callable[[Scalar, object], object], init: object, m: Matrix) -> object:
    return m.fold(f, init)


def transpose(m: Matrix) -> Matrix:
    return m.transpose()


def nth_row(m: Matrix, j: int) -> Matrix:
    return m.nth_row(j)


def _counted_mul(a: Scalar, b: Scalar) -> Scalar:
    _tick_mul()
    return a * b


def _counted_accumulate(v: Scalar, acc: Scalar) -> Scalar:
    _tick_add()
    return acc + v


def dot_product(a: Matrix, b: Matrix) -> Scalar:
    """Frobenius inner product: the sum of all elementwise products.

    Dense operands are combined the literal way (elementwise multiply, then
    sum), so a dense shape mismatch surfaces as the map2 dimension error.
    Sparse operands follow the max-dims/default-0 convention, and terms with
    an exactly-zero factor are skipped; for an exact sum of products that
    changes nothing but lets pruned rows cost what their support costs.
    """
    if isinstance(a, DenseMatrix) and isinstance(b, DenseMatrix):
        return a.map2(_counted_mul, b).fold(_counted_accumulate, 0)
    if isinstance(a, RecordMatrix) or isinstance(b, RecordMatrix):
        rec, oth = (a, b) if isinstance(a, RecordMatrix) else (b, a)
        total: Scalar = 0
        for key, v in rec.entries.items():
            w = _get_or_default(oth, *key)
            if w == 0:
                continue
            _tick_mul()
            _tick_add()
            total += v * w
        return total
    rows = max(a.row_count, b.row_count)
    cols = max(a.col_count, b.col_count)
    total = 0
    for i in range(rows):
        for j in range(cols):
            x = _get_or_default(a, i, j)
            if x == 0:
                continue
            y = _get_or_default(b, i, j)
            if y == 0:
                continue
            _tick_mul()
            _tick_add()
            total += x * y
    return total


def convert(m: Matrix, backend: str) -> Matrix:
    """Re-represent a matrix in another backend, preserving every element."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if m.backend == backend:
        return m
    rows, cols = m.dims()
    if backend == "dense":
        return DenseMatrix(m.to_lists())
    if backend == "record":
        return RecordMatrix(rows, cols, m.nonzero_entries())
    if isinstance(m, RecordMatrix):
        table = m.entries
        return LazyMatrix(rows, cols, lambda i, j: table.get((i, j), 0))
    data = m.to_lists()
    return LazyMatrix(rows, cols, lambda i, j: data[i][j])


def materialise(m: Matrix) -> RecordMatrix:
    """Collapse any matrix (in particular a deep lazy view) to a record matrix."""
    if isinstance(m, RecordMatrix):
        return m
    return RecordMatrix(m.row_count, m.col_count, m.nonzero_entries())


def elementwise_equal(a: Matrix, b: Matrix) -> bool:
    """Same dims and equal value at every in-bounds index."""
    if a.dims() != b.dims():
        return False
    return all(
        a.get(i, j) == b.get(i, j)
        for i, j in itertools.product(range(a.row_count), range(a.col_count))
    )
