"""Verification properties: an input box plus a conjunction of linear atoms.

A property constrains the inputs to a closed rational box and asserts a
conjunction of linear inequalities over the network outputs.  The text
format is line oriented and versioned:

    checknn-property v1
    # optional comments
    name safe-zone
    input 0 in [-1, 1]
    input 1 in [0.5, 1]
    assert y0 - y1 <= 0
    assert 2*y0 + 1/2*y2 > -1.5e-1

Every input of the target network needs exactly one ``input`` line
(indices 0..n-1, lo <= hi) and at least one ``assert`` line must be
present.  Coefficients and bounds are exact rationals written as decimal
literals or p/q ratios.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .scalar import DecimalParseError, Scalar, format_exact, parse_scalar_token

__all__ = [
    "HEADER",
    "RELATIONS",
    "PropertyParseError",
    "InputBox",
    "LinearAtom",
    "Property",
    "Verdict",
    "parse_property",
    "load_property",
    "eval_postcondition",
    "sat_label",
]

HEADER = "checknn-property v1"
RELATIONS = ("<=", "<", ">=", ">")


class PropertyParseError(ValueError):
    """A property file does not conform to the v1 grammar."""


@dataclass(frozen=True)
class InputBox:
    """Closed rational interval per input dimension."""

    bounds: tuple[tuple[Scalar, Scalar], ...]

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple((lo, hi) for lo, hi in self.bounds))
        for k, (lo, hi) in enumerate(self.bounds):
            if lo > hi:
                raise ValueError(f"input {k}: empty interval [{lo}, {hi}]")

    @property
    def arity(self) -> int:
        return len(self.bounds)

    def is_integral(self) -> bool:
        return all(
            Fraction(lo).denominator == 1 and Fraction(hi).denominator == 1
            for lo, hi in self.bounds
        )


@dataclass(frozen=True)
class LinearAtom:
    """One inequality: sum of coeff * y_index  <relation>  bound."""

    coeffs: tuple[tuple[int, Scalar], ...]  # (output index, coefficient), index-sorted
    relation: str
    bound: Scalar

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(sorted(self.coeffs)))
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if not self.coeffs or all(c == 0 for _, c in self.coeffs):
            raise ValueError("linear atom needs at least one nonzero coefficient")
        if any(c == 0 for _, c in self.coeffs):
            object.__setattr__(
                self, "coeffs", tuple((k, c) for k, c in self.coeffs if c != 0)
            )
        seen = [k for k, _ in self.coeffs]
        if len(seen) != len(set(seen)):
            raise ValueError("duplicate output index in atom coefficients")

    @property
    def max_index(self) -> int:
        return max(k for k, _ in self.coeffs)

    def value(self, outputs: Sequence[Scalar]) -> Scalar:
        if self.max_index >= len(outputs):
            raise ValueError(
                f"atom references output y{self.max_index}, "
                f"but only {len(outputs)} outputs exist"
            )
        total: Scalar = 0
        for k, c in self.coeffs:
            total += c * outputs[k]
        return total

    def holds(self, outputs: Sequence[Scalar]) -> bool:
        v = self.value(outputs)
        if self.relation == "<=":
            return v <= self.bound
        if self.relation == "<":
            return v < self.bound
        if self.relation == ">=":
            return v >= self.bound
        return v > self.bound

    def render(self) -> str:
        parts = []
        for k, c in self.coeffs:
            term = f"y{k}" if c == 1 else (f"-y{k}" if c == -1 else f"{format_exact(c)}*y{k}")
            if parts and not term.startswith("-"):
                parts.append("+")
            parts.append(term)
        return f"{' '.join(parts)} {self.relation} {format_exact(self.bound)}"


@dataclass(frozen=True)
class Property:
    """Named precondition box plus a nonempty conjunction of atoms."""

    name: str
    box: InputBox
    atoms: tuple[LinearAtom, ...]

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not self.atoms:
            raise ValueError("property needs at least one assert atom")

    @property
    def arity(self) -> int:
        return self.box.arity


# ---------------------------------------------------------------------------
# Verdicts.

_VERDICT_KINDS = ("Holds", "CounterexampleFound", "Timeout", "Unknown")
_SAT_LABELS = {
    "Holds": "UNSAT",
    "CounterexampleFound": "SAT",
    "Timeout": "TIMEOUT",
    "Unknown": "UNKNOWN",
}


@dataclass(frozen=True)
class Verdict:
    """Outcome of a verification run.

    ``Holds`` means the property was proven over the whole box; a
    counterexample carries a concrete witness that engines re-check with a
    forward pass before reporting.  In the satisfiability naming used by
    solver-style tables, Holds is UNSAT (no violating assignment exists) and
    CounterexampleFound is SAT.
    """

    kind: str
    witness_inputs: tuple[Scalar, ...] | None = None
    witness_outputs: tuple[Scalar, ...] | None = None
    reason: str = ""

    def __post_init__(self):
        if self.kind not in _VERDICT_KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")
        if self.kind == "CounterexampleFound" and self.witness_inputs is None:
            raise ValueError("counterexample verdict requires a witness")

    @classmethod
    def holds(cls) -> "Verdict":
        return cls("Holds")

    @classmethod
    def counterexample(cls, inputs: Sequence[Scalar], outputs: Sequence[Scalar]) -> "Verdict":
        return cls("CounterexampleFound", tuple(inputs), tuple(outputs))

    @classmethod
    def timeout(cls, reason: str = "budget exhausted") -> "Verdict":
        return cls("Timeout", reason=reason)

    @classmethod
    def unknown(cls, reason: str) -> "Verdict":
        return cls("Unknown", reason=reason)

    @property
    def decided(self) -> bool:
        return self.kind in ("Holds", "CounterexampleFound")


def sat_label(verdict: Verdict) -> str:
    return _SAT_LABELS[verdict.kind]


# ---------------------------------------------------------------------------
# Parsing.

_INPUT_RE = re.compile(r"input\s+(\d+)\s+in\s*\[([^\[\],]+),([^\[\],]+)\]\Z")
_TERM_RE = re.compile(
    r"\s*(?P<sign>[+-]?)\s*"
    r"(?:(?P<coef>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?(?:/\d+)?)\s*\*\s*)?"
    r"y(?P<idx>\d+)\s*"
)


def _parse_rational(token: str, lineno: int) -> Scalar:
    try:
        return parse_scalar_token(token)
    except DecimalParseError as exc:
        raise PropertyParseError(f"line {lineno}: {exc}") from exc


def _parse_linear_expr(text: str, lineno: int) -> dict[int, Scalar]:
    coeffs: dict[int, Scalar] = {}
    pos = 0
    first = True
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise PropertyParseError(
                f"line {lineno}: cannot parse linear term at {text[pos:].strip()!r}"
            )
        sign, coef, idx = m.group("sign"), m.group("coef"), int(m.group("idx"))
        if not first and sign == "":
            raise PropertyParseError(
                f"line {lineno}: missing + or - before term at {text[m.start():].strip()!r}"
            )
        c: Scalar = _parse_rational(coef, lineno) if coef else 1
        if sign == "-":
            c = -c
        coeffs[idx] = coeffs.get(idx, 0) + c
        pos = m.end()
        first = False
    coeffs = {k: c for k, c in coeffs.items() if c != 0}
    if not coeffs:
        raise PropertyParseError(f"line {lineno}: linear expression has no nonzero terms")
    return coeffs


_REL_RE = re.compile(r"(<=|>=|<|>)")


def parse_property(text: str, name: str = "unnamed") -> Property:
    lines = text.splitlines()
    data: list[tuple[int, str]] = []
    for n, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        data.append((n, line))
    if not data:
        raise PropertyParseError("empty property file")
    lineno, header = data[0]
    if header != HEADER:
        raise PropertyParseError(
            f"line {lineno}: expected header {HEADER!r}, got {header!r}"
        )

    bounds: dict[int, tuple[Scalar, Scalar]] = {}
    atoms: list[LinearAtom] = []
    for lineno, line in data[1:]:
        if line.startswith("name "):
            name = line[5:].strip()
            continue
        if line.startswith("input"):
            m = _INPUT_RE.match(line)
            if m is None:
                raise PropertyParseError(
                    f"line {lineno}: malformed input line, expected "
                    f"'input <i> in [<lo>, <hi>]'"
                )
            idx = int(m.group(1))
            lo = _parse_rational(m.group(2).strip(), lineno)
            hi = _parse_rational(m.group(3).strip(), lineno)
            if idx in bounds:
                raise PropertyParseError(f"line {lineno}: duplicate bound for input {idx}")
            if lo > hi:
                raise PropertyParseError(
                    f"line {lineno}: empty interval [{format_exact(lo)}, {format_exact(hi)}]"
                )
            bounds[idx] = (lo, hi)
            continue
        if line.startswith("assert"):
            body = line[len("assert"):].strip()
            parts = _REL_RE.split(body)
            if len(parts) != 3:
                raise PropertyParseError(
                    f"line {lineno}: assert needs exactly one relation out of "
                    f"{', '.join(RELATIONS)}"
                )
            expr_text, rel, bound_text = parts[0], parts[1], parts[2].strip()
            coeffs = _parse_linear_expr(expr_text, lineno)
            bound = _parse_rational(bound_text, lineno)
            try:
                atoms.append(LinearAtom(tuple(coeffs.items()), rel, bound))
            except ValueError as exc:
                raise PropertyParseError(f"line {lineno}: {exc}") from exc
            continue
        raise PropertyParseError(f"line {lineno}: unrecognised line {line!r}")

    if not bounds:
        raise PropertyParseError("property declares no input bounds")
    expected = set(range(len(bounds)))
    if set(bounds) != expected:
        missing = sorted(expected - set(bounds)) or sorted(set(bounds) - expected)
        raise PropertyParseError(
            f"input indices must cover 0..{len(bounds) - 1} exactly; "
            f"offending index {missing[0]}"
        )
    if not atoms:
        raise PropertyParseError("property has no assert lines")
    box = InputBox(tuple(bounds[k] for k in range(len(bounds))))
    return Property(name, box, tuple(atoms))


def load_property(path: str) -> Property:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_property(text, name=os.path.splitext(os.path.basename(path))[0])


def eval_postcondition(
    prop: Property, outputs: Sequence[Scalar]
) -> tuple[bool, list[LinearAtom]]:
    """Exactly evaluate the conjunction on concrete outputs.

    Returns (True, []) when every atom holds, else (False, all violated
    atoms) -- all of them, not just the first, so reports can show the full
    failure set.
    """
    violated = [atom for atom in prop.atoms if not atom.holds(outputs)]
    return (not violated, violated)
