"""Command line front end.

Subcommands: infer, verify, prune, quantize, convert, bench.  Exit codes
follow the verdict for verify (0 Holds, 1 CounterexampleFound, 2
Timeout/Unknown) with 64 for usage errors and 65 for malformed data files.
All commands are deterministic for fixed flags except the elapsed-time
fields in reports and benchmark timing columns.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import statistics
import sys
from dataclasses import dataclass
from fractions import Fraction
from time import perf_counter

from . import model_io, verify
from .matrix import BACKENDS, count_ops
from .network import (
    ClassLabel,
    Network,
    all_integer_weights,
    argmax_label,
    convert_network,
    forward,
    input_row,
    output_values,
)
from .property import Property, PropertyParseError, load_property
from .scalar import (
    DecimalParseError,
    format_decimal,
    format_exact,
    rat_from_decimal_string,
)

__all__ = ["RunConfig", "main", "entrypoint"]

EX_OK = 0
EX_COUNTEREXAMPLE = 1
EX_UNDECIDED = 2
EX_USAGE = 64  # command line misuse (BSD sysexits)
EX_DATAERR = 65  # malformed input data

ENGINES = ("interval", "exhaustive", "random")

_VERDICT_EXIT = {
    "Holds": EX_OK,
    "CounterexampleFound": EX_COUNTEREXAMPLE,
    "Timeout": EX_UNDECIDED,
    "Unknown": EX_UNDECIDED,
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 64
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Validated bundle of everything a subcommand needs."""

    subcommand: str
    model: str | None = None
    property_path: str | None = None
    backend: str = "dense"
    engine: str = "interval"
    max_splits: int = 1000
    max_depth: int = 200
    time_limit: float | None = None
    grid_step: int = 1
    samples: int = 1000
    seed: int = 0
    jobs: int = 1
    prune_fraction: Fraction = Fraction(0)
    quantize_scale: int = 1
    input_text: str | None = None
    labels_path: str | None = None
    normalize: bool = False
    precision: int = 6
    exact: bool = False
    output: str | None = None
    report: str | None = None
    backends: tuple[str, ...] = BACKENDS
    engines: tuple[str, ...] = ()
    repetitions: int = 3

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise UsageError(f"unknown backend {self.backend!r}")
        if self.engine not in ENGINES:
            raise UsageError(f"unknown engine {self.engine!r}")
        for b in self.backends:
            if b not in BACKENDS:
                raise UsageError(f"unknown backend {b!r}")
        for e in self.engines:
            if e not in ENGINES:
                raise UsageError(f"unknown engine {e!r}")
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if self.max_splits < 0 or self.max_depth < 0:
            raise UsageError("budget limits must be >= 0")
        if self.time_limit is not None and self.time_limit < 0:
            raise UsageError("--time-limit must be >= 0")
        if self.grid_step < 1:
            raise UsageError("--grid-step must be >= 1")
        if self.samples < 1:
            raise UsageError("--samples must be >= 1")
        if self.precision < 1:
            raise UsageError("--precision must be >= 1")
        if not (0 <= self.prune_fraction < 1):
            raise UsageError("--fraction must be in [0, 1)")
        if self.quantize_scale < 1:
            raise UsageError("--scale must be a positive integer")
        if self.repetitions < 1:
            raise UsageError("--repetitions must be >= 1")


def _fraction_flag(text: str) -> Fraction:
    try:
        v = rat_from_decimal_string(text)
    except DecimalParseError:
        try:
            num, den = text.split("/")
            v = Fraction(int(num), int(den))
        except Exception:
            raise UsageError(f"not a decimal or p/q fraction: {text!r}") from None
    return v


def _parse_input_vector(text: str) -> list:
    try:
        return [rat_from_decimal_string(t) for t in text.split(",")]
    except DecimalParseError as exc:
        raise UsageError(f"bad --input vector: {exc}") from exc


def _load_labels(path: str) -> list[ClassLabel]:
    with open(path, "r", encoding="utf-8") as fh:
        names = [line.strip() for line in fh if line.strip()]
    if not names:
        raise DataError(f"label file {path} is empty")
    return [ClassLabel(name, k) for k, name in enumerate(names)]


def _load_network(cfg_model: str, backend: str) -> Network:
    return model_io.load_model(cfg_model, backend=backend)


def _enum_cap() -> int:
    raw = os.environ.get(verify.ENUM_CAP_ENV)
    if raw is None:
        return verify.DEFAULT_ENUM_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise DataError(f"{verify.ENUM_CAP_ENV} must be an integer, got {raw!r}") from None
    if cap < 1:
        raise DataError(f"{verify.ENUM_CAP_ENV} must be >= 1")
    return cap


def _render_values(values, cfg: RunConfig) -> str:
    if cfg.exact:
        return " ".join(format_exact(v) for v in values)
    return " ".join(format_decimal(v, cfg.precision) for v in values)


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_infer(cfg: RunConfig) -> int:
    net = _load_network(cfg.model, cfg.backend)
    values = _parse_input_vector(cfg.input_text)
    if cfg.normalize:
        if not cfg.model.endswith(".nnet"):
            raise DataError("--normalize needs an NNet model with normalization metadata")
        meta = model_io.parse_nnet(cfg.model)
        values = model_io.normalize_input(meta, values)
    if len(values) != net.input_arity:
        raise UsageError(
            f"model expects {net.input_arity} inputs, --input has {len(values)}"
        )
    out = output_values(forward(net, input_row(values, cfg.backend)))
    print("outputs:", _render_values(out, cfg))
    if cfg.labels_path:
        labels = _load_labels(cfg.labels_path)
        picked = argmax_label(input_row(out, cfg.backend), labels)
        print("label:", picked.name)
    return EX_OK


def _run_engine(engine: str, net: Network, prop: Property, cfg: RunConfig):
    if engine == "interval":
        budget = verify.Budget(cfg.max_splits, cfg.max_depth, cfg.time_limit)
        return verify.verify_interval(net, prop, budget, jobs=cfg.jobs)
    if engine == "exhaustive":
        if not all_integer_weights(net):
            raise UsageError(
                "the exhaustive engine requires a quantised (integer-weight) model"
            )
        return verify.verify_exhaustive_quantised(
            net, prop, grid_step=cfg.grid_step, cap=_enum_cap()
        )
    return verify.falsify_random(net, prop, samples=cfg.samples, seed=cfg.seed)


def cmd_verify(cfg: RunConfig) -> int:
    net = _load_network(cfg.model, cfg.backend)
    prop = load_property(cfg.property_path)
    if prop.arity != net.input_arity:
        raise DataError(
            f"property has {prop.arity} inputs, model expects {net.input_arity}"
        )
    try:
        verdict, stats = _run_engine(cfg.engine, net, prop, cfg)
    except verify.EnumerationCapError as exc:
        raise DataError(str(exc)) from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    report = verify.report_dict(prop.name, cfg.engine, verdict, stats)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if cfg.report:
        with open(cfg.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return _VERDICT_EXIT[verdict.kind]


def cmd_prune(cfg: RunConfig) -> int:
    net = _load_network(cfg.model, cfg.backend)
    pruned = model_io.prune(net, cfg.prune_fraction)
    model_io.save_json(pruned, cfg.output)
    before = sum(
        1 for l in net.layers for (i, j) in l.weights.nonzero_entries() if j != 0
    )
    after = sum(
        1 for l in pruned.layers for (i, j) in l.weights.nonzero_entries() if j != 0
    )
    print(f"kept {after} of {before} nonzero non-bias weights; wrote {cfg.output}")
    return EX_OK


def cmd_quantize(cfg: RunConfig) -> int:
    net = _load_network(cfg.model, cfg.backend)
    quantised = model_io.quantize(net, cfg.quantize_scale)
    model_io.save_json(quantised, cfg.output)
    print(f"quantised with scale {cfg.quantize_scale}; wrote {cfg.output}")
    return EX_OK


def cmd_convert(cfg: RunConfig) -> int:
    net = _load_network(cfg.model, cfg.backend)
    model_io.save_json(net, cfg.output)
    print(f"wrote canonical model to {cfg.output}")
    return EX_OK


def _output_hash(values) -> str:
    blob = ",".join(format_exact(v) for v in values).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


_BENCH_COLUMNS = [
    "backend",
    "engine",
    "op",
    "repetitions",
    "median_ms",
    "min_ms",
    "max_ms",
    "scalar_muls",
    "scalar_adds",
    "scalar_ops",
    "lazy_queries",
    "splits",
    "verdict",
    "output_hash",
]


def cmd_bench(cfg: RunConfig) -> int:
    """Time forward passes (and optionally verify runs) per backend.

    Timing columns are wall-clock floats and vary run to run; every other
    column is deterministic.  The forward op includes materialising the
    output row, so lazy views are actually forced inside the timed region.
    """
    base = _load_network(cfg.model, cfg.backend)
    prop = load_property(cfg.property_path) if cfg.property_path else None
    if cfg.input_text is not None:
        values = _parse_input_vector(cfg.input_text)
    elif prop is not None:
        values = [Fraction(lo + hi, 2) for lo, hi in prop.box.bounds]
    else:
        raise UsageError("bench needs --input or --property to build a forward input")
    if len(values) != base.input_arity:
        raise UsageError(
            f"model expects {base.input_arity} inputs, forward input has {len(values)}"
        )

    rows = []
    for backend in cfg.backends:
        net = convert_network(base, backend)
        x = input_row(values, backend)
        times = []
        for _ in range(cfg.repetitions):
            t0 = perf_counter()
            out = output_values(forward(net, x))
            times.append((perf_counter() - t0) * 1000)
        with count_ops() as counter:
            out = output_values(forward(net, x))
        rows.append(
            {
                "backend": backend,
                "engine": "-",
                "op": "forward",
                "repetitions": cfg.repetitions,
                "median_ms": round(statistics.median(times), 3),
                "min_ms": round(min(times), 3),
                "max_ms": round(max(times), 3),
                "scalar_muls": counter.muls,
                "scalar_adds": counter.adds,
                "scalar_ops": counter.scalar_ops,
                "lazy_queries": counter.queries,
                "splits": "",
                "verdict": "",
                "output_hash": _output_hash(out),
            }
        )
        if prop is not None:
            for engine in cfg.engines:
                times = []
                verdict = stats = None
                for _ in range(cfg.repetitions):
                    t0 = perf_counter()
                    verdict, stats = _run_engine(engine, net, prop, cfg)
                    times.append((perf_counter() - t0) * 1000)
                with count_ops() as counter:
                    _run_engine(engine, net, prop, cfg)
                witness = verdict.witness_inputs or ()
                rows.append(
                    {
                        "backend": backend,
                        "engine": engine,
                        "op": "verify",
                        "repetitions": cfg.repetitions,
                        "median_ms": round(statistics.median(times), 3),
                        "min_ms": round(min(times), 3),
                        "max_ms": round(max(times), 3),
                        "scalar_muls": counter.muls,
                        "scalar_adds": counter.adds,
                        "scalar_ops": counter.scalar_ops,
                        "lazy_queries": counter.queries,
                        "splits": stats.splits,
                        "verdict": verdict.kind,
                        "output_hash": _output_hash((verdict.kind, *witness)),
                    }
                )

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_BENCH_COLUMNS)
    writer.writeheader()
    writer.writerows(rows)
    text = buf.getvalue()
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"wrote {len(rows)} benchmark rows to {cfg.output}")
    else:
        sys.stdout.write(text)
    return EX_OK


# ---------------------------------------------------------------------------
# Parser wiring.


def build_parser() -> _Parser:
    parser = _Parser(prog="checknn", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--model", required=True, help="model file (.nnet or .json)")
        p.add_argument("--backend", default="dense", help="dense | lazy | record")

    p = sub.add_parser("infer", help="run a forward pass")
    add_common(p)
    p.add_argument("--input", required=True, dest="input_text", help="comma-separated decimals")
    p.add_argument("--labels", dest="labels_path", help="label file, one class name per line")
    p.add_argument("--normalize", action="store_true", help="apply NNet input normalization")
    p.add_argument("--precision", type=int, default=6, help="significant digits (default 6)")
    p.add_argument("--exact", action="store_true", help="print exact p/q values")

    p = sub.add_parser("verify", help="check a property against a model")
    add_common(p)
    p.add_argument("--property", required=True, dest="property_path")
    p.add_argument("--engine", default="interval", help="interval | exhaustive | random")
    p.add_argument("--max-splits", type=int, default=1000)
    p.add_argument("--max-depth", type=int, default=200)
    p.add_argument("--time-limit", type=float, default=None, help="seconds of wall clock")
    p.add_argument("--grid-step", type=int, default=1)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--report", help="also write the JSON report here")

    p = sub.add_parser("prune", help="zero the smallest non-bias weights")
    add_common(p)
    p.add_argument("--fraction", required=True, type=_fraction_flag)
    p.add_argument("--out", required=True, dest="output")

    p = sub.add_parser("quantize", help="round weights to integers at a scale")
    add_common(p)
    p.add_argument("--scale", required=True, type=int)
    p.add_argument("--out", required=True, dest="output")

    p = sub.add_parser("convert", help="rewrite a model as canonical JSON")
    add_common(p)
    p.add_argument("--out", required=True, dest="output")

    p = sub.add_parser("bench", help="time forward/verify per backend, CSV out")
    add_common(p)
    p.add_argument("--backends", default=",".join(BACKENDS), help="comma-separated subset")
    p.add_argument("--engines", default="", help="comma-separated engines to benchmark")
    p.add_argument("--property", dest="property_path")
    p.add_argument("--input", dest="input_text", help="comma-separated decimals")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--max-splits", type=int, default=1000)
    p.add_argument("--max-depth", type=int, default=200)
    p.add_argument("--grid-step", type=int, default=1)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", dest="output")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {}
    for name in RunConfig.__dataclass_fields__:
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    if hasattr(args, "fraction"):
        fields["prune_fraction"] = args.fraction
    if hasattr(args, "scale"):
        fields["quantize_scale"] = args.scale
    if hasattr(args, "backends") and isinstance(args.backends, str):
        fields["backends"] = tuple(b.strip() for b in args.backends.split(",") if b.strip())
    if hasattr(args, "engines") and isinstance(args.engines, str):
        fields["engines"] = tuple(e.strip() for e in args.engines.split(",") if e.strip())
    return RunConfig(**fields)


_DISPATCH = {
    "infer": cmd_infer,
    "verify": cmd_verify,
    "prune": cmd_prune,
    "quantize": cmd_quantize,
    "convert": cmd_convert,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config_from_args(args)
        return _DISPATCH[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EX_USAGE
    except (
        model_io.ModelFormatError,
        PropertyParseError,
        DecimalParseError,
        DataError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_DATAERR


def entrypoint() -> None:  # console script target
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
