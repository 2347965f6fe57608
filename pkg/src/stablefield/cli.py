"""Command-line front end.

``stablefield {classify,effdim,bn,maxima,verify} (--fixture NAME | --field PATH) --seed S``

Results go to ``--out`` (``results.json``, plus ``bn.csv`` / ``maxima.csv``
where relevant).  Files are written atomically and depend only on the
arguments, so identical invocations produce identical bytes.  Failures exit
nonzero and print ``{"error": ..., "message": ...}`` to stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import fieldio, lattice, maxima, memory
from .actions import DirectSumField
from .fixtures import BUILTIN, builtin
from .stable import SeriesConfig, stable_tail_constant

DEFAULT_GRID = (8, 16, 32, 64, 128, 256)


class CliError(Exception):
    def __init__(self, kind: str, message: str, status: int = 1):
        super().__init__(message)
        self.kind, self.status = kind, status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, 2)


def _threads() -> int:
    raw = os.environ.get("STABLEFIELD_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError("config", f"STABLEFIELD_THREADS must be an integer, got {raw!r}", 2) from None


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _load_field(args):
    if bool(args.fixture) == bool(args.field):
        raise CliError("usage", "give exactly one of --fixture or --field", 2)
    if args.fixture:
        if args.fixture not in BUILTIN:
            raise CliError("fixture", f"unknown fixture {args.fixture!r}; choose from {sorted(BUILTIN)}")
        return builtin(args.fixture, args.alpha)
    try:
        field = fieldio.load(args.field)
    except FileNotFoundError:
        raise CliError("config", f"field config not found: {args.field}") from None
    except fieldio.ConfigError as exc:
        raise CliError("config", str(exc), 2) from None
    return field if args.alpha is None else _with_alpha(field, args.alpha)


def _with_alpha(field, alpha: float):
    if isinstance(field, DirectSumField):
        if not field.parts:
            return DirectSumField.zero(alpha, field.d, field.name)
        parts = [dataclasses.replace(p, alpha=alpha) for p in field.parts]
        return DirectSumField(parts, mixture=field.mixture, name=field.name)
    return dataclasses.replace(field, alpha=alpha)


def _grid(args):
    if args.n is not None:
        return [args.n]
    if args.n_grid:
        try:
            grid = sorted({int(v) for v in args.n_grid.split(",")})
        except ValueError:
            raise CliError("usage", f"bad --n-grid {args.n_grid!r}", 2) from None
        if grid[0] < 1:
            raise CliError("usage", "grid values must be positive", 2)
        return grid
    return list(DEFAULT_GRID)


def _field_meta(field, args) -> dict:
    return {"name": field.name, "alpha": field.alpha, "d": field.d,
            "source": args.fixture or str(args.field), "seed": args.seed}


# ----------------------------------------------------------------- commands


def cmd_classify(field, args) -> dict:
    verdict = memory.classify(field, rng=args.seed, n_states=args.states)
    return {"classify": verdict.to_dict()}


def _effdim(field) -> dict:
    struct = lattice.effective_structure(field if isinstance(field, DirectSumField) else field.action)
    out = json.loads(struct.to_json())
    if struct.p >= 1 and struct.p <= 4:
        poly = lattice.project_polytope(struct.W, struct.p)
        vol = lattice.polytope_volume(poly)
        out["polytope"] = poly.to_text().strip().splitlines()
        out["volume"] = f"{vol.numerator}/{vol.denominator}"
    return out


def cmd_effdim(field, args) -> dict:
    return {"effdim": _effdim(field)}


def cmd_bn(field, args):
    curve = maxima.bn_curve(field, _grid(args), replications=args.reps, seed=args.seed)
    out = {"bn": curve.to_dict()}
    if len(curve.n_grid) >= 4 and curve.n_grid[-1] >= 4 * curve.n_grid[0]:
        fit = maxima.growth_exponent(curve)
        out["growth"] = {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual}
    return out, {"bn.csv": curve.to_csv()}


def _series_cfg(args) -> SeriesConfig:
    return SeriesConfig(truncation_count=args.truncation, seed=args.seed)


def _maxima(field, args, n):
    curve = maxima.bn_curve(field, [n], replications=args.reps_bn, seed=args.seed)
    b_n = float(curve.values[0])
    report = maxima.simulate_maxima(field, n, args.reps, _series_cfg(args), seed=args.seed,
                                    normalization=b_n, normalization_label="b_n",
                                    workers=_threads())
    scale = stable_tail_constant(field.alpha) ** (1.0 / field.alpha)
    return report.evaluate(field.alpha, scale), curve


def cmd_maxima(field, args):
    n = args.n if args.n is not None else 64
    report, curve = _maxima(field, args, n)
    return {"maxima": report.to_dict(include_samples=False), "bn": curve.to_dict()}, \
        {"maxima.csv": report.to_csv()}


def _paper_limit(field, args, n):
    """Closed-form normalization and Frechet scale for builtin fixtures."""
    a = field.alpha
    ca = stable_tail_constant(a)
    name = args.fixture
    if name == "irrational-rot":
        return f"n^(1/alpha)", n ** (1 / a), ((1 + math.sqrt(2)) * ca) ** (1 / a)
    if name == "z3-flip":
        return f"n^(p/alpha)", n ** (1 / a), (6 * ca) ** (1 / a)
    if name == "moving-avg":
        kx = maxima.k_x_field(field)
        return f"n^(d/alpha)", n ** (field.d / a), kx * ca ** (1 / a)
    return None


def cmd_verify(field, args):
    n = args.n if args.n is not None else 64
    out = {"classify": memory.classify(field, rng=args.seed, n_states=args.states).to_dict()}
    out["classify"].pop("per_state")
    try:
        out["effdim"] = _effdim(field)
    except (TypeError, lattice.RankDeficient) as exc:
        out["effdim"] = {"unavailable": str(exc)}
    grid = [v for v in _grid(args) if v >= 1] if args.n_grid else list(DEFAULT_GRID)
    curve = maxima.bn_curve(field, grid, replications=args.reps_bn, seed=args.seed)
    fit = maxima.growth_exponent(curve)
    out["bn"] = curve.to_dict()
    out["growth"] = {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual,
                     "surrogate_condition": maxima.check_surrogate_condition(curve, field.d, field.alpha)}
    files = {"bn.csv": curve.to_csv()}
    limit = _paper_limit(field, args, n)
    if limit is None:
        report, _ = _maxima(field, args, n)
    else:
        label, norm, scale = limit
        report = maxima.simulate_maxima(field, n, args.reps, _series_cfg(args), seed=args.seed,
                                        normalization=norm, normalization_label=label,
                                        workers=_threads()).evaluate(field.alpha, scale)
    out["maxima"] = report.to_dict(include_samples=False)
    files["maxima.csv"] = report.to_csv()
    return out, files


COMMANDS = {
    "classify": cmd_classify,
    "effdim": cmd_effdim,
    "bn": cmd_bn,
    "maxima": cmd_maxima,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stablefield", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        src = p.add_argument_group("field")
        src.add_argument("-f", "--fixture", help=f"builtin fixture: {', '.join(sorted(BUILTIN))}")
        src.add_argument("--field", type=Path, help="field config file")
        p.add_argument("--alpha", type=float, help="override the stability index")
        p.add_argument("--n", type=int, help="box size")
        p.add_argument("--n-grid", help="comma-separated box sizes")
        p.add_argument("--reps", type=int, default=2000, help="simulation replications")
        p.add_argument("--reps-bn", type=int, default=100_000, help="Monte Carlo replications for b_n")
        p.add_argument("--states", type=int, default=64, help="sample states for classification")
        p.add_argument("--truncation", type=int, default=4000, help="series terms per realization")
        p.add_argument("--seed", type=int, required=True, help="random seed (mandatory)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.reps < 1 or args.reps_bn < 2 or args.states < 1 or args.truncation < 1:
            raise CliError("usage", "counts must be positive", 2)
        if args.n is not None and args.n < 1:
            raise CliError("usage", "--n must be positive", 2)
        field = _load_field(args)
        result = COMMANDS[args.command](field, args)
        payload, files = result if isinstance(result, tuple) else (result, {})
        payload = {"command": args.command, "field": _field_meta(field, args), **payload}
        _write_atomic(args.out / "results.json", _dump_json(payload))
        for name, text in files.items():
            _write_atomic(args.out / name, text)
        sys.stdout.write(_dump_json(payload))
        return 0
    except CliError as exc:
        sys.stdout.write(_dump_json({"error": exc.kind, "message": str(exc)}))
        return exc.status
    except (ValueError, TypeError, RuntimeError, NotImplementedError, LookupError) as exc:
        sys.stdout.write(_dump_json({"error": type(exc).__name__, "message": str(exc)}))
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
