"""Plain-text field configs.

An INI-style file with sections ``field``, ``action``, ``kernel`` and
``cocycle``.  Direct sums list ``parts = N`` under ``field`` and give each
component its own ``partK.action`` / ``partK.kernel`` / ``partK.cocycle``
sections.  Exact numbers are written as ``a/b + c/d sqrt m``; matrix rows
are separated by ``;`` and entries by ``,``::

    [field]
    alpha = 1.2
    name = irrational-rot

    [action]
    type = translation
    matrix = 1/1, 0/1 + 1/1 sqrt 2

    [kernel]
    type = piecewise
    pieces = 0/1 | 1/1 | * | 1/1

    [cocycle]
    type = none
"""

from __future__ import annotations

import configparser
import io
from fractions import Fraction

import numpy as np

from .actions import (
    AtomicAction,
    AtomTable,
    Box,
    CoordinateProjection,
    CoordinateShiftAction,
    DirectSumField,
    FieldSpec,
    LatticeShiftAction,
    LatticeTable,
    ParityCocycle,
    PiecewiseConstant,
    TranslationAction,
)
from .measures import rho_from_name
from .quadnum import QuadNum


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- scalars


def _num_text(v) -> str:
    if isinstance(v, QuadNum):
        return v.to_text()
    if isinstance(v, float):
        return repr(v)
    f = Fraction(v)
    return f"{f.numerator}/{f.denominator}"


def _num_parse(text: str):
    text = text.strip()
    if "sqrt" in text:
        return QuadNum.parse(text)
    if any(c in text.lower() for c in ".en") and "/" not in text:
        return float(text)
    return Fraction(text)


def _rows_text(rows, fmt=_num_text) -> str:
    return "; ".join(", ".join(fmt(v) for v in row) for row in rows)


def _rows_parse(text: str, conv=_num_parse) -> list:
    text = text.strip()
    if not text:
        return []
    return [[conv(v) for v in row.split(",")] for row in text.split(";")]


def _ints_text(vals) -> str:
    return ", ".join(str(int(v)) for v in vals)


def _ints_parse(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


# ------------------------------------------------------------ components


def _action_items(action) -> dict:
    if isinstance(action, TranslationAction):
        out = {"type": "translation", "matrix": _rows_text(action.A)}
        if action.flips:
            out["flips"] = _rows_text(action.flip_parity.tolist(), str)
        return out
    if isinstance(action, AtomicAction):
        return {"type": "atomic", "weights": ", ".join(_num_text(w) for w in action.weights),
                "generators": _rows_text([g.tolist() for g in action.generators], str)}
    if isinstance(action, LatticeShiftAction):
        return {"type": "lattice-shift",
                "label_weights": ", ".join(_num_text(w) for w in action.label_weights),
                "shifts": _rows_text(action.shifts.tolist(), str),
                "label_perms": _rows_text([p.tolist() for p in action.label_perms], str)}
    if isinstance(action, CoordinateShiftAction):
        rho = action.rho
        return {"type": "coordinate-shift", "d": str(action.d), "rho": rho.name,
                "rho_params": ", ".join(repr(float(p)) for p in rho.params)}
    raise ConfigError(f"cannot serialize {type(action).__name__}")


def _action_parse(sec) -> object:
    kind = sec.get("type", "").strip()
    if kind == "translation":
        flips = _rows_parse(sec.get("flips", ""), int)
        return TranslationAction(_rows_parse(sec["matrix"]), flip_parity=flips)
    if kind == "atomic":
        weights = [_num_parse(w) for w in sec["weights"].split(",")]
        return AtomicAction(weights, _rows_parse(sec["generators"], int))
    if kind == "lattice-shift":
        weights = [_num_parse(w) for w in sec["label_weights"].split(",")]
        perms = _rows_parse(sec.get("label_perms", ""), int) or None
        return LatticeShiftAction(weights, _rows_parse(sec["shifts"], int), perms)
    if kind == "coordinate-shift":
        params = tuple(float(v) for v in sec.get("rho_params", "").split(",") if v.strip())
        return CoordinateShiftAction(rho_from_name(sec["rho"].strip(), params), int(sec["d"]))
    raise ConfigError(f"unknown action type {kind!r}")


def _vec_text(vals) -> str:
    return ", ".join(_num_text(v) for v in vals)


def _kernel_items(kernel) -> dict:
    if isinstance(kernel, PiecewiseConstant):
        lines = []
        for b, v in kernel.pieces:
            sheet = "*" if b.sheet is None else _ints_text(b.sheet)
            lines.append(f"{_vec_text(b.lower)} | {_vec_text(b.upper)} | {sheet} | {_num_text(v)}")
        return {"type": "piecewise", "pieces": "\n".join(lines)}
    if isinstance(kernel, AtomTable):
        return {"type": "atoms", "values": ", ".join(repr(float(v)) for v in kernel.values)}
    if isinstance(kernel, LatticeTable):
        lines = [f"{label} | {_ints_text(site)} | {float(v)!r}" for (label, site), v in sorted(kernel.entries.items())]
        return {"type": "lattice", "entries": "\n".join(lines)}
    if isinstance(kernel, CoordinateProjection):
        return {"type": "coordinate"}
    raise ConfigError(f"cannot serialize {type(kernel).__name__}")


def _kernel_parse(sec):
    kind = sec.get("type", "").strip()
    if kind == "piecewise":
        pieces = []
        for line in sec.get("pieces", "").strip().splitlines():
            if not line.strip():
                continue
            lo, hi, sheet, val = (p.strip() for p in line.split("|"))
            lower = tuple(_num_parse(v) for v in lo.split(","))
            upper = tuple(_num_parse(v) for v in hi.split(","))
            sh = None if sheet == "*" else tuple(_ints_parse(sheet))
            pieces.append((Box(lower, upper, sh), _num_parse(val)))
        return PiecewiseConstant(pieces)
    if kind == "atoms":
        return AtomTable([float(v) for v in sec["values"].split(",")])
    if kind == "lattice":
        entries = {}
        for line in sec.get("entries", "").strip().splitlines():
            if not line.strip():
                continue
            label, site, val = (p.strip() for p in line.split("|"))
            entries[(int(label), tuple(_ints_parse(site)))] = float(val)
        return LatticeTable(entries)
    if kind == "coordinate":
        return CoordinateProjection()
    raise ConfigError(f"unknown kernel type {kind!r}")


def _cocycle_items(cocycle) -> dict:
    if cocycle is None:
        return {"type": "none"}
    if isinstance(cocycle, ParityCocycle):
        return {"type": "parity", "signs": _ints_text(cocycle.signs)}
    raise ConfigError("only parity cocycles can be serialized")


def _cocycle_parse(sec):
    if sec is None:
        return None
    kind = sec.get("type", "none").strip()
    if kind == "none":
        return None
    if kind == "parity":
        return ParityCocycle(tuple(_ints_parse(sec["signs"])))
    raise ConfigError(f"unknown cocycle type {kind!r}")


# ------------------------------------------------------------------ public


def dumps(field) -> str:
    """Serialize a :class:`FieldSpec` or :class:`DirectSumField`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    head = {"alpha": repr(float(field.alpha)), "name": field.name or ""}
    if isinstance(field, DirectSumField):
        head["parts"] = str(len(field.parts))
        head["d"] = str(field.d)
        if field.parts:
            head["mixture"] = ", ".join(repr(w) for w in field.mixture)
        cp["field"] = head
        for i, p in enumerate(field.parts):
            cp[f"part{i}"] = {"name": p.name or ""}
            cp[f"part{i}.action"] = _action_items(p.action)
            cp[f"part{i}.kernel"] = _kernel_items(p.kernel)
            cp[f"part{i}.cocycle"] = _cocycle_items(p.cocycle)
    else:
        cp["field"] = head
        cp["action"] = _action_items(field.action)
        cp["kernel"] = _kernel_items(field.kernel)
        cp["cocycle"] = _cocycle_items(field.cocycle)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads(text: str):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if "field" not in cp:
        raise ConfigError("missing [field] section")
    head = cp["field"]
    try:
        alpha = float(head["alpha"])
    except KeyError:
        raise ConfigError("[field] needs alpha") from None
    name = head.get("name", "")
    try:
        if "parts" in head:
            n = int(head["parts"])
            if n == 0:
                return DirectSumField.zero(alpha, int(head.get("d", "1")), name)
            parts = []
            for i in range(n):
                pname = cp[f"part{i}"].get("name", "") if f"part{i}" in cp else ""
                parts.append(FieldSpec(alpha, _action_parse(cp[f"part{i}.action"]),
                                       _kernel_parse(cp[f"part{i}.kernel"]),
                                       _cocycle_parse(cp[f"part{i}.cocycle"] if f"part{i}.cocycle" in cp else None),
                                       name=pname))
            mixture = [float(v) for v in head["mixture"].split(",")] if "mixture" in head else None
            return DirectSumField(parts, mixture=mixture, name=name)
        for sec in ("action", "kernel"):
            if sec not in cp:
                raise ConfigError(f"missing [{sec}] section")
        return FieldSpec(alpha, _action_parse(cp["action"]), _kernel_parse(cp["kernel"]),
                         _cocycle_parse(cp["cocycle"] if "cocycle" in cp else None), name=name)
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid field config: {exc}") from exc


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(field, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(field))


def same_field(a, b) -> bool:
    """Structural equality of two fields (used to check round trips)."""
    return dumps(a) == dumps(b)


__all__ = ["ConfigError", "dump", "dumps", "load", "loads", "same_field"]
