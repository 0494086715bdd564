"""Discrete capacity-constrained transport instances.

Masses (``f``, ``g``, ``hbar``) are held as integer counts of ``1/denom`` so
that the combinatorial routines (max flow, min-cost flow) are exact. Costs
are ordinary floats.

File format (UTF-8 JSON)::

    {
      "m": 2, "n": 2, "denom": 4,
      "f": [2, 2],
      "g": [2, 2],
      "hbar": [[1, 1], [1, 1]],
      "cost": [[0.0, 1.0], [1.0, 0.0]]
    }

``f``, ``g`` and ``hbar`` are integers in units of ``1/denom``; ``cost`` is a
row-major list of finite floats written in shortest round-trip form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TransportInstance",
    "CouplingMatrix",
    "ValidationReport",
    "Violation",
    "InstanceError",
    "InstanceParseError",
    "InstanceValidationError",
    "DenominatorError",
    "load_and_validate",
    "save",
    "dumps",
    "loads",
    "gen_random",
    "gen_random_with_witness",
]


class InstanceError(Exception):
    """Base class for instance I/O problems."""


class InstanceParseError(InstanceError):
    """The file is not a well-formed instance document."""


class InstanceValidationError(InstanceError):
    """The document parsed but violates one or more instance invariants."""

    def __init__(self, report: "ValidationReport", source: str | None = None):
        self.report = report
        self.source = source
        lines = [f"{v.field}{list(v.index) if v.index else ''}: {v.description}" for v in report.violations]
        prefix = f"{source}: " if source else ""
        super().__init__(prefix + "invalid instance: " + "; ".join(lines))


class DenominatorError(InstanceValidationError):
    """A mass entry is not an integer multiple of ``1/denom``."""


@dataclass(frozen=True)
class Violation:
    field: str
    index: tuple[int, ...]
    description: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TransportInstance:
    """Masses ``f`` (sources), ``g`` (sinks), capacities ``hbar`` and costs.

    Use :meth:`from_units` to build one; it validates every invariant.
    """

    f_units: np.ndarray
    g_units: np.ndarray
    hbar_units: np.ndarray
    cost: np.ndarray
    denom: int

    @classmethod
    def from_units(cls, f_units, g_units, hbar_units, cost, denom: int) -> "TransportInstance":
        report = validate_units(f_units, g_units, hbar_units, cost, denom)
        if not report.ok:
            raise _validation_error(report)
        return cls(
            _frozen(f_units, np.int64),
            _frozen(g_units, np.int64),
            _frozen(hbar_units, np.int64),
            _frozen(cost, np.float64),
            int(denom),
        )

    @property
    def m(self) -> int:
        return int(self.f_units.shape[0])

    @property
    def n(self) -> int:
        return int(self.g_units.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def f(self) -> np.ndarray:
        return self.f_units / self.denom

    @property
    def g(self) -> np.ndarray:
        return self.g_units / self.denom

    @property
    def hbar(self) -> np.ndarray:
        return self.hbar_units / self.denom

    @property
    def support(self) -> np.ndarray:
        """Boolean mask of cells with positive capacity."""
        return self.hbar_units > 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransportInstance):
            return NotImplemented
        return (
            self.denom == other.denom
            and np.array_equal(self.f_units, other.f_units)
            and np.array_equal(self.g_units, other.g_units)
            and np.array_equal(self.hbar_units, other.hbar_units)
            and self.cost.shape == other.cost.shape
            and self.cost.tobytes() == other.cost.tobytes()
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "denom": self.denom,
            "f": [int(x) for x in self.f_units],
            "g": [int(x) for x in self.g_units],
            "hbar": [[int(x) for x in row] for row in self.hbar_units],
            "cost": [[float(x) for x in row] for row in self.cost],
        }


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """A transport plan ``h`` with ``0 <= h <= hbar`` (checked by :meth:`check`)."""

    h: np.ndarray = field()

    def __post_init__(self):
        object.__setattr__(self, "h", _frozen(self.h, np.float64))

    def check(self, inst: TransportInstance, atol: float = 0.0) -> bool:
        return (
            self.h.shape == inst.shape
            and bool(np.all(self.h >= -atol))
            and bool(np.all(self.h <= inst.hbar + atol))
        )

    def is_coupling(self, inst: TransportInstance, atol: float = 0.0) -> bool:
        """Within the box and with marginals ``f`` and ``g``."""
        return (
            self.check(inst, atol)
            and bool(np.all(np.abs(self.row_sums() - inst.f) <= atol))
            and bool(np.all(np.abs(self.col_sums() - inst.g) <= atol))
        )

    def row_sums(self) -> np.ndarray:
        return self.h.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.h.sum(axis=0)


# -- validation -------------------------------------------------------------


def _integral_violations(name: str, arr: np.ndarray) -> list[Violation]:
    out = []
    for idx in zip(*np.nonzero(arr != np.round(arr))):
        out.append(Violation(name, tuple(int(i) for i in idx), "not an integer multiple of 1/denom"))
    return out


def validate_units(f_units, g_units, hbar_units, cost, denom) -> ValidationReport:
    """Check every instance invariant and return all violations found."""
    v: list[Violation] = []
    try:
        f = np.asarray(f_units, dtype=float)
        g = np.asarray(g_units, dtype=float)
        hb = np.asarray(hbar_units, dtype=float)
        c = np.asarray(cost, dtype=float)
    except (TypeError, ValueError) as exc:
        return ValidationReport((Violation("data", (), f"non-numeric entry ({exc})"),))

    if not isinstance(denom, (int, np.integer)) or isinstance(denom, bool) or denom <= 0:
        v.append(Violation("denom", (), "denominator must be a positive integer"))
    if f.ndim != 1 or f.size == 0:
        v.append(Violation("f", (), "f must be a nonempty vector"))
    if g.ndim != 1 or g.size == 0:
        v.append(Violation("g", (), "g must be a nonempty vector"))
    if v:
        return ValidationReport(tuple(v))
    m, n = f.size, g.size
    if hb.shape != (m, n):
        v.append(Violation("hbar", (), f"shape {hb.shape} != ({m}, {n})"))
    if c.shape != (m, n):
        v.append(Violation("cost", (), f"shape {c.shape} != ({m}, {n})"))
    if v:
        return ValidationReport(tuple(v))

    for name, arr, what in (("f", f, "negative mass"), ("g", g, "negative mass"), ("hbar", hb, "negative capacity")):
        if not np.all(np.isfinite(arr)):
            v.append(Violation(name, (), "non-finite entry"))
            continue
        for idx in zip(*np.nonzero(arr < 0)):
            v.append(Violation(name, tuple(int(i) for i in idx), what))
        v.extend(_integral_violations(name, arr))
    for idx in zip(*np.nonzero(~np.isfinite(c))):
        v.append(Violation("cost", tuple(int(i) for i in idx), "non-finite cost"))
    if np.all(np.isfinite(f)) and f.sum() != denom:
        v.append(Violation("f", (), f"sum(f) != 1 (sum is {f.sum():g}/{denom})"))
    if np.all(np.isfinite(g)) and g.sum() != denom:
        v.append(Violation("g", (), f"sum(g) != 1 (sum is {g.sum():g}/{denom})"))
    return ValidationReport(tuple(v))


def _validation_error(report: ValidationReport, source: str | None = None) -> InstanceValidationError:
    denominator_only = all(x.description.startswith("not an integer multiple") for x in report.violations)
    cls = DenominatorError if denominator_only else InstanceValidationError
    return cls(report, source)


# -- file I/O ---------------------------------------------------------------

_KEYS = ("m", "n", "denom", "f", "g", "hbar", "cost")


def dumps(inst: TransportInstance) -> str:
    d = inst.to_dict()
    lines = ["{"]
    lines.append(f'  "m": {d["m"]},')
    lines.append(f'  "n": {d["n"]},')
    lines.append(f'  "denom": {d["denom"]},')
    lines.append(f'  "f": {json.dumps(d["f"])},')
    lines.append(f'  "g": {json.dumps(d["g"])},')
    lines.append('  "hbar": [')
    lines.append(",\n".join("    " + json.dumps(r) for r in d["hbar"]))
    lines.append("  ],")
    lines.append('  "cost": [')
    lines.append(",\n".join("    " + json.dumps(r) for r in d["cost"]))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def loads(text: str, source: str | None = None) -> TransportInstance:
    """Parse and validate an instance document."""
    where = f"{source}: " if source else ""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{where}malformed JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InstanceParseError(f"{where}top level must be an object")
    missing = [k for k in _KEYS if k not in doc]
    if missing:
        raise InstanceParseError(f"{where}missing keys {missing}")
    unknown = sorted(set(doc) - set(_KEYS))
    if unknown:
        raise InstanceParseError(f"{where}unknown keys {unknown}")

    report = validate_units(doc["f"], doc["g"], doc["hbar"], doc["cost"], doc["denom"])
    extra = []
    if report.ok:
        if doc["m"] != len(doc["f"]):
            extra.append(Violation("m", (), f"m={doc['m']} but len(f)={len(doc['f'])}"))
        if doc["n"] != len(doc["g"]):
            extra.append(Violation("n", (), f"n={doc['n']} but len(g)={len(doc['g'])}"))
    if extra or not report.ok:
        raise _validation_error(ValidationReport(report.violations + tuple(extra)), source)
    return TransportInstance.from_units(
        np.asarray(doc["f"], dtype=float).astype(np.int64),
        np.asarray(doc["g"], dtype=float).astype(np.int64),
        np.asarray(doc["hbar"], dtype=float).astype(np.int64),
        doc["cost"],
        int(doc["denom"]),
    )


def load_and_validate(path) -> TransportInstance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceParseError(f"{path}: cannot read ({exc.strerror})") from exc
    return loads(text, source=str(path))


def save(inst: TransportInstance, path) -> None:
    Path(path).write_text(dumps(inst), encoding="utf-8")


# -- random generation ------------------------------------------------------


def _apportion(weights: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding of ``total * weights / sum(weights)``."""
    w = weights.ravel() / weights.sum()
    raw = w * total
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return base.reshape(weights.shape)


def gen_random_with_witness(seed: int, m: int, n: int, slack: float) -> tuple[TransportInstance, CouplingMatrix]:
    """Like :func:`gen_random` but also return the hidden feasible plan."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if not (0 < slack <= 1):
        raise ValueError("slack must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    denom = m * n * 1000
    witness_units = _apportion(rng.exponential(size=(m, n)), denom)
    hbar_units = np.ceil(witness_units / slack).astype(np.int64)
    cost = rng.random((m, n))
    inst = TransportInstance.from_units(
        witness_units.sum(axis=1), witness_units.sum(axis=0), hbar_units, cost, denom
    )
    return inst, CouplingMatrix(witness_units / denom)


def gen_random(seed: int, m: int, n: int, slack: float) -> TransportInstance:
    """Random feasible instance on denominator ``m*n*1000``.

    A hidden plan ``h*`` is drawn first; capacities are ``ceil(h*/slack)`` so
    smaller ``slack`` means looser capacities. Costs are uniform on [0, 1).
    """
    return gen_random_with_witness(seed, m, n, slack)[0]
