"""Chart definitions: metric files, the builtin catalog, jet evaluation.

A MetricSpec is immutable after construction and all evaluation is pure,
so specs can be shared freely across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expressions as ex
from .jets import Jet3

__all__ = [
    "MetricSpec", "MetricError", "DomainError", "parse_metric", "builtin",
    "eval_metric_jet", "eval_metric_value", "BUILTIN_NAMES",
    "embedding_to_stereographic", "stereographic_to_embedding",
]

BUILTIN_NAMES = ("flat", "sphere", "sphere-stereographic", "hyperbolic-ball", "conformal2d")


class MetricError(ValueError):
    pass


class DomainError(MetricError):
    """Evaluation point outside the chart's domain."""


@dataclass(frozen=True)
class MetricSpec:
    """A chart: dimension, coordinate names, and symmetric component expressions."""

    name: str
    dim: int
    coords: tuple[str, ...]
    components: tuple[tuple[ex.Expression, ...], ...]  # D x D, symmetric
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise MetricError(f"dimension must be positive, got {self.dim}")
        if len(self.coords) != self.dim:
            raise MetricError(f"expected {self.dim} coordinate names, got {len(self.coords)}")
        if len(self.components) != self.dim or any(len(r) != self.dim for r in self.components):
            raise MetricError("component array must be D x D")
        for i in range(self.dim):
            for j in range(self.dim):
                if self.components[i][j] != self.components[j][i]:
                    raise MetricError(f"component array not symmetric at ({i}, {j})")
        allowed = set(self.coords) | set(self.params)
        for i in range(self.dim):
            for j in range(i, self.dim):
                unknown = ex.free_identifiers(self.components[i][j]) - allowed
                if unknown:
                    raise MetricError(
                        f"unknown identifier(s) {sorted(unknown)} in component ({i}, {j})")

    def domain_ok(self, q: np.ndarray) -> bool:
        """Conservative chart-domain test for the builtin families."""
        if self.name in ("sphere", "sphere-stereographic-interior", "hyperbolic-ball"):
            return float(q @ q) < 1.0
        return True

    def check_domain(self, q: Sequence[float]) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,):
            raise MetricError(f"point has wrong dimension {q.shape}, expected ({self.dim},)")
        if not self.domain_ok(q):
            raise DomainError(f"point {q.tolist()} outside domain of chart {self.name!r}")
        return q


def _mirror_and_check(entries: list[list], dim: int) -> list[list[str]]:
    """Fill omitted lower-triangle entries; reject asymmetric explicit ones."""
    grid: list[list] = [[None] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(dim):
            grid[i][j] = entries[i][j]
    for i in range(dim):
        for j in range(i + 1, dim):
            upper, lower = grid[i][j], grid[j][i]
            if upper is None and lower is None:
                raise MetricError(f"missing component ({i + 1}, {j + 1})")
            if upper is None:
                grid[i][j] = lower
            elif lower is None:
                grid[j][i] = upper
    return grid


def parse_metric(source: str) -> MetricSpec:
    """Parse a UTF-8 JSON metric file into a validated MetricSpec."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise MetricError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MetricError("metric file must be a JSON object")
    for key in ("dim", "coords", "g"):
        if key not in doc:
            raise MetricError(f"metric file missing field {key!r}")
    name = str(doc.get("name", "user-metric"))
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise MetricError(f"'dim' must be a positive integer, got {dim!r}")
    coords = doc["coords"]
    if not isinstance(coords, list) or len(coords) != dim:
        raise MetricError(f"'coords' must list {dim} names")
    params = doc.get("params", {}) or {}
    if not isinstance(params, dict):
        raise MetricError("'params' must be an object of numbers")
    params = {str(k): float(v) for k, v in params.items()}
    g = doc["g"]
    if not isinstance(g, list) or len(g) != dim or any(
            not isinstance(row, list) or len(row) != dim for row in g):
        raise MetricError(f"'g' must be a {dim} x {dim} array (null entries mirrored)")
    grid = _mirror_and_check(g, dim)

    parsed: list[list[ex.Expression]] = [[None] * dim for _ in range(dim)]  # type: ignore
    for i in range(dim):
        for j in range(dim):
            entry = grid[i][j]
            if not isinstance(entry, str):
                raise MetricError(f"component ({i + 1}, {j + 1}) must be an expression string")
            try:
                parsed[i][j] = ex.parse(entry)
            except ex.ParseError as exc:
                raise MetricError(f"component ({i + 1}, {j + 1}): {exc}") from None
    for i in range(dim):
        for j in range(i + 1, dim):
            if isinstance(grid[i][j], str) and isinstance(grid[j][i], str) \
                    and parsed[i][j] != parsed[j][i]:
                raise MetricError(
                    f"components ({i + 1},{j + 1}) and ({j + 1},{i + 1}) differ explicitly")
    return MetricSpec(
        name=name, dim=dim, coords=tuple(str(c) for c in coords),
        components=tuple(tuple(row) for row in parsed), params=params)


# --- builtin catalog ----------------------------------------------------------

def _coords(D: int) -> tuple[str, ...]:
    return tuple(f"q{i + 1}" for i in range(D))


def _qq(D: int) -> str:
    return " + ".join(f"q{i + 1}*q{i + 1}" for i in range(D))


def builtin(name: str, D: int, params: Mapping[str, float] | None = None) -> MetricSpec:
    """Closed-form catalog metric.

    sphere: unit sphere in D+1 dimensions in the embedding chart,
    g_ij = delta_ij + q_i q_j / (1 - q^2), valid on |q| < 1 (one hemisphere).
    sphere-stereographic is the same manifold in the stereographic chart,
    g_ij = 4 delta_ij / (1 + q^2)^2. hyperbolic-ball is the Poincare ball,
    g_ij = 4 delta_ij / (1 - q^2)^2. conformal2d is exp(2 sigma(q)) delta_ij
    with sigma = a q1 + b q2 + c q1 q2 + e (q1^2 + q2^2).
    """
    params = dict(params or {})
    if D < 1:
        raise MetricError(f"dimension must be positive, got {D}")
    if name == "flat":
        comps = [[("1" if i == j else "0") for j in range(D)] for i in range(D)]
    elif name == "sphere":
        qq = _qq(D)
        comps = [[f"q{min(i, j) + 1}*q{max(i, j) + 1} / (1 - ({qq}))" for j in range(D)]
                 for i in range(D)]
        for i in range(D):
            comps[i][i] = f"1 + {comps[i][i]}"
    elif name == "sphere-stereographic":
        qq = _qq(D)
        comps = [[("0" if i != j else f"4 / (1 + ({qq}))^2") for j in range(D)] for i in range(D)]
    elif name == "hyperbolic-ball":
        qq = _qq(D)
        comps = [[("0" if i != j else f"4 / (1 - ({qq}))^2") for j in range(D)] for i in range(D)]
    elif name == "conformal2d":
        if D != 2:
            raise MetricError("conformal2d requires D = 2")
        defaults = {"a": 0.3, "b": -0.2, "c": 0.15, "e": 0.1}
        defaults.update(params)
        params = defaults
        sigma = "a*q1 + b*q2 + c*q1*q2 + e*(q1^2 + q2^2)"
        comps = [[("0" if i != j else f"exp(2*({sigma}))") for j in range(D)] for i in range(D)]
    else:
        raise MetricError(f"unknown builtin metric {name!r}; choose from {BUILTIN_NAMES}")
    parsed = tuple(tuple(ex.parse(e) for e in row) for row in comps)
    return MetricSpec(name=name, dim=D, coords=_coords(D), components=parsed, params=params)


# --- evaluation ---------------------------------------------------------------

def eval_metric_jet(spec: MetricSpec, q: Sequence[float]) -> list[list[Jet3]]:
    """g_{mu nu}(q) with exact first, second and third partials."""
    qv = spec.check_domain(q)
    env: dict[str, object] = {
        name: Jet3.coordinate(qv[i], i, spec.dim) for i, name in enumerate(spec.coords)
    }
    for pname, pval in spec.params.items():
        env[pname] = Jet3.constant(pval, spec.dim)
    out: list[list[Jet3]] = []
    for i in range(spec.dim):
        row = []
        for j in range(spec.dim):
            try:
                row.append(ex.evaluate(spec.components[i][j], env))
            except ex.EvalError as exc:
                raise MetricError(f"evaluating g({i + 1},{j + 1}) at {qv.tolist()}: {exc}") from None
        out.append(row)
    return out


def eval_metric_value(spec: MetricSpec, q: Sequence[float]) -> np.ndarray:
    """g_{mu nu}(q) values only."""
    qv = spec.check_domain(q)
    env: dict[str, object] = {name: float(qv[i]) for i, name in enumerate(spec.coords)}
    env.update({k: float(v) for k, v in spec.params.items()})
    g = np.empty((spec.dim, spec.dim))
    for i in range(spec.dim):
        for j in range(spec.dim):
            try:
                g[i, j] = ex.evaluate(spec.components[i][j], env)
            except ex.EvalError as exc:
                raise MetricError(f"evaluating g({i + 1},{j + 1}) at {qv.tolist()}: {exc}") from None
    return g


# --- chart correspondence for the unit sphere ---------------------------------

def embedding_to_stereographic(q: np.ndarray) -> np.ndarray:
    """Map an embedding-chart point (upper hemisphere) to the stereographic chart."""
    q = np.asarray(q, dtype=float)
    z = np.sqrt(1.0 - float(q @ q))
    return q / (1.0 + z)


def stereographic_to_embedding(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return 2.0 * u / (1.0 + float(u @ u))
