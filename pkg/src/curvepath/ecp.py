"""Effective classical Boltzmann factor B(q0) by three independent routes.

All routes compute B = 1 - c1 * beta + O(beta^2) with the order-beta
coefficient assembled from exact counter polynomials, so the reported
B_coefficient is cutoff independent whenever the mode counters cancel
(they do, for every route; the cancellation itself is checked by
wick.check_divergence_cancellation and by the acceptance suite).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import PointGeometry, point_geometry
from .metrics import MetricSpec, builtin
from .propagator import PeriodicPropagator
from .wick import (ExpectationValue, expect_first_order,
                   expect_second_order_connected, vertex_catalog)

__all__ = [
    "ExpansionReport", "boltzmann_covariant", "boltzmann_eta", "boltzmann_sphere",
    "seeley_density", "QuadratureGrid", "partition_function", "sphere_area",
    "sphere_route_partition",
]


@dataclass
class ExpansionReport:
    route: str
    q0: list[float]
    beta: float
    M: int
    R: float
    pieces: dict[str, ExpectationValue] = field(default_factory=dict)
    B_coefficient: float = 0.0
    B_value: float = 1.0
    veff: float = 0.0
    covariant_expected: float = 0.0
    discrepancy: float = 0.0
    noncovariant_defect: float = 0.0
    include_fp: bool = True

    def as_dict(self) -> dict:
        return {
            "route": self.route,
            "q0": list(self.q0),
            "beta": self.beta,
            "M": self.M,
            "R": self.R,
            "pieces": {k: v.as_dict() for k, v in self.pieces.items()},
            "B_coefficient": self.B_coefficient,
            "B_value": self.B_value,
            "veff": self.veff,
            "covariant_expected": self.covariant_expected,
            "discrepancy": self.discrepancy,
            "noncovariant_defect": self.noncovariant_defect,
            "include_fp": self.include_fp,
        }


def _finalize(report: ExpansionReport, coeff: float) -> ExpansionReport:
    report.B_coefficient = coeff
    report.B_value = 1.0 - coeff * report.beta
    report.veff = -math.log(report.B_value) / report.beta if report.B_value > 0 else math.inf
    report.covariant_expected = report.R / 24.0
    report.discrepancy = abs(coeff - report.covariant_expected)
    report.noncovariant_defect = report.covariant_expected - coeff
    return report


def boltzmann_covariant(geom: PointGeometry, beta: float, M: int) -> ExpansionReport:
    """Geodesic-coordinate route: quartic curvature vertex, measure term,
    and the zero-mode Faddeev-Popov term. First order suffices; the mode
    counters cancel between the quartic and measure pieces at any M."""
    p = PeriodicPropagator(beta, M)
    vertices = vertex_catalog(geom, beta, "covariant")
    report = ExpansionReport(route="covariant", q0=geom.q0.tolist(), beta=beta, M=M, R=geom.R)
    names = {"quartic-curvature": "A_int4", "measure": "A_meas", "faddeev-popov": "A_FP"}
    total = None
    for v in vertices:
        ev = expect_first_order(v, p, geom)
        report.pieces[names[v.label]] = ev
        total = ev.counter_poly if total is None else total + ev.counter_poly
    return _finalize(report, total.finite_value() / beta)


def boltzmann_eta(geom: PointGeometry, beta: float, M: int, include_fp: bool = True,
                  with_mode_series: bool = False) -> ExpansionReport:
    """Plain-displacement route with vanishing temporal average.

    First order of the even vertices plus the connected square of the cubic
    kinetic vertex. With the Faddeev-Popov term the counter algebra closes
    on R/24 identically; without it the coefficient falls short by the
    noncovariant trace g^{st} T_st / 24.
    """
    p = PeriodicPropagator(beta, M)
    vertices = vertex_catalog(geom, beta, "eta")
    if not include_fp:
        vertices = [v for v in vertices if v.label != "faddeev-popov"]
    report = ExpansionReport(route="eta", q0=geom.q0.tolist(), beta=beta, M=M,
                             R=geom.R, include_fp=include_fp)
    names = {"cubic-kinetic": "A_cubic", "quartic-kinetic": "A_int4",
             "measure": "A_meas", "faddeev-popov": "A_FP"}
    first = None
    cubic = None
    for v in vertices:
        if v.label == "cubic-kinetic":
            cubic = v
            continue
        ev = expect_first_order(v, p, geom)
        report.pieces[names[v.label]] = ev
        first = ev.counter_poly if first is None else first + ev.counter_poly
    second = expect_second_order_connected(cubic, cubic, p, geom, scheme="table")
    half_second = second.counter_poly.scaled(0.5)
    report.pieces["A_second_order"] = ExpectationValue(
        counter_poly=half_second,
        numeric_M_series=[(M, half_second.value_at(M))],
        limit=half_second.finite_value() if half_second.is_finite else None)
    if with_mode_series:
        ms = [m for m in (16, 32, 64, 128, 256, 512, 1024) if m <= max(M, 16)]
        diag = expect_second_order_connected(cubic, cubic, p, geom,
                                             scheme="modes", m_series=ms)
        diag.counter_poly = None
        report.pieces["A_second_order_sharp_modes"] = ExpectationValue(
            counter_poly=None,
            numeric_M_series=[(m, 0.5 * v) for m, v in diag.numeric_M_series],
            limit=0.5 * diag.limit if diag.limit is not None else None,
            limit_error=0.5 * diag.limit_error)
    total = first - half_second  # B = 1 - <A> + 1/2 <A^2>  =>  c1 = (<A> - 1/2<A^2>)/beta
    return _finalize(report, total.finite_value() / beta)


def boltzmann_sphere(D: int, beta: float, M: int) -> ExpansionReport:
    """Homogeneous-sphere route at the origin of the embedding chart."""
    if D < 1:
        raise ValueError(f"sphere dimension must be >= 1, got {D}")
    geom = point_geometry(builtin("sphere", D), np.zeros(D))
    p = PeriodicPropagator(beta, M)
    vertices = vertex_catalog(geom, beta, "sphere")
    report = ExpansionReport(route="sphere", q0=[0.0] * D, beta=beta, M=M, R=geom.R)
    by_label = {v.label: expect_first_order(v, p, geom) for v in vertices}
    a_int = by_label["(q.qdot)^2"].counter_poly + by_label["jacobian"].counter_poly
    report.pieces["A_int"] = ExpectationValue(
        counter_poly=a_int, numeric_M_series=[(M, a_int.value_at(M))],
        limit=a_int.finite_value())
    report.pieces["A_FP"] = by_label["faddeev-popov"]
    total = a_int + by_label["faddeev-popov"].counter_poly
    return _finalize(report, total.finite_value() / beta)


def seeley_density(geom: PointGeometry, beta: float,
                   convention: str = "path_integral") -> float:
    """Short-time partition function density in either convention.

    path_integral: (2 pi beta)^(-D/2) (1 - R beta / 24); dewitt_seeley:
    (2 pi beta)^(-D/2) (1 + R beta / 12). The two brackets differ at this
    order by R beta / 8, the flat-measure correction factor.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    pref = (2.0 * math.pi * beta) ** (-geom.dim / 2.0)
    if convention == "path_integral":
        return pref * (1.0 - geom.R * beta / 24.0)
    if convention == "dewitt_seeley":
        return pref * (1.0 + geom.R * beta / 12.0)
    raise ValueError(f"unknown convention {convention!r}")


# --- configuration-space quadrature -----------------------------------------------


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product quadrature description for the q0 integral.

    kind "box": Gauss-Legendre on the product of [lo, hi] intervals.
    kind "polar" (D = 2): Gauss-Legendre radius on [0, rmax], uniform angle.
    kind "sphere-polar" (D = 2): hemisphere chart of the unit sphere with
    the radial coordinate substituted to absorb the 1/sqrt(1-r^2) density.
    Keep n moderate (<= 32) for sphere-polar: the rule converges spectrally,
    and higher orders only push nodes into the chart edge where the metric
    components lose floating-point accuracy.
    """
    kind: str = "box"
    bounds: tuple[tuple[float, float], ...] = ()
    rmax: float = 0.0
    n: int = 32


def sphere_area(D: int) -> float:
    """Surface area of the unit sphere embedded in D+1 dimensions."""
    return 2.0 * math.pi ** ((D + 1) / 2.0) / math.gamma((D + 1) / 2.0)


def _b_factor(spec: MetricSpec, q: np.ndarray, beta: float) -> tuple[float, float]:
    geom = point_geometry(spec, q)
    return geom.sqrt_g, 1.0 - geom.R * beta / 24.0


def partition_function(spec: MetricSpec, beta: float, grid: QuadratureGrid) -> float:
    """Quadrature of sqrt(g) B(q0) / (2 pi beta)^(D/2) over the chart."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    D = spec.dim
    pref = (2.0 * math.pi * beta) ** (-D / 2.0)
    x, w = np.polynomial.legendre.leggauss(grid.n)

    if grid.kind == "box":
        if len(grid.bounds) != D:
            raise ValueError(f"box grid needs {D} bounds")
        axes = []
        weights = []
        for lo, hi in grid.bounds:
            axes.append(0.5 * (hi - lo) * (x + 1.0) + lo)
            weights.append(0.5 * (hi - lo) * w)
        total = 0.0
        idx = np.ndindex(*(grid.n,) * D)
        for multi in idx:
            q = np.array([axes[k][multi[k]] for k in range(D)])
            wt = float(np.prod([weights[k][multi[k]] for k in range(D)]))
            sg, b = _b_factor(spec, q, beta)
            total += wt * sg * b
        return pref * total

    if grid.kind in ("polar", "sphere-polar"):
        if D != 2:
            raise ValueError("polar grids are for two-dimensional charts")
        ntheta = 2 * grid.n
        thetas = 2.0 * math.pi * np.arange(ntheta) / ntheta
        wtheta = 2.0 * math.pi / ntheta
        total = 0.0
        if grid.kind == "polar":
            r_nodes = 0.5 * grid.rmax * (x + 1.0)
            r_weights = 0.5 * grid.rmax * w
            for rn, rw in zip(r_nodes, r_weights):
                for th in thetas:
                    q = np.array([rn * math.cos(th), rn * math.sin(th)])
                    sg, b = _b_factor(spec, q, beta)
                    total += rw * wtheta * rn * sg * b
        else:
            # r = sin(psi): r dr / sqrt(1 - r^2) = sin(psi) dpsi on the sphere chart
            psi_nodes = 0.25 * math.pi * (x + 1.0)
            psi_weights = 0.25 * math.pi * w
            for pn, pw in zip(psi_nodes, psi_weights):
                rn = math.sin(pn)
                for th in thetas:
                    q = np.array([rn * math.cos(th), rn * math.sin(th)])
                    geom = point_geometry(spec, q)
                    b = 1.0 - geom.R * beta / 24.0
                    total += pw * wtheta * math.sin(pn) * b
        return pref * total

    raise ValueError(f"unknown grid kind {grid.kind!r}")


def sphere_route_partition(D: int, beta: float, M: int) -> float:
    """Full-sphere partition function: area times the homogeneous B."""
    report = boltzmann_sphere(D, beta, M)
    return sphere_area(D) * report.B_value * (2.0 * math.pi * beta) ** (-D / 2.0)
