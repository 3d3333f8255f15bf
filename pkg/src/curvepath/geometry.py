"""Pointwise tensor bundle: Christoffels, curvature, and the T/V objects.

Index conventions used throughout the package (anchored so that the unit
sphere in D+1 dimensions has scalar curvature R = +D(D-1) and the geodesic
normal-coordinate expansion of the metric carries the quadratic coefficient
+1/3 against the lowered Riemann tensor):

  Gamma[m, s, t]        Christoffel of the second kind, symmetric in (s, t)
  dGamma[k, m, s, t]    partial derivative by coordinate k of Gamma[m, s, t]
  GammaCov[s, t, k, m]  covariant-style derivative used by the geodesic
                        series: dGamma[k, m, s, t] - 2 Gamma[n, k, s] Gamma[m, n, t]
                        (a bookkeeping object, not a tensor)
  Riemann[s, t, k, m]   mixed curvature tensor; in terms of the textbook
                        R^m_{n a b} = d_a Gamma[m, b, n] - d_b Gamma[m, a, n]
                        + Gamma[m, a, r] Gamma[r, b, n] - Gamma[m, b, r] Gamma[r, a, n]
                        it is Riemann[s, t, k, m] = R^m_{k s t}; antisymmetric
                        in its first index pair
  riemann_low[m, a, n, b]  fully lowered arrangement entering the quartic
                        kinetic vertex: equals R^std_{a m n b}
  Ricci[n, b]           R^m_{n m b}, symmetric; R = g^{nb} Ricci[n, b]
  T[s, t]               d_m Gamma[m, s, t] - 2 Gamma[m, s, k] Gamma[k, m, t]
                        + Gamma[m, k, m] Gamma[k, s, t], symmetric part
  V[m]                  g^{st} Gamma[m, s, t]; divV is its covariant divergence

With these conventions the trace identity g^{st} T[s, t] = divV holds
identically; divergence_identity_residual checks it by finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .metrics import MetricSpec, eval_metric_jet

__all__ = ["PointGeometry", "GeometryError", "point_geometry", "divergence_identity_residual"]


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class PointGeometry:
    q0: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    sqrt_g: float
    Gamma: np.ndarray       # [m, s, t]
    dGamma: np.ndarray      # [k, m, s, t]
    GammaCov: np.ndarray    # [s, t, k, m]
    Riemann: np.ndarray     # [s, t, k, m]
    riemann_low: np.ndarray  # [m, a, n, b]
    Ricci: np.ndarray
    R: float
    T: np.ndarray
    V: np.ndarray
    divV: float
    # metric derivatives kept for the noncovariant route's vertex catalog
    dg: np.ndarray          # [s, m, n]
    ddg: np.ndarray         # [s, t, m, n]

    @property
    def dim(self) -> int:
        return self.q0.shape[0]


def _jet_arrays(spec: MetricSpec, q0: np.ndarray):
    jets = eval_metric_jet(spec, q0)
    D = spec.dim
    g = np.empty((D, D))
    dg = np.empty((D, D, D))
    ddg = np.empty((D, D, D, D))
    for i in range(D):
        for j in range(D):
            g[i, j] = jets[i][j].value
            dg[:, i, j] = jets[i][j].grad
            ddg[:, :, i, j] = jets[i][j].hess
    g = 0.5 * (g + g.T)
    return g, dg, ddg


def point_geometry(spec: MetricSpec, q0: Sequence[float]) -> PointGeometry:
    """Assemble the full tensor bundle at q0 from exact metric jets."""
    q0 = np.asarray(q0, dtype=float)
    g, dg, ddg = _jet_arrays(spec, q0)

    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise GeometryError(f"metric not positive definite at {q0.tolist()}") from None
    if np.min(np.diag(chol)) ** 2 <= 1e-12 * np.max(np.diag(chol)) ** 2:
        raise GeometryError(f"metric nearly singular at {q0.tolist()}")
    g_inv = np.linalg.inv(g)
    sqrt_g = float(np.prod(np.diag(chol)))

    # Gamma^m_{st} = 1/2 g^{mn} (d_s g_nt + d_t g_ns - d_n g_st);
    # dg[s, m, n] = d_s g_mn, assembled with axes [n, s, t]
    term = (np.einsum("snt->nst", dg) + np.einsum("tns->nst", dg) - np.einsum("nst->nst", dg))
    Gamma = 0.5 * np.einsum("mn,nst->mst", g_inv, term)

    # d_k Gamma^m_{st}
    dg_inv = -np.einsum("ma,kab,bn->kmn", g_inv, dg, g_inv)
    dterm = (np.einsum("ksnt->knst", ddg) + np.einsum("ktns->knst", ddg)
             - np.einsum("knst->knst", ddg))
    dGamma = (0.5 * np.einsum("kmn,nst->kmst", dg_inv, term)
              + 0.5 * np.einsum("mn,knst->kmst", g_inv, dterm))

    GammaCov = (np.einsum("kmst->stkm", dGamma)
                - 2.0 * np.einsum("nks,mnt->stkm", Gamma, Gamma))

    # textbook mixed Riemann R^m_{n a b}
    r_std = (np.einsum("ambn->mnab", dGamma) - np.einsum("bman->mnab", dGamma)
             + np.einsum("mar,rbn->mnab", Gamma, Gamma)
             - np.einsum("mbr,ran->mnab", Gamma, Gamma))
    Riemann = np.einsum("mkst->stkm", r_std)
    r_std_low = np.einsum("mi,inab->mnab", g, r_std)
    riemann_low = np.einsum("amnb->manb", r_std_low)
    Ricci = np.einsum("mnmb->nb", r_std)
    Ricci = 0.5 * (Ricci + Ricci.T)
    R = float(np.einsum("nb,nb->", g_inv, Ricci))

    T = (np.einsum("mmst->st", dGamma)
         - 2.0 * np.einsum("msk,kmt->st", Gamma, Gamma)
         + np.einsum("mkm,kst->st", Gamma, Gamma))
    T = 0.5 * (T + T.T)

    V = np.einsum("st,mst->m", g_inv, Gamma)
    dV = (np.einsum("kst,mst->km", dg_inv, Gamma)
          + np.einsum("st,kmst->km", g_inv, dGamma))
    divV = float(np.trace(dV) + np.einsum("mmk,k->", Gamma, V))

    return PointGeometry(
        q0=q0, g=g, g_inv=g_inv, sqrt_g=sqrt_g, Gamma=Gamma, dGamma=dGamma,
        GammaCov=GammaCov, Riemann=Riemann, riemann_low=riemann_low,
        Ricci=Ricci, R=R, T=T, V=V, divV=divV, dg=dg, ddg=ddg)


def _density_field(spec: MetricSpec, q: np.ndarray) -> np.ndarray:
    """sqrt(g) V^mu at q, the density whose ordinary divergence is tested."""
    geom = point_geometry(spec, q)
    return geom.sqrt_g * geom.V


def divergence_identity_residual(spec: MetricSpec, q0: Sequence[float], h: float = 1e-3) -> float:
    """|g^{st} T_st - (1/sqrt g) d_mu(sqrt g V^mu)| with 4th-order differences."""
    q0 = np.asarray(q0, dtype=float)
    if not (1e-12 < h < 1e-1):
        raise GeometryError(f"finite-difference step {h} out of sensible range")
    geom = point_geometry(spec, q0)
    D = geom.dim
    div = 0.0
    for k in range(D):
        e = np.zeros(D)
        e[k] = h
        f2p = _density_field(spec, q0 + 2 * e)[k]
        f1p = _density_field(spec, q0 + e)[k]
        f1m = _density_field(spec, q0 - e)[k]
        f2m = _density_field(spec, q0 - 2 * e)[k]
        div += (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h)
    div /= geom.sqrt_g
    trT = float(np.einsum("st,st->", geom.g_inv, geom.T))
    return abs(trT - div)
