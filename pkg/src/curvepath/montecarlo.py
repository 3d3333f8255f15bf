"""Stochastic cross-check of the analytic engine.

Zero-mode-free periodic Gaussian paths are sampled directly in Fourier
space: the real and imaginary parts of each positive-frequency coefficient
are independent normals with variance 1/(2 beta omega_m^2), which
reproduces the two-point kernel of the free action exactly. Vertices are
integrated on a uniform grid of 8M points, spectrally exact for the
trigonometric polynomials that occur at cutoff M, so the only error is
statistical.

Estimates are reproducible: streams derive from a counter-based Philox
generator keyed by the user seed, and batch substreams are spawned
deterministically, so a fixed seed gives bit-identical results regardless
of batch size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import PointGeometry
from .propagator import PeriodicPropagator
from .wick import Vertex, vertex_catalog

__all__ = [
    "PathSample", "McEstimate", "sample_modes", "mc_vertex_expectation",
    "mc_boltzmann", "mc_two_point",
]


@dataclass(frozen=True)
class PathSample:
    beta: float
    M: int
    D: int
    modes: np.ndarray  # complex, shape (D, M), positive frequencies

    def grid_values(self, K: int | None = None, derivative: bool = False) -> np.ndarray:
        K = K or 8 * self.M
        return _to_grid(self.modes[np.newaxis], self.beta, K, derivative)[0]


@dataclass
class McEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"mean": self.mean, "stderr": self.stderr,
               "n_samples": self.n_samples, "seed": self.seed}
        out.update(self.extras)
        return out


def _block_size(D: int, K: int) -> int:
    """Samples per PRNG stream; a function of the run shape only, so that a
    fixed seed reproduces results bit for bit at any memory budget."""
    return max(128, min(8192, (1 << 22) // max(1, D * K)))


def _rng_streams(seed: int, count: int) -> list[np.random.Generator]:
    seq = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(s)) for s in seq.spawn(count)]


def _draw_modes(rng: np.random.Generator, beta: float, M: int, D: int,
                nbatch: int) -> np.ndarray:
    omega = 2.0 * math.pi * np.arange(1, M + 1) / beta
    sd = np.sqrt(1.0 / (2.0 * beta * omega**2))
    re = rng.normal(0.0, sd, size=(nbatch, D, M))
    im = rng.normal(0.0, sd, size=(nbatch, D, M))
    return re + 1j * im


def _to_grid(modes: np.ndarray, beta: float, K: int, derivative: bool) -> np.ndarray:
    """Field values on the uniform grid tau_j = j beta / K.

    xi(tau) = sum_{m>0} [xi_m e^{-i omega_m tau} + conj], realized through a
    half-spectrum inverse FFT; the derivative multiplies modes by -i omega_m.
    """
    nbatch, D, M = modes.shape
    if K < 2 * M + 2:
        raise ValueError("grid too coarse for the mode content")
    omega = 2.0 * math.pi * np.arange(1, M + 1) / beta
    coef = modes * (-1j * omega) if derivative else modes
    X = np.zeros((nbatch, D, M + 1), dtype=complex)
    np.conjugate(coef, out=X[:, :, 1:M + 1])
    X *= K
    return np.fft.irfft(X, n=K, axis=2)


def sample_modes(beta: float, M: int, D: int, seed: int) -> PathSample:
    """One reproducible path sample (the batched internals reuse the draw)."""
    if M < 1:
        raise ValueError("mode cutoff must be >= 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return PathSample(beta=beta, M=M, D=D, modes=_draw_modes(rng, beta, M, D, 1)[0])


def _frame_coeff(coeff: np.ndarray, geom: PointGeometry) -> np.ndarray:
    """Convert a coordinate-frame coefficient tensor to the orthonormal frame.

    Sampled fields carry unit two-point kernel; coordinate fields are
    xi^mu = (L^-T)^mu_a xi^a with L the Cholesky factor of the metric.
    """
    L = np.linalg.cholesky(geom.g)
    E = np.linalg.inv(L.T)  # E[mu, a]
    out = coeff
    for axis in range(coeff.ndim):
        out = np.tensordot(out, E, axes=(0, 0))
    return out


def _vertex_action(v: Vertex, geom: PointGeometry, q: np.ndarray, qd: np.ndarray,
                   beta: float, M: int) -> np.ndarray:
    """Per-sample action of one vertex from grid fields (nbatch, D, K)."""
    K = q.shape[2]
    coeff = _frame_coeff(v.coeff, geom)
    fields = [qd if s == 1 else q for s in v.slots]
    acc = np.zeros((q.shape[0], K))
    buf = np.empty_like(acc)
    for index in np.ndindex(*coeff.shape):
        c = coeff[index]
        if c == 0.0:
            continue
        np.multiply(fields[0][:, index[0], :], fields[1][:, index[1], :], out=buf)
        for slot in range(2, len(index)):
            buf *= fields[slot][:, index[slot], :]
        buf *= c
        acc += buf
    integral = acc.sum(axis=1) * (beta / K)
    return v.prefactor_truncated(beta, M) * integral


def mc_vertex_expectation(v: Vertex, geom: PointGeometry, beta: float, M: int,
                          n: int, seed: int) -> McEstimate:
    """Unbiased estimate of the first-order expectation of one vertex.

    Converges to the cutoff-M value (expect_first_order_truncated), which
    differs from the counter-table limit by the O(1/M) coincidence tail.
    """
    K = 8 * M
    if K < 2 * M + 2:
        raise ValueError("time grid too coarse")
    batch = _block_size(geom.dim, K)
    nb = max(1, math.ceil(n / batch))
    streams = _rng_streams(seed, nb)
    total = 0.0
    total2 = 0.0
    count = 0
    for rng in streams:
        take = min(batch, n - count)
        if take <= 0:
            break
        modes = _draw_modes(rng, beta, M, geom.dim, take)
        q = _to_grid(modes, beta, K, derivative=False)
        qd = _to_grid(modes, beta, K, derivative=True)
        vals = _vertex_action(v, geom, q, qd, beta, M)
        total += vals.sum()
        total2 += (vals**2).sum()
        count += take
    mean = float(total) / count
    var = max(float(total2) / count - mean**2, 0.0)
    return McEstimate(mean=mean, stderr=math.sqrt(var / count), n_samples=count, seed=seed)


def mc_boltzmann(route: str, geom: PointGeometry, beta: float, M: int, n: int,
                 seed: int, variance_guard: float = 1.0,
                 on_batch=None) -> McEstimate:
    """Monte Carlo Boltzmann factor for one route's truncated vertex set.

    The primary estimate is the catalog-order-consistent 1 - <A>; the raw
    reweighting average <exp(-A)> is reported alongside, but at finite
    cutoff it picks up variance terms of order beta^2 M^2 that lie beyond
    the catalog truncation, so it is a diagnostic, not the headline number.
    The guard rejects runs whose action variance makes reweighting useless.
    on_batch(count, mean, stderr), when given, streams running partials.
    """
    vertices = vertex_catalog(geom, beta, route)
    K = 8 * M
    batch = _block_size(geom.dim, K)
    nb = max(1, math.ceil(n / batch))
    streams = _rng_streams(seed, nb)
    s_a = s_a2 = s_e = s_e2 = 0.0
    count = 0
    for rng in streams:
        take = min(batch, n - count)
        if take <= 0:
            break
        modes = _draw_modes(rng, beta, M, geom.dim, take)
        q = _to_grid(modes, beta, K, derivative=False)
        qd = _to_grid(modes, beta, K, derivative=True)
        a = np.zeros(take)
        for v in vertices:
            a += _vertex_action(v, geom, q, qd, beta, M)
        e = np.exp(-a)
        s_a += a.sum()
        s_a2 += (a**2).sum()
        s_e += e.sum()
        s_e2 += (e**2).sum()
        count += take
        if on_batch is not None:
            mean_sofar = float(s_a) / count
            var_sofar = max(float(s_a2) / count - mean_sofar**2, 0.0)
            on_batch(count, 1.0 - mean_sofar, math.sqrt(var_sofar / count))
    mean_a = float(s_a) / count
    var_a = max(float(s_a2) / count - mean_a**2, 0.0)
    if var_a >= variance_guard:
        raise ValueError(
            f"action variance {var_a:.3f} >= {variance_guard}: reweighting unreliable; "
            "use a smaller beta or a larger cutoff")
    mean_e = float(s_e) / count
    var_e = max(float(s_e2) / count - mean_e**2, 0.0)
    est = McEstimate(mean=1.0 - mean_a, stderr=math.sqrt(var_a / count),
                     n_samples=count, seed=seed)
    est.extras = {
        "action_mean": float(mean_a),
        "action_variance": float(var_a),
        "exp_reweighted_mean": float(mean_e),
        "exp_reweighted_stderr": float(math.sqrt(var_e / count)),
    }
    return est


def mc_two_point(beta: float, M: int, D: int, n: int, seed: int,
                 pairs: list[tuple[float, float]]) -> list[dict]:
    """Empirical <xi(tau) . xi(tau')>/D at probe pairs against the kernel."""
    K = 8 * M
    p = PeriodicPropagator(beta, M)
    idx = [(int(round(t1 / beta * K)) % K, int(round(t2 / beta * K)) % K)
           for t1, t2 in pairs]
    batch = _block_size(D, K)
    nb = max(1, math.ceil(n / batch))
    streams = _rng_streams(seed, nb)
    sums = np.zeros(len(pairs))
    sums2 = np.zeros(len(pairs))
    count = 0
    for rng in streams:
        take = min(batch, n - count)
        if take <= 0:
            break
        modes = _draw_modes(rng, beta, M, D, take)
        q = _to_grid(modes, beta, K, derivative=False)
        for k, (i1, i2) in enumerate(idx):
            prod = (q[:, :, i1] * q[:, :, i2]).sum(axis=1) / D
            sums[k] += prod.sum()
            sums2[k] += (prod**2).sum()
        count += take
    out = []
    for k, (t1, t2) in enumerate(pairs):
        mean = sums[k] / count
        var = max(sums2[k] / count - mean**2, 0.0)
        i1, i2 = idx[k]
        expected = p.green_modes((i1 - i2) * beta / K)
        out.append({"tau": t1, "taup": t2, "mean": mean,
                    "stderr": math.sqrt(var / count), "expected": expected})
    return out
