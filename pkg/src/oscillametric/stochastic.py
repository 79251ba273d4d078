"""Presence probabilities of singularities, counting laws and a seeded rejection sampler."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import _kernels
from .manifold import NumericalError, ValidationError

CHUNK = 1 << 16


def thread_count() -> int:
    raw = os.environ.get("OSCILLAMETRIC_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned boxes omega within Omega in R^3; ``grid`` Gauss-Legendre nodes per axis."""

    omega_lo: tuple
    omega_hi: tuple
    Omega_lo: tuple
    Omega_hi: tuple
    grid: int = 24

    def __post_init__(self):
        for name in ("omega_lo", "omega_hi", "Omega_lo", "Omega_hi"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 3:
                raise ValidationError(f"{name} must have three components")
            object.__setattr__(self, name, v)
        olo, ohi = np.array(self.omega_lo), np.array(self.omega_hi)
        Olo, Ohi = np.array(self.Omega_lo), np.array(self.Omega_hi)
        if np.any(ohi <= olo) or np.any(Ohi <= Olo):
            raise ValidationError("boxes must have positive extent")
        if np.any(olo < Olo) or np.any(ohi > Ohi):
            raise ValidationError("omega must lie inside Omega")
        if self.grid < 1:
            raise ValidationError("grid must be positive")

    @classmethod
    def whole(cls, lo, hi, grid: int = 24) -> "RegionSpec":
        return cls(tuple(lo), tuple(hi), tuple(lo), tuple(hi), grid)


def _box_integral(fn: Callable, lo, hi, n: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    axes = [mid[i] + half[i] * nodes for i in range(3)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    w = np.einsum("i,j,k->ijk", weights, weights, weights).ravel() * np.prod(half)
    return float(np.sum(w * np.asarray(fn(mesh), float)))


def _density(a_c: Callable, t: float, weight: Optional[Callable]):
    def dens(x):
        val = np.asarray(a_c(t, x))
        d = np.abs(val) ** 2
        if d.ndim > 1:
            d = d.sum(axis=-1)
        if weight is not None:
            d = d * np.asarray(weight(x), float)
        return d

    return dens


def region_probability(a_c: Callable, region: RegionSpec, t: float = 0.0, weight: Optional[Callable] = None) -> float:
    """int_omega |a_c|^2 / int_Omega |a_c|^2 at time t.

    ``a_c(t, x)`` takes positions of shape (N, 3); vector-valued fields use the
    summed squared modulus. ``weight`` multiplies the integrand (for the exact
    volume element of a non-neutral potential).
    """
    dens = _density(a_c, t, weight)
    den = _box_integral(dens, region.Omega_lo, region.Omega_hi, region.grid)
    if not den > 0:
        raise ValidationError("zero denominator: |a_c|^2 vanishes on Omega")
    num = _box_integral(dens, region.omega_lo, region.omega_hi, region.grid)
    return min(max(num / den, 0.0), 1.0)


def region_probability_unaveraged(a: Callable, region: RegionSpec, t: float, u: float) -> float:
    """Diagnostic: the same ratio with a(t, x, u)^2 before averaging over u."""
    dens = lambda x: np.asarray(a(t, x, u), float) ** 2
    den = _box_integral(dens, region.Omega_lo, region.Omega_hi, region.grid)
    if not den > 0:
        raise ValidationError("zero denominator")
    return _box_integral(dens, region.omega_lo, region.omega_hi, region.grid) / den


def count_law(N: int, p: float, k: int) -> float:
    """Binomial probability of exactly k of N singularities in omega."""
    if not 0 <= p <= 1:
        raise ValidationError("p must lie in [0, 1]")
    if not 0 <= k <= N:
        raise ValidationError("need 0 <= k <= N")
    # logpmf stays finite for subnormal p where pmf overflows inside scipy
    return float(np.exp(stats.binom.logpmf(k, N, p)))


def poisson_limit(D: float, v1: float, k: int) -> float:
    """(D v1)^k e^{-D v1} / k!."""
    if D * v1 < 0:
        raise ValidationError("D v1 must be nonnegative")
    if k < 0:
        raise ValidationError("k must be nonnegative")
    return float(stats.poisson.pmf(k, D * v1))


def binomial_poisson_gap(N: int, mean: float, kmax: Optional[int] = None) -> float:
    """max_k |Binomial(N, mean/N)(k) - Poisson(mean)(k)|."""
    kmax = kmax if kmax is not None else int(mean + 20 * np.sqrt(mean + 1) + 20)
    k = np.arange(min(kmax, N) + 1)
    return float(np.max(np.abs(stats.binom.pmf(k, N, mean / N) - stats.poisson.pmf(k, mean))))


@dataclass(frozen=True)
class SingularitySample:
    positions: np.ndarray
    t: float
    seed: int
    proposals: int = 0

    def to_rows(self):
        return [tuple(float(c) for c in p) for p in self.positions]


def _streams(seed, n_chunks: int):
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def estimate_envelope(a_c: Callable, region: RegionSpec, t: float = 0.0, n: int = 40, margin: float = 1.05) -> float:
    axes = [np.linspace(region.Omega_lo[i], region.Omega_hi[i], n) for i in range(3)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return float(np.max(_density(a_c, t, None)(mesh))) * margin


def sample_singularities(a_c: Callable, region: RegionSpec, n_samples: int, seed: int, t: float = 0.0,
                         envelope: Optional[float] = None, threads: Optional[int] = None) -> SingularitySample:
    """Rejection sampling of positions in Omega with density proportional to |a_c(t, .)|^2.

    Proposals are uniform on Omega. Work is split into fixed-size chunks with
    independent Philox streams, so the result does not depend on ``threads``.
    """
    if n_samples < 0:
        raise ValidationError("n_samples must be nonnegative")
    if n_samples == 0:
        return SingularitySample(np.zeros((0, 3)), t, seed, 0)
    lo, hi = np.array(region.Omega_lo), np.array(region.Omega_hi)
    env = envelope if envelope is not None else estimate_envelope(a_c, region, t)
    if not env > 0 or not np.isfinite(env):
        raise ValidationError("degenerate density: envelope must be positive and finite")
    dens = _density(a_c, t, None)
    threads = threads or thread_count()
    accepted, proposals, round_ = [], 0, 0
    got = 0
    while got < n_samples:
        # each round draws a batch of chunks whose seeds depend only on (seed, round)
        n_chunks = max(1, int(np.ceil(2 * (n_samples - got) / CHUNK)))
        gens = _streams([seed, round_], n_chunks)

        def work(g):
            x = lo + (hi - lo) * g.random((CHUNK, 3))
            u = g.random(CHUNK)
            d = dens(x)
            if np.any(d > env * (1 + 1e-12)):
                raise NumericalError("density exceeds the rejection envelope")
            return x[_kernels.ACTIVE.accept_mask(u, d, env)]

        if threads > 1 and n_chunks > 1:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(work, gens))
        else:
            parts = [work(g) for g in gens]
        for p in parts:
            accepted.append(p)
            got += len(p)
        proposals += n_chunks * CHUNK
        round_ += 1
        if round_ > 1000:
            raise NumericalError("acceptance rate too low")
    pos = np.concatenate(accepted)[:n_samples]
    return SingularitySample(pos, t, seed, proposals)


def fringe_bin_probabilities(kappa: float, edges: np.ndarray) -> np.ndarray:
    """Exact bin masses of the density proportional to cos^2(kappa x) on [edges[0], edges[-1]]."""
    prim = lambda x: 0.5 * x + np.sin(2 * kappa * x) / (4 * kappa)
    mass = np.diff(prim(np.asarray(edges, float)))
    return mass / mass.sum()


def chi2_against(sample_x: np.ndarray, edges: np.ndarray, probs: np.ndarray):
    counts, _ = np.histogram(sample_x, bins=edges)
    expected = probs * counts.sum()
    return stats.chisquare(counts, expected)


def ks_uniform(sample_x: np.ndarray, lo: float, hi: float):
    return stats.kstest(sample_x, stats.uniform(loc=lo, scale=hi - lo).cdf)
