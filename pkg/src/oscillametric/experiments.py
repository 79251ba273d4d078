"""Measurement predictions: window instruments, Stern-Gerlach, entangled pairs and CHSH.

Angles are in radians. Spin states live in the two-dimensional space spanned
by beta_1, beta_2; the state of angle theta is cos(theta/2) beta_1 - sin(theta/2) beta_2,
the eigenvector of S_theta with eigenvalue -1 (outcome "+", region omega_1).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import constants, integrate

from . import _kernels
from .manifold import ValidationError
from .stochastic import thread_count

# --------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class Trig:
    """cos(freq * x + phase) or sin(freq * x + phase)."""

    kind: str
    freq: float
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ValidationError("kind must be 'cos' or 'sin'")

    def __call__(self, x):
        arg = self.freq * np.asarray(x, float) + self.phase
        return np.cos(arg) if self.kind == "cos" else np.sin(arg)

    def as_cos(self):
        return self.freq, self.phase if self.kind == "cos" else self.phase - math.pi / 2


def _int_cos(k: float, theta: float, L: float, center: float) -> float:
    """int over [center - L/2, center + L/2] of cos(k x + theta)."""
    if k == 0:
        return L * math.cos(theta)
    return 2.0 * math.sin(k * L / 2) / k * math.cos(k * center + theta)


def window_inner_product(f, g, L: float, center: float = 0.0, n_simpson: int = 20001) -> float:
    """(2/L) int_{center - L/2}^{center + L/2} f g.

    Closed form when both are ``Trig``; composite Simpson otherwise.
    """
    if L <= 0:
        raise ValidationError("L must be positive")
    if isinstance(f, Trig) and isinstance(g, Trig):
        if center == 0 and f.phase == 0 and g.phase == 0 and f.kind != g.kind:
            return 0.0  # odd integrand on a centred window
        a, p = f.as_cos()
        b, q = g.as_cos()
        total = 0.5 * (_int_cos(a - b, p - q, L, center) + _int_cos(a + b, p + q, L, center))
        return 2.0 / L * total
    return window_inner_product_simpson(f, g, L, center, n_simpson)


def window_inner_product_simpson(f, g, L: float, center: float = 0.0, n: int = 20001) -> float:
    n += 1 - n % 2
    x = np.linspace(center - L / 2, center + L / 2, n)
    return 2.0 / L * float(integrate.simpson(np.asarray(f(x)) * np.asarray(g(x)), x=x))


def cos_cos_closed_form(lam: float, q: float, L: float) -> float:
    """(2/L) int_{-L/2}^{L/2} cos(lam x) cos(q x) dx written as the two sinc terms."""
    def term(s):
        return 1.0 if s == 0 else 2.0 * math.sin(L * s / 2) / (L * s)
    return term(lam + q) + term(lam - q)


def _cube_cos(k: np.ndarray, theta: float, L: float) -> float:
    """(1/L^3) int over the centred cube of side L of cos(k.x + theta)."""
    s = np.where(k == 0, 1.0, np.sin(k * L / 2) / np.where(k == 0, 1.0, k * L / 2))
    return float(np.prod(s)) * math.cos(theta)


def cube_inner_product(f: tuple, g: tuple, L: float) -> float:
    """(2/L^3) int_{B_L} f g for f = (kind, wavevector, phase) plane-wave factors."""
    (ka, a, p), (kb, b, q) = f, g
    a, b = np.asarray(a, float), np.asarray(b, float)
    p = p if ka == "cos" else p - math.pi / 2
    q = q if kb == "cos" else q - math.pi / 2
    return _cube_cos(a - b, p - q, L) + _cube_cos(a + b, p + q, L)


# --------------------------------------------------------------------------
# instruments


@dataclass(frozen=True)
class PlaneMode:
    """C cos(M' t - lam.x + Q u) + C' sin(M' t - lam.x + Q u)."""

    C: float
    Cprime: float
    lam: tuple
    Mprime: float = 1.0
    Q: float = 0.0

    @property
    def weight(self) -> float:
        return self.C**2 + self.Cprime**2

    def amplitudes(self, t: float = 0.0, u: float = 0.0):
        """(A, B) with the mode equal to A cos(lam.x) + B sin(lam.x) at fixed (t, u)."""
        psi = self.Mprime * t + self.Q * u
        return (self.C * math.cos(psi) + self.Cprime * math.sin(psi),
                self.C * math.sin(psi) - self.Cprime * math.cos(psi))


@dataclass(frozen=True)
class Instrument:
    spectrum: tuple
    L: float = 1.0
    T: float = 1.0
    kind: str = "impulse"

    def __post_init__(self):
        if len(self.spectrum) == 0:
            raise ValidationError("spectrum must be nonempty")
        if self.L <= 0 or self.T <= 0:
            raise ValidationError("L and T must be positive")
        if self.kind not in ("impulse", "energy"):
            raise ValidationError("kind must be 'impulse' or 'energy'")


@dataclass(frozen=True)
class Measurement:
    labels: tuple
    weights: tuple
    probabilities: tuple
    min_gap_product: float
    separated: bool
    overlap: bool

    def to_dict(self):
        return {
            "labels": [list(l) if isinstance(l, tuple) else l for l in self.labels],
            "weights": list(self.weights),
            "probabilities": list(self.probabilities),
            "min_gap_product": self.min_gap_product,
            "separated": self.separated,
            "overlap": self.overlap,
        }


def _flags(points: Sequence, scale: float, sep: float, overlap_tol: float):
    """Smallest pairwise gap times the window size, and the separated / overlap flags derived from it."""
    pts = [np.atleast_1d(np.asarray(p, float)) for p in points]
    gaps = [float(np.linalg.norm(a - b)) for i, a in enumerate(pts) for b in pts[i + 1:]]
    g = min(gaps) if gaps else math.inf
    prod = scale * g
    # two windows overlap when sinc(L gap / 2) exceeds 1 - overlap_tol
    if not gaps:
        return prod, True, False
    half = prod / 2
    sinc = 1.0 if half == 0 else abs(math.sin(half) / half)
    return prod, prod >= sep, sinc > 1 - overlap_tol


def measure_impulse(modes: Sequence[PlaneMode], instrument: Instrument, t: float = 0.0, u: float = 0.0,
                    sep: float = 100.0, overlap_tol: float = 0.01) -> Measurement:
    """Project the mode sum onto cos(q.x), sin(q.x) over the cube B_L for each q in the spectrum."""
    if instrument.kind != "impulse":
        raise ValidationError("instrument is not an impulse instrument")
    L = instrument.L
    weights = []
    for q in instrument.spectrum:
        q = np.asarray(q, float)
        cq = sq = 0.0
        for m in modes:
            A, B = m.amplitudes(t, u)
            lam = np.asarray(m.lam, float)
            cq += A * cube_inner_product(("cos", lam, 0.0), ("cos", q, 0.0), L)
            cq += B * cube_inner_product(("sin", lam, 0.0), ("cos", q, 0.0), L)
            sq += A * cube_inner_product(("cos", lam, 0.0), ("sin", q, 0.0), L)
            sq += B * cube_inner_product(("sin", lam, 0.0), ("sin", q, 0.0), L)
        weights.append(cq * cq + sq * sq)
    total = sum(weights)
    if not total > 0:
        raise ValidationError("zero total weight")
    pts = [m.lam for m in modes] if len(modes) > 1 else [tuple(q) for q in instrument.spectrum]
    prod, separated, overlap = _flags(pts, L, sep, overlap_tol)
    labels = tuple(tuple(float(c) for c in q) for q in instrument.spectrum)
    return Measurement(labels, tuple(weights), tuple(w / total for w in weights), prod, separated, overlap)


def measure_energy(modes: Sequence[PlaneMode], instrument: Instrument, t0: float = 0.0, x=(0.0, 0.0, 0.0),
                   u: float = 0.0, sep: float = 100.0, overlap_tol: float = 0.01) -> Measurement:
    """Project the time signal at x onto cos(e t), sin(e t) over [t0, t0 + T] for each e in the spectrum."""
    if instrument.kind != "energy":
        raise ValidationError("instrument is not an energy instrument")
    T = instrument.T
    center = t0 + T / 2
    x = np.asarray(x, float)
    weights = []
    for e in instrument.spectrum:
        e = float(e)
        ce = se = 0.0
        for m in modes:
            ph = -float(np.dot(m.lam, x)) + m.Q * u
            sig_c = Trig("cos", m.Mprime, ph)
            sig_s = Trig("sin", m.Mprime, ph)
            for amp, sig in ((m.C, sig_c), (m.Cprime, sig_s)):
                if amp:
                    ce += amp * window_inner_product(sig, Trig("cos", e), T, center)
                    se += amp * window_inner_product(sig, Trig("sin", e), T, center)
        weights.append(ce * ce + se * se)
    total = sum(weights)
    if not total > 0:
        raise ValidationError("zero total weight")
    freqs = [m.Mprime for m in modes] if len(modes) > 1 else list(instrument.spectrum)
    prod, separated, overlap = _flags(freqs, T, sep, overlap_tol)
    labels = tuple(float(e) for e in instrument.spectrum)
    return Measurement(labels, tuple(weights), tuple(w / total for w in weights), prod, separated, overlap)


HBAR = constants.hbar
C_LIGHT = constants.c


def si_mass(M: float) -> float:
    """m = hbar M / c (M in inverse metres, m in kg)."""
    return HBAR * M / C_LIGHT


def si_charge(Q: float) -> float:
    return HBAR * Q


def energy_separation_si(T_seconds: float, m1: float, m2: float) -> float:
    """T |m1 c^2 - m2 c^2| / hbar; equals (c T) |M1 - M2| in geometric units."""
    return T_seconds * abs(m1 - m2) * C_LIGHT**2 / HBAR


# --------------------------------------------------------------------------
# Stern-Gerlach


def spin_state(theta: float, phase: float = 0.0) -> np.ndarray:
    """e^{i phase} (cos(theta/2), -sin(theta/2)) in the (beta_1, beta_2) basis."""
    return np.exp(1j * phase) * np.array([math.cos(theta / 2), -math.sin(theta / 2)])


def canonical_orthogonal(theta: float, phase: float = 0.0) -> np.ndarray:
    """e^{i phase} (sin(theta/2), cos(theta/2)), the state of angle theta - pi."""
    return np.exp(1j * phase) * np.array([math.sin(theta / 2), math.cos(theta / 2)])


def orthogonal(zeta) -> np.ndarray:
    """(-conj z2, conj z1): orthogonal to zeta with the same norm."""
    z = np.asarray(zeta, complex)
    return np.array([-np.conj(z[1]), np.conj(z[0])])


def inner(a, b) -> complex:
    """<a, b> = sum a_i conj(b_i)."""
    return complex(np.sum(np.asarray(a, complex) * np.conj(np.asarray(b, complex))))


@dataclass(frozen=True)
class SternGerlach:
    p1: float
    p2: float


def stern_gerlach(zeta, theta: float) -> SternGerlach:
    """Probabilities of omega_1 (eigenvalue -1) and omega_2 for state zeta and field angle theta."""
    z = np.asarray(getattr(zeta, "components", zeta), complex)
    if z.shape != (2,):
        raise ValidationError("zeta must have two components")
    n2 = float(np.sum(np.abs(z) ** 2))
    if not n2 > 0:
        raise ValidationError("zero spin state")
    p1 = abs(inner(z, spin_state(theta))) ** 2 / n2
    p1 = min(max(p1, 0.0), 1.0)
    return SternGerlach(p1, 1.0 - p1)


# --------------------------------------------------------------------------
# entangled pairs


@dataclass(frozen=True)
class EntangledPair:
    theta1G: float
    theta1D: float
    thetaG: float
    thetaD: float
    transform_rule: str = "example1"

    def __post_init__(self):
        if self.transform_rule not in ("example1", "example1_right", "example2"):
            raise ValidationError("transform_rule must be example1, example1_right or example2")
        for name in ("theta1G", "theta1D", "thetaG", "thetaD"):
            a = getattr(self, name)
            if not -math.pi < a <= math.pi:
                raise ValidationError(f"{name} must lie in (-pi, pi]")


def _cases(pair: EntangledPair):
    """(weight, theta_T, reference state index) for each equiprobable transformed double metric."""
    g = [(pair.thetaG - pair.theta1G, 1), (pair.thetaG - (pair.theta1G - math.pi), 2)]
    d = [(pair.thetaD - pair.theta1D, 1), (pair.thetaD - (pair.theta1D - math.pi), 2)]
    if pair.transform_rule == "example1":
        chosen = g
    elif pair.transform_rule == "example1_right":
        chosen = d
    else:
        chosen = g + d
    w = 1.0 / len(chosen)
    return [(w, tT) for tT, _ in chosen]


def joint_probs_by_cases(pair: EntangledPair) -> dict:
    """Mixture over the transformed double metrics.

    In each case the measured state angle on side s is theta_1^s + theta_T, so
    the outcome "+" on side s has probability cos^2((theta^s - theta_1^s - theta_T)/2),
    independently on the two sides.
    """
    out = {"++": 0.0, "+-": 0.0, "-+": 0.0, "--": 0.0}
    for w, tT in _cases(pair):
        pg = math.cos((pair.thetaG - pair.theta1G - tT) / 2) ** 2
        pd = math.cos((pair.thetaD - pair.theta1D - tT) / 2) ** 2
        out["++"] += w * pg * pd
        out["+-"] += w * pg * (1 - pd)
        out["-+"] += w * (1 - pg) * pd
        out["--"] += w * (1 - pg) * (1 - pd)
    return out


def joint_probs_closed_form(pair: EntangledPair) -> dict:
    d = (pair.thetaG - pair.thetaD) - (pair.theta1G - pair.theta1D)
    c = 0.5 * math.cos(d / 2) ** 2
    s = 0.5 * math.sin(d / 2) ** 2
    return {"++": c, "--": c, "+-": s, "-+": s}


def joint_probs_inner(pair: EntangledPair, phases=(0.0, 0.0, 0.0, 0.0)) -> dict:
    """Hermitian-product form; ``phases`` are arbitrary unit factors of the four states."""
    gG, g1G = spin_state(pair.thetaG, phases[0]), spin_state(pair.theta1G, phases[1])
    gD, g1D = spin_state(pair.thetaD, phases[2]), spin_state(pair.theta1D, phases[3])
    g1Gp, g1Dp = canonical_orthogonal(pair.theta1G, phases[1]), canonical_orthogonal(pair.theta1D, phases[3])
    gDp = canonical_orthogonal(pair.thetaD, phases[2])
    same = 0.5 * abs(inner(gG, g1G) * inner(gD, g1D) + inner(gG, g1Gp) * inner(gD, g1Dp)) ** 2
    diff = 0.5 * abs(inner(gG, g1G) * inner(gDp, g1D) + inner(gG, g1Gp) * inner(gDp, g1Dp)) ** 2
    return {"++": same, "--": same, "+-": diff, "-+": diff}


@dataclass(frozen=True)
class JointProbs:
    probs: dict
    closed_form: dict
    inner_form: dict
    cross_check: float

    @property
    def total(self) -> float:
        return sum(self.probs.values())

    @property
    def marginals(self):
        p = self.probs
        return {"G+": p["++"] + p["+-"], "D+": p["++"] + p["-+"]}

    @property
    def correlation(self) -> float:
        p = self.probs
        return p["++"] + p["--"] - p["+-"] - p["-+"]


def entangled_joint_probs(pair: EntangledPair) -> JointProbs:
    cases = joint_probs_by_cases(pair)
    closed = joint_probs_closed_form(pair)
    herm = joint_probs_inner(pair)
    err = max(max(abs(cases[k] - closed[k]), abs(herm[k] - closed[k])) for k in closed)
    return JointProbs(cases, closed, herm, err)


def correlation(thetaG: float, thetaD: float, theta1G: float = 0.0, theta1D: float = 0.0,
                rule: str = "example1") -> float:
    return entangled_joint_probs(EntangledPair(theta1G, theta1D, _wrap(thetaG), _wrap(thetaD), rule)).correlation


def _wrap(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class CHSH:
    E: tuple
    S: float

    def to_dict(self):
        return {"E": list(self.E), "S": self.S}


def chsh(thetaG: float, thetaG2: float, thetaD: float, thetaD2: float, theta1G: float = 0.0,
         theta1D: float = 0.0, rule: str = "example1") -> CHSH:
    """S = E(G, D) + E(G, D') + E(G', D) - E(G', D')."""
    E = (
        correlation(thetaG, thetaD, theta1G, theta1D, rule),
        correlation(thetaG, thetaD2, theta1G, theta1D, rule),
        correlation(thetaG2, thetaD, theta1G, theta1D, rule),
        correlation(thetaG2, thetaD2, theta1G, theta1D, rule),
    )
    return CHSH(E, E[0] + E[1] + E[2] - E[3])


CHSH_ANGLES = (0.0, math.pi / 2, math.pi / 4, -math.pi / 4)


# --------------------------------------------------------------------------
# local hidden variables


@dataclass(frozen=True)
class LHVResult:
    E: tuple
    S: float
    stderr: float
    n_trials: int
    seed: int
    strategy: str

    def to_dict(self):
        return dict(E=list(self.E), S=self.S, stderr=self.stderr, n_trials=self.n_trials, seed=self.seed,
                    strategy=self.strategy)


LHV_CHUNK = 1 << 18


def lhv_baseline(n_trials: int, seed: int, angles=CHSH_ANGLES, strategy: str = "sign_cos",
                 threads: Optional[int] = None) -> LHVResult:
    """Monte-Carlo CHSH value of a deterministic local response model.

    ``sign_cos``: hidden lambda uniform on [0, 2pi), response sign(cos(theta - lambda)).
    ``constant``: every response is +1.
    Chunks use independent Philox streams, so results do not depend on ``threads``.
    """
    if n_trials <= 0:
        raise ValidationError("n_trials must be positive")
    aG = np.array(angles[:2], float)
    aD = np.array(angles[2:], float)
    if strategy == "constant":
        sums = np.full((2, 2), float(n_trials))
    elif strategy == "sign_cos":
        n_chunks = -(-n_trials // LHV_CHUNK)
        children = np.random.SeedSequence(seed).spawn(n_chunks)

        def work(i):
            g = np.random.Generator(np.random.Philox(children[i]))
            size = min(LHV_CHUNK, n_trials - i * LHV_CHUNK)
            lam = g.random(size) * (2 * math.pi)
            return _kernels.ACTIVE.lhv_products(lam, aG, aD)

        threads = threads or thread_count()
        if threads > 1 and n_chunks > 1:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(work, range(n_chunks)))
        else:
            parts = [work(i) for i in range(n_chunks)]
        sums = np.zeros((2, 2))
        for p in parts:
            sums += p
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    E = sums / n_trials
    S = E[0, 0] + E[0, 1] + E[1, 0] - E[1, 1]
    var = np.sum((1 - E**2) / n_trials)
    return LHVResult(tuple(float(e) for e in E.ravel()), float(S), float(math.sqrt(var)), n_trials, seed, strategy)


def lhv_exact_sign_cos(delta: float) -> float:
    """E(delta) = 1 - 2|delta|/pi for the sign(cos) model, delta wrapped to [-pi, pi]."""
    d = abs(_wrap(delta))
    return 1 - 2 * d / math.pi


def tsirelson_search(n: int = 1_000_000, seed: int = 0) -> float:
    """max |S| of the cosine correlation over n random angle quadruples."""
    g = np.random.Generator(np.random.Philox(seed))
    a = g.uniform(-math.pi, math.pi, size=(n, 4))
    S = np.cos(a[:, 0] - a[:, 2]) + np.cos(a[:, 0] - a[:, 3]) + np.cos(a[:, 1] - a[:, 2]) - np.cos(a[:, 1] - a[:, 3])
    return float(np.max(np.abs(S)))
