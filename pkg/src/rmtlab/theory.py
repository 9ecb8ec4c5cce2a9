"""Closed-form scalar functions: MP law, thresholds, Lambda maps, rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError

ENDPOINT_CLAMP = 1e-12


class Undefined:
    """Marker for a quantity with no value at the given arguments."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "undefined"

    def __bool__(self):
        return False


UNDEFINED = Undefined()


def bennett_rate(u: float) -> float:
    """h(u) = (1+u) ln(1+u) - u."""
    if u < 0:
        raise DomainError(f"bennett_rate needs u >= 0, got {u}")
    return (1.0 + u) * math.log1p(u) - u


@dataclass(frozen=True)
class Thresholds:
    q: float
    r2_star: float
    r1_star: float
    l2_star: float | Undefined
    connectivity_bound: float
    ihara_bass_bound: float
    undefined: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        def enc(x):
            if isinstance(x, Undefined):
                return None
            return "inf" if x == math.inf else x
        return {
            "q": self.q, "r2_star": self.r2_star, "r1_star": self.r1_star,
            "l2_star": enc(self.l2_star), "connectivity_bound": self.connectivity_bound,
            "ihara_bass_bound": enc(self.ihara_bass_bound), "undefined": list(self.undefined),
        }


def _r2(q):
    q2 = q * q
    return 1.0 / ((q2 + 1.0) * math.log1p(1.0 / q2) - 1.0)


def _r1(q):
    q2 = q * q
    return 1.0 / ((1.0 / q2 + 1.0) * math.log1p(q2) - 1.0)


def _l2(q):
    q2 = q * q
    return 1.0 / ((q2 - 1.0) * math.log1p(-1.0 / q2) + 1.0)


def _ib(q):
    q2 = q * q
    h = bennett_rate(q2 - 1.0)
    return math.inf if h == 0 else q2 / h


def thresholds(q: float) -> Thresholds:
    if q < 1:
        raise DomainError(f"q={q} < 1")
    undefined = ()
    if q == 1:
        l2 = UNDEFINED
        undefined = ("l2_star", "ihara_bass_bound")
    else:
        l2 = _l2(q)
    return Thresholds(q=q, r2_star=_r2(q), r1_star=_r1(q), l2_star=l2,
                      connectivity_bound=q * q, ihara_bass_bound=_ib(q), undefined=undefined)


def _qstar_gap(q):
    return _l2(q) - _ib(q)


def critical_q_star() -> float:
    """q > 1 where the left threshold meets the Ihara-Bass bound."""
    return optimize.bisect(_qstar_gap, 1.0 + 1e-6, 3.0, xtol=1e-12, maxiter=200)


def _check_lambda_domain(t, lo_band, hi_band, lower):
    if t < lower - ENDPOINT_CLAMP:
        raise DomainError(f"t={t} below domain")
    if lo_band is not None and lo_band + ENDPOINT_CLAMP < t < hi_band - ENDPOINT_CLAMP:
        raise DomainError(f"t={t} inside forbidden band ({lo_band}, {hi_band})")
    if lo_band is None and t < hi_band - ENDPOINT_CLAMP:
        raise DomainError(f"t={t} below domain start {hi_band}")
    for e in (lower, lo_band, hi_band):
        if e is not None and abs(t - e) <= ENDPOINT_CLAMP:
            return e
    return t


def lambda_q(t: float, q: float) -> float:
    """Sqrt(t + q^-2 + 1/(t - q^2)) on [0, q^2-1] and [q^2+1, inf)."""
    q2 = q * q
    t = _check_lambda_domain(t, q2 - 1.0, q2 + 1.0, 0.0)
    return math.sqrt(max(0.0, t + 1.0 / q2 + 1.0 / (t - q2)))


def lambda_q_inv(t: float, q: float) -> float:
    """Sqrt(t + q^2 + 1/(t - q^-2)) on [q^-2 + 1, inf)."""
    qi2 = 1.0 / (q * q)
    t = _check_lambda_domain(t, None, qi2 + 1.0, qi2 + 1.0)
    return math.sqrt(max(0.0, t + q * q + 1.0 / (t - qi2)))


def lambda_map(t: np.ndarray, q: float) -> np.ndarray:
    """Vectorised Lambda_q; NaN where t is outside the domain."""
    t = np.asarray(t, dtype=float)
    q2 = q * q
    t = np.where(np.abs(t - (q2 - 1)) <= ENDPOINT_CLAMP, q2 - 1, t)
    t = np.where(np.abs(t - (q2 + 1)) <= ENDPOINT_CLAMP, q2 + 1, t)
    ok = (t >= 0) & ((t <= q2 - 1) | (t >= q2 + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sqrt(np.maximum(0.0, t + 1 / q2 + 1 / (t - q2)))
    return np.where(ok, val, np.nan)


def lambda_map_inv(t: np.ndarray, q: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    qi2 = 1.0 / (q * q)
    t = np.where(np.abs(t - (qi2 + 1)) <= ENDPOINT_CLAMP, qi2 + 1, t)
    ok = t >= qi2 + 1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sqrt(np.maximum(0.0, t + q * q + 1 / (t - qi2)))
    return np.where(ok, val, np.nan)


def mp_edges(q: float) -> tuple[float, float]:
    return q - 1.0 / q, q + 1.0 / q


def mp_density(s, q: float):
    """Limiting density of the singular values; works on scalars or arrays."""
    s = np.asarray(s, dtype=float)
    lm, lp = (q - 1 / q) ** 2, (q + 1 / q) ** 2
    s2 = s * s
    inside = (s > 0) & (s2 >= lm) & (s2 <= lp)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = q * q * np.sqrt(np.maximum(0.0, (s2 - lm) * (lp - s2))) / (np.pi * s)
    out = np.where(inside, f, 0.0)
    return float(out) if out.ndim == 0 else out


class MPCdf:
    """Tabulated CDF of the limiting singular-value law, from adaptive quadrature."""

    def __init__(self, q: float, points: int = 4001):
        self.q = q
        lo, hi = mp_edges(q)
        # Chebyshev-like node clustering near the square-root edges.
        u = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, points))
        self.grid = lo + (hi - lo) * u
        inc = [integrate.quad(mp_density, a, b, args=(q,), epsabs=1e-13, limit=100)[0]
               for a, b in zip(self.grid[:-1], self.grid[1:])]
        c = np.concatenate([[0.0], np.cumsum(inc)])
        self.total = float(c[-1])
        self.values = c / self.total

    def __call__(self, s):
        return np.interp(s, self.grid, self.values, left=0.0, right=1.0)

    def inverse(self, u):
        return np.interp(u, self.values, self.grid)


def mp_sample(q: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. draws from the singular-value law by inverse-CDF sampling."""
    return MPCdf(q).inverse(rng.uniform(size=size))


def error_parameter(d: float) -> float:
    if d <= 1:
        raise DomainError(f"d={d} must exceed 1")
    return math.sqrt(math.log(d) / d)


def degree_rate(alpha: float, q: float, d: float, side: str = "V2") -> float:
    """f_{q,d}(alpha); V1 vertices use q^-1 in place of q."""
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if side not in ("V1", "V2"):
        raise DomainError(f"side must be V1 or V2, got {side!r}")
    qq = q * q if side == "V2" else 1.0 / (q * q)
    return d * (alpha * math.log(alpha / qq) - alpha + qq) + 0.5 * math.log(2 * math.pi * alpha * d)


def expected_outlier_count(b: float, q: float, N: int, m: int, side: str = "right-V2") -> float:
    """Leading-order count; the unquantified o(1) in the exponent is dropped."""
    th = thresholds(q)
    if side == "right-V2":
        thr, size = th.r2_star, m
    elif side == "right-V1":
        thr, size = th.r1_star, N - m
    elif side == "left-V2":
        if isinstance(th.l2_star, Undefined):
            return 0.0
        thr, size = th.l2_star, m
    else:
        raise DomainError(f"unknown side {side!r}")
    if b > thr:
        return 0.0
    return size * N ** (-b / thr)


@dataclass(frozen=True)
class RegimeLabel:
    right_region: str
    left_region: str


def classify_regime(b: float, q: float) -> RegimeLabel:
    th = thresholds(q)
    if b > th.r2_star:
        right = "no-right-outliers"
    elif b > th.r1_star:
        right = "V2-right-outliers"
    else:
        right = "V1-and-V2-right-outliers"
    if q == 1:
        left = "no-left-outliers"  # left edge sits at zero
    elif b <= th.connectivity_bound:
        left = "disconnected-regime"
    elif b <= th.ihara_bass_bound:
        left = "undetermined-below-assumptions"
    elif b <= th.l2_star:
        left = "V2-left-outliers"
    else:
        left = "no-left-outliers"
    return RegimeLabel(right, left)


def assumptions_check(b: float, q: float) -> dict[str, bool]:
    th = thresholds(q)
    return {"connectivity": b > th.connectivity_bound, "ihara_bass": b > th.ihara_bass_bound}
