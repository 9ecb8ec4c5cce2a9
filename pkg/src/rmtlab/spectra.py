"""Centered operators, singular values, outlier prediction and matching."""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import MismatchError
from .model import BipartiteGraph, DegreeProfile, ModelParams
from .theory import MPCdf, error_parameter, lambda_map, lambda_map_inv, mp_edges

DENSE_LIMIT = 2500
RESIDUAL_REL_TOL = 1e-8


class CenteredOperator:
    """H = (A - EA)/sqrt(d) and its blocks, applied without forming dense matrices.

    For weighted graphs the weights already have mean zero, so no centering
    term is subtracted and the operator is M/sqrt(d).
    """

    MODES = ("H-full", "X-rect", "gram")

    def __init__(self, g: BipartiteGraph, params: ModelParams, mode: str = "gram"):
        if mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}")
        self.graph = g
        self.params = params
        self.mode = mode
        self.n, self.m = g.n, g.m
        self.scale = 1.0 / math.sqrt(params.d)
        self.A = g.biadjacency().tocsr()
        self.AT = self.A.T.tocsr()
        self.shift = 0.0 if g.weighted else params.p * self.scale

    @property
    def graph_hash(self) -> str:
        return self.graph.graph_hash()

    def X(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        out = self.scale * (self.A @ v)
        if self.shift:
            out = out - self.shift * v.sum(axis=0)
        return out

    def XT(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        out = self.scale * (self.AT @ u)
        if self.shift:
            out = out - self.shift * u.sum(axis=0)
        return out

    def gram(self, v: np.ndarray) -> np.ndarray:
        return self.XT(self.X(v))

    def H(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        top, bottom = z[: self.n], z[self.n:]
        return np.concatenate([self.X(bottom), self.XT(top)])

    def apply(self, v: np.ndarray) -> np.ndarray:
        return {"H-full": self.H, "X-rect": self.X, "gram": self.gram}[self.mode](v)

    def dense_X(self) -> np.ndarray:
        return self.scale * self.A.toarray() - self.shift

    def dense_H(self) -> np.ndarray:
        X = self.dense_X()
        N = self.n + self.m
        H = np.zeros((N, N))
        H[: self.n, self.n:] = X
        H[self.n:, : self.n] = X.T
        return H

    def dense_gram(self) -> np.ndarray:
        """X^T X assembled from sparse products plus rank-one corrections."""
        s = self.scale
        G = (s * s) * (self.AT @ self.A).toarray()
        if self.shift:
            c = (s * self.shift) * np.asarray(self.A.sum(axis=0)).ravel()
            G -= c[:, None] + c[None, :]
            G += self.n * self.shift ** 2
        return G

    def linear_operator(self) -> spla.LinearOperator:
        shape = {"H-full": (self.n + self.m,) * 2, "X-rect": (self.n, self.m), "gram": (self.m, self.m)}[self.mode]
        rmat = {"H-full": self.H, "X-rect": self.XT, "gram": self.gram}[self.mode]
        return spla.LinearOperator(shape, matvec=self.apply, rmatvec=rmat, matmat=self.apply, dtype=float)


def build_operator(g: BipartiteGraph, params: ModelParams, mode: str = "gram") -> CenteredOperator:
    return CenteredOperator(g, params, mode)


@dataclass
class SingularValues:
    """Singular values of X, largest first.

    ``ranks[i]`` is the position of ``values[i]`` in the full descending
    order of all ``m`` values; the dense path has ``ranks == arange(m)``.
    """

    values: np.ndarray
    ranks: np.ndarray
    m: int
    method: str
    converged: bool = True
    max_residual: float = 0.0
    flags: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.values.size == self.m


def _lanczos_side(G: spla.LinearOperator, k: int, which: str, seed: int):
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(G.shape[0])
    ncv = min(G.shape[0], max(4 * k + 1, 40))
    flags = []
    try:
        vals, vecs = spla.eigsh(G, k=k, which=which, v0=v0, ncv=ncv, maxiter=50 * G.shape[0], tol=0)
    except spla.ArpackNoConvergence as exc:
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        flags.append(f"no-convergence:{which}")
    return vals, vecs, flags


def singular_values(op: CenteredOperator, how: str = "dense", k: int = 6,
                    dense_limit: int = DENSE_LIMIT, seed: int = 0) -> SingularValues:
    """All values via a dense Gram eigensolve, or the k largest and k smallest via Lanczos."""
    m = op.m
    if how == "auto":
        how = "dense" if m <= dense_limit else "lanczos"
    if how == "dense":
        if m > dense_limit:
            raise ValueError(f"dense path limited to m <= {dense_limit}")
        ev = np.linalg.eigvalsh(op.dense_gram())
        sig = np.sqrt(np.clip(ev, 0.0, None))[::-1]
        return SingularValues(sig, np.arange(m), m, "dense")
    if how != "lanczos":
        raise ValueError(f"unknown method {how!r}")
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    if 2 * k >= m - 1:
        return singular_values(op, "dense", dense_limit=max(dense_limit, m))
    G = spla.LinearOperator((m, m), matvec=op.gram, matmat=op.gram, dtype=float)
    top, vt, f1 = _lanczos_side(G, k, "LA", seed)
    bot, vb, f2 = _lanczos_side(G, k, "SA", seed + 1)
    lam_max = float(np.max(top)) if top.size else 1.0
    res = []
    for vals, vecs in ((top, vt), (bot, vb)):
        if vals.size:
            R = op.gram(vecs) - vecs * vals
            res.append(np.linalg.norm(R, axis=0))
    max_res = float(max((r.max() for r in res), default=0.0))
    ok = not (f1 or f2) and max_res <= RESIDUAL_REL_TOL * lam_max
    t = np.sqrt(np.clip(np.sort(top)[::-1], 0, None))
    b = np.sqrt(np.clip(np.sort(bot)[::-1], 0, None))
    values = np.concatenate([t, b])
    ranks = np.concatenate([np.arange(t.size), np.arange(m - b.size, m)])
    flags = f1 + f2 + ([] if ok else ["residual-above-tolerance"])
    return SingularValues(values, ranks, m, "lanczos", ok, max_res, flags)


@dataclass
class SpectralReport:
    sigma: np.ndarray
    ranks: np.ndarray
    m: int
    bulk: tuple[float, float]
    xi: float
    window: float
    right_outliers: list
    left_outliers: list
    ks_distance: float
    graph_hash: str | None = None
    method: str = "dense"
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma.tolist(), "ranks": self.ranks.tolist(), "m": self.m,
            "bulk": list(self.bulk), "xi": self.xi, "window": self.window,
            "right_outliers": self.right_outliers, "left_outliers": self.left_outliers,
            "ks": self.ks_distance, "graph_hash": self.graph_hash, "method": self.method,
            "converged": self.converged,
        }


def classify(sv: SingularValues, params: ModelParams, window: float | None = None,
             graph_hash: str | None = None) -> SpectralReport:
    q = params.q
    xi = error_parameter(params.d)
    w = xi ** 0.25 if window is None else window
    lo, hi = mp_edges(q)
    right = [int(r) for s, r in zip(sv.values, sv.ranks) if s > hi + w]
    if q == 1:
        warnings.warn("q = 1: left edge is zero, left-outlier analysis skipped", stacklevel=2)
        left = []
    else:
        left = [int(r) for s, r in zip(sv.values, sv.ranks) if s < lo - w]
    ks = esd_distance_values(sv.values, q) if sv.complete and sv.m >= 50 else math.nan
    return SpectralReport(sv.values, sv.ranks, sv.m, (lo, hi), xi, w, right, left, ks,
                          graph_hash, sv.method, sv.converged)


def spectral_report(g: BipartiteGraph, params: ModelParams, how: str = "auto", k: int = 6,
                    dense_limit: int = DENSE_LIMIT, window: float | None = None) -> SpectralReport:
    op = build_operator(g, params, "gram")
    sv = singular_values(op, how, k=k, dense_limit=dense_limit)
    return classify(sv, params, window, g.graph_hash())


@dataclass
class PredictedOutliers:
    R1: np.ndarray
    R2: np.ndarray
    L2: np.ndarray
    lambda_sorted: list          # (Lambda, side, local id), descending
    lambda_left: list            # (Lambda, local id), by ascending degree
    alpha1: np.ndarray
    alpha2: np.ndarray
    window: float
    graph_hash: str | None = None

    def to_dict(self) -> dict:
        return {
            "R1": self.R1.tolist(), "R2": self.R2.tolist(), "L2": self.L2.tolist(),
            "lambda_right": [[lam, side, idx] for lam, side, idx in self.lambda_sorted],
            "lambda_left": [[lam, idx] for lam, idx in self.lambda_left],
            "window": self.window, "graph_hash": self.graph_hash,
        }


def predict_outliers(profile: DegreeProfile, params: ModelParams, window: float | None = None) -> PredictedOutliers:
    """Degree-based outlier sets.

    ``window`` defaults to xi**(1/4). Vertices whose alpha falls in the band
    where the Lambda map is undefined are never candidates.
    """
    q = params.q
    xi = error_parameter(params.d)
    w = xi ** 0.25 if window is None else window
    lo, hi = mp_edges(q)
    a1, a2 = np.asarray(profile.alpha1), np.asarray(profile.alpha2)
    lam2 = lambda_map(a2, q)
    lam1 = lambda_map_inv(a1, q)
    right2 = (a2 >= q * q + 1) & (lam2 >= hi + w)
    right1 = lam1 >= hi + w
    R2 = np.flatnonzero(np.nan_to_num(right2, nan=False))
    R1 = np.flatnonzero(np.nan_to_num(right1, nan=False))
    if q == 1:
        L2 = np.empty(0, dtype=np.int64)
    else:
        left = (a2 <= q * q - 1) & (lam2 <= lo - w)
        L2 = np.flatnonzero(np.nan_to_num(left, nan=False))
    n = a1.size
    entries = [(float(lam1[i]), "V1", int(i), int(i)) for i in R1]
    entries += [(float(lam2[j]), "V2", int(j), n + int(j)) for j in R2]
    entries.sort(key=lambda e: (-e[0], e[3]))
    lambda_sorted = [(lam, side, idx) for lam, side, idx, _ in entries]
    order = sorted(L2.tolist(), key=lambda j: (a2[j], j))
    lambda_left = [(float(lam2[j]), int(j)) for j in order]
    return PredictedOutliers(R1, R2, L2, lambda_sorted, lambda_left, a1, a2, w, profile.graph_hash)


@dataclass
class MatchResult:
    right_gaps: np.ndarray
    left_gaps: np.ndarray

    def summary(self) -> dict:
        def stats(a):
            if a.size == 0:
                return {"count": 0, "max": None, "median": None}
            return {"count": int(a.size), "max": float(a.max()), "median": float(np.median(a))}
        return {"right": stats(self.right_gaps), "left": stats(self.left_gaps)}


def match_outliers(report: SpectralReport, predicted: PredictedOutliers) -> MatchResult:
    """Rank-to-rank gaps; never re-matched greedily."""
    if report.graph_hash and predicted.graph_hash and report.graph_hash != predicted.graph_hash:
        raise MismatchError("report and prediction come from different graphs")
    by_rank = dict(zip(report.ranks.tolist(), report.sigma.tolist()))
    right = []
    for j, (lam, _, _) in enumerate(predicted.lambda_sorted):
        if j not in by_rank:
            break
        right.append(abs(by_rank[j] - lam))
    left = []
    for j, (lam, _) in enumerate(predicted.lambda_left):
        rank = report.m - 1 - j
        if rank not in by_rank:
            break
        left.append(abs(by_rank[rank] - lam))
    return MatchResult(np.asarray(right), np.asarray(left))


@functools.lru_cache(maxsize=32)
def _cdf(q: float) -> MPCdf:
    return MPCdf(q)


def esd_distance_values(sigma: np.ndarray, q: float) -> float:
    """Kolmogorov-Smirnov distance between the empirical law of sigma and the limit law."""
    s = np.sort(np.asarray(sigma, dtype=float))
    k = s.size
    F = _cdf(float(q))(s)
    upper = np.arange(1, k + 1) / k - F
    lower = F - np.arange(k) / k
    return float(max(upper.max(), lower.max()))


def esd_distance(report: SpectralReport, q: float) -> float:
    if report.m < 50:
        raise ValueError("need m >= 50")
    if report.sigma.size != report.m:
        raise ValueError("needs the full spectrum")
    return esd_distance_values(report.sigma, q)
