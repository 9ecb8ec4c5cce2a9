"""Non-backtracking operator, Ihara-Bass reduction, theta-star and Loewner checks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import BracketError, ForbiddenLambda, PreconditionFailed, SingularM1
from .model import BipartiteGraph, ModelParams, degree_profile, rng_for
from .spectra import DENSE_LIMIT, build_operator

DENSE_B_LIMIT = 64


def nb_apply(H: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(Bv)_(i,j) = S_j - H_ji v_(j,i) with S_j = sum_l H_jl v_(j,l).

    ``v`` is indexed by ordered pairs, flattened row-major (pair (i, j) at i*N + j).
    """
    H = np.asarray(H)
    N = H.shape[0]
    V = np.asarray(v).reshape(N, N)
    HV = H * V
    S = HV.sum(axis=1)
    return (S[None, :] - HV.T).reshape(-1)


def dense_nb_matrix(H: np.ndarray) -> np.ndarray:
    """Entrywise enumeration of B; only for tiny N."""
    H = np.asarray(H)
    N = H.shape[0]
    if N > DENSE_B_LIMIT ** 0.5:
        raise ValueError(f"refusing to materialise B for N={N}")
    B = np.zeros((N * N, N * N), dtype=H.dtype)
    for i in range(N):
        for j in range(N):
            for l in range(N):
                if l != i:
                    B[i * N + j, j * N + l] = H[j, l]
    return B


@dataclass
class RadiusEstimate:
    estimate: float
    converged: bool
    iterations: int


def _power(apply, v: np.ndarray, iters: int, tol: float, period: int, window: int = 20) -> RadiusEstimate:
    """Normalise every ``period`` steps; each period contributes one growth factor.

    With ``period > 1`` the estimate is robust to dominant eigenvalues of equal
    modulus (the bipartite +/- and conjugate symmetries), whose interference
    makes single-step growth factors oscillate.
    """
    v = v / np.linalg.norm(v)
    logs = []
    prev = None
    steps = 0
    while steps + period <= max(iters, period):
        acc = 0.0
        for _ in range(period):
            w = apply(v)
            g = np.linalg.norm(w)
            steps += 1
            if g == 0 or not np.isfinite(g):
                return RadiusEstimate(0.0, True, steps)
            acc += math.log(g)
            v = w / g
        logs.append(acc)
        if len(logs) >= window:
            est = math.exp(sum(logs[-window:]) / (window * period))
            if prev is not None and abs(est - prev) <= tol * est:
                return RadiusEstimate(est, True, steps)
            prev = est
    tail = logs[-window:]
    return RadiusEstimate(math.exp(sum(tail) / (len(tail) * period)), False, steps)


def nb_spectral_radius(H: np.ndarray, iters: int = 2000, tol: float = 1e-4, seed: int = 0,
                       period: int = 25) -> RadiusEstimate:
    """Power iteration on B from a random complex start.

    The estimate is the geometric mean of the last 20 growth factors, one per
    normalisation period; ``iters`` caps the total number of B applications.
    """
    if iters < 10:
        raise ValueError("iters must be at least 10")
    H = np.asarray(H)
    N = H.shape[0]
    rng = rng_for(seed)
    v = rng.standard_normal(N * N) + 1j * rng.standard_normal(N * N)
    return _power(lambda x: nb_apply(H, x), v, iters, tol, period)


def nb_spectral_radius_bipartite(X: np.ndarray, iters: int = 2000, tol: float = 1e-4,
                                 seed: int = 0, period: int = 25) -> RadiusEstimate:
    """Same estimate for H = [[0, X], [X^T, 0]], run on the 2nm cross pairs only.

    Pairs (i, j) with H_ij = 0 never feed back into B, so the remaining
    block carries every nonzero eigenvalue.
    """
    if iters < 10:
        raise ValueError("iters must be at least 10")
    X = np.asarray(X)
    n, m = X.shape
    XT = X.T.copy()
    rng = rng_for(seed)
    size = 2 * n * m
    v = rng.standard_normal(size) + 1j * rng.standard_normal(size)

    def apply(z):
        V1 = z[: n * m].reshape(n, m)    # pairs (V1 vertex, V2 vertex)
        V2 = z[n * m:].reshape(m, n)     # pairs (V2 vertex, V1 vertex)
        S1 = (X * V1).sum(axis=1)
        S2 = (XT * V2).sum(axis=1)
        W1 = S2[None, :] - X * V2.T
        W2 = S1[None, :] - XT * V1.T
        return np.concatenate([W1.reshape(-1), W2.reshape(-1)])

    return _power(apply, v, iters, tol, period)


@dataclass
class IharaBassData:
    lam: complex
    X_lam: np.ndarray
    Xstar_lam: np.ndarray
    M1: np.ndarray
    M2: np.ndarray


def ihara_bass_data(X: np.ndarray, lam: complex, tol: float = 1e-12) -> IharaBassData:
    X = np.asarray(X)
    a2 = np.abs(X) ** 2
    den = lam * lam - a2
    scale = max(1.0, abs(lam) ** 2, float(a2.max()) if a2.size else 0.0)
    if np.any(np.abs(den) <= tol * scale):
        raise ForbiddenLambda(f"lambda^2 = |X_jl|^2 at lambda={lam}")
    ratio = a2 / den
    return IharaBassData(lam, lam * X / den, (lam * np.conj(X) / den).T,
                         1.0 + ratio.sum(axis=1), 1.0 + ratio.sum(axis=0))


@dataclass
class ReducedDeterminant:
    det: complex
    matrix: np.ndarray
    scaled: float        # |det| / prod of column norms, in [0, 1]


def reduced_determinant(X: np.ndarray, lam: complex, tol: float = 1e-12) -> ReducedDeterminant:
    """det(M2 - X*(lam) M1^-1 X(lam)) by LU with partial pivoting."""
    D = ihara_bass_data(X, lam, tol)
    if np.any(np.abs(D.M1) <= tol * max(1.0, float(np.abs(D.M1).max()))):
        raise SingularM1(f"M1 singular at lambda={lam}")
    R = np.diag(D.M2) - D.Xstar_lam @ (D.X_lam / D.M1[:, None])
    with warnings.catch_warnings():
        # an exactly singular R is a legitimate answer here
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(R)
    sign = (-1) ** int(np.sum(piv != np.arange(piv.size)))
    det = complex(sign * np.prod(np.diag(lu)))
    cols = np.linalg.norm(R, axis=0)
    scaled = abs(det) / float(np.prod(cols)) if np.all(cols > 0) else 0.0
    return ReducedDeterminant(det, R, scaled)


def ihara_bass_instance(X: np.ndarray, zero_tol: float = 1e-8) -> dict:
    """Enumerate B for H = [[0, X], [X^T, 0]] and test every admissible eigenvalue.

    Zero eigenvalues and those hitting a forbidden lambda or a singular M1 are
    skipped and counted.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    H = np.zeros((n + m, n + m))
    H[:n, n:] = X
    H[n:, :n] = X.T
    ev = np.linalg.eigvals(dense_nb_matrix(H))
    worst, used, skipped = 0.0, 0, 0
    for lam in ev[np.abs(ev) > zero_tol]:
        try:
            worst = max(worst, reduced_determinant(X, lam).scaled)
            used += 1
        except (ForbiddenLambda, SingularM1):
            skipped += 1
    rho = float(np.abs(ev).max())
    return {"worst_scaled_det": worst, "admissible": used, "skipped": skipped,
            "rho": rho, "theta_star": theta_star(X)}


def _imag_axis(X: np.ndarray, theta: float):
    """Real M1, M2, Y on lambda = i*theta (real X)."""
    a2 = X * X
    frac = a2 / (theta * theta + a2)
    return 1.0 - frac.sum(axis=1), 1.0 - frac.sum(axis=0), theta * X / (theta * theta + a2)


def reduced_min_eig(X: np.ndarray, theta: float) -> float:
    """Smallest eigenvalue of the reduced matrix at lambda = i*theta, in real arithmetic."""
    X = np.asarray(X, dtype=float)
    M1, M2, Y = _imag_axis(X, theta)
    if np.any(np.abs(M1) <= 1e-14):
        raise SingularM1(f"M1 singular at theta={theta}")
    R = np.diag(M2) + Y.T @ (Y / M1[:, None])
    return float(np.linalg.eigvalsh(R)[0])


def _negative_count(X: np.ndarray, theta: float) -> int:
    # Inertia of [[M1, Y], [Y^T, -M2]]; it changes exactly where the
    # reduced matrix becomes singular, even across poles of M1^-1.
    M1, M2, Y = _imag_axis(X, theta)
    n, m = X.shape
    K = np.zeros((n + m, n + m))
    K[:n, :n] = np.diag(M1)
    K[:n, n:] = Y
    K[n:, :n] = Y.T
    K[n:, n:] = -np.diag(M2)
    return int(np.sum(np.linalg.eigvalsh(K) < 0))


def theta_star(X: np.ndarray, bracket: tuple[float, float] | None = None, grid: int = 400,
               tol: float = 1e-10) -> float:
    """Largest theta at which the reduced matrix on the imaginary axis stops being PD."""
    X = np.asarray(X, dtype=float)
    m = X.shape[1]
    if bracket is None:
        hi = 2.0
        while not _pd_at(X, hi):
            hi *= 2
            if hi > 1e8:
                raise BracketError("no positive-definite upper bracket found")
        bracket = (1e-3, hi)
    lo, hi = bracket
    if not _pd_at(X, hi):
        raise BracketError(f"reduced matrix not PD at theta_hi={hi}")
    ref = _negative_count(X, hi)
    assert ref == m
    ts = np.linspace(hi, lo, grid)
    prev = hi
    for t in ts[1:]:
        if _negative_count(X, t) != ref:
            a, b = t, prev   # changed at a, reference at b
            while b - a > tol * max(1.0, b):
                mid = 0.5 * (a + b)
                if _negative_count(X, mid) == ref:
                    b = mid
                else:
                    a = mid
            return 0.5 * (a + b)
        prev = t
    raise BracketError(f"reduced matrix stays PD down to theta_lo={lo}")


def _pd_at(X, theta) -> bool:
    M1, M2, Y = _imag_axis(X, theta)
    if np.any(M1 <= 0):
        return False
    R = np.diag(M2) + Y.T @ (Y / M1[:, None])
    return bool(np.linalg.eigvalsh(R)[0] > 0)


@dataclass
class LoewnerResult:
    margin: float
    bound: float
    passed: bool
    C: float

    def to_dict(self) -> dict:
        return {"margin": self.margin, "bound": self.bound, "pass": self.passed, "C": self.C}


def _lambda_max(op_apply, N: int, seed: int = 0) -> float:
    if N <= 200:
        M = op_apply(np.eye(N))
        return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])
    L = spla.LinearOperator((N, N), matvec=op_apply, matmat=op_apply, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(N)
    return float(spla.eigsh(L, k=1, which="LA", v0=v0, tol=1e-10)[0][0])


def upper_margin(H, deg: np.ndarray, d: float) -> float:
    """lambda_max(H - I - D/d); ``H`` is a dense array or an apply callable."""
    deg = np.asarray(deg, dtype=float)
    N = deg.size
    mul = H if callable(H) else (lambda z, H=np.asarray(H): H @ z)

    def apply(z):
        z = np.asarray(z)
        shift = (1.0 + deg / d)
        return mul(z) - (shift[:, None] * z if z.ndim == 2 else shift * z)

    return _lambda_max(apply, N)


def loewner_upper_check(g: BipartiteGraph, params: ModelParams, C: float = 10.0) -> LoewnerResult:
    op = build_operator(g, params, "H-full")
    prof = degree_profile(g, params)
    deg = np.concatenate([prof.deg1, prof.deg2])
    margin = upper_margin(op.H, deg, params.d)
    delta = float(deg.max()) if deg.size else 0.0
    bound = C * params.d ** -1.5 * (delta + params.d)
    return LoewnerResult(margin, bound, margin <= bound, C)


def lower_margin(X: np.ndarray, deg1: np.ndarray, deg2: np.ndarray, d: float) -> float:
    """lambda_min(X^T (I - D1/d)^-1 X - D2/d + I)."""
    s = 1.0 - np.asarray(deg1, dtype=float) / d
    if np.any(s <= 0):
        raise PreconditionFailed("some V1 degree reaches d; I - D1/d is not positive definite")
    X = np.asarray(X)
    G = X.T @ (X / s[:, None]) - np.diag(np.asarray(deg2, dtype=float) / d) + np.eye(X.shape[1])
    return float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])


def lower_margin_operator(op, deg1: np.ndarray, deg2: np.ndarray, d: float, seed: int = 0) -> float:
    s = 1.0 - np.asarray(deg1, dtype=float) / d
    if np.any(s <= 0):
        raise PreconditionFailed("some V1 degree reaches d; I - D1/d is not positive definite")
    shift = 1.0 - np.asarray(deg2, dtype=float) / d

    def apply(z):
        z = np.asarray(z)
        y = op.X(z)
        y = y / (s[:, None] if y.ndim == 2 else s)
        return op.XT(y) + (shift[:, None] * z if z.ndim == 2 else shift * z)

    m = shift.size
    L = spla.LinearOperator((m, m), matvec=apply, matmat=apply, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(m)
    return float(spla.eigsh(L, k=1, which="SA", v0=v0, tol=1e-10)[0][0])


def loewner_lower_check(g: BipartiteGraph, params: ModelParams, C: float = 10.0,
                        dense_limit: int = DENSE_LIMIT) -> LoewnerResult:
    op = build_operator(g, params, "X-rect")
    prof = degree_profile(g, params)
    if g.m <= dense_limit:
        margin = lower_margin(op.dense_X(), prof.deg1, prof.deg2, params.d)
    else:
        margin = lower_margin_operator(op, prof.deg1, prof.deg2, params.d)
    bound = -C * params.d ** -0.5
    return LoewnerResult(margin, bound, margin >= bound, C)
