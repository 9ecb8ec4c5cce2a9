"""Model parameters and seeded sampling of sparse bipartite random graphs.

Vertex conventions: V1 has ``n`` vertices, V2 has ``m <= n``. Where a single
global id is needed, V1 vertices are ``0..n-1`` and V2 vertex ``j`` is ``n + j``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DomainError


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    m: int
    n: int
    N: int
    q: float
    b: float
    d: float
    p: float

    @classmethod
    def from_values(cls, n: int, m: int, p: float | None = None, d: float | None = None) -> "ModelParams":
        """Build parameters directly, bypassing the ``d = b ln N`` link.

        Useful for hand-made graphs and synthetic degree profiles. Exactly one
        of ``p`` and ``d`` may be omitted; the other is derived from
        ``p = d / sqrt(mn)``. A derived ``p`` above 1 is allowed so that
        tiny hand-made graphs can carry any ``d``; sampling still refuses it.
        """
        if n < 1 or m < 1:
            raise DomainError("n and m must be positive")
        root = math.sqrt(m * n)
        if p is None and d is None:
            raise DomainError("need p or d")
        if p is None:
            p = d / root
        elif not 0 <= p <= 1:
            raise DomainError(f"p={p} outside [0, 1]")
        if d is None:
            d = p * root
        N = n + m
        gamma = n / m
        b = d / math.log(N) if N > 1 else float("nan")
        return cls(gamma=gamma, m=m, n=n, N=N, q=gamma ** 0.25, b=b, d=d, p=p)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("gamma", "m", "n", "N", "q", "b", "d", "p")}


def make_params(gamma: float, m: int, b: float) -> ModelParams:
    if gamma < 1:
        raise DomainError(f"gamma={gamma} < 1")
    if m < 2:
        raise DomainError("m must be at least 2")
    if b <= 0:
        raise DomainError("b must be positive")
    n = math.floor(gamma * m)
    N = n + m
    d = b * math.log(N)
    p = d / math.sqrt(m * n)
    if p > 1:
        raise DomainError(f"p={p:.4g} > 1; b={b} is too large for m={m}")
    return ModelParams(gamma=gamma, m=m, n=n, N=N, q=gamma ** 0.25, b=b, d=d, p=p)


@dataclass(frozen=True)
class WeightDistribution:
    kind: str = "none"

    KINDS = ("none", "rademacher", "uniform-sym")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown weight kind {self.kind!r}")

    @property
    def bound(self) -> float | None:
        return {"none": None, "rademacher": 1.0, "uniform-sym": math.sqrt(3.0)}[self.kind]

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray | None:
        if self.kind == "none":
            return None
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=size).astype(float) * 2.0 - 1.0
        s3 = math.sqrt(3.0)
        return rng.uniform(-s3, s3, size=size)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Bi-adjacency in both directions (CSR over V1 and over V2).

    ``row_ptr/row_idx`` give the sorted V2 neighbours of each V1 vertex and
    ``col_ptr/col_idx`` the sorted V1 neighbours of each V2 vertex.
    ``weights`` is aligned with ``row_idx``; ``col_weights`` with ``col_idx``.
    """

    n: int
    m: int
    row_ptr: np.ndarray
    row_idx: np.ndarray
    col_ptr: np.ndarray
    col_idx: np.ndarray
    weights: np.ndarray | None = None
    col_weights: np.ndarray | None = None
    bound: float | None = None
    _hash: list = field(default_factory=list, repr=False)

    @classmethod
    def from_edges(cls, n: int, m: int, u: Iterable[int], v: Iterable[int],
                   w: Iterable[float] | None = None, bound: float | None = None) -> "BipartiteGraph":
        u = np.asarray(list(u) if not isinstance(u, np.ndarray) else u, dtype=np.int64)
        v = np.asarray(list(v) if not isinstance(v, np.ndarray) else v, dtype=np.int64)
        if u.shape != v.shape:
            raise ValueError("edge endpoint arrays differ in length")
        if u.size and (u.min() < 0 or u.max() >= n or v.min() < 0 or v.max() >= m):
            raise ValueError("edge endpoint out of range")
        wa = None
        if w is not None:
            wa = np.asarray(list(w) if not isinstance(w, np.ndarray) else w, dtype=float)
            if wa.shape != u.shape:
                raise ValueError("weights misaligned with edges")
            if bound is not None and wa.size and np.abs(wa).max() > bound:
                raise ValueError("weight exceeds declared bound")
        key = u * m + v
        order = np.argsort(key, kind="stable")
        key = key[order]
        if key.size > 1 and np.any(key[1:] == key[:-1]):
            raise ValueError("duplicate edge")
        u, v = u[order], v[order]
        if wa is not None:
            wa = wa[order]
        row_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(u, minlength=n), out=row_ptr[1:])
        corder = np.lexsort((u, v))
        col_ptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(v, minlength=m), out=col_ptr[1:])
        cw = wa[corder] if wa is not None else None
        return cls(n=n, m=m, row_ptr=_freeze(row_ptr), row_idx=_freeze(v.copy()),
                   col_ptr=_freeze(col_ptr), col_idx=_freeze(u[corder].copy()),
                   weights=None if wa is None else _freeze(wa),
                   col_weights=None if cw is None else _freeze(cw.copy()), bound=bound)

    @property
    def N(self) -> int:
        return self.n + self.m

    @property
    def num_edges(self) -> int:
        return int(self.row_idx.size)

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(u, v) arrays in row-major order; u in V1, v in V2 (local ids)."""
        u = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        return u, np.asarray(self.row_idx)

    def row(self, i: int) -> np.ndarray:
        return self.row_idx[self.row_ptr[i]:self.row_ptr[i + 1]]

    def col(self, j: int) -> np.ndarray:
        return self.col_idx[self.col_ptr[j]:self.col_ptr[j + 1]]

    def neighbors(self, x: int) -> np.ndarray:
        """Neighbours of global vertex ``x`` as global ids."""
        if x < self.n:
            return self.row(x) + self.n
        return self.col(x - self.n)

    def adjacency_lists(self) -> list[list[int]]:
        """Global-id adjacency as plain lists (fast for Python-level BFS)."""
        n = self.n
        out = [(self.row(i) + n).tolist() for i in range(n)]
        out.extend(self.col(j).tolist() for j in range(self.m))
        return out

    def biadjacency(self, weighted: bool = True) -> sp.csr_matrix:
        data = self.weights if (weighted and self.weights is not None) else np.ones(self.num_edges)
        return sp.csr_matrix((np.asarray(data, dtype=float), np.asarray(self.row_idx), np.asarray(self.row_ptr)),
                             shape=(self.n, self.m))

    def adjacency(self) -> sp.csr_matrix:
        """Full N x N symmetric (weighted) adjacency."""
        B = self.biadjacency()
        return sp.bmat([[None, B], [B.T, None]], format="csr")

    def rebuilt_cols(self) -> tuple[np.ndarray, np.ndarray]:
        """Recompute the V2-side lists from the V1-side ones."""
        csc = self.biadjacency(weighted=False).tocsc()
        csc.sort_indices()
        return csc.indptr.astype(np.int64), csc.indices.astype(np.int64)

    def graph_hash(self) -> str:
        if not self._hash:
            h = hashlib.sha256()
            h.update(f"{self.n} {self.m} {int(self.weighted)}\n".encode())
            h.update(np.ascontiguousarray(self.row_ptr, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(self.row_idx, dtype=np.int64).tobytes())
            if self.weights is not None:
                h.update(np.ascontiguousarray(self.weights, dtype=np.float64).tobytes())
            self._hash.append(h.hexdigest())
        return self._hash[0]

    def same_as(self, other: "BipartiteGraph") -> bool:
        return self.graph_hash() == other.graph_hash()

    def remove_edges(self, pairs: Iterable[tuple[int, int]]) -> "BipartiteGraph":
        """Copy without the given (V1 local, V2 local) edges."""
        drop = {int(a) * self.m + int(b) for a, b in pairs}
        u, v = self.edges()
        if not drop:
            return self
        keep = ~np.isin(u * self.m + v, np.fromiter(drop, dtype=np.int64))
        w = None if self.weights is None else np.asarray(self.weights)[keep]
        return BipartiteGraph.from_edges(self.n, self.m, u[keep], v[keep], w, self.bound)


def rng_for(seed: int | Sequence[int]) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``seed`` (an int or int tuple).

    Per-trial streams use ``(master_seed, trial_index)`` so results never
    depend on scheduling.
    """
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _bernoulli_positions(rng: np.random.Generator, total: int, p: float) -> np.ndarray:
    """Sorted indices in ``range(total)`` kept independently with prob ``p``.

    Geometric gap skipping: cost is proportional to the number of hits.
    """
    if p <= 0 or total == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(total, dtype=np.int64)
    mean = total * p
    chunk = int(mean + 6 * math.sqrt(mean) + 16)
    pieces = []
    pos = -1
    while True:
        gaps = rng.geometric(p, size=chunk).astype(np.int64)
        cs = pos + np.cumsum(gaps)
        stop = np.searchsorted(cs, total)
        pieces.append(cs[:stop])
        if stop < cs.size:
            break
        pos = int(cs[-1])
    return np.concatenate(pieces)


def sample_graph(params: ModelParams, weights: WeightDistribution | None = None,
                 seed: int | Sequence[int] = 0) -> BipartiteGraph:
    if not 0 <= params.p <= 1:
        raise DomainError(f"p={params.p} outside [0, 1]")
    weights = weights or WeightDistribution()
    rng = rng_for(seed)
    flat = _bernoulli_positions(rng, params.n * params.m, params.p)
    u, v = np.divmod(flat, params.m)
    w = weights.draw(rng, flat.size)
    return BipartiteGraph.from_edges(params.n, params.m, u, v, w, weights.bound)


@dataclass(frozen=True, eq=False)
class DegreeProfile:
    deg1: np.ndarray
    deg2: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    graph_hash: str | None = None

    @classmethod
    def synthetic(cls, alpha1: Sequence[float], alpha2: Sequence[float], d: float) -> "DegreeProfile":
        a1 = np.asarray(alpha1, dtype=float)
        a2 = np.asarray(alpha2, dtype=float)
        return cls(deg1=a1 * d, deg2=a2 * d, alpha1=a1, alpha2=a2)


def degree_profile(g: BipartiteGraph, params: ModelParams) -> DegreeProfile:
    if g.weights is None:
        deg1 = np.diff(g.row_ptr).astype(float)
        deg2 = np.diff(g.col_ptr).astype(float)
    else:
        u, v = g.edges()
        w2 = np.asarray(g.weights) ** 2
        deg1 = np.bincount(u, weights=w2, minlength=g.n)
        deg2 = np.bincount(v, weights=w2, minlength=g.m)
    return DegreeProfile(deg1=_freeze(deg1), deg2=_freeze(deg2), alpha1=_freeze(deg1 / params.d),
                         alpha2=_freeze(deg2 / params.d), graph_hash=g.graph_hash())


def is_connected(g: BipartiteGraph) -> tuple[bool, int]:
    count, _ = connected_components(g.adjacency(), directed=False)
    return count == 1, int(count)


def write_graph(g: BipartiteGraph, path: str | Path) -> None:
    """Text format: header ``n m weighted`` then ``u v [w]`` per edge (0-based)."""
    u, v = g.edges()
    lines = [f"{g.n} {g.m} {int(g.weighted)}"]
    if g.weights is None:
        lines.extend(f"{a} {b}" for a, b in zip(u.tolist(), v.tolist()))
    else:
        lines.extend(f"{a} {b} {w!r}" for a, b, w in zip(u.tolist(), v.tolist(), g.weights.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path: str | Path) -> BipartiteGraph:
    rows = Path(path).read_text().split("\n")
    n, m, weighted = (int(t) for t in rows[0].split())
    body = [r.split() for r in rows[1:] if r.strip()]
    u = [int(r[0]) for r in body]
    v = [int(r[1]) for r in body]
    w = [float(r[2]) for r in body] if weighted else None
    return BipartiteGraph.from_edges(n, m, u, v, w)
