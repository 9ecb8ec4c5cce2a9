"""BFS layers, approximate eigenvectors, tridiagonal tree models, transfer matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, EmptyLayerError, NotATree
from .model import BipartiteGraph, ModelParams, degree_profile
from .spectra import build_operator
from .theory import lambda_q, lambda_q_inv


@dataclass
class BfsLayers:
    root: int
    layers: list
    excess_edges_within_ball: int

    @property
    def sizes(self) -> list[int]:
        return [len(s) for s in self.layers]

    @property
    def ball(self) -> set:
        out = set()
        for s in self.layers:
            out.update(s)
        return out


def layers_from_adjacency(adj, root: int, r_max: int) -> list[list[int]]:
    """Layer lists S_0..S_k with k <= r_max (stops early once a layer is empty)."""
    seen = {root}
    layers = [[root]]
    frontier = [root]
    for _ in range(r_max):
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        if not nxt:
            break
        nxt.sort()
        layers.append(nxt)
        frontier = nxt
    return layers


def induced_edge_count(adj, vertices: set) -> int:
    return sum(1 for x in vertices for y in adj[x] if y in vertices) // 2


def bfs_layers(g, root: int, r_max: int) -> BfsLayers:
    """Layers around a global vertex id. ``g`` is a graph or a list of adjacency lists."""
    adj = g.adjacency_lists() if isinstance(g, BipartiteGraph) else g
    layers = layers_from_adjacency(adj, root, r_max)
    ball = set().union(*map(set, layers))
    excess = induced_edge_count(adj, ball) - len(ball) + 1
    return BfsLayers(root, [set(s) for s in layers], excess)


@dataclass(frozen=True)
class Radius:
    raw: int
    effective: int
    clamped: bool


def _radius(raw: int) -> Radius:
    return Radius(raw, max(1, raw), raw < 1)


def radius_r_x(d: float, D_x: float) -> Radius:
    if D_x < 2 or d <= 1:
        raise DomainError("need D_x >= 2 and d > 1")
    return _radius(math.floor(d / (6 * math.log(D_x))))


def pruning_radius(q: float, d: float) -> Radius:
    if d <= 1:
        raise DomainError("need d > 1")
    return _radius(math.floor(math.sqrt(d / math.log(d)) / (4 * q * q)))


def eigvec_coefficients(alpha: float, q: float, r: int, side: str = "V2") -> tuple[np.ndarray, float]:
    """Unnormalised radial coefficients u_0..u_r (u_0 = 1) and the target Lambda.

    V2 roots use q; V1 roots use the same recurrences with q replaced by 1/q.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if side == "V2":
        lam = lambda_q(alpha, q)
        qq = q
    elif side == "V1":
        lam = lambda_q_inv(alpha, q)
        qq = 1.0 / q
    else:
        raise DomainError(f"side must be V1 or V2, got {side!r}")
    shift = alpha - qq * qq
    u = np.zeros(r + 1)
    u[0] = 1.0
    if r >= 1:
        u[1] = lam / math.sqrt(alpha)
    if r >= 2:
        u[2] = math.sqrt(alpha) / (qq * shift)
    for k in range(3, r + 1):
        u[k] = u[k - 2] / shift
    return u, lam


@dataclass
class ApproxEigenvector:
    root: int
    side: str
    sign: int
    r: int
    coeffs: np.ndarray
    layers: list
    target: float
    alpha: float

    def dense(self, N: int) -> np.ndarray:
        v = np.zeros(N)
        for j, layer in enumerate(self.layers):
            idx = np.fromiter(layer, dtype=np.int64)
            v[idx] = (self.sign ** j) * self.coeffs[j] / math.sqrt(len(layer))
        return v


def approx_eigenvector(g: BipartiteGraph, params: ModelParams, root: int, r: int, sign: int = 1,
                       alpha: float | None = None) -> ApproxEigenvector:
    """Radial test vector around ``root`` (global id) targeting +/-Lambda(alpha_root)."""
    if r < 2:
        raise DomainError("depth r must be at least 2")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    side = "V1" if root < g.n else "V2"
    if alpha is None:
        prof = degree_profile(g, params)
        alpha = float(prof.alpha1[root] if side == "V1" else prof.alpha2[root - g.n])
    layers = layers_from_adjacency(g.adjacency_lists(), root, r)
    if len(layers) <= r:
        raise EmptyLayerError(f"layer {len(layers)} around {root} is empty")
    u, lam = eigvec_coefficients(alpha, params.q, r, side)
    u = u / np.linalg.norm(u)
    return ApproxEigenvector(root, side, sign, r, u, layers, sign * lam, alpha)


def residual(g: BipartiteGraph, params: ModelParams, vec: ApproxEigenvector) -> float:
    """||(H - Lambda) v|| through the matrix-free operator."""
    op = build_operator(g, params, "H-full")
    v = vec.dense(g.N)
    return float(np.linalg.norm(op.H(v) - vec.target * v))


@dataclass
class TridiagonalModel:
    q: float
    alpha: float
    r: int
    side: str
    offdiag: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def build_tridiagonal(q: float, alpha: float, r: int, side: str = "V2") -> TridiagonalModel:
    """(r+1) x (r+1) zero-diagonal Jacobi matrix of the biregular tree rooted on ``side``."""
    if r < 1 or alpha < 0:
        raise DomainError("need r >= 1 and alpha >= 0")
    a, b = (1.0 / q, q) if side == "V2" else (q, 1.0 / q)
    e = np.empty(r)
    e[0] = math.sqrt(alpha)
    e[1::2] = a
    e[2::2] = b
    return TridiagonalModel(q, alpha, r, side, e)


def tridiag_extreme_eigs(model: TridiagonalModel, zero_tol: float = 1e-10) -> dict:
    ev = sla.eigh_tridiagonal(np.zeros(model.r + 1), model.offdiag, eigvals_only=True)
    scale = max(1.0, float(np.abs(ev).max()))
    pos = ev[ev > zero_tol * scale]
    neg = ev[ev < -zero_tol * scale]
    return {
        "top": float(ev[-1]),
        "bottom": float(ev[0]),
        "smallest_positive": float(pos.min()) if pos.size else math.nan,
        "largest_negative": float(neg.max()) if neg.size else math.nan,
        "eigenvalues": ev,
    }


@dataclass
class TransferData:
    T: np.ndarray
    lam_plus: complex
    lam_minus: complex
    real: bool


def transfer_matrix(eta: float, q: float) -> TransferData:
    T = np.array([[eta * eta - q * q, -eta / q], [eta / q, -1.0 / (q * q)]])
    disc = (eta * eta - (q - 1 / q) ** 2) * (eta * eta - (q + 1 / q) ** 2)
    root = math.sqrt(disc) if disc >= 0 else 1j * math.sqrt(-disc)
    base = eta * eta - (q * q + 1 / (q * q))
    real = abs(eta) >= q + 1 / q or abs(eta) <= q - 1 / q
    return TransferData(T, 0.5 * (base + root), 0.5 * (base - root), real)


def tree_adjacency(edges: Iterable[tuple[int, int]], num_vertices: int | None = None) -> sp.csr_matrix:
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    N = int(num_vertices if num_vertices is not None else (e.max() + 1 if e.size else 0))
    A = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(N, N))
    return (A + A.T).tocsr()


def tree_norm_bound_check(edges: Iterable[tuple[int, int]], p_max: int, q_max: int,
                          num_vertices: int | None = None) -> bool:
    """Is ||A|| <= sqrt(p_max) + sqrt(q_max) for this tree?"""
    A = tree_adjacency(edges, num_vertices)
    N = A.shape[0]
    ncomp, _ = connected_components(A, directed=False)
    if ncomp != 1 or A.nnz // 2 != N - 1 or A.max() > 1:
        raise NotATree("input is not a tree")
    norm = float(np.abs(np.linalg.eigvalsh(A.toarray())).max())
    return norm <= math.sqrt(p_max) + math.sqrt(q_max) + 1e-9


def alternating_tree(p_children: int, q_children: int, depth: int) -> list[tuple[int, int]]:
    """Tree whose even-depth vertices have ``p_children`` and odd-depth ``q_children``."""
    edges = []
    frontier = [0]
    nxt_id = 1
    for level in range(depth):
        k = p_children if level % 2 == 0 else q_children
        new = []
        for x in frontier:
            for _ in range(k):
                edges.append((x, nxt_id))
                new.append(nxt_id)
                nxt_id += 1
        frontier = new
    return edges
