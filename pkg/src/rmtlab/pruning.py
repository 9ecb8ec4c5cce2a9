"""Pruned graph around extreme-degree vertices and its six-property verifier."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .localtree import Radius, induced_edge_count, layers_from_adjacency, pruning_radius
from .model import BipartiteGraph, DegreeProfile, ModelParams, degree_profile
from .theory import bennett_rate, error_parameter


@dataclass(frozen=True)
class TauTriple:
    tau1: float
    tau2_plus: float
    tau2_minus: float

    @classmethod
    def default(cls, params: ModelParams) -> "TauTriple":
        q2 = params.q ** 2
        s = math.sqrt(error_parameter(params.d))
        return cls(1.0 / q2 + 1.0 + s, q2 + 1.0 + s, q2 - 1.0 - s)


@dataclass
class SpecialSets:
    v1_high: list
    v2_high: list
    v2_low: list

    def all(self) -> list:
        """Global ids, ascending."""
        return sorted(set(self.v1_high) | set(self.v2_high) | set(self.v2_low))


def special_vertices(profile: DegreeProfile, params: ModelParams, tau: TauTriple | None = None) -> SpecialSets:
    """Global ids of V1 >= tau1, V2 >= tau2_plus and V2 <= tau2_minus (inclusive)."""
    tau = tau or TauTriple.default(params)
    a1, a2 = np.asarray(profile.alpha1), np.asarray(profile.alpha2)
    n = a1.size
    return SpecialSets(np.flatnonzero(a1 >= tau.tau1).tolist(),
                       (n + np.flatnonzero(a2 >= tau.tau2_plus)).tolist(),
                       (n + np.flatnonzero(a2 <= tau.tau2_minus)).tolist())


def _edge(x: int, y: int) -> tuple[int, int]:
    return (x, y) if x < y else (y, x)


def _branch_is_tree(adj, x: int, y: int, r: int) -> bool:
    """Is the subgraph induced on the radius-r branch from y (avoiding edge x-y) a tree?

    The induced subgraph contains the edge x-y whenever x is reached, so
    any second route back to x counts as a cycle. Stops at the first cycle.
    """
    parent = {y: None}
    frontier = [y]
    for _ in range(r):
        nxt = []
        for a in frontier:
            for b in adj[a]:
                if (a == y and b == x) or b == parent[a]:
                    continue
                if b in parent:
                    return False
                parent[b] = a
                nxt.append(b)
        frontier = nxt
    last = set(frontier)
    if any(b in last for a in frontier for b in adj[a]):
        return False
    return x not in parent


def _near_special(adj, start: int, skip: int, limit: int, special: set) -> bool:
    """Is a special vertex other than ``skip`` within ``limit`` of ``start`` avoiding ``skip``?"""
    if start in special and start != skip:
        return True
    seen = {start, skip}
    frontier = [start]
    for _ in range(limit):
        nxt = []
        for a in frontier:
            for b in adj[a]:
                if b in seen:
                    continue
                if b in special:
                    return True
                seen.add(b)
                nxt.append(b)
        frontier = nxt
    return False


@dataclass
class PrunedGraph:
    base: BipartiteGraph
    params: ModelParams
    tau: TauTriple
    special: SpecialSets
    removed_h1: set
    removed_h2: set
    radius: Radius
    kept_adj: list = field(repr=False)

    @property
    def r(self) -> int:
        return self.radius.effective

    def removed(self) -> set:
        return self.removed_h1 | self.removed_h2

    def kept_graph(self) -> BipartiteGraph:
        n = self.base.n
        return self.base.remove_edges((a, b - n) for a, b in self.removed())


def prune(g: BipartiteGraph, params: ModelParams, tau: TauTriple | None = None,
          radius_override: int | None = None, special: SpecialSets | None = None) -> PrunedGraph:
    """Two-stage removal around the special vertices.

    ``special`` fixes the special set instead of deriving it from the degrees
    of ``g`` (re-pruning a kept graph with the original set removes nothing).
    """
    tau = tau or TauTriple.default(params)
    if special is None:
        special = special_vertices(degree_profile(g, params), params, tau)
    if radius_override is None:
        radius = pruning_radius(params.q, params.d)
    else:
        radius = Radius(radius_override, max(1, radius_override), radius_override < 1)
    r = radius.effective
    base_adj = g.adjacency_lists()
    sp_ids = special.all()
    sp_set = set(sp_ids)

    h1 = set()
    for x in sp_ids:
        for y in base_adj[x]:
            if not _branch_is_tree(base_adj, x, y, r):
                h1.add(_edge(x, y))

    adj = [set(a) for a in base_adj]
    for a, b in h1:
        adj[a].discard(b)
        adj[b].discard(a)

    h2 = set()
    for x in sp_ids:
        for z in sorted(adj[x]):
            if _near_special(adj, z, x, 2 * r - 1, sp_set):
                h2.add(_edge(x, z))
                adj[x].discard(z)
                adj[z].discard(x)

    for a, b in h1 | h2:
        assert a in sp_set or b in sp_set, "removed edge not incident to a special vertex"
    kept = [sorted(s) for s in adj]
    return PrunedGraph(g, params, tau, special, h1, h2, radius, kept)


@dataclass
class PruneReport:
    properties: dict
    details: dict

    @property
    def exact_ok(self) -> bool:
        return all(self.properties[k] for k in ("1", "2", "3", "4"))

    @property
    def bounds_ok(self) -> bool:
        return self.properties["5"] and self.properties["6"]

    def to_dict(self) -> dict:
        return {"properties": self.properties, "details": self.details}


def rate_h_q(tau: float, q: float) -> float:
    q2 = q * q
    return q2 * bennett_rate(abs(tau - q2) / (2 * q2))


def rate_h_qinv(tau: float, q: float) -> float:
    qi2 = 1.0 / (q * q)
    return qi2 * bennett_rate(abs(tau - qi2) / (2 * qi2))


def verify_pruned(pg: PrunedGraph, C: float = 10.0) -> PruneReport:
    base_adj = pg.base.adjacency_lists()
    kept = pg.kept_adj
    r = pg.r
    sp_ids = pg.special.all()
    sp_set = set(sp_ids)
    removed = pg.removed()
    params = pg.params

    # (1) specials pairwise at distance >= 2r+1 in the kept graph
    close_pairs = []
    for x in sp_ids:
        for layer in layers_from_adjacency(kept, x, 2 * r)[1:]:
            close_pairs.extend((x, y) for y in layer if y in sp_set and y > x)
    # (2) kept ball of radius 2r is a tree
    not_tree = []
    for x in sp_ids:
        ball = set().union(*map(set, layers_from_adjacency(kept, x, 2 * r)))
        if induced_edge_count(kept, ball) != len(ball) - 1:
            not_tree.append(x)
    # (3) removed edges touch the special set
    stray = [e for e in removed if e[0] not in sp_set and e[1] not in sp_set]
    # (4) layer inclusion and neighbour-layer equality up to radius r
    # (6) |S_j^G \ S_j^tau| <= C * D_x^removed * d^(j-1) for 2 <= j <= r
    removed_deg = np.zeros(pg.base.N, dtype=np.int64)
    for a, b in removed:
        removed_deg[a] += 1
        removed_deg[b] += 1
    layer_fail = []
    growth_fail = []
    for x in sp_ids:
        LG = [set(s) for s in layers_from_adjacency(base_adj, x, r)]
        LT = [set(s) for s in layers_from_adjacency(kept, x, r)]
        LG += [set()] * (r + 1 - len(LG))
        LT += [set()] * (r + 1 - len(LT))
        ball_t = set().union(*LT) - {x}
        for j in range(1, r + 1):
            if not LT[j] <= LG[j]:
                layer_fail.append((x, j, "inclusion"))
                continue
            for y in ball_t:
                if set(kept[y]) & LT[j] != set(base_adj[y]) & LG[j]:
                    layer_fail.append((x, j, y))
                    break
        for j in range(2, r + 1):
            if len(LG[j] - LT[j]) > C * removed_deg[x] * params.d ** (j - 1):
                growth_fail.append((x, j))
    # (5) removed degree bound
    tau = pg.tau
    hmin = min(rate_h_qinv(tau.tau1, params.q), rate_h_q(tau.tau2_minus, params.q),
               rate_h_q(tau.tau2_plus, params.q))
    deg_bound = C * (1.0 + math.log(params.N) / params.d / hmin) if hmin > 0 else math.inf
    max_removed = int(removed_deg.max()) if removed_deg.size else 0

    props = {
        "1": not close_pairs, "2": not not_tree, "3": not stray, "4": not layer_fail,
        "5": max_removed <= deg_bound, "6": not growth_fail,
    }
    details = {
        "radius": r, "radius_raw": pg.radius.raw, "radius_clamped": pg.radius.clamped,
        "special_count": len(sp_ids), "removed_h1": len(pg.removed_h1), "removed_h2": len(pg.removed_h2),
        "close_pairs": close_pairs[:20], "not_tree_roots": not_tree[:20], "stray_edges": stray[:20],
        "layer_failures": layer_fail[:20], "max_removed_degree": max_removed, "degree_bound": deg_bound,
        "growth_failures": growth_fail[:20], "C": C,
    }
    return PruneReport(props, details)
