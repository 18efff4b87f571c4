"""Embedding of degree-3 planar graphs into king-move unit-disk graphs.

Each grid edge becomes an induced path of an even number of ancilla atoms on a
fine lattice, so the MIS of the output exceeds the input MIS by half the total
ancilla count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .graph import UnitDiskGraph

FINE_PER_COARSE = 12

Point = tuple[int, int]


@dataclass
class EmbeddedGraph:
    """A planar graph drawn on a coarse grid.

    `positions` maps vertex names to integer (row, col) grid coordinates.
    Each edge is (u, v, path) where `path` lists grid points from u to v;
    consecutive points must share a row or a column. An empty path means
    the straight segment between u and v.
    """

    positions: dict[Hashable, Point]
    edges: list[tuple[Hashable, Hashable, Sequence[Point]]] = field(default_factory=list)


class EmbeddingError(ValueError):
    pass


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def _rot(d: Point) -> Point:
    return (-d[1], d[0])


def _unit_walk(points: Sequence[Point], scale: int) -> list[Point]:
    """Unit steps on the fine lattice visiting the scaled corner points."""
    out = [(points[0][0] * scale, points[0][1] * scale)]
    for a, b in zip(points, points[1:]):
        if a[0] != b[0] and a[1] != b[1]:
            raise EmbeddingError("embedding failed: edge path is not axis-aligned")
        if a == b:
            continue
        d = (_sign(b[0] - a[0]), _sign(b[1] - a[1]))
        steps = (abs(b[0] - a[0]) + abs(b[1] - a[1])) * scale
        r, c = out[-1]
        for k in range(1, steps + 1):
            out.append((r + k * d[0], c + k * d[1]))
    return out


def _step(a: Point, b: Point) -> Point:
    return (b[0] - a[0], b[1] - a[1])


def _is_induced_path(chain: list[Point]) -> bool:
    for i in range(len(chain)):
        for j in range(i + 2, len(chain)):
            if max(abs(chain[i][0] - chain[j][0]), abs(chain[i][1] - chain[j][1])) < 2:
                return False
    return True


def _parity_bump(chain: list[Point], start: int, side: Point) -> list[Point]:
    """Replace 7 collinear points from `start` by an 8-point detour."""
    p = chain[start]
    d = _step(chain[start], chain[start + 1])
    offs = [(0, 0), (1, 0), (2, 1), (2, 2), (3, 3), (4, 2), (5, 1), (6, 0)]
    bump = [(p[0] + a * d[0] + b * side[0], p[1] + a * d[1] + b * side[1]) for a, b in offs]
    return chain[:start] + bump + chain[start + 7:]


def _chain_for_edge(fu: Point, fv: Point, walk: list[Point]) -> list[Point]:
    if len(walk) < 8:
        raise EmbeddingError("embedding failed: edge too short for the grid spacing")
    d1 = _step(walk[0], walk[1])
    dl = _step(walk[-2], walk[-1])
    r1, rl = _rot(d1), _rot(dl)
    # drop lattice corners so the chain cuts each turn diagonally
    body = [
        q for k, q in enumerate(walk[3:-3], start=3)
        if _step(walk[k - 1], q) == _step(q, walk[k + 1])
    ]
    head = [(fu[0] + d1[0] + r1[0], fu[1] + d1[1] + r1[1]),
            (fu[0] + 2 * d1[0] + r1[0], fu[1] + 2 * d1[1] + r1[1])]
    tail = [(fv[0] - 2 * dl[0] - rl[0], fv[1] - 2 * dl[1] - rl[1]),
            (fv[0] - dl[0] - rl[0], fv[1] - dl[1] - rl[1])]
    return head + body + tail


def _straight_starts(chain: list[Point]) -> list[int]:
    """Indices i where chain[i:i+7] is a straight unit-step run, middle first."""
    good = []
    for i in range(2, len(chain) - 8):
        d = _step(chain[i], chain[i + 1])
        if abs(d[0]) + abs(d[1]) == 1 and all(_step(chain[i + k], chain[i + k + 1]) == d for k in range(6)):
            good.append(i)
    mid = len(chain) / 2
    return sorted(good, key=lambda i: (abs(i + 3 - mid), i))


def reduce_planar_degree3(
    embedded: EmbeddedGraph, grid_spacing: int = FINE_PER_COARSE, return_mapping: bool = False
):
    """Build the unit-disk instance (radius sqrt(2)) and its MIS offset.

    Returns (graph, offset), or (graph, offset, mapping) with mapping from the
    input vertex names to output vertex indices when `return_mapping` is set.
    """
    g = int(grid_spacing)
    if g < FINE_PER_COARSE:
        raise ValueError(f"grid_spacing must be at least {FINE_PER_COARSE}")
    pos = {name: (int(p[0]), int(p[1])) for name, p in embedded.positions.items()}
    if len(set(pos.values())) != len(pos):
        raise EmbeddingError("embedding failed: two vertices share a grid point")
    fine = {name: (p[0] * g, p[1] * g) for name, p in pos.items()}

    used_dirs: dict[Hashable, set[Point]] = {name: set() for name in pos}
    chains: list[tuple[Hashable, Hashable, list[Point]]] = []
    occupied: dict[Point, object] = {p: ("v", name) for name, p in fine.items()}
    for k, (u, v, path) in enumerate(embedded.edges):
        if u not in pos or v not in pos or u == v:
            raise EmbeddingError(f"embedding failed: edge {k} has invalid endpoints")
        pts = list(path) if path else [pos[u], pos[v]]
        pts = [(int(p[0]), int(p[1])) for p in pts]
        if pts[0] != pos[u] or pts[-1] != pos[v]:
            raise EmbeddingError(f"embedding failed: path of edge {k} does not join its endpoints")
        walk = _unit_walk(pts, g)
        if len(set(walk)) != len(walk):
            raise EmbeddingError(f"embedding failed: path of edge {k} revisits a point")
        for q in walk[1:-1]:
            if q in occupied:
                raise EmbeddingError(f"embedding failed: path of edge {k} crosses another path or vertex")
        for end, d in ((u, _step(walk[0], walk[1])), (v, _step(walk[-1], walk[-2]))):
            if d in used_dirs[end]:
                raise EmbeddingError(f"embedding failed: two edges leave {end!r} in the same direction")
            used_dirs[end].add(d)
        for q in walk[1:-1]:
            occupied[q] = ("e", k)
        chains.append((u, v, _chain_for_edge(fine[u], fine[v], walk)))

    for name, dirs in used_dirs.items():
        if len(dirs) > 3:
            raise EmbeddingError(f"embedding failed: vertex {name!r} has degree above 3")

    def consistent(all_chains) -> bool:
        return _check_layout(fine, all_chains)

    fixed: list[tuple[Hashable, Hashable, list[Point]]] = []
    for idx, (u, v, chain) in enumerate(chains):
        if not _is_induced_path(chain):
            raise EmbeddingError("embedding failed: chain is not an induced path")
        if len(chain) % 2:
            placed = None
            for start in _straight_starts(chain):
                d = _step(chain[start], chain[start + 1])
                for side in (_rot(d), (-_rot(d)[0], -_rot(d)[1])):
                    cand = _parity_bump(chain, start, side)
                    if _is_induced_path(cand) and consistent(fixed + [(u, v, cand)] + chains[idx + 1:]):
                        placed = cand
                        break
                if placed is not None:
                    break
            if placed is None:
                raise EmbeddingError("embedding failed: cannot fix odd chain parity")
            chain = placed
        fixed.append((u, v, chain))

    if not consistent(fixed):
        raise EmbeddingError("embedding failed: chains interact beyond their endpoints")

    names = list(fine)
    all_pts = [fine[n] for n in names] + [q for _, _, ch in fixed for q in ch]
    r0 = min(p[0] for p in all_pts)
    c0 = min(p[1] for p in all_pts)
    shifted = [(p[0] - r0, p[1] - c0) for p in all_pts]
    n_rows = max(p[0] for p in shifted) + 1
    n_cols = max(p[1] for p in shifted) + 1
    graph = UnitDiskGraph(n_rows, n_cols, shifted, radius_factor=math.sqrt(2))
    offset = sum(len(ch) // 2 for _, _, ch in fixed)
    if return_mapping:
        mapping = {n: graph.index_of((fine[n][0] - r0, fine[n][1] - c0)) for n in names}
        return graph, offset, mapping
    return graph, offset


def _check_layout(fine: dict, chains) -> bool:
    """True iff the king-move graph of all points is exactly vertices + chain paths."""
    owner: dict[Point, tuple] = {}
    for name, p in fine.items():
        owner[p] = ("v", name)
    for k, (_, _, ch) in enumerate(chains):
        for i, q in enumerate(ch):
            if q in owner:
                return False
            owner[q] = ("c", k, i)
    lengths = [len(ch) for _, _, ch in chains]
    for p, tag in owner.items():
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if not (dr or dc):
                    continue
                other = owner.get((p[0] + dr, p[1] + dc))
                if other is None:
                    continue
                if not _allowed(tag, other, chains, lengths):
                    return False
    return True


def _allowed(a: tuple, b: tuple, chains, lengths) -> bool:
    if a[0] == "v" and b[0] == "v":
        return False
    if a[0] == "c" and b[0] == "c":
        return a[1] == b[1] and abs(a[2] - b[2]) == 1
    if a[0] == "c":
        a, b = b, a
    k, i = b[1], b[2]
    u, v, _ = chains[k]
    return (i == 0 and a[1] == u) or (i == lengths[k] - 1 and a[1] == v)
