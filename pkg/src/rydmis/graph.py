"""Lattice unit-disk graphs, physical constants and the instance file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

DEFAULT_RADIUS_FACTOR = 1.7
_DIST_TOL = 1e-9


class LatticePoint(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class PhysicalParams:
    """Atom-array constants. Frequencies are given as f = omega / 2pi in MHz."""

    rabi_frequency_mhz: float = 4.0
    c6_mhz_um6: float = 862690.0
    lattice_constant_um: float = 4.5
    interaction_cutoff: float = 4.0  # lattice units

    def __post_init__(self):
        for name in ("rabi_frequency_mhz", "c6_mhz_um6", "lattice_constant_um", "interaction_cutoff"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    def interaction_mhz(self, distance: float) -> float:
        """V/h in MHz for two atoms `distance` lattice units apart (no cutoff applied)."""
        r = self.lattice_constant_um * distance
        return self.c6_mhz_um6 / r**6

    @property
    def omega(self) -> float:
        """Rabi frequency in rad/us."""
        return 2 * math.pi * self.rabi_frequency_mhz

    @property
    def blockade_radius_um(self) -> float:
        return (self.c6_mhz_um6 / self.rabi_frequency_mhz) ** (1 / 6)

    @property
    def pi_time(self) -> float:
        """Duration of a resonant pi pulse in us."""
        return math.pi / self.omega


class UnitDiskGraph:
    """Vertices on an integer square lattice joined when within `radius_factor`.

    Vertices are stored sorted row-major; that order indexes every bit vector
    in the package. Instances are immutable once built.
    """

    __slots__ = (
        "n_rows", "n_cols", "vertices", "radius_factor", "filling", "seed",
        "neighbors", "edges", "positions", "_index",
    )

    def __init__(
        self,
        n_rows: int,
        n_cols: int,
        vertices: Iterable[Sequence[int]],
        radius_factor: float = DEFAULT_RADIUS_FACTOR,
        filling: float | None = None,
        seed: int | None = None,
    ):
        if int(n_rows) < 1 or int(n_cols) < 1:
            raise ValueError("lattice dimensions must be positive")
        if not radius_factor > 0:
            raise ValueError("radius_factor must be positive")
        pts = [LatticePoint(int(r), int(c)) for r, c in vertices]
        for p in pts:
            if not (0 <= p.row < n_rows and 0 <= p.col < n_cols):
                raise ValueError(f"vertex {tuple(p)} outside {n_rows}x{n_cols} lattice")
        pts.sort()
        for a, b in zip(pts, pts[1:]):
            if a == b:
                raise ValueError(f"duplicate vertex {tuple(a)}")
        set_ = object.__setattr__
        set_(self, "n_rows", int(n_rows))
        set_(self, "n_cols", int(n_cols))
        set_(self, "vertices", tuple(pts))
        set_(self, "radius_factor", float(radius_factor))
        set_(self, "filling", filling if filling is None else float(filling))
        set_(self, "seed", seed if seed is None else int(seed))
        pos = np.array(pts, dtype=np.int64).reshape(-1, 2)
        pos.setflags(write=False)
        set_(self, "positions", pos)
        set_(self, "_index", {p: i for i, p in enumerate(pts)})

        r2 = radius_factor * radius_factor + _DIST_TOL
        reach = int(math.floor(radius_factor + _DIST_TOL))
        nbrs: list[list[int]] = [[] for _ in pts]
        for i, p in enumerate(pts):
            for dr in range(-reach, reach + 1):
                for dc in range(-reach, reach + 1):
                    if (dr or dc) and dr * dr + dc * dc <= r2:
                        j = self._index.get(LatticePoint(p.row + dr, p.col + dc))
                        if j is not None:
                            nbrs[i].append(j)
        set_(self, "neighbors", tuple(tuple(sorted(x)) for x in nbrs))
        e = [(i, j) for i, ns in enumerate(self.neighbors) for j in ns if i < j]
        edges = np.array(e, dtype=np.int64).reshape(-1, 2)
        edges.setflags(write=False)
        set_(self, "edges", edges)

    def __setattr__(self, name, value):
        raise AttributeError("UnitDiskGraph is immutable")

    @property
    def n(self) -> int:
        return len(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def index_of(self, point: Sequence[int]) -> int:
        return self._index[LatticePoint(int(point[0]), int(point[1]))]

    def degree(self) -> np.ndarray:
        return np.array([len(ns) for ns in self.neighbors], dtype=np.int64)

    def adjacency_matrix(self):
        """Sparse symmetric 0/1 adjacency (CSR, int8)."""
        from scipy.sparse import coo_matrix

        n = self.n
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.int8)
        return coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()

    def neighbor_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR-style (indptr, indices) neighbour lists for compiled kernels."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(ns) for ns in self.neighbors])
        indices = np.fromiter((j for ns in self.neighbors for j in ns), dtype=np.int64, count=int(indptr[-1]))
        return indptr, indices

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            for j in self.neighbors[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, UnitDiskGraph):
            return NotImplemented
        return (
            self.n_rows == other.n_rows and self.n_cols == other.n_cols
            and self.vertices == other.vertices and self.radius_factor == other.radius_factor
        )

    def __hash__(self) -> int:
        return hash((self.n_rows, self.n_cols, self.vertices, self.radius_factor))

    def __repr__(self) -> str:
        return (
            f"UnitDiskGraph({self.n_rows}x{self.n_cols}, n={self.n}, "
            f"edges={len(self.edges)}, radius_factor={self.radius_factor:g})"
        )


def generate_instance(n_rows: int, n_cols: int, filling: float, seed: int | None) -> UnitDiskGraph:
    """Fill round(filling * n_rows * n_cols) lattice sites uniformly without replacement."""
    if not 0 < filling <= 1:
        raise ValueError("filling must lie in (0, 1]")
    if n_rows < 1 or n_cols < 1:
        raise ValueError("lattice dimensions must be positive")
    sites = n_rows * n_cols
    k = int(math.floor(filling * sites + 0.5))
    if k == 0:
        raise ValueError("empty instance")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(sites, size=k, replace=False))
    verts = [(int(s) // n_cols, int(s) % n_cols) for s in chosen]
    return UnitDiskGraph(n_rows, n_cols, verts, DEFAULT_RADIUS_FACTOR, filling=filling, seed=seed)


# spin configurations ---------------------------------------------------------

def as_config(bits, n: int) -> np.ndarray:
    """Validate a 0/1 vector of length n and return it as uint8."""
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValueError(f"configuration must have length {n}, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("configuration entries must be 0 or 1")
    return arr.astype(np.uint8)


def count_violations(config, graph: UnitDiskGraph) -> int:
    """Number of edges with both endpoints in the set."""
    x = np.asarray(config, dtype=bool)
    if len(graph.edges) == 0:
        return 0
    return int(np.count_nonzero(x[graph.edges[:, 0]] & x[graph.edges[:, 1]]))


def is_independent(config, graph: UnitDiskGraph) -> bool:
    return count_violations(config, graph) == 0


# instance files --------------------------------------------------------------

class InstanceFormatError(ValueError):
    pass


def serialize(graph: UnitDiskGraph) -> str:
    filling = graph.filling if graph.filling is not None else graph.n / (graph.n_rows * graph.n_cols)
    doc = {
        "n_rows": graph.n_rows,
        "n_cols": graph.n_cols,
        "filling": float(filling),
        "seed": graph.seed,
        "radius_factor": graph.radius_factor,
        "vertices": [[p.row, p.col] for p in graph.vertices],
    }
    return json.dumps(doc) + "\n"


def _field(doc: dict, name: str, kinds, allow_none: bool = False):
    if name not in doc:
        raise InstanceFormatError(f"field '{name}': missing")
    val = doc[name]
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, kinds):
        raise InstanceFormatError(f"field '{name}': expected {kinds}, got {type(val).__name__}")
    return val


def deserialize(text: str) -> UnitDiskGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InstanceFormatError("line 1: top-level value must be an object")
    n_rows = _field(doc, "n_rows", int)
    n_cols = _field(doc, "n_cols", int)
    filling = _field(doc, "filling", (int, float))
    seed = _field(doc, "seed", int, allow_none=True)
    radius = _field(doc, "radius_factor", (int, float))
    verts = _field(doc, "vertices", list)
    if n_rows < 1 or n_cols < 1:
        raise InstanceFormatError("field 'n_rows'/'n_cols': must be positive")
    if seed is not None and not 0 <= seed < 2**64:
        raise InstanceFormatError("field 'seed': must be a uint64")
    seen = set()
    pts = []
    for k, v in enumerate(verts):
        if (
            not isinstance(v, list) or len(v) != 2
            or any(isinstance(x, bool) or not isinstance(x, int) for x in v)
        ):
            raise InstanceFormatError(f"field 'vertices[{k}]': expected [row, col] integers")
        r, c = v
        if not (0 <= r < n_rows and 0 <= c < n_cols):
            raise InstanceFormatError(f"field 'vertices[{k}]': {v} outside {n_rows}x{n_cols} lattice")
        if (r, c) in seen:
            raise InstanceFormatError(f"field 'vertices[{k}]': duplicate vertex {v}")
        seen.add((r, c))
        pts.append((r, c))
    if pts != sorted(pts):
        raise InstanceFormatError("field 'vertices': not sorted row-major")
    return UnitDiskGraph(n_rows, n_cols, pts, float(radius), filling=float(filling), seed=seed)


def save_instance(graph: UnitDiskGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(graph))


def load_instance(path) -> UnitDiskGraph:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return deserialize(text)
    except InstanceFormatError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from None
