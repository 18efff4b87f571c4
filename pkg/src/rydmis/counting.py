"""Exact counting of independent sets by a column sweep over the lattice.

The sweep visits lattice cells in column-major order (or row-major when that
gives a shorter frontier). Its state is the occupation of the last H + 1
visited cells, where H is the frontier height; since every edge joins cells at
most one column apart this determines which new cells may be occupied. The
same sweep runs in three semirings: polynomials with exact integer
coefficients (counting), max-plus (MIS size) and boolean reachability per
set size (used to enumerate optima without dead ends).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graph import UnitDiskGraph, generate_instance

STATE_LIMIT = 2**26
DEFAULT_ENUM_CAP = 10**6
_INT64_SAFE = 2.0**60


class InstanceTooWide(ValueError):
    def __init__(self, detail: str = ""):
        super().__init__("instance too wide" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class _Plan:
    width: int  # frontier bits
    vertex: np.ndarray  # per cell: vertex index or -1
    conflict: np.ndarray  # per cell: frontier bits that block occupation


def _plan(graph: UnitDiskGraph) -> _Plan:
    transpose = graph.n_rows > graph.n_cols
    height = graph.n_cols if transpose else graph.n_rows
    major = graph.n_rows if transpose else graph.n_cols
    width = height + 1
    if width > 62:
        raise InstanceTooWide(f"frontier of {width} cells")
    n_cells = height * major
    cell_of = np.empty(graph.n, dtype=np.int64)
    for i, (r, c) in enumerate(graph.vertices):
        cell_of[i] = r * height + c if transpose else c * height + r
    vertex = np.full(n_cells, -1, dtype=np.int64)
    vertex[cell_of] = np.arange(graph.n)
    conflict = np.zeros(n_cells, dtype=np.int64)
    for i, ns in enumerate(graph.neighbors):
        t = cell_of[i]
        for j in ns:
            back = t - cell_of[j]
            if back <= 0:
                continue
            if back > width:
                raise ValueError("edges must not span more than one lattice column")
            conflict[t] |= 1 << int(back - 1)
    return _Plan(width, vertex, conflict)


def _merge(keys: np.ndarray, *values: np.ndarray):
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    starts = np.flatnonzero(np.r_[True, skeys[1:] != skeys[:-1]])
    return skeys[starts], starts, [v[order] for v in values]


def _check_states(n: int) -> None:
    if n > STATE_LIMIT:
        raise InstanceTooWide(f"{n} boundary states exceed limit {STATE_LIMIT}")


def _total_count_estimate(plan: _Plan) -> float:
    """Floating-point total number of independent sets (used to pick an exact dtype)."""
    mask = (1 << plan.width) - 1
    keys = np.zeros(1, dtype=np.int64)
    val = np.ones(1)
    for v, conf in zip(plan.vertex, plan.conflict):
        shifted = (keys << 1) & mask
        if v < 0:
            keys, starts, (val,) = _merge(shifted, val)
            val = np.add.reduceat(val, starts)
            continue
        ok = (keys & conf) == 0
        k2 = np.concatenate([shifted, shifted[ok] | 1])
        v2 = np.concatenate([val, val[ok]])
        keys, starts, (v2,) = _merge(k2, v2)
        val = np.add.reduceat(v2, starts)
        _check_states(len(keys))
    return float(val.sum())


def _poly_sweep(plan: _Plan, dtype) -> list[int]:
    mask = (1 << plan.width) - 1
    keys = np.zeros(1, dtype=np.int64)
    coef = np.ones((1, 1), dtype=dtype)
    for v, conf in zip(plan.vertex, plan.conflict):
        shifted = (keys << 1) & mask
        if v < 0:
            keys, starts, (coef,) = _merge(shifted, coef)
            coef = np.add.reduceat(coef, starts, axis=0)
            continue
        ok = (keys & conf) == 0
        n_ok = int(ok.sum())
        grown = np.zeros((len(keys) + n_ok, coef.shape[1] + 1), dtype=dtype)
        grown[: len(keys), :-1] = coef
        grown[len(keys):, 1:] = coef[ok]
        k2 = np.concatenate([shifted, shifted[ok] | 1])
        keys, starts, (grown,) = _merge(k2, grown)
        coef = np.add.reduceat(grown, starts, axis=0)
        if not np.any(coef[:, -1]):
            coef = coef[:, :-1]
        _check_states(len(keys))
    total = coef.sum(axis=0)
    out = [int(x) for x in total]
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


@dataclass(frozen=True)
class IndependencePolynomial:
    """Coefficients D_0..D_MIS; D_k counts independent sets of size k."""

    coefficients: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __getitem__(self, k: int) -> int:
        return self.coefficients[k] if 0 <= k < len(self.coefficients) else 0

    def total(self) -> int:
        return sum(self.coefficients)

    def __call__(self, x):
        return sum(c * x**k for k, c in enumerate(self.coefficients))


def independence_polynomial(graph: UnitDiskGraph) -> IndependencePolynomial:
    if graph.n == 0:
        return IndependencePolynomial((1,))
    plan = _plan(graph)
    dtype = np.int64 if _total_count_estimate(plan) < _INT64_SAFE else object
    return IndependencePolynomial(tuple(_poly_sweep(plan, dtype)))


def mis_size(graph: UnitDiskGraph) -> int:
    """Maximum independent set size from the max-plus sweep."""
    if graph.n == 0:
        return 0
    plan = _plan(graph)
    mask = (1 << plan.width) - 1
    keys = np.zeros(1, dtype=np.int64)
    best = np.zeros(1, dtype=np.int64)
    for v, conf in zip(plan.vertex, plan.conflict):
        shifted = (keys << 1) & mask
        if v < 0:
            keys, starts, (best,) = _merge(shifted, best)
            best = np.maximum.reduceat(best, starts)
            continue
        ok = (keys & conf) == 0
        k2 = np.concatenate([shifted, shifted[ok] | 1])
        b2 = np.concatenate([best, best[ok] + 1])
        keys, starts, (b2,) = _merge(k2, b2)
        best = np.maximum.reduceat(b2, starts)
        _check_states(len(keys))
    return int(best.max())


# optimum enumeration ---------------------------------------------------------

@dataclass(frozen=True)
class OptimaSet:
    size_k: int
    configurations: np.ndarray  # (count, N) uint8, rows sorted lexicographically
    truncated: bool

    def __len__(self) -> int:
        return len(self.configurations)


def _reach_layers(plan: _Plan, max_size: int):
    """Per cell: sorted frontier keys and which set sizes reach each key."""
    mask = (1 << plan.width) - 1
    keys = np.zeros(1, dtype=np.int64)
    reach = np.zeros((1, max_size + 1), dtype=bool)
    reach[0, 0] = True
    layers = [(keys, reach)]
    for v, conf in zip(plan.vertex, plan.conflict):
        shifted = (keys << 1) & mask
        if v < 0:
            keys, starts, (reach,) = _merge(shifted, reach)
            reach = np.logical_or.reduceat(reach, starts, axis=0)
        else:
            ok = (keys & conf) == 0
            taken = np.zeros_like(reach[ok])
            taken[:, 1:] = reach[ok][:, :-1]
            k2 = np.concatenate([shifted, shifted[ok] | 1])
            r2 = np.concatenate([reach, taken])
            keys, starts, (r2,) = _merge(k2, r2)
            reach = np.logical_or.reduceat(r2, starts, axis=0)
            _check_states(len(keys))
        layers.append((keys, reach))
    return layers


def enumerate_optima(graph: UnitDiskGraph, k: int, cap: int = DEFAULT_ENUM_CAP) -> OptimaSet:
    """All independent sets of size k (at most `cap` of them)."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    if k < 0:
        raise ValueError("k must be non-negative")
    n = graph.n
    if n == 0:
        confs = np.zeros((1 if k == 0 else 0, 0), dtype=np.uint8)
        return OptimaSet(k, confs, False)
    plan = _plan(graph)
    layers = _reach_layers(plan, k)
    n_cells = len(plan.vertex)
    top = 1 << (plan.width - 1)
    out: list[list[int]] = []
    truncated = False
    keys_last, reach_last = layers[-1]
    stack = [(n_cells, int(key), k, ()) for key in keys_last[reach_last[:, k]][::-1]]
    while stack:
        t, key, s, chosen = stack.pop()
        if t == 0:
            if len(out) >= cap:
                truncated = True
                break
            out.append(chosen)
            continue
        v = int(plan.vertex[t - 1])
        take = key & 1 if v >= 0 else 0
        s_prev = s - take
        prev_keys, prev_reach = layers[t - 1]
        nxt = chosen + (v,) if take else chosen
        for b in (1, 0):
            p = (key >> 1) | (top if b else 0)
            if take and p & int(plan.conflict[t - 1]):
                continue
            pos = int(np.searchsorted(prev_keys, p))
            if pos < len(prev_keys) and prev_keys[pos] == p and prev_reach[pos, s_prev]:
                stack.append((t - 1, p, s_prev, nxt))
    confs = np.zeros((len(out), n), dtype=np.uint8)
    for row, chosen in enumerate(out):
        confs[row, list(chosen)] = 1
    if len(confs):
        order = np.lexsort(confs.T[::-1])
        confs = confs[order]
    return OptimaSet(k, confs, truncated)


# hardness --------------------------------------------------------------------

@dataclass(frozen=True)
class HardnessMetrics:
    n: int
    mis_size: int
    d_mis: int
    d_mis_minus_1: int
    hp: float
    rho: float


def metrics_from_polynomial(poly: IndependencePolynomial, n: int) -> HardnessMetrics:
    k = poly.degree
    if k < 1:
        raise ValueError("hardness needs at least one vertex")
    d_k, d_km1 = poly[k], poly[k - 1]
    return HardnessMetrics(
        n=n,
        mis_size=k,
        d_mis=d_k,
        d_mis_minus_1=d_km1,
        hp=d_km1 / (k * d_k),
        rho=math.log(d_k) / n,
    )


def hardness_metrics(graph: UnitDiskGraph) -> HardnessMetrics:
    return metrics_from_polynomial(independence_polynomial(graph), graph.n)


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def hamming_distances_to_set(configs: np.ndarray, optima: OptimaSet, chunk: int = 4096) -> np.ndarray:
    """Normalized distance from each row of `configs` to its closest member of `optima`."""
    if optima.truncated:
        raise ValueError("MIS set incomplete")
    configs = np.atleast_2d(np.asarray(configs, dtype=np.uint8))
    n = configs.shape[1]
    if len(optima) == 0:
        raise ValueError("optima set is empty")
    if optima.configurations.shape[1] != n:
        raise ValueError("configuration length does not match the optima")
    ref = np.packbits(optima.configurations, axis=1)
    packed = np.packbits(configs, axis=1)
    out = np.empty(len(configs))
    step = max(1, min(chunk, 2**24 // (len(ref) * ref.shape[1])))
    for lo in range(0, len(configs), step):
        block = packed[lo: lo + step]
        x = block[:, None, :] ^ ref[None, :, :]
        out[lo: lo + len(block)] = _POPCOUNT[x].sum(axis=2).min(axis=1)
    return out / n


def hamming_to_nearest_mis(config, optima: OptimaSet) -> float:
    return float(hamming_distances_to_set(np.asarray(config)[None, :], optima)[0])


# ensembles -------------------------------------------------------------------

SCAN_COLUMNS = ("N", "seed", "mis_size", "d_mis", "d_mis_minus_1", "hp", "rho")


@dataclass(frozen=True)
class ScanRow:
    n_rows: int
    n_cols: int
    seed: int
    metrics: HardnessMetrics

    def as_record(self) -> dict:
        m = self.metrics
        return {
            "N": m.n, "seed": self.seed, "mis_size": m.mis_size, "d_mis": str(m.d_mis),
            "d_mis_minus_1": str(m.d_mis_minus_1), "hp": repr(m.hp), "rho": repr(m.rho),
        }


def instance_seeds(seed: int, n_rows: int, n_cols: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(n_rows), int(n_cols)))
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]


def _scan_one(args) -> ScanRow:
    n_rows, n_cols, filling, s = args
    g = generate_instance(n_rows, n_cols, filling, s)
    return ScanRow(n_rows, n_cols, s, hardness_metrics(g))


def ensemble_scan(
    sizes: Sequence[tuple[int, int]],
    per_size: int,
    seed: int,
    filling: float = 0.8,
    workers: int = 1,
) -> list[ScanRow]:
    """Hardness metrics for `per_size` random instances of each lattice size."""
    jobs = [
        (r, c, filling, s)
        for r, c in sizes
        for s in instance_seeds(seed, r, c, per_size)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_scan_one(j) for j in jobs]


PERCENTILES = (2, 25, 50, 75, 98)


def percentile_summary(rows: Iterable[ScanRow], field: str = "hp") -> dict[int, dict[int, float]]:
    """Per vertex count, the box-plot percentiles of `field` (hp, rho, d_mis)."""
    groups: dict[int, list[float]] = {}
    for row in rows:
        val = getattr(row.metrics, field)
        groups.setdefault(row.metrics.n, []).append(float(val))
    return {
        n: dict(zip(PERCENTILES, (float(x) for x in np.percentile(vals, PERCENTILES))))
        for n, vals in sorted(groups.items())
    }


def select_hardest(rows: Sequence[ScanRow], fraction: float = 0.02) -> list[ScanRow]:
    """Top `fraction` of instances by hardness parameter, per lattice size."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    groups: dict[tuple[int, int], list[ScanRow]] = {}
    for row in rows:
        groups.setdefault((row.n_rows, row.n_cols), []).append(row)
    picked = []
    for key in sorted(groups):
        grp = sorted(groups[key], key=lambda r: (-r.metrics.hp, r.seed))
        picked.extend(grp[: max(1, math.ceil(fraction * len(grp)))])
    return picked


def scan_to_csv(rows: Iterable[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\r\n")
    w.writeheader()
    for row in rows:
        w.writerow(row.as_record())
    return buf.getvalue()
