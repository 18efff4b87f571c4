"""Classical clean-up of measured configurations and the figures of merit."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .counting import OptimaSet, hamming_distances_to_set
from .graph import UnitDiskGraph, as_config, count_violations


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def reduce_violations(config, graph: UnitDiskGraph, rng=None) -> np.ndarray:
    """Remove the vertex with the most violations (ties uniform) until independent."""
    rng = _rng(rng)
    x = as_config(config, graph.n).astype(bool)
    counts = np.zeros(graph.n, dtype=np.int64)
    for i in np.flatnonzero(x):
        counts[i] = sum(x[j] for j in graph.neighbors[i])
    while True:
        live = np.where(x, counts, 0)
        worst = live.max(initial=0)
        if worst == 0:
            break
        ties = np.flatnonzero(live == worst)
        v = ties[rng.integers(len(ties))] if len(ties) > 1 else ties[0]
        x[v] = False
        for j in graph.neighbors[v]:
            counts[j] -= 1
    return x.astype(np.uint8)


def _greedy_fill(x: np.ndarray, graph: UnitDiskGraph, order) -> np.ndarray:
    y = x.copy()
    blocked = y.copy()
    for i in np.flatnonzero(y):
        blocked[list(graph.neighbors[i])] = True
    for v in order:
        if not blocked[v]:
            y[v] = True
            blocked[v] = True
            blocked[list(graph.neighbors[v])] = True
    return y


def add_vertices(config, graph: UnitDiskGraph, rng=None, orderings: int = 10) -> np.ndarray:
    """Greedily extend an independent set along random orders and keep the largest result."""
    if orderings < 1:
        raise ValueError("orderings must be at least 1")
    rng = _rng(rng)
    x = as_config(config, graph.n).astype(bool)
    if count_violations(x, graph):
        raise ValueError("input is not an independent set")
    best = None
    for _ in range(orderings):
        y = _greedy_fill(x, graph, rng.permutation(graph.n))
        if best is None or y.sum() > best.sum():
            best = y
    return best.astype(np.uint8)


def greedy_cleanup(config, graph: UnitDiskGraph, rng=None) -> np.ndarray:
    """Remove violations, then add free vertices in order of increasing degree."""
    x = reduce_violations(config, graph, rng).astype(bool)
    order = np.argsort(graph.degree(), kind="stable")
    return _greedy_fill(x, graph, order).astype(np.uint8)


@dataclass(frozen=True)
class MetricsReport:
    mis_size: int
    n_shots: int
    n_excluded: int
    r: float
    r_05: float
    p_mis: float
    p_mis_interval: tuple[float, float]
    mean_hamming: float
    histogram: dict[int, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "mis_size": self.mis_size, "n_shots": self.n_shots, "n_excluded": self.n_excluded,
            "r": self.r, "r_05": self.r_05, "p_mis": self.p_mis,
            "p_mis_interval": list(self.p_mis_interval), "mean_hamming": self.mean_hamming,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def clopper_pearson(successes: int, trials: int, level: float = 0.68) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def top_half_mean(sizes) -> float:
    s = np.sort(np.asarray(sizes))[::-1]
    return float(s[: math.ceil(len(s) / 2)].mean())


def compute_metrics(
    configs,
    graph: UnitDiskGraph,
    optima: OptimaSet,
    rng=None,
    add: bool = False,
    limit_violations: bool = False,
    violation_fraction: float = 0.1,
) -> MetricsReport:
    """R, R_0.5, P_MIS (68% Clopper-Pearson) and mean Hamming distance over shots.

    Every shot is reduced to an independent set first; with `add` it is also
    made maximal. With `limit_violations`, shots whose raw violation count
    exceeds `violation_fraction * N` are dropped before anything else.
    """
    rng = _rng(rng)
    shots = np.atleast_2d(np.asarray(configs, dtype=np.uint8))
    if shots.size == 0 or len(shots) == 0:
        raise ValueError("empty shot list")
    if shots.shape[1] != graph.n:
        raise ValueError("shot length does not match the graph")
    excluded = 0
    if limit_violations:
        keep = np.array([count_violations(s, graph) <= violation_fraction * graph.n for s in shots])
        excluded = int((~keep).sum())
        shots = shots[keep]
        if len(shots) == 0:
            raise ValueError("every shot exceeded the violation limit")
    cleaned = np.empty_like(shots)
    for i, s in enumerate(shots):
        y = reduce_violations(s, graph, rng)
        cleaned[i] = add_vertices(y, graph, rng) if add else y
    mis = optima.size_k
    sizes = cleaned.sum(axis=1).astype(np.int64)
    hits = int(np.count_nonzero(sizes == mis))
    n = len(sizes)
    sizes_u, counts = np.unique(sizes, return_counts=True)
    return MetricsReport(
        mis_size=mis,
        n_shots=n,
        n_excluded=excluded,
        r=float(sizes.mean() / mis),
        r_05=top_half_mean(sizes) / mis,
        p_mis=hits / n,
        p_mis_interval=clopper_pearson(hits, n),
        mean_hamming=float(hamming_distances_to_set(cleaned, optima).mean()),
        histogram={int(k): int(c) for k, c in zip(sizes_u, counts)},
    )


def histogram_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["size", "count"])
    for k, c in sorted(report.histogram.items()):
        w.writerow([k, c])
    return buf.getvalue()
