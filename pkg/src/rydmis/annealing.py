"""Simulated annealing for MIS: the penalty-Hamiltonian variant and the Rydberg variant.

Both run from the empty set and perform N * depth attempted updates. The
pure-Python step functions define the update rules; the compiled kernels
below implement the same rules for production runs and are cross-checked
against them in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .graph import PhysicalParams, UnitDiskGraph, as_config
from .postprocess import greedy_cleanup

CONSTANT, LINEAR, EXPONENTIAL = 0, 1, 2
_KINDS = {"constant": CONSTANT, "linear": LINEAR, "exponential": EXPONENTIAL}


@dataclass(frozen=True)
class MisHamiltonianParams:
    alpha: float = 100.0
    epsilon: float = 0.001

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be at least 1")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")


@dataclass(frozen=True)
class RydbergHamiltonianParams:
    detuning_mhz: float = 11.0
    physical: PhysicalParams = field(default_factory=PhysicalParams)

    def __post_init__(self):
        if not self.detuning_mhz > 0:
            raise ValueError("detuning must be positive")


@dataclass(frozen=True)
class TemperatureSchedule:
    """Temperature (1/beta) interpolated per attempted update."""

    kind: str = "constant"
    temp_initial: float = 1e-8
    temp_final: float = 1e-8

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.temp_initial < 0 or self.temp_final < 0:
            raise ValueError("temperatures must be non-negative")
        if self.temp_final > self.temp_initial:
            raise ValueError("final temperature must not exceed the initial one")
        if self.kind == "exponential" and self.temp_final == 0 < self.temp_initial:
            raise ValueError("exponential schedule needs a positive final temperature")

    @classmethod
    def constant(cls, temp: float) -> "TemperatureSchedule":
        return cls("constant", temp, temp)

    def temperature(self, attempt: int, total: int) -> float:
        return _temperature(_KINDS[self.kind], self.temp_initial, self.temp_final, attempt, total)


MIS_DEFAULT_SCHEDULE = TemperatureSchedule.constant(1e-8)
RYDBERG_DEFAULT_SCHEDULE = TemperatureSchedule("exponential", 0.32, 0.03)


@njit(cache=True)
def _temperature(kind, t0, t1, attempt, total):
    if kind == CONSTANT or total <= 1 or t0 == t1:
        return t0
    frac = attempt / (total - 1)
    if kind == LINEAR:
        return t0 + (t1 - t0) * frac
    if t0 == 0.0:
        return 0.0
    return t0 * (t1 / t0) ** frac


# energies ----------------------------------------------------------------------

def energy_mis(config, graph: UnitDiskGraph, params: MisHamiltonianParams = MisHamiltonianParams()) -> float:
    x = as_config(config, graph.n).astype(bool)
    viol = int(np.count_nonzero(x[graph.edges[:, 0]] & x[graph.edges[:, 1]])) if len(graph.edges) else 0
    return float(-x.sum() + params.alpha * viol)


def rydberg_couplings(graph: UnitDiskGraph, params: RydbergHamiltonianParams = RydbergHamiltonianParams()):
    """CSR (indptr, indices, values) of V_ij / (hbar Delta) for pairs within the cutoff."""
    phys = params.physical
    cutoff2 = phys.interaction_cutoff**2 + 1e-9
    reach = int(math.floor(phys.interaction_cutoff + 1e-9))
    by_class: dict[int, float] = {}
    rows: list[list[tuple[int, float]]] = [[] for _ in range(graph.n)]
    for i, (r, c) in enumerate(graph.vertices):
        for dr in range(-reach, reach + 1):
            for dc in range(-reach, reach + 1):
                d2 = dr * dr + dc * dc
                if d2 == 0 or d2 > cutoff2:
                    continue
                try:
                    j = graph.index_of((r + dr, c + dc))
                except KeyError:
                    continue
                if d2 not in by_class:
                    by_class[d2] = phys.interaction_mhz(math.sqrt(d2)) / params.detuning_mhz
                rows[i].append((j, by_class[d2]))
    indptr = np.zeros(graph.n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    idx = np.array([j for r in rows for j, _ in sorted(r)], dtype=np.int64)
    val = np.array([v for r in rows for _, v in sorted(r)], dtype=np.float64)
    return indptr, idx, val


def energy_rydberg(
    config, graph: UnitDiskGraph, params: RydbergHamiltonianParams = RydbergHamiltonianParams()
) -> float:
    x = as_config(config, graph.n).astype(bool)
    indptr, idx, val = rydberg_couplings(graph, params)
    e = -float(x.sum())
    for i in np.flatnonzero(x):
        sl = slice(indptr[i], indptr[i + 1])
        js = idx[sl]
        keep = (js > i) & x[js]
        e += float(val[sl][keep].sum())
    return e


# acceptance and single steps --------------------------------------------------

def metropolis_accept(delta_e: float, beta: float, rng: np.random.Generator) -> bool:
    """Accept with probability min(1, exp(-beta * delta_e)); beta may be inf."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if delta_e <= 0 or beta == 0:
        return True
    if math.isinf(beta):
        return False
    return bool(rng.random() < math.exp(-beta * delta_e))


def _set_neighbors(x: np.ndarray, graph: UnitDiskGraph, i: int) -> int:
    return int(sum(x[j] for j in graph.neighbors[i]))


def propose_mis_update(config, graph: UnitDiskGraph, params: MisHamiltonianParams, rng):
    """Draw one proposal of the MIS rule; returns (vertices to flip, energy change)."""
    x = config
    i = int(rng.integers(graph.n))
    a = params.alpha
    if not x[i]:
        return (i,), -1.0 + a * _set_neighbors(x, graph, i)
    u = rng.random()
    if u < params.epsilon:
        return (i,), 1.0 - a * _set_neighbors(x, graph, i)
    k = int((u - params.epsilon) / ((1 - params.epsilon) / 8))
    nbrs = graph.neighbors[i]
    if k >= len(nbrs) or x[nbrs[k]]:
        return (), 0.0
    j = nbrs[k]
    return (i, j), a * (_set_neighbors(x, graph, j) - 1 - _set_neighbors(x, graph, i))


def mis_sa_step(config, graph: UnitDiskGraph, params: MisHamiltonianParams, beta: float, rng) -> np.ndarray:
    """One attempted update of the MIS rule, applied in place; returns the configuration."""
    flips, de = propose_mis_update(config, graph, params, rng)
    if flips and metropolis_accept(de, beta, rng):
        for v in flips:
            config[v] ^= 1
    return config


def _free_or_set(x: np.ndarray, graph: UnitDiskGraph) -> np.ndarray:
    return np.array([i for i in range(graph.n) if x[i] or not any(x[j] for j in graph.neighbors[i])], dtype=np.int64)


def propose_rydberg_update(config, graph: UnitDiskGraph, couplings, rng):
    x = config
    pool = _free_or_set(x, graph)
    if len(pool) == 0:
        raise ValueError("no candidate vertices to update")
    indptr, idx, val = couplings
    i = int(pool[rng.integers(len(pool))])

    def field_at(v, skip=-1):
        sl = slice(indptr[v], indptr[v + 1])
        js = idx[sl]
        mask = x[js].astype(bool) & (js != skip)
        return float(val[sl][mask].sum())

    if not x[i]:
        return (i,), -1.0 + field_at(i)
    k = int(rng.random() * 8)
    nbrs = graph.neighbors[i]
    if k < len(nbrs):
        j = nbrs[k]
        if x[j]:
            return (), 0.0
        return (i, j), (1.0 - field_at(i)) + (-1.0 + field_at(j, skip=i))
    return (i,), 1.0 - field_at(i)


def rydberg_sa_step(
    config, graph: UnitDiskGraph, params: RydbergHamiltonianParams, beta: float, rng, couplings=None
) -> np.ndarray:
    couplings = couplings if couplings is not None else rydberg_couplings(graph, params)
    flips, de = propose_rydberg_update(config, graph, couplings, rng)
    if flips and metropolis_accept(de, beta, rng):
        for v in flips:
            config[v] ^= 1
    return config


# compiled kernels ---------------------------------------------------------------

@njit(cache=True)
def _accept(de, temp):
    if de <= 0.0:
        return True
    if temp <= 0.0:
        return False
    return np.random.random() < math.exp(-de / temp)


@njit(cache=True)
def _flip_mis(x, cnt, indptr, idx, v):
    if x[v]:
        x[v] = 0
        for p in range(indptr[v], indptr[v + 1]):
            cnt[idx[p]] -= 1
    else:
        x[v] = 1
        for p in range(indptr[v], indptr[v + 1]):
            cnt[idx[p]] += 1


@njit(cache=True)
def _mis_attempt(x, cnt, indptr, idx, n, alpha, eps, temp):
    """One attempted MIS update in place. Returns (dE, a, b, dviol); a/b are flipped vertices or -1."""
    i = np.random.randint(0, n)
    if x[i] == 0:
        de = -1.0 + alpha * cnt[i]
        if _accept(de, temp):
            dv = cnt[i]
            _flip_mis(x, cnt, indptr, idx, i)
            return de, i, -1, dv
        return 0.0, -1, -1, 0
    u = np.random.random()
    if u < eps:
        de = 1.0 - alpha * cnt[i]
        if _accept(de, temp):
            dv = -cnt[i]
            _flip_mis(x, cnt, indptr, idx, i)
            return de, i, -1, dv
        return 0.0, -1, -1, 0
    k = int((u - eps) / ((1.0 - eps) / 8.0))
    deg = indptr[i + 1] - indptr[i]
    if k >= deg:
        return 0.0, -1, -1, 0
    j = idx[indptr[i] + k]
    if x[j]:
        return 0.0, -1, -1, 0
    de = alpha * (cnt[j] - 1 - cnt[i])
    if _accept(de, temp):
        dv = (cnt[j] - 1) - cnt[i]
        _flip_mis(x, cnt, indptr, idx, i)
        _flip_mis(x, cnt, indptr, idx, j)
        return de, i, j, dv
    return 0.0, -1, -1, 0


@njit(cache=True)
def _mis_batch(indptr, idx, n, alpha, eps, kind, t0, t1, n_attempts, seeds, target,
               checkpoints, trace_every, x_out, energy_out, accepted_out, hit_out, cp_out, trace_out,
               stop_on_hit):
    n_cp = checkpoints.shape[0]
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        x = np.zeros(n, dtype=np.uint8)
        cnt = np.zeros(n, dtype=np.int64)
        size = 0
        viol = 0
        energy = 0.0
        acc = 0
        hit = -1
        if target == 0:
            hit = 0
        ci = 0
        while ci < n_cp and checkpoints[ci] == 0:
            cp_out[r, ci] = target == 0
            ci += 1
        for t in range(n_attempts):
            temp = _temperature(kind, t0, t1, t, n_attempts)
            de, a, b, dv = _mis_attempt(x, cnt, indptr, idx, n, alpha, eps, temp)
            if a >= 0:
                acc += 1
                energy += de
                viol += dv
                if b < 0:
                    size += 1 if x[a] else -1
                if hit < 0 and viol == 0 and size == target:
                    hit = t + 1
            if trace_every > 0 and (t + 1) % trace_every == 0 and r == 0:
                trace_out[(t + 1) // trace_every - 1] = energy
            while ci < n_cp and checkpoints[ci] == t + 1:
                cp_out[r, ci] = viol == 0 and size == target
                ci += 1
            if stop_on_hit and hit >= 0:
                cp_out[r, ci:] = True
                break
        x_out[r] = x
        energy_out[r] = energy
        accepted_out[r] = acc
        hit_out[r] = hit


@njit(cache=True)
def _mis_visit_histogram(indptr, idx, n, alpha, eps, temp, n_updates, seed, burn_in):
    """Visit counts over all 2^n configurations (bit i = vertex i) after each update."""
    np.random.seed(seed)
    x = np.zeros(n, dtype=np.uint8)
    cnt = np.zeros(n, dtype=np.int64)
    hist = np.zeros(1 << n, dtype=np.int64)
    code = 0
    for t in range(burn_in + n_updates):
        de, a, b, dv = _mis_attempt(x, cnt, indptr, idx, n, alpha, eps, temp)
        if a >= 0:
            code ^= 1 << a
        if b >= 0:
            code ^= 1 << b
        if t >= burn_in:
            hist[code] += 1
    return hist


@njit(cache=True)
def _pool_update(v, x, cnt, pool, pos, size):
    want = x[v] == 1 or cnt[v] == 0
    if want and pos[v] < 0:
        pool[size] = v
        pos[v] = size
        size += 1
    elif not want and pos[v] >= 0:
        last = pool[size - 1]
        p = pos[v]
        pool[p] = last
        pos[last] = p
        pos[v] = -1
        size -= 1
    return size


@njit(cache=True)
def _flip_ryd(v, x, cnt, fld, indptr, idx, cptr, cidx, cval, pool, pos, size):
    sgn = -1 if x[v] else 1
    x[v] = 1 if sgn > 0 else 0
    for p in range(indptr[v], indptr[v + 1]):
        cnt[idx[p]] += sgn
    for p in range(cptr[v], cptr[v + 1]):
        fld[cidx[p]] += sgn * cval[p]
    size = _pool_update(v, x, cnt, pool, pos, size)
    for p in range(indptr[v], indptr[v + 1]):
        size = _pool_update(idx[p], x, cnt, pool, pos, size)
    return size


@njit(cache=True)
def _coupling(cptr, cidx, cval, i, j):
    for p in range(cptr[i], cptr[i + 1]):
        if cidx[p] == j:
            return cval[p]
    return 0.0


@njit(cache=True)
def _ryd_attempt(x, cnt, fld, indptr, idx, cptr, cidx, cval, pool, pos, psize, temp):
    """One attempted Rydberg update in place. Returns (accepted, dE, dsize, dviol, pool size)."""
    i = pool[np.random.randint(0, psize)]
    if x[i] == 0:
        de = -1.0 + fld[i]
        if _accept(de, temp):
            dv = cnt[i]
            psize = _flip_ryd(i, x, cnt, fld, indptr, idx, cptr, cidx, cval, pool, pos, psize)
            return True, de, 1, dv, psize
        return False, 0.0, 0, 0, psize
    k = int(np.random.random() * 8.0)
    deg = indptr[i + 1] - indptr[i]
    if k < deg:
        j = idx[indptr[i] + k]
        if x[j] != 0:
            return False, 0.0, 0, 0, psize
        de = (1.0 - fld[i]) + (-1.0 + fld[j] - _coupling(cptr, cidx, cval, i, j))
        if _accept(de, temp):
            dv = (cnt[j] - 1) - cnt[i]
            psize = _flip_ryd(i, x, cnt, fld, indptr, idx, cptr, cidx, cval, pool, pos, psize)
            psize = _flip_ryd(j, x, cnt, fld, indptr, idx, cptr, cidx, cval, pool, pos, psize)
            return True, de, 0, dv, psize
        return False, 0.0, 0, 0, psize
    de = 1.0 - fld[i]
    if _accept(de, temp):
        dv = -cnt[i]
        psize = _flip_ryd(i, x, cnt, fld, indptr, idx, cptr, cidx, cval, pool, pos, psize)
        return True, de, -1, dv, psize
    return False, 0.0, 0, 0, psize


@njit(cache=True)
def _ryd_state(x, indptr, idx, cptr, cidx, cval):
    n = x.shape[0]
    cnt = np.zeros(n, dtype=np.int64)
    fld = np.zeros(n)
    for v in range(n):
        if x[v]:
            for p in range(indptr[v], indptr[v + 1]):
                cnt[idx[p]] += 1
            for p in range(cptr[v], cptr[v + 1]):
                fld[cidx[p]] += cval[p]
    pool = np.zeros(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    psize = 0
    for v in range(n):
        psize = _pool_update(v, x, cnt, pool, pos, psize)
    return cnt, fld, pool, pos, psize


@njit(cache=True)
def _rydberg_batch(indptr, idx, cptr, cidx, cval, n, kind, t0, t1, n_attempts, seeds, target,
                   checkpoints, trace_every, x_out, energy_out, accepted_out, hit_out, cp_out, trace_out):
    n_cp = checkpoints.shape[0]
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        x = np.zeros(n, dtype=np.uint8)
        cnt, fld, pool, pos, psize = _ryd_state(x, indptr, idx, cptr, cidx, cval)
        size = 0
        viol = 0
        energy = 0.0
        acc = 0
        hit = -1
        ci = 0
        while ci < n_cp and checkpoints[ci] == 0:
            cp_out[r, ci] = target == 0
            ci += 1
        for t in range(n_attempts):
            if psize == 0:
                hit_out[r] = -2
                return
            temp = _temperature(kind, t0, t1, t, n_attempts)
            ok, de, ds, dv, psize = _ryd_attempt(x, cnt, fld, indptr, idx, cptr, cidx, cval,
                                                 pool, pos, psize, temp)
            if ok:
                acc += 1
                energy += de
                size += ds
                viol += dv
                if hit < 0 and viol == 0 and size == target:
                    hit = t + 1
            if trace_every > 0 and (t + 1) % trace_every == 0 and r == 0:
                trace_out[(t + 1) // trace_every - 1] = energy
            while ci < n_cp and checkpoints[ci] == t + 1:
                cp_out[r, ci] = viol == 0 and size == target
                ci += 1
        x_out[r] = x
        energy_out[r] = energy
        accepted_out[r] = acc
        hit_out[r] = hit


@njit(cache=True)
def _step_outcomes(variant, x0, indptr, idx, cptr, cidx, cval, alpha, eps, temp, trials, seed):
    """Configuration codes reached by one attempted update from x0, repeated `trials` times."""
    np.random.seed(seed)
    n = x0.shape[0]
    out = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        x = x0.copy()
        if variant == 0:
            cnt = np.zeros(n, dtype=np.int64)
            for v in range(n):
                if x[v]:
                    for p in range(indptr[v], indptr[v + 1]):
                        cnt[idx[p]] += 1
            _mis_attempt(x, cnt, indptr, idx, n, alpha, eps, temp)
        else:
            cnt, fld, pool, pos, psize = _ryd_state(x, indptr, idx, cptr, cidx, cval)
            _ryd_attempt(x, cnt, fld, indptr, idx, cptr, cidx, cval, pool, pos, psize, temp)
        code = 0
        for v in range(n):
            if x[v]:
                code |= 1 << v
        out[t] = code
    return out


def step_outcome_counts(
    graph: UnitDiskGraph, config, variant: str, beta: float, trials: int, seed: int = 0,
    mis_params: MisHamiltonianParams = MisHamiltonianParams(),
    rydberg_params: RydbergHamiltonianParams = RydbergHamiltonianParams(),
) -> dict[int, int]:
    """Histogram of configuration codes (bit i = vertex i) after one compiled update."""
    indptr, idx = graph.neighbor_arrays()
    cptr, cidx, cval = rydberg_couplings(graph, rydberg_params)
    temp = 0.0 if math.isinf(beta) else (math.inf if beta == 0 else 1.0 / beta)
    codes = _step_outcomes(0 if variant == "mis" else 1, as_config(config, graph.n), indptr, idx,
                           cptr, cidx, cval, float(mis_params.alpha), float(mis_params.epsilon),
                           temp, int(trials), int(seed))
    u, c = np.unique(codes, return_counts=True)
    return {int(a): int(b) for a, b in zip(u, c)}


# drivers ------------------------------------------------------------------------

def restart_seeds(seed: int, restarts: int, instance_key: int = 0) -> np.ndarray:
    """32-bit kernel seeds; entry r depends only on (seed, instance_key, r)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(instance_key),))
    return ss.generate_state(restarts, dtype=np.uint32).astype(np.int64)


@dataclass
class AnnealResult:
    final_config: np.ndarray
    depth: float
    accepted_updates: int
    energy_final: float
    raw_config: np.ndarray
    energy_trace: np.ndarray | None = None


@dataclass
class BatchResult:
    """Outcome of many independent restarts on one graph."""

    configs: np.ndarray  # (restarts, N) raw final configurations
    energies: np.ndarray
    accepted: np.ndarray
    first_hit: np.ndarray  # attempt count at which an MIS was first reached, -1 if never
    checkpoints: np.ndarray  # attempt counts
    checkpoint_hits: np.ndarray  # (restarts, len(checkpoints)) bool
    n: int
    attempts: int

    @property
    def depth(self) -> float:
        return self.attempts / self.n

    def pmis_at_checkpoints(self) -> np.ndarray:
        return self.checkpoint_hits.mean(axis=0)

    def pmis_first_hit(self, depths) -> np.ndarray:
        """Fraction of restarts that reached an MIS within each depth (absorbing chains)."""
        hits = np.where(self.first_hit >= 0, self.first_hit, np.iinfo(np.int64).max)
        limits = np.round(np.asarray(depths, dtype=float) * self.n)
        return (hits[None, :] <= limits[:, None]).mean(axis=1)


def anneal_batch(
    graph: UnitDiskGraph,
    variant: str = "mis",
    schedule: TemperatureSchedule | None = None,
    depth: float = 32.0,
    restarts: int = 1,
    seed: int = 0,
    target_size: int | None = None,
    checkpoint_depths=None,
    mis_params: MisHamiltonianParams = MisHamiltonianParams(),
    rydberg_params: RydbergHamiltonianParams = RydbergHamiltonianParams(),
    instance_key: int = 0,
    trace_every: int = 0,
    stop_on_hit: bool = False,
) -> BatchResult:
    """Independent restarts from the empty set.

    With `stop_on_hit` each MIS-variant restart ends as soon as it reaches an
    MIS; later checkpoints count as hits, which is exact only for chains
    that cannot leave the MIS (zero temperature).
    """
    if stop_on_hit and (variant != "mis" or target_size is None):
        raise ValueError("stop_on_hit needs the mis variant and a target size")
    if depth <= 0:
        raise ValueError("depth must be positive")
    if graph.n == 0:
        raise ValueError("graph has no vertices")
    if variant not in ("mis", "rydberg"):
        raise ValueError(f"unknown variant {variant!r}")
    if schedule is None:
        schedule = MIS_DEFAULT_SCHEDULE if variant == "mis" else RYDBERG_DEFAULT_SCHEDULE
    n = graph.n
    attempts = int(round(n * depth))
    seeds = restart_seeds(seed, restarts, instance_key)
    cps = np.array(sorted(int(round(n * d)) for d in (checkpoint_depths or [])), dtype=np.int64)
    target = -1 if target_size is None else int(target_size)
    x_out = np.zeros((restarts, n), dtype=np.uint8)
    e_out = np.zeros(restarts)
    a_out = np.zeros(restarts, dtype=np.int64)
    h_out = np.full(restarts, -1, dtype=np.int64)
    cp_out = np.zeros((restarts, len(cps)), dtype=np.bool_)
    tr_out = np.zeros(attempts // trace_every if trace_every > 0 else 0)
    indptr, idx = graph.neighbor_arrays()
    kind = _KINDS[schedule.kind]
    if variant == "mis":
        _mis_batch(indptr, idx, n, float(mis_params.alpha), float(mis_params.epsilon), kind,
                   float(schedule.temp_initial), float(schedule.temp_final), attempts, seeds, target,
                   cps, int(trace_every), x_out, e_out, a_out, h_out, cp_out, tr_out, bool(stop_on_hit))
    else:
        cptr, cidx, cval = rydberg_couplings(graph, rydberg_params)
        _rydberg_batch(indptr, idx, cptr, cidx, cval, n, kind,
                       float(schedule.temp_initial), float(schedule.temp_final), attempts, seeds, target,
                       cps, int(trace_every), x_out, e_out, a_out, h_out, cp_out, tr_out)
        if (h_out == -2).any():
            raise ValueError("no candidate vertices to update")
    res = BatchResult(x_out, e_out, a_out, h_out, cps, cp_out, n, attempts)
    res.trace = tr_out
    return res


def run_annealer(
    graph: UnitDiskGraph,
    variant: str = "mis",
    schedule: TemperatureSchedule | None = None,
    depth_target: float = 32.0,
    seed: int = 0,
    mis_params: MisHamiltonianParams = MisHamiltonianParams(),
    rydberg_params: RydbergHamiltonianParams = RydbergHamiltonianParams(),
    cleanup: bool = True,
    trace_every: int = 0,
) -> AnnealResult:
    """A single annealing run from the empty configuration."""
    b = anneal_batch(graph, variant, schedule, depth_target, 1, seed, None, None,
                     mis_params, rydberg_params, trace_every=trace_every)
    raw = b.configs[0].copy()
    final = greedy_cleanup(raw, graph, np.random.default_rng(restart_seeds(seed, 1)[0])) if cleanup else raw
    return AnnealResult(
        final_config=final,
        depth=b.attempts / graph.n,
        accepted_updates=int(b.accepted[0]),
        energy_final=float(b.energies[0]),
        raw_config=raw,
        energy_trace=b.trace if trace_every > 0 else None,
    )


def stationary_weights(graph: UnitDiskGraph, params: MisHamiltonianParams, beta: float) -> np.ndarray:
    """Normalized pi_s proportional to eps^(-|s|) exp(-beta E_s) over all 2^N configurations."""
    n = graph.n
    codes = np.arange(1 << n, dtype=np.int64)
    size = np.bitwise_count(codes).astype(float)
    viol = np.zeros(1 << n)
    for i, j in graph.edges:
        viol += ((codes >> i) & (codes >> j) & 1)
    energy = -size + params.alpha * viol
    logw = -size * math.log(params.epsilon) - beta * energy
    w = np.exp(logw - logw.max())
    return w / w.sum()


def empirical_distribution(
    graph: UnitDiskGraph, params: MisHamiltonianParams, beta: float, n_updates: int, seed: int = 0,
    burn_in: int = 10000,
) -> np.ndarray:
    """Time-averaged occupation of every configuration along one MIS chain (N <= 20)."""
    if graph.n > 20:
        raise ValueError("histogram over 2^N states limited to N <= 20")
    indptr, idx = graph.neighbor_arrays()
    temp = 0.0 if math.isinf(beta) else (math.inf if beta == 0 else 1.0 / beta)
    hist = _mis_visit_histogram(indptr, idx, graph.n, float(params.alpha), float(params.epsilon),
                                temp, int(n_updates), int(restart_seeds(seed, 1)[0]), int(burn_in))
    return hist / hist.sum()
