"""Markov-chain analysis of MIS annealing and the scaling fits.

All rates and times are reported per unit depth (one attempted update per
vertex), i.e. per-update quantities multiplied or divided by N.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import least_squares
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import eigsh, spsolve

from .annealing import MIS_DEFAULT_SCHEDULE, MisHamiltonianParams, anneal_batch, mis_sa_step
from .counting import HardnessMetrics, enumerate_optima, hardness_metrics, mis_size
from .graph import UnitDiskGraph

DENSE_LIMIT = 2500


def per_depth(rate_per_update: float, n: int) -> float:
    return rate_per_update * n


# --------------------------------------------------------------------------- chain


@dataclass(frozen=True)
class LowEnergyChain:
    """The MIS annealing chain restricted to independent sets of size k-1 and k.

    States are ordered with the k-1 block first. Moves that would leave the
    two blocks are folded into the diagonal; at zero temperature these moves
    are rejected anyway, so the restriction is exact there.
    """

    n: int
    mis_size: int
    states: np.ndarray  # (n_states, N) uint8
    n_low: int  # number of size k-1 states
    matrix: sparse.csr_matrix
    beta: float
    params: MisHamiltonianParams

    @property
    def n_high(self) -> int:
        return len(self.states) - self.n_low

    @property
    def absorbing(self) -> bool:
        return math.isinf(self.beta)

    def low_block(self) -> sparse.csr_matrix:
        return self.matrix[: self.n_low, : self.n_low].tocsr()

    def stationary(self) -> np.ndarray:
        """pi_s proportional to eps^-|s| exp(beta |s|), restricted to the two blocks."""
        if self.absorbing:
            pi = np.zeros(len(self.states))
            pi[self.n_low:] = 1.0 / self.n_high
            return pi
        step = -math.log(self.params.epsilon) + self.beta  # log weight ratio of high to low
        w_low = 1.0 / (1.0 + self.n_high / self.n_low * math.exp(step))
        pi = np.empty(len(self.states))
        pi[: self.n_low] = w_low / self.n_low
        pi[self.n_low:] = (1.0 - w_low) / self.n_high
        return pi


def _codes(configs: np.ndarray) -> np.ndarray:
    weights = np.left_shift(np.uint64(1), np.arange(configs.shape[1], dtype=np.uint64))
    return (configs.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def build_low_energy_chain(
    graph: UnitDiskGraph, params: MisHamiltonianParams = MisHamiltonianParams(), beta: float = math.inf,
) -> LowEnergyChain:
    """Exact one-update transition probabilities of MIS annealing between the two top blocks."""
    n = graph.n
    if n == 0:
        raise ValueError("graph has no vertices")
    if n > 63:
        raise ValueError("chain construction limited to N <= 63")
    if max(graph.degree(), default=0) > 8:
        raise ValueError("the exchange move assumes at most 8 neighbours")
    k = mis_size(graph)
    low = enumerate_optima(graph, k - 1)
    high = enumerate_optima(graph, k)
    if low.truncated or high.truncated:
        raise ValueError("optima enumeration truncated; chain not buildable")
    states = np.vstack([low.configurations, high.configurations]).astype(np.uint8)
    n_low = len(low)
    codes = _codes(states)
    order = np.argsort(codes)
    sorted_codes = codes[order]

    def lookup(c):
        pos = np.searchsorted(sorted_codes, c)
        pos = np.minimum(pos, len(codes) - 1)
        found = sorted_codes[pos] == c
        return order[pos], found

    bit = [np.uint64(1) << np.uint64(i) for i in range(n)]
    nbmask = [np.uint64(0)] * n
    for i in range(n):
        for j in graph.neighbors[i]:
            nbmask[i] |= bit[j]
    eps = params.epsilon
    remove_acc = 0.0 if math.isinf(beta) else math.exp(-beta)
    rows, cols, vals = [], [], []
    src = np.arange(len(codes))

    def emit(mask, target, prob):
        t, ok = lookup(target[mask])
        rows.append(src[mask][ok])
        cols.append(t[ok])
        vals.append(np.full(int(ok.sum()), prob))

    for i in range(n):
        has = (codes & bit[i]) != 0
        free = ~has & ((codes & nbmask[i]) == 0)
        emit(free, codes | bit[i], 1.0 / n)
        if remove_acc > 0:
            emit(has, codes ^ bit[i], eps * remove_acc / n)
        for j in graph.neighbors[i]:
            movable = has & ((codes & nbmask[j]) == bit[i])
            emit(movable, (codes ^ bit[i]) | bit[j], (1 - eps) / (8 * n))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    off = sparse.csr_matrix((v, (r, c)), shape=(len(codes),) * 2)
    diag = 1.0 - np.asarray(off.sum(axis=1)).ravel()
    m = (off + sparse.diags(diag)).tocsr()
    return LowEnergyChain(n, k, states, n_low, m, float(beta), params)


# --------------------------------------------------------------------------- spectra


def _start_vector(size: int) -> np.ndarray:
    # ARPACK's default start vector depends on earlier calls in the process
    return np.random.default_rng(0).standard_normal(size)


def _top_symmetric(m: sparse.spmatrix, count: int = 1):
    """Largest algebraic eigenpairs of a symmetric matrix, ascending."""
    size = m.shape[0]
    if size <= DENSE_LIMIT or count >= size - 1:
        w, v = np.linalg.eigh(m.toarray())
        return w[-count:], v[:, -count:]
    w, v = eigsh(m, k=count, which="LA", tol=1e-12, v0=_start_vector(m.shape[0]))
    o = np.argsort(w)
    return w[o], v[:, o]


def _symmetrized(chain: LowEnergyChain):
    pi = chain.stationary()
    s = np.sqrt(pi)
    m = sparse.diags(s) @ chain.matrix @ sparse.diags(1 / s)
    return 0.5 * (m + m.T), pi


def _check_reversible(chain: LowEnergyChain, pi: np.ndarray):
    flow = sparse.diags(pi) @ chain.matrix
    if abs(flow - flow.T).max() > 1e-12 * max(pi.max(), 1e-300):
        raise ValueError("chain is not reversible")


def perron_vector(chain: LowEnergyChain):
    """Largest eigenvalue and eigenvector of the k-1 block of an absorbing chain."""
    w, v = _top_symmetric(chain.low_block(), 1)
    vec = v[:, 0]
    return float(w[0]), vec * np.sign(vec.sum() or 1.0)


def uniform_overlap(chain: LowEnergyChain) -> float:
    _, vec = perron_vector(chain)
    return float(abs(vec.sum()) / (np.linalg.norm(vec) * math.sqrt(len(vec))))


def spectral_gap(chain: LowEnergyChain, modulus: bool = True) -> float:
    """Spectral gap per unit depth.

    For an absorbing chain this is 1 minus the largest eigenvalue of the k-1
    block. Otherwise it is 1 minus the second-largest eigenvalue modulus of
    the chain (or the second-largest eigenvalue with `modulus=False`).
    """
    if chain.absorbing:
        lam, _ = perron_vector(chain)
        return per_depth(1.0 - lam, chain.n)
    sym, _ = _symmetrized(chain)
    if sym.shape[0] <= DENSE_LIMIT:
        w = np.linalg.eigvalsh(sym.toarray())
    else:
        top = eigsh(sym, k=2, which="LA", tol=1e-12, v0=_start_vector(sym.shape[0]))[0]
        bottom = eigsh(sym, k=1, which="SA", tol=1e-12, v0=_start_vector(sym.shape[0]))[0]
        w = np.sort(np.concatenate([top, bottom]))
    second = w[-2]
    if modulus:
        second = max(second, abs(w[0]))
    return per_depth(1.0 - second, chain.n)


@dataclass(frozen=True)
class CheegerBounds:
    """Conductance and the bracket lower <= gap/N <= upper (per-update units)."""

    phi: float
    phi_block: float  # conductance of the cut at the k-1 block
    lower: float
    upper: float

    def contains(self, gap_per_depth: float, n: int) -> bool:
        g = gap_per_depth / n
        return self.lower <= g <= self.upper


def _sweep_conductance(flow: sparse.csr_matrix, weight: np.ndarray, out_total: np.ndarray,
                       order: np.ndarray, cap: float = math.inf) -> float:
    """Minimum of out(U)/w(U) over prefixes U of `order` with w(U) <= cap.

    `flow` is symmetric off-diagonal flow, `out_total[s]` the total flow leaving s.
    """
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    coo = flow.tocoo()
    earlier = (rank[coo.col] < rank[coo.row]) & (coo.row != coo.col)
    inner = np.zeros(len(order))
    np.add.at(inner, rank[coo.row[earlier]], coo.data[earlier])
    delta = out_total[order] - 2 * inner
    out = np.cumsum(delta)
    w = np.cumsum(weight[order])
    ok = (w > 0) & (w <= cap * (1 + 1e-12))
    return float((np.maximum(out[ok], 0) / w[ok]).min()) if ok.any() else math.inf


def cheeger_bounds(chain: LowEnergyChain) -> CheegerBounds:
    """Cheeger bracket on the gap from the block cut and eigenvector sweep cuts.

    The computed conductance is the minimum over the k-1 block cut and every
    sweep cut of the relevant eigenvector. It upper-bounds the true minimum,
    so the upper bound holds, and the sweep cuts are where the lower-bound
    argument finds its set, so the lower bound holds as well.
    """
    if chain.absorbing:
        block = chain.low_block()
        # symmetric: the uniform measure on the k-1 block is the right weight
        off = block - sparse.diags(block.diagonal())
        out_total = 1.0 - block.diagonal()
        ones = np.ones(chain.n_low)
        phi_block = float(out_total.sum() - off.sum()) / chain.n_low
        _, vec = perron_vector(chain)
        phi = min(phi_block, _sweep_conductance(off.tocsr(), ones, out_total, np.argsort(-vec, kind="stable")))
    else:
        sym, pi = _symmetrized(chain)
        _check_reversible(chain, pi)
        flow = (sparse.diags(pi) @ chain.matrix).tocsr()
        off = flow - sparse.diags(flow.diagonal())
        out_total = pi - flow.diagonal()
        pi_low = pi[: chain.n_low].sum()
        low_out = float(out_total[: chain.n_low].sum() - off[: chain.n_low, : chain.n_low].sum())
        phi_block = low_out / pi_low if pi_low <= 0.5 else math.inf
        w, v = _top_symmetric(sym, 2)
        f = v[:, 0] / np.sqrt(pi)
        phi = phi_block
        for order in (np.argsort(-f, kind="stable"), np.argsort(f, kind="stable")):
            phi = min(phi, _sweep_conductance(off.tocsr(), pi, out_total, order, cap=0.5))
    return CheegerBounds(phi=phi, phi_block=phi_block, lower=phi * phi / 2, upper=2 * phi)


def hitting_time_estimate(chain: LowEnergyChain) -> float:
    """Mean absorption time in depth units from the uniform k-1 distribution."""
    if not chain.absorbing:
        raise ValueError("hitting time requires an absorbing (zero-temperature) chain")
    block = chain.low_block()
    leak = 1.0 - np.asarray(block.sum(axis=1)).ravel()
    exits = np.flatnonzero(leak > 1e-15)
    if len(exits) == 0:
        raise ValueError("reducible chain")
    # walk transitions backwards from a virtual exit node; every state must be reached
    size = chain.n_low + 1
    back = sparse.bmat([[(block.T != 0).astype(np.int8), None],
                        [sparse.csr_matrix((np.ones(len(exits), dtype=np.int8),
                                            (np.zeros(len(exits), dtype=np.int64), exits)),
                                           shape=(1, chain.n_low)), None]],
                       format="csr", dtype=np.int8)
    back.resize((size, size))
    reached = breadth_first_order(back, chain.n_low, directed=True, return_predecessors=False)
    if len(reached) < size:
        raise ValueError("reducible chain")
    system = (sparse.identity(chain.n_low) - block).tocsc()
    times = spsolve(system, np.ones(chain.n_low))
    return float(np.mean(times)) / chain.n


def entry_histogram(graph: UnitDiskGraph, restarts: int = 1000, seed: int = 0,
                    params: MisHamiltonianParams = MisHamiltonianParams()) -> dict[tuple[int, ...], int]:
    """Which |MIS|-1 independent set zero-temperature runs from the empty set reach first.

    Keys are sorted vertex tuples. Runs that reach an MIS without passing
    through the |MIS|-1 block (impossible from the empty set) would be
    skipped; nothing about uniformity is assumed.
    """
    k = mis_size(graph)
    if k < 1:
        raise ValueError("graph has no vertices")
    rng = np.random.default_rng(seed)
    counts: dict[tuple[int, ...], int] = {}
    for _ in range(restarts):
        x = np.zeros(graph.n, dtype=np.uint8)
        size = 0
        while size < k - 1:
            mis_sa_step(x, graph, params, math.inf, rng)
            size = int(x.sum())
        key = tuple(int(v) for v in np.flatnonzero(x))
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


def propagate_pmis(chain: LowEnergyChain, depths, initial=None) -> np.ndarray:
    """Exact P_MIS after each depth: 1 - v M^t 1_low with t = round(depth * N)."""
    depths = np.asarray(depths, dtype=float)
    steps = np.round(depths * chain.n).astype(np.int64)
    v = np.zeros(len(chain.states))
    if initial is None:
        v[: chain.n_low] = 1.0 / chain.n_low
    else:
        v[: len(initial)] = initial
    mt = chain.matrix.T.tocsr()
    out = np.empty(len(steps))
    order = np.argsort(steps)
    t = 0
    for idx in order:
        while t < steps[idx]:
            v = mt @ v
            t += 1
        out[idx] = 1.0 - v[: chain.n_low].sum()
    return out


# --------------------------------------------------------------------------- empirical curves


def first_hit_depths(
    graph: UnitDiskGraph, max_depth: float, restarts: int = 10000, seed: int = 0,
    params: MisHamiltonianParams = MisHamiltonianParams(), instance_key: int = 0,
) -> np.ndarray:
    """Depth at which each zero-temperature MIS annealing run first reaches an MIS (inf if never)."""
    b = anneal_batch(graph, "mis", MIS_DEFAULT_SCHEDULE, float(max_depth), restarts, seed,
                     target_size=mis_size(graph), mis_params=params, instance_key=instance_key,
                     stop_on_hit=True)
    return np.where(b.first_hit >= 0, b.first_hit / graph.n, np.inf)


def pmis_from_first_hits(first_hits, depths) -> np.ndarray:
    """P_MIS(depth) of an absorbing chain: the fraction of runs that hit within each depth."""
    h = np.asarray(first_hits, dtype=float)
    return (h[None, :] <= np.asarray(depths, dtype=float)[:, None] + 1e-12).mean(axis=1)


def empirical_pmis_curve(graph: UnitDiskGraph, depths, restarts: int = 10000, seed: int = 0,
                         params: MisHamiltonianParams = MisHamiltonianParams(),
                         instance_key: int = 0) -> np.ndarray:
    depths = np.asarray(depths, dtype=float)
    hits = first_hit_depths(graph, depths.max(), restarts, seed, params, instance_key)
    return pmis_from_first_hits(hits, depths)


def fit_first_hit_rate(first_hits, window=(0.5, 0.99), points: int = 10) -> FitResult:
    """Exponential rate of P_MIS(depth) over depths between two first-hit quantiles.

    The window skips the initial descent into the k-1 block, where the
    curve is not yet a single exponential.
    """
    h = np.asarray(first_hits, dtype=float)
    if np.mean(np.isfinite(h)) < window[1]:
        raise ValueError("too few runs reached an MIS for the fit window")
    lo, hi = np.quantile(h, window)
    depths = np.linspace(lo, hi, points)
    return fit_pmis_depth(depths, pmis_from_first_hits(h, depths))


def depth_to_threshold(first_hit_depths, threshold: float = 0.6) -> float:
    """Smallest depth at which the fraction of runs that found an MIS reaches `threshold`."""
    d = np.sort(np.where(np.asarray(first_hit_depths) >= 0, first_hit_depths, np.inf))
    need = math.ceil(threshold * len(d))
    return float(d[need - 1]) if need >= 1 else 0.0


# --------------------------------------------------------------------------- fits


@dataclass
class FitResult:
    model: str
    params: dict
    stderr: dict
    residual_norm: float
    n_points: int
    excluded: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {"model": self.model, "params": self.params, "stderr": self.stderr,
             "n_points": self.n_points, "excluded": list(self.excluded),
             "residual_norm": self.residual_norm}
        if self.extra:
            d["extra"] = self.extra
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        d = json.loads(text)
        return cls(d["model"], d["params"], d["stderr"], d.get("residual_norm", float("nan")),
                   d["n_points"], d.get("excluded", []), d.get("extra", {}))


def _ols(x: np.ndarray, y: np.ndarray, intercept: bool = True):
    """Least squares y = a + b x (or y = b x); returns coefficients, standard errors, residual norm."""
    cols = [np.ones_like(x), x] if intercept else [x]
    a = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = len(y) - len(coef)
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(a.T @ a)
    return coef, np.sqrt(np.diag(cov)), float(np.linalg.norm(resid))


def _ids(ids, n):
    return list(range(n)) if ids is None else list(ids)


def fit_pmis_depth(depths, pmis, ids=None) -> FitResult:
    """Fit P_MIS = 1 - exp(-rate * depth) through the origin in -log(1 - P)."""
    depths = np.asarray(depths, dtype=float)
    pmis = np.asarray(pmis, dtype=float)
    ids = _ids(ids, len(depths))
    if len(depths) < 3:
        raise ValueError("need at least 3 points")
    if ((pmis < 0) | (pmis > 1)).any():
        raise ValueError("P_MIS outside [0, 1]")
    done = pmis >= 1
    if done.any():
        warnings.warn(f"excluding {int(done.sum())} point(s) with P_MIS = 1")
    keep = ~done
    if keep.sum() < 1:
        raise ValueError("no admissible points")
    y = -np.log1p(-pmis[keep])
    coef, se, rn = _ols(depths[keep], y, intercept=False)
    return FitResult("pmis_depth", {"rate": float(coef[0])}, {"rate": float(se[0])}, rn,
                     int(keep.sum()), [ids[i] for i in np.flatnonzero(done)])


def fit_hp_scaling(hp, values, protocol: str = "threshold", threshold: float = 0.6,
                   min_decades: float = 1.0, ids=None) -> FitResult:
    """Fit the hardness-parameter power law.

    protocol "threshold": values are depths needed to reach P_MIS = threshold,
    modelled as depth = -log(1 - threshold) * HP^b / a.
    protocol "depth": values are P_MIS at one fixed depth, modelled as
    -log(1 - P_MIS) = C * HP^-b.
    """
    hp = np.asarray(hp, dtype=float)
    values = np.asarray(values, dtype=float)
    ids = _ids(ids, len(hp))
    if protocol == "threshold":
        bad = ~np.isfinite(values) | (values <= 0)
        keep = ~bad
        x, y = np.log(hp[keep]), np.log(values[keep])
    elif protocol == "depth":
        bad = (values <= 0) | (values >= 1)
        keep = ~bad
        x, y = np.log(hp[keep]), np.log(-np.log1p(-values[keep]))
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    if keep.sum() < 5:
        raise ValueError("need at least 5 admissible instances")
    span = np.log10(hp[keep].max() / hp[keep].min())
    if span < min_decades:
        raise ValueError(f"degenerate spread: HP spans {span:.2f} decades, need {min_decades}")
    coef, se, rn = _ols(x, y)
    if protocol == "threshold":
        b = float(coef[1])
        a = math.exp(math.log(-math.log1p(-threshold)) - coef[0])
        params = {"a": a, "b": b}
        stderr = {"a": a * float(se[0]), "b": float(se[1])}
    else:
        c = math.exp(coef[0])
        params = {"C": c, "b": -float(coef[1])}
        stderr = {"C": c * float(se[0]), "b": float(se[1])}
    return FitResult(f"hp_scaling_{protocol}", params, stderr, rn, int(keep.sum()),
                     [ids[i] for i in np.flatnonzero(bad)], {"decades": float(span)})


def landau_zener_mask(delta_min, total_time: float) -> np.ndarray:
    """True where the sweep obeys the speed limit delta_min > 1/T."""
    return np.asarray(delta_min, dtype=float) > 1.0 / total_time


def fit_landau_zener(delta_min, pmis, total_time: float, ids=None) -> FitResult:
    """Fit P_MIS = 1 - exp(-A delta_min^eta) over instances with delta_min > 1/T."""
    d = np.asarray(delta_min, dtype=float)
    p = np.asarray(pmis, dtype=float)
    ids = _ids(ids, len(d))
    keep = landau_zener_mask(d, total_time) & (p > 0) & (p < 1)
    if keep.sum() < 4:
        raise ValueError("fewer than 4 admissible points")
    coef, se, rn = _ols(np.log(d[keep]), np.log(-np.log1p(-p[keep])))
    a = math.exp(coef[0])
    return FitResult("landau_zener", {"A": a, "eta": float(coef[1])},
                     {"A": a * float(se[0]), "eta": float(se[1])}, rn, int(keep.sum()),
                     [ids[i] for i in np.flatnonzero(~keep)])


def effective_exponent(times, errors) -> float:
    """Slope alpha of a single power law errors ~ times^-alpha in log-log space."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = e > 0
    if ok.sum() < 2:
        raise ValueError("need two positive points")
    coef, _, _ = _ols(np.log(t[ok]), np.log(e[ok]))
    return -float(coef[1])


def kz_model(times, rho, mu, amplitude, kappa):
    t = np.asarray(times, dtype=float)
    return amplitude * t ** (-mu) * (1.0 - kappa * np.asarray(rho) * t ** (2 * mu))


def fit_kz_model(series, mu0: float = 0.5) -> FitResult:
    """Joint fit of 1 - R = A T^-mu [1 - kappa rho T^(2 mu)] with shared parameters.

    `series` is a list of (instance id, rho, times, one_minus_r). A first
    pass fits absolute errors (scaled per instance), which lets the bracket
    go negative; points where it does lie outside the model's range and are
    dropped, keeping the early times. The final fit is in log space.
    """
    ids, t_all, r_all, y_all, s_all = [], [], [], [], []
    for name, rho, times, err in series:
        times = np.asarray(times, dtype=float)
        err = np.asarray(err, dtype=float)
        ids += [(name, float(t)) for t in times]
        t_all.append(times)
        r_all.append(np.full(len(times), float(rho)))
        y_all.append(err)
        s_all.append(np.full(len(times), max(float(np.abs(err).max()), 1e-300)))
    t = np.concatenate(t_all)
    rho = np.concatenate(r_all)
    y = np.concatenate(y_all)
    scale = np.concatenate(s_all)
    keep = y > 0
    if keep.sum() < 4:
        raise ValueError("need at least 4 positive points")
    opts = dict(method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=50000)
    x = np.array([mu0, float(np.exp(np.mean(np.log(y[keep] * t[keep] ** mu0)))), 0.0])

    def bracket(p):
        return 1.0 - p[2] * rho * t ** (2 * p[0])

    for _ in range(10):
        k = keep.copy()
        x = least_squares(lambda p: (kz_model(t[k], rho[k], *p) - y[k]) / scale[k], x, **opts).x
        bad = keep & (bracket(x) <= 0)
        if not bad.any():
            break
        warnings.warn(f"model bracket negative at {int(bad.sum())} point(s); restricting to early times")
        keep &= ~bad
        if keep.sum() < 4:
            raise ValueError("too few points inside the model's valid range")
    k = keep.copy()

    def log_resid(p):
        return np.log(np.maximum(kz_model(t[k], rho[k], *p), 1e-300)) - np.log(y[k])

    fit = least_squares(log_resid, x, **opts)
    dof = int(k.sum()) - 3
    s2 = float(fit.fun @ fit.fun) / dof if dof > 0 else 0.0
    try:
        se = np.sqrt(np.abs(np.diag(s2 * np.linalg.inv(fit.jac.T @ fit.jac))))
    except np.linalg.LinAlgError:
        se = np.full(3, np.inf)
    names = ("mu", "amplitude", "kappa")
    alphas = {str(name): effective_exponent(ts, es) for (name, _, ts, es) in series}
    return FitResult(
        "kz", {n: float(v) for n, v in zip(names, fit.x)}, {n: float(v) for n, v in zip(names, se)},
        float(np.linalg.norm(fit.fun)), int(k.sum()),
        [list(ids[i]) for i in np.flatnonzero(~k)], {"effective_exponents": alphas},
    )


def coherent_gap_estimate(graph_or_metrics, omega_crit: float = 1.0) -> float:
    """Gap estimate Omega(lambda_crit) * |MIS| * sqrt(D_MIS / D_MIS-1) from the symmetric superposition."""
    m = graph_or_metrics if isinstance(graph_or_metrics, HardnessMetrics) else hardness_metrics(graph_or_metrics)
    return omega_crit * m.mis_size * math.sqrt(m.d_mis / m.d_mis_minus_1)
