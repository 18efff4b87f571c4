"""State-vector simulation of driven Rydberg arrays in a blockade-restricted basis.

Energies are angular frequencies in rad/us and times are in us. Pulse programs
carry frequencies as f = omega / 2pi in MHz, like `PhysicalParams`.

Basis states are integer codes with vertex i stored at bit ``n - 1 - i``, so
numeric order of codes is lexicographic order of the bit vectors.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from numba import njit
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .counting import independence_polynomial
from .graph import PhysicalParams, UnitDiskGraph

BASIS_LIMIT = 2**24
STEP_BOUND = 0.05  # dt * max energy scale must stay below this
DEFAULT_STEP = 0.045
NORM_TOL = 1e-8
_TAYLOR_TOL = 1e-16
_TAYLOR_MAX = 80
_TWO_PI = 2 * math.pi


class BasisMode(str, Enum):
    HARD_BLOCKADE = "hard_blockade"
    TRUNCATED = "truncated"
    FULL_TAILS = "full_tails"


class BasisTooLarge(ValueError):
    pass


class IntegratorFailure(RuntimeError):
    pass


# --- basis -----------------------------------------------------------------


def _sq_dist(graph: UnitDiskGraph) -> np.ndarray:
    p = graph.positions
    d = p[:, None, :] - p[None, :, :]
    return (d * d).sum(axis=2)


def _blocked_radius(mode: BasisMode) -> float:
    return 1.5 if mode is BasisMode.HARD_BLOCKADE else 1.0


@dataclass(frozen=True)
class Basis:
    n: int
    mode: BasisMode
    codes: np.ndarray  # sorted int64

    @property
    def size(self) -> int:
        return len(self.codes)

    def __len__(self) -> int:
        return len(self.codes)

    def index(self, config) -> int:
        code = config_code(config)
        i = int(np.searchsorted(self.codes, code))
        if i == len(self.codes) or self.codes[i] != code:
            raise KeyError("configuration outside the basis")
        return i

    def configs(self, idx=None) -> np.ndarray:
        c = self.codes if idx is None else self.codes[np.asarray(idx)]
        shifts = np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return ((c[:, None] >> shifts[None, :]) & 1).astype(np.uint8)

    def excitations(self) -> np.ndarray:
        out = np.zeros(len(self.codes), dtype=np.int64)
        c = self.codes.copy()
        while np.any(c):
            out += c & 1
            c >>= 1
        return out


def config_code(config) -> int:
    code = 0
    for b in config:
        code = (code << 1) | (1 if b else 0)
    return code


def basis_size_estimate(graph: UnitDiskGraph, mode: BasisMode | str = BasisMode.HARD_BLOCKADE) -> int:
    """Number of admissible configurations, counted without enumerating them."""
    mode = BasisMode(mode)
    conflict = UnitDiskGraph(graph.n_rows, graph.n_cols, graph.vertices, radius_factor=_blocked_radius(mode))
    return independence_polynomial(conflict).total()


def build_basis(graph: UnitDiskGraph, mode: BasisMode | str = BasisMode.HARD_BLOCKADE, limit: int = BASIS_LIMIT) -> Basis:
    mode = BasisMode(mode)
    n = graph.n
    if n > 62:
        raise BasisTooLarge(f"basis too large: {n} vertices exceed the 62-bit code width")
    size = basis_size_estimate(graph, mode)
    if size > limit:
        raise BasisTooLarge(f"basis too large: {size} states required, limit {limit}")
    d2 = _sq_dist(graph)
    blocked = d2 <= (2 if mode is BasisMode.HARD_BLOCKADE else 1)
    codes = np.zeros(1, dtype=np.int64)
    for v in range(n):
        mask = 0
        for j in range(v):
            if blocked[v, j]:
                mask |= 1 << (v - 1 - j)
        ok = (codes & mask) == 0
        codes = np.concatenate([codes << 1, (codes[ok] << 1) | 1])
    codes.sort()
    assert len(codes) == size
    codes.setflags(write=False)
    return Basis(n, mode, codes)


# --- Hamiltonian -------------------------------------------------------------


@dataclass(frozen=True)
class RydbergSystem:
    """Operator structure of H = Omega/2 sum(e^{i phi}|0><1| + h.c.) - Delta sum n + sum V n n.

    `up[p]` and `down[p]` index basis states that differ by one excitation;
    `vdiag` is the interaction energy of every basis state in rad/us.
    """

    graph: UnitDiskGraph
    physical: PhysicalParams
    basis: Basis
    up: np.ndarray
    down: np.ndarray
    nexc: np.ndarray
    vdiag: np.ndarray
    v_max: float

    @property
    def size(self) -> int:
        return self.basis.size

    def diagonal(self, delta: float) -> np.ndarray:
        return self.vdiag - delta * self.nexc

    def apply(self, psi: np.ndarray, omega: float, phi: float, delta: float) -> np.ndarray:
        out = np.empty(self.size, dtype=np.complex128)
        _apply(np.ascontiguousarray(psi, dtype=np.complex128), out, self.up, self.down,
               self.diagonal(delta), 0.5 * omega * complex(math.cos(phi), math.sin(phi)))
        return out

    def sparse(self, omega: float, phi: float = 0.0, delta: float = 0.0):
        """CSR matrix of the Hamiltonian (real when phi is a multiple of pi)."""
        a = 0.5 * omega * complex(math.cos(phi), math.sin(phi))
        real = abs(a.imag) == 0.0
        a_val = a.real if real else a
        ac_val = a.real if real else a.conjugate()
        n_p = len(self.up)
        rows = np.concatenate([self.down, self.up, np.arange(self.size)])
        cols = np.concatenate([self.up, self.down, np.arange(self.size)])
        dtype = np.float64 if real else np.complex128
        data = np.concatenate([
            np.full(n_p, a_val, dtype=dtype), np.full(n_p, ac_val, dtype=dtype),
            self.diagonal(delta).astype(dtype),
        ])
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.size, self.size))

    def dense(self, omega: float, phi: float = 0.0, delta: float = 0.0) -> np.ndarray:
        return self.sparse(omega, phi, delta).toarray()

    def energy(self, psi: np.ndarray, omega: float, phi: float, delta: float) -> float:
        return float(np.vdot(psi, self.apply(psi, omega, phi, delta)).real)


def build_system(
    graph: UnitDiskGraph,
    physical: PhysicalParams = PhysicalParams(),
    mode: BasisMode | str = BasisMode.HARD_BLOCKADE,
    limit: int = BASIS_LIMIT,
) -> RydbergSystem:
    mode = BasisMode(mode)
    basis = build_basis(graph, mode, limit)
    n, codes = graph.n, basis.codes
    up_l, down_l = [], []
    for i in range(n):
        bit = np.int64(1) << (n - 1 - i)
        u = np.flatnonzero(codes & bit)
        up_l.append(u)
        down_l.append(np.searchsorted(codes, codes[u] ^ bit))
    up = np.concatenate(up_l) if up_l else np.zeros(0, np.int64)
    down = np.concatenate(down_l) if down_l else np.zeros(0, np.int64)

    vdiag = np.zeros(len(codes))
    v_max = 0.0
    if mode is not BasisMode.HARD_BLOCKADE:
        d2 = _sq_dist(graph)
        cut2 = 2 if mode is BasisMode.TRUNCATED else physical.interaction_cutoff**2 + 1e-9
        for i in range(n):
            bi = codes >> (n - 1 - i) & 1
            for j in range(i + 1, n):
                if 1 < d2[i, j] <= cut2:
                    v = _TWO_PI * physical.interaction_mhz(math.sqrt(d2[i, j]))
                    v_max = max(v_max, v)
                    vdiag += v * (bi & (codes >> (n - 1 - j) & 1))
    nexc = basis.excitations().astype(np.float64)
    for a in (up, down, nexc, vdiag):
        a.setflags(write=False)
    return RydbergSystem(graph, physical, basis, up.astype(np.int64), down.astype(np.int64), nexc, vdiag, v_max)


@njit(cache=True)
def _apply(psi, out, up, down, diag, a):
    for s in range(psi.shape[0]):
        out[s] = diag[s] * psi[s]
    ac = a.conjugate()
    for p in range(up.shape[0]):
        u = up[p]
        d = down[p]
        out[d] += a * psi[u]
        out[u] += ac * psi[d]


@njit(cache=True)
def _evolve(psi, up, down, nexc, vdiag, omegas, phis, deltas, dts, norm_tol):
    n = psi.shape[0]
    term = np.empty(n, dtype=np.complex128)
    nxt = np.empty(n, dtype=np.complex128)
    diag = np.empty(n, dtype=np.float64)
    for k in range(dts.shape[0]):
        for s in range(n):
            diag[s] = vdiag[s] - deltas[k] * nexc[s]
        a = 0.5 * omegas[k] * (math.cos(phis[k]) + 1j * math.sin(phis[k]))
        term[:] = psi
        acc = psi.copy()
        converged = False
        for m in range(1, _TAYLOR_MAX + 1):
            _apply(term, nxt, up, down, diag, a)
            f = -1j * dts[k] / m
            tn = 0.0
            for s in range(n):
                term[s] = f * nxt[s]
                acc[s] += term[s]
                tn += term[s].real ** 2 + term[s].imag ** 2
            if tn < _TAYLOR_TOL**2:
                converged = True
                break
        nrm = 0.0
        for s in range(n):
            nrm += acc[s].real ** 2 + acc[s].imag ** 2
        if not converged or abs(math.sqrt(nrm) - 1.0) > norm_tol:
            return psi, k
        psi = acc
    return psi, -1


# --- pulse programs ------------------------------------------------------------


@dataclass(frozen=True)
class PulseProgram:
    """A QAOA layer list or a filtered piecewise-linear detuning sweep.

    qaoa: `layers` of (duration us, phase rad), resonant drive at the physical Rabi
    frequency. vqaa: Omega ramps on over `tau_omega` at `delta0_mhz`, the detuning
    follows `segments` of (duration us, end detuning MHz), then Omega ramps off at
    the final detuning. The whole detuning profile is low-pass filtered with time
    constant `tau_delta` (0 disables the filter).
    """

    variant: str
    layers: tuple = ()
    omega_mhz: float = 4.0
    delta0_mhz: float = 0.0
    segments: tuple = ()
    tau_omega: float = 0.0
    tau_delta: float = 0.0

    def __post_init__(self):
        if self.variant not in ("qaoa", "vqaa"):
            raise ValueError(f"unknown pulse variant {self.variant!r}")
        object.__setattr__(self, "layers", tuple((float(t), float(p)) for t, p in self.layers))
        object.__setattr__(self, "segments", tuple((float(t), float(d)) for t, d in self.segments))
        durations = [t for t, _ in self.layers] + [t for t, _ in self.segments] + [self.tau_omega, self.tau_delta]
        if any(not (t >= 0) for t in durations):
            raise ValueError("pulse durations must be non-negative")
        if self.omega_mhz < 0:
            raise ValueError("omega_mhz must be non-negative")

    @classmethod
    def qaoa(cls, layers) -> "PulseProgram":
        return cls("qaoa", layers=tuple(layers))

    @classmethod
    def vqaa(cls, delta0_mhz, segments, tau_omega=0.3, tau_delta=0.05, omega_mhz=4.0) -> "PulseProgram":
        return cls("vqaa", omega_mhz=omega_mhz, delta0_mhz=delta0_mhz, segments=tuple(segments),
                   tau_omega=tau_omega, tau_delta=tau_delta)

    @classmethod
    def linear(cls, duration, delta0_mhz=-5.0, deltaf_mhz=11.0, **kw) -> "PulseProgram":
        return cls.vqaa(delta0_mhz, [(duration, deltaf_mhz)], **kw)

    @classmethod
    def from_samples(cls, times, deltas_mhz, **kw) -> "PulseProgram":
        """Sweep through sampled (t, Delta) points, linear in between."""
        t = np.asarray(times, dtype=float)
        d = np.asarray(deltas_mhz, dtype=float)
        if len(t) < 2 or len(t) != len(d) or np.any(np.diff(t) < 0):
            raise ValueError("need at least two samples with non-decreasing times")
        return cls.vqaa(d[0], list(zip(np.diff(t), d[1:])), **kw)

    @classmethod
    def slowdown(cls, duration, delta_slow_mhz, delta0_mhz=-5.0, deltaf_mhz=11.0,
                 min_rate_ratio=0.1, width_mhz=2.0, samples=64, **kw) -> "PulseProgram":
        """Monotone sweep whose rate dips to `min_rate_ratio` of its peak at `delta_slow_mhz`.

        The rate is a Lorentzian dip of half-width `width_mhz` on a constant
        background; scanning `delta_slow_mhz` looks for the best slow-down point.
        """
        d = np.linspace(delta0_mhz, deltaf_mhz, samples)
        rate = 1 - (1 - min_rate_ratio) / (1 + ((d - delta_slow_mhz) / width_mhz) ** 2)
        # time spent per detuning step is inverse to the local rate
        dt = np.diff(d) / (0.5 * (rate[1:] + rate[:-1]))
        t = np.concatenate([[0.0], np.cumsum(dt)])
        return cls.from_samples(t * duration / t[-1], d, **kw)

    @property
    def sweep_time(self) -> float:
        src = self.layers if self.variant == "qaoa" else self.segments
        return float(sum(t for t, _ in src))

    @property
    def total_time(self) -> float:
        return self.sweep_time + (2 * self.tau_omega if self.variant == "vqaa" else 0.0)

    @property
    def delta_final_mhz(self) -> float:
        return self.segments[-1][1] if self.segments else self.delta0_mhz

    def effective_depth(self, physical: PhysicalParams = PhysicalParams()) -> float:
        rabi = physical.rabi_frequency_mhz if self.variant == "qaoa" else self.omega_mhz
        if rabi == 0:
            return 0.0
        return self.sweep_time / (math.pi / (_TWO_PI * rabi))

    def rescaled(self, sweep_time: float) -> "PulseProgram":
        """Same shape stretched to a new sweep time; ramps and filter unchanged."""
        if self.variant != "vqaa" or self.sweep_time == 0:
            raise ValueError("only a non-empty vqaa sweep can be rescaled")
        f = sweep_time / self.sweep_time
        return PulseProgram.vqaa(self.delta0_mhz, [(t * f, d) for t, d in self.segments],
                                 self.tau_omega, self.tau_delta, self.omega_mhz)

    def as_dict(self) -> dict:
        if self.variant == "qaoa":
            return {"variant": "qaoa", "layers": [list(x) for x in self.layers]}
        return {
            "variant": "vqaa", "omega_mhz": self.omega_mhz, "delta0_mhz": self.delta0_mhz,
            "segments": [list(x) for x in self.segments],
            "tau_omega": self.tau_omega, "tau_delta": self.tau_delta,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PulseProgram":
        v = d.get("variant")
        if v == "qaoa":
            return cls.qaoa(d["layers"])
        if v == "vqaa":
            return cls.vqaa(d["delta0_mhz"], d["segments"], d.get("tau_omega", 0.0),
                            d.get("tau_delta", 0.0), d.get("omega_mhz", 4.0))
        raise ValueError(f"unknown pulse variant {v!r}")

    @classmethod
    def from_json(cls, text: str) -> "PulseProgram":
        return cls.from_dict(json.loads(text))


def _input_knots(pulse: PulseProgram) -> tuple[np.ndarray, np.ndarray]:
    """Knot times and detunings (MHz) of the unfiltered piecewise-linear profile."""
    t = [0.0, pulse.tau_omega]
    d = [pulse.delta0_mhz, pulse.delta0_mhz]
    for tau, delta in pulse.segments:
        t.append(t[-1] + tau)
        d.append(delta)
    t.append(t[-1] + pulse.tau_omega)
    d.append(d[-1])
    return np.array(t), np.array(d)


def filtered_detuning(pulse: PulseProgram, times) -> np.ndarray:
    """Detuning in MHz after the single-pole low-pass filter, y' = (x - y) / tau.

    The input is piecewise linear, so the filter is solved exactly on each piece:
    for x = x0 + b s the response is y = x - b tau + (y0 - x0 + b tau) e^{-s/tau}.
    The filter starts settled at the initial detuning.
    """
    kt, kd = _input_knots(pulse)
    times = np.asarray(times, dtype=float)
    tau = pulse.tau_delta
    out = np.empty_like(times)
    piece = np.clip(np.searchsorted(kt, times, side="right") - 1, 0, len(kt) - 2)
    y = np.empty(len(kt))
    y[0] = kd[0]
    slopes = np.zeros(len(kt) - 1)
    for i in range(len(kt) - 1):
        h = kt[i + 1] - kt[i]
        slopes[i] = (kd[i + 1] - kd[i]) / h if h > 0 else 0.0
        if tau == 0:
            y[i + 1] = kd[i + 1]
        else:
            b = slopes[i]
            y[i + 1] = kd[i + 1] - b * tau + (y[i] - kd[i] + b * tau) * math.exp(-h / tau)
    s = times - kt[piece]
    x = kd[piece] + slopes[piece] * s
    if tau == 0:
        return x
    b = slopes[piece]
    out[:] = x - b * tau + (y[piece] - kd[piece] + b * tau) * np.exp(-s / tau)
    return out


def _energy_scale(system: RydbergSystem, omega_max: float, delta_max: float) -> float:
    return max(omega_max, delta_max, system.v_max, 1e-12)


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant control samples: one (Omega, phi, Delta, dt) per step, rad/us and us."""

    omega: np.ndarray
    phi: np.ndarray
    delta: np.ndarray
    dt: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.dt.sum())


def _steps(length: float, dt: float) -> np.ndarray:
    """Midpoint offsets and widths dividing [0, length] into equal steps no wider than dt."""
    if length <= 0:
        return np.zeros(0), np.zeros(0)
    k = max(1, math.ceil(length / dt - 1e-12))
    w = length / k
    return (np.arange(k) + 0.5) * w, np.full(k, w)


def pulse_schedule(pulse: PulseProgram, physical: PhysicalParams, dt: float) -> Schedule:
    if not dt > 0:
        raise ValueError("dt must be positive")
    om, ph, de, ws = [], [], [], []
    if pulse.variant == "qaoa":
        for tau, phi in pulse.layers:
            mid, w = _steps(tau, dt)
            om.append(np.full(len(w), physical.omega))
            ph.append(np.full(len(w), phi))
            de.append(np.zeros(len(w)))
            ws.append(w)
    else:
        omega = _TWO_PI * pulse.omega_mhz
        kt, _ = _input_knots(pulse)
        ramp_on, ramp_off = kt[1], kt[-2]
        for a, b in zip(kt[:-1], kt[1:]):
            mid, w = _steps(b - a, dt)
            t = a + mid
            if b <= ramp_on:
                o = omega * t / pulse.tau_omega
            elif a >= ramp_off and b > a:
                o = omega * (kt[-1] - t) / pulse.tau_omega
            else:
                o = np.full(len(t), omega)
            om.append(o)
            ph.append(np.zeros(len(t)))
            de.append(_TWO_PI * filtered_detuning(pulse, t))
            ws.append(w)
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0)
    return Schedule(cat(om), cat(ph), cat(de), cat(ws))


# --- states and evolution ------------------------------------------------------


@dataclass
class QuantumState:
    system: RydbergSystem
    amplitudes: np.ndarray

    @classmethod
    def ground(cls, system: RydbergSystem) -> "QuantumState":
        psi = np.zeros(system.size, dtype=np.complex128)
        psi[0] = 1.0  # code 0 sorts first
        return cls(system, psi)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()

    def size_distribution(self) -> np.ndarray:
        """Probability of each excitation number 0..N."""
        return np.bincount(self.system.nexc.astype(np.int64), weights=self.probabilities(),
                           minlength=self.system.graph.n + 1)

    def independent_mask(self) -> np.ndarray:
        """Basis states that are independent sets of the instance graph."""
        if self.system.basis.mode is BasisMode.HARD_BLOCKADE and self.system.graph.radius_factor < 2:
            return np.ones(self.system.size, dtype=bool)
        g = self.system.graph
        codes = self.system.basis.codes
        ok = np.ones(len(codes), dtype=bool)
        for i, j in g.edges:
            ok &= ((codes >> (g.n - 1 - i)) & (codes >> (g.n - 1 - j)) & 1) == 0
        return ok

    def mis_probability(self, mis_size: int) -> float:
        """Exact weight on maximum independent sets, without post-processing."""
        mask = self.independent_mask() & (self.system.nexc == mis_size)
        return float(self.probabilities()[mask].sum())

    def sample(self, shots: int, seed=None) -> np.ndarray:
        return sample_measurements(self, shots, seed)


def evolve(state: QuantumState, pulse: PulseProgram, dt: float | None = None) -> QuantumState:
    """Integrate the Schrodinger equation through `pulse` with midpoint-sampled controls.

    Each step applies exp(-i H dt) by a Taylor series summed to machine
    precision, so the only discretisation error comes from sampling the
    controls at step midpoints.
    """
    system = state.system
    if abs(state.norm - 1) > NORM_TOL:
        raise ValueError("input state is not normalized")
    if pulse.variant == "vqaa":
        om = _TWO_PI * pulse.omega_mhz
        dmax = _TWO_PI * float(np.abs(_input_knots(pulse)[1]).max())
    else:
        om, dmax = system.physical.omega, 0.0
    scale = _energy_scale(system, om, dmax)
    if dt is None:
        dt = DEFAULT_STEP / scale
    elif dt * scale >= STEP_BOUND:
        raise ValueError(f"dt={dt} does not resolve the energy scale {scale:.4g} rad/us")
    sched = pulse_schedule(pulse, system.physical, dt)
    psi, bad = _evolve(
        np.ascontiguousarray(state.amplitudes, dtype=np.complex128), system.up, system.down,
        system.nexc, system.vdiag, sched.omega, sched.phi, sched.delta, sched.dt, NORM_TOL,
    )
    if bad >= 0:
        raise IntegratorFailure(f"norm drift above {NORM_TOL:g} at step {bad}")
    return QuantumState(system, psi)


def _system(graph_or_system, physical, mode) -> RydbergSystem:
    if isinstance(graph_or_system, RydbergSystem):
        return graph_or_system
    return build_system(graph_or_system, physical, mode)


def run_qaoa(graph_or_system, physical: PhysicalParams = PhysicalParams(), layers=(),
             mode: BasisMode | str = BasisMode.HARD_BLOCKADE, dt: float | None = None) -> QuantumState:
    """Resonant pulses of duration tau_i at laser phase phi_i, starting from all atoms in |0>."""
    system = _system(graph_or_system, physical, mode)
    pulse = layers if isinstance(layers, PulseProgram) else PulseProgram.qaoa(layers)
    return evolve(QuantumState.ground(system), pulse, dt)


def run_vqaa(graph_or_system, physical: PhysicalParams = PhysicalParams(), pulse: PulseProgram | None = None,
             mode: BasisMode | str = BasisMode.HARD_BLOCKADE, dt: float | None = None) -> QuantumState:
    if pulse is None or pulse.variant != "vqaa":
        raise ValueError("run_vqaa needs a vqaa pulse program")
    system = _system(graph_or_system, physical, mode)
    return evolve(QuantumState.ground(system), pulse, dt)


def sample_measurements(state: QuantumState, shots: int, seed=None) -> np.ndarray:
    """Projective measurements in the computational basis: shots x N array of 0/1."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.choice(state.system.size, size=int(shots), p=state.probabilities())
    return state.system.basis.configs(idx)


# --- minimum gap ----------------------------------------------------------------


DEFAULT_GAP_GRID = np.linspace(-1.0, 4.0, 101)
_DENSE_GAP_LIMIT = 64


@dataclass(frozen=True)
class GapScanResult:
    ratios: np.ndarray  # Delta / Omega
    e1: np.ndarray  # rad/us
    e2: np.ndarray
    delta_min_mhz: float
    argmin_ratio: float

    @property
    def gaps(self) -> np.ndarray:
        return self.e2 - self.e1

    @property
    def at_edge(self) -> bool:
        """Minimum on the last grid point, typical of a degenerate MIS manifold splitting."""
        return bool(np.isclose(self.argmin_ratio, self.ratios.max()) or np.isclose(self.argmin_ratio, self.ratios.min()))

    def as_dict(self) -> dict:
        return {
            "delta_min_mhz": self.delta_min_mhz, "argmin_ratio": self.argmin_ratio, "at_edge": self.at_edge,
            "ratios": self.ratios.tolist(), "e1": self.e1.tolist(), "e2": self.e2.tolist(),
        }


def lowest_two(system: RydbergSystem, omega: float, delta: float) -> tuple[float, float]:
    h = system.sparse(omega, 0.0, delta)
    if system.size < 2:
        raise ValueError("basis has a single state, no gap")
    if system.size <= _DENSE_GAP_LIMIT:
        w = np.linalg.eigvalsh(h.toarray())
        return float(w[0]), float(w[1])
    try:
        # fixed start vector: ARPACK's own depends on earlier calls in the process
        v0 = np.random.default_rng(0).standard_normal(system.size)
        w, v = eigsh(h, k=2, which="SA", tol=1e-12, maxiter=20 * system.size, v0=v0)
    except ArpackNoConvergence as e:
        res = np.inf
        if len(e.eigenvalues):
            r = h @ e.eigenvectors - e.eigenvectors * e.eigenvalues
            res = float(np.abs(r).max())
        raise RuntimeError(f"eigensolver did not converge, residual {res:.3g}") from e
    w.sort()
    return float(w[0]), float(w[1])


def _golden_min(f, a: float, b: float, tol: float = 1e-6) -> tuple[float, float]:
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def min_gap_scan(graph_or_system, physical: PhysicalParams = PhysicalParams(),
                 mode: BasisMode | str = BasisMode.HARD_BLOCKADE, grid=None,
                 refine: bool = True, workers: int = 1) -> GapScanResult:
    """Gap between the two lowest levels along Delta/Omega at the physical Rabi frequency."""
    system = _system(graph_or_system, physical, mode)
    ratios = np.asarray(DEFAULT_GAP_GRID if grid is None else grid, dtype=float)
    if ratios.size == 0:
        raise ValueError("empty gap grid")
    omega = system.physical.omega
    run = lambda r: lowest_two(system, omega, r * omega)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            pairs = list(ex.map(run, ratios))
    else:
        pairs = [run(r) for r in ratios]
    e1 = np.array([p[0] for p in pairs])
    e2 = np.array([p[1] for p in pairs])
    gaps = e2 - e1
    i = int(np.argmin(gaps))
    best_r, best_g = float(ratios[i]), float(gaps[i])
    if refine and len(ratios) > 2:
        lo = ratios[max(i - 1, 0)]
        hi = ratios[min(i + 1, len(ratios) - 1)]
        r, g = _golden_min(lambda x: (lambda p: p[1] - p[0])(run(x)), float(lo), float(hi))
        if g < best_g:
            best_r, best_g = r, g
    return GapScanResult(ratios, e1, e2, max(best_g, 0.0) / _TWO_PI, best_r)
