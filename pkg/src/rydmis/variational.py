"""Closed-loop optimisation of pulse programs against sampled measurement outcomes."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .counting import OptimaSet, enumerate_optima, mis_size
from .graph import PhysicalParams, UnitDiskGraph
from .postprocess import compute_metrics
from .quantum import (
    BasisMode, PulseProgram, QuantumState, RydbergSystem, build_system, evolve, sample_measurements,
)

QAOA_LAYER_MAX = 0.25  # us
TAU_OMEGA_MAX = 0.312  # us
DELTA_UNIT = 4.0  # MHz per internal unit, keeps detunings on the scale of log-durations


@dataclass(frozen=True)
class ObjectiveSpec:
    metric: str = "one_minus_R50"
    shots: int = 50

    def __post_init__(self):
        if self.metric not in ("one_minus_R", "one_minus_R50"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.shots < 1:
            raise ValueError("shots must be at least 1")


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam with optional AdaBound clipping. Defaults are standard values, not tuned."""

    algorithm: str = "adam_spsa"
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    c: float = 0.1
    adabound: bool = True
    final_lr: float = 0.05
    gamma: float = 1e-3
    max_iterations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("adam_spsa", "adam_fd"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        for name in ("learning_rate", "beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


# --- parametrisations ---------------------------------------------------------


@dataclass(frozen=True)
class QaoaParametrization:
    """theta = (log tau_1, phi_1, ..., log tau_p, phi_p); layers are clamped to 250 ns."""

    depth: int
    optimize_phases: bool = True
    fixed_phases: tuple = ()
    layer_max: float = QAOA_LAYER_MAX

    def size(self) -> int:
        return self.depth * (2 if self.optimize_phases else 1)

    def encode(self, program: PulseProgram) -> np.ndarray:
        if program.variant != "qaoa" or len(program.layers) != self.depth:
            raise ValueError(f"expected a {self.depth}-layer qaoa program")
        out = []
        for tau, phi in program.layers:
            out.append(math.log(max(tau, 1e-6)))
            if self.optimize_phases:
                out.append(phi)
        return self.project(np.array(out))

    def decode(self, theta) -> PulseProgram:
        theta = np.asarray(theta, dtype=float)
        step = 2 if self.optimize_phases else 1
        taus = np.exp(theta[::step])
        phis = theta[1::2] if self.optimize_phases else np.array(self.fixed_phases or [0.0] * self.depth)
        return PulseProgram.qaoa(zip(taus, phis))

    def project(self, theta) -> np.ndarray:
        theta = np.array(theta, dtype=float)
        step = 2 if self.optimize_phases else 1
        theta[::step] = np.minimum(theta[::step], math.log(self.layer_max))
        return theta


@dataclass(frozen=True)
class VqaaParametrization:
    """theta = (log tau_1..f, Delta_1..f, Delta_0, log tau_Delta, log tau_Omega).

    Detunings are in units of DELTA_UNIT MHz. With `sweep_time` set, the
    segment durations are normalised to that total, as in fixed-depth runs.
    """

    segments: int
    sweep_time: float | None = None
    omega_mhz: float = 4.0
    tau_omega_max: float = TAU_OMEGA_MAX

    def size(self) -> int:
        return 2 * self.segments + 3

    def encode(self, program: PulseProgram) -> np.ndarray:
        if program.variant != "vqaa" or len(program.segments) != self.segments:
            raise ValueError(f"expected a {self.segments}-segment vqaa program")
        taus = [math.log(max(t, 1e-6)) for t, _ in program.segments]
        deltas = [d / DELTA_UNIT for _, d in program.segments]
        tail = [program.delta0_mhz / DELTA_UNIT, math.log(max(program.tau_delta, 1e-6)),
                math.log(max(program.tau_omega, 1e-6))]
        return self.project(np.array(taus + deltas + tail))

    def decode(self, theta) -> PulseProgram:
        theta = np.asarray(theta, dtype=float)
        f = self.segments
        taus = np.exp(theta[:f])
        if self.sweep_time is not None:
            taus = taus * (self.sweep_time / taus.sum())
        deltas = theta[f:2 * f] * DELTA_UNIT
        return PulseProgram.vqaa(
            float(theta[2 * f]) * DELTA_UNIT, list(zip(taus, deltas)),
            tau_omega=float(math.exp(theta[2 * f + 2])), tau_delta=float(math.exp(theta[2 * f + 1])),
            omega_mhz=self.omega_mhz,
        )

    def project(self, theta) -> np.ndarray:
        theta = np.array(theta, dtype=float)
        i = 2 * self.segments + 2
        theta[i] = min(theta[i], math.log(self.tau_omega_max))
        return theta


def parametrization_for(program: PulseProgram, sweep_time: float | None = None):
    if program.variant == "qaoa":
        return QaoaParametrization(len(program.layers))
    return VqaaParametrization(len(program.segments), sweep_time, program.omega_mhz)


# --- objective -----------------------------------------------------------------


@dataclass
class Problem:
    """Everything an objective evaluation needs, built once per instance."""

    system: RydbergSystem
    optima: OptimaSet

    @classmethod
    def build(cls, graph: UnitDiskGraph, physical: PhysicalParams = PhysicalParams(),
              mode: BasisMode | str = BasisMode.HARD_BLOCKADE) -> "Problem":
        return cls(build_system(graph, physical, mode), enumerate_optima(graph, mis_size(graph)))

    @property
    def graph(self) -> UnitDiskGraph:
        return self.system.graph


def simulate(problem: Problem, program: PulseProgram) -> QuantumState:
    return evolve(QuantumState.ground(problem.system), program)


def evaluate_objective(program: PulseProgram, problem: Problem, spec: ObjectiveSpec = ObjectiveSpec(), seed=None) -> float:
    """Sampled 1 - R or 1 - R_0.5 after vertex reduction (no vertex addition)."""
    rng = np.random.default_rng(seed)
    shots = sample_measurements(simulate(problem, program), spec.shots, rng)
    rep = compute_metrics(shots, problem.graph, problem.optima, rng=rng)
    return 1.0 - (rep.r if spec.metric == "one_minus_R" else rep.r_05)


def exact_error(program: PulseProgram, problem: Problem, metric: str = "one_minus_R") -> float:
    """Noise-free 1 - R (or 1 - R_0.5) from the final probabilities; hard blockade only."""
    if problem.system.basis.mode is not BasisMode.HARD_BLOCKADE:
        raise ValueError("exact errors need every basis state to be independent")
    dist = simulate(problem, program).size_distribution()
    k = problem.optima.size_k
    sizes = np.arange(len(dist))
    if metric == "one_minus_R":
        return float(1 - (dist * sizes).sum() / k)
    # mean over the upper half of the size distribution
    tail, acc = 0.0, 0.0
    for s in sizes[::-1]:
        take = min(dist[s], 0.5 - acc)
        tail += take * s
        acc += take
        if acc >= 0.5:
            break
    return float(1 - tail / (0.5 * k))


# --- gradients and updates ------------------------------------------------------


def spsa_gradient(objective: Callable, params, c: float, rng, return_values: bool = False):
    """Two-point simultaneous-perturbation estimate [f(x + c d) - f(x - c d)] / 2c * d^-1."""
    if not c > 0:
        raise ValueError("c must be positive")
    x = np.asarray(params, dtype=float)
    d = rng.choice(np.array([-1.0, 1.0]), size=x.shape)
    fp, fm = objective(x + c * d), objective(x - c * d)
    g = (fp - fm) / (2 * c) / d
    return (g, fp, fm, d) if return_values else g


def fd_gradient(objective: Callable, params, c: float):
    """Central differences, two evaluations per coordinate."""
    x = np.asarray(params, dtype=float)
    g = np.zeros_like(x)
    values = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = c
        fp, fm = objective(x + e), objective(x - e)
        values += [(x + e, fp), (x - e, fm)]
        g[i] = (fp - fm) / (2 * c)
    return g, values


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(state: AdamState, gradient, params, config: OptimizerConfig = OptimizerConfig()):
    """One bias-corrected Adam update; AdaBound clips the per-parameter rate."""
    g = np.asarray(gradient, dtype=float)
    t = state.t + 1
    m = config.beta1 * state.m + (1 - config.beta1) * g
    v = config.beta2 * state.v + (1 - config.beta2) * g * g
    m_hat = m / (1 - config.beta1**t)
    v_hat = v / (1 - config.beta2**t)
    rate = config.learning_rate / (np.sqrt(v_hat) + config.eps)
    if config.adabound:
        lo = config.final_lr * (1 - 1 / (config.gamma * t + 1))
        hi = config.final_lr * (1 + 1 / (config.gamma * t))
        rate = np.clip(rate, lo, hi)
    return AdamState(m, v, t), np.asarray(params, dtype=float) - rate * m_hat


# --- closed loop -------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    params: tuple
    eval_seed: int


@dataclass
class ClosedLoopResult:
    best_program: PulseProgram
    best_value: float
    best_params: np.ndarray
    final_params: np.ndarray
    trace: list = field(default_factory=list)
    evaluations: int = 0

    def running_best(self) -> np.ndarray:
        return np.minimum.accumulate([r.objective for r in self.trace]) if self.trace else np.zeros(0)


def iteration_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([seed, iteration]).generate_state(1)[0])


def run_closed_loop(problem: Problem, initial: PulseProgram, spec: ObjectiveSpec = ObjectiveSpec(),
                    config: OptimizerConfig = OptimizerConfig(), parametrization=None) -> ClosedLoopResult:
    """Iterate gradient estimates and Adam updates; keep the best point ever evaluated.

    The trace objective of an iteration is the mean of its evaluations, which
    estimates the objective at the current parameters. Both evaluations in an
    iteration share that iteration's seed (common random numbers).
    """
    param = parametrization or parametrization_for(initial)
    theta = param.encode(initial)
    state = AdamState.zeros(len(theta))
    best_theta, best_val = theta.copy(), math.inf
    trace, n_eval = [], 0
    for it in range(config.max_iterations):
        seed = iteration_seed(config.seed, it)
        rng = np.random.default_rng(seed)
        evaluated = []

        def f(x):
            x = param.project(x)
            val = evaluate_objective(param.decode(x), problem, spec, seed)
            evaluated.append((x, val))
            return val

        if config.algorithm == "adam_spsa":
            g = spsa_gradient(f, theta, config.c, rng)
        else:
            g, _ = fd_gradient(f, theta, config.c)
        n_eval += len(evaluated)
        for x, val in evaluated:
            if val < best_val:
                best_val, best_theta = val, x.copy()
        obj = float(np.mean([v for _, v in evaluated]))
        trace.append(TraceRow(it, obj, tuple(float(a) for a in theta), seed))
        state, theta = adam_step(state, g, theta, config)
        theta = param.project(theta)
    if not trace:
        best_val = evaluate_objective(param.decode(theta), problem, spec, iteration_seed(config.seed, 0))
        n_eval = 1
    return ClosedLoopResult(param.decode(best_theta), float(best_val), best_theta, theta, trace, n_eval)


def trace_csv(result: ClosedLoopResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    k = len(result.trace[0].params) if result.trace else 0
    w.writerow(["iteration", "objective"] + [f"param_{i}" for i in range(k)] + ["eval_seed"])
    for r in result.trace:
        w.writerow([r.iteration, repr(r.objective)] + [repr(p) for p in r.params] + [r.eval_seed])
    return buf.getvalue()
