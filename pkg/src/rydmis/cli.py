"""Command-line campaigns: every run writes result files plus a manifest into --out."""

from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    build_low_energy_chain, cheeger_bounds, depth_to_threshold, entry_histogram, fit_hp_scaling, fit_kz_model,
    fit_landau_zener, fit_pmis_depth, hitting_time_estimate, landau_zener_mask, spectral_gap,
)
from .annealing import MisHamiltonianParams, TemperatureSchedule, anneal_batch
from .counting import (
    InstanceTooWide, enumerate_optima, ensemble_scan, hardness_metrics, independence_polynomial,
    metrics_from_polynomial, select_hardest,
)
from .graph import PhysicalParams, generate_instance, load_instance, save_instance, serialize
from .postprocess import compute_metrics
from .quantum import BasisMode, PulseProgram, min_gap_scan, run_qaoa, run_vqaa, sample_measurements
from .variational import (
    ObjectiveSpec, OptimizerConfig, Problem, parametrization_for, run_closed_loop, trace_csv,
)

log = logging.getLogger("rydmis")


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = 2):
        super().__init__(message)
        self.kind = kind
        self.code = code


# --- file helpers -------------------------------------------------------------------


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def resolve_instances(patterns) -> list[Path]:
    paths: list[Path] = []
    for pat in patterns or []:
        p = Path(pat)
        if p.is_dir():
            hits = sorted(h for h in p.glob("*.json") if not h.name.endswith("_manifest.json"))
        else:
            hits = sorted(Path(h) for h in glob.glob(pat) if not h.endswith("_manifest.json"))
        if not hits:
            raise CliError("missing_input", f"no instance files match {pat!r}")
        paths.extend(hits)
    seen, out = set(), []
    for p in paths:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def resolve_inputs(patterns) -> list[Path]:
    out = []
    for pat in patterns or []:
        hits = sorted(Path(h) for h in glob.glob(pat))
        if not hits:
            raise CliError("missing_input", f"no input files match {pat!r}")
        out.extend(hits)
    return out


def worker_count(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("RYDMIS_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError("bad_argument", f"RYDMIS_WORKERS must be an integer, got {env!r}") from None
    return 1


def parse_fraction(text: str) -> float:
    t = text.strip().lower()
    try:
        if t.endswith("pct"):
            return float(t[:-3]) / 100
        if t.endswith("%"):
            return float(t[:-1]) / 100
        return float(t)
    except ValueError:
        raise CliError("bad_argument", f"cannot read fraction {text!r}") from None


def parse_floats(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError("bad_argument", f"cannot read number list {text!r}") from None


class Campaign:
    """Output directory, manifest bookkeeping and the timestamped sidecar log."""

    def __init__(self, args, command: str):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.args = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "workers")}
        self.inputs: list[Path] = []
        self.outputs: list[str] = []
        self.failures: list[dict] = []
        self.completed = 0
        self._handler = logging.FileHandler(self.out / f"{command}.log", mode="w", encoding="utf-8")
        self._handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(self._handler)
        log.setLevel(logging.INFO)
        log.info("start %s %s", command, json.dumps(self.args, default=str))

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        write_atomic(path, text)
        self.outputs.append(name)
        return path

    def fail(self, instance: str, exc: BaseException) -> None:
        log.error("instance %s failed: %s", instance, exc)
        self.failures.append({"instance": instance, "error": type(exc).__name__, "message": str(exc)})

    def finish(self) -> int:
        manifest = {
            "command": self.command,
            "arguments": self.args,
            "seed": self.args.get("seed"),
            "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.inputs],
            "outputs": sorted(set(self.outputs)),
            "completed": self.completed,
            "failures": self.failures,
            "versions": {
                "rydmis": __version__, "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__,
            },
        }
        write_atomic(self.out / f"{self.command}_manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        log.info("done %s: %d completed, %d failed", self.command, self.completed, len(self.failures))
        log.removeHandler(self._handler)
        self._handler.close()
        if self.failures:
            emit_error("partial_failure", f"{len(self.failures)} instance(s) failed", self.failures)
            return 1
        return 0


def emit_error(kind: str, message: str, details=None) -> None:
    doc = {"error": kind, "message": message}
    if details:
        doc["details"] = details
    sys.stderr.write(json.dumps(doc) + "\n")


def run_jobs(fn, jobs, workers: int):
    """Map `fn` over jobs, returning (result, exception) pairs in job order."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_guarded, [fn] * len(jobs), jobs))
    return [_guarded(fn, j) for j in jobs]


def _guarded(fn, job):
    try:
        return fn(job), None
    except Exception as exc:  # reported per instance in the manifest
        return None, exc


def _collect(camp: Campaign, names, results):
    ok = []
    for name, (res, exc) in zip(names, results):
        if exc is not None:
            camp.fail(name, exc)
        else:
            camp.completed += 1
            ok.append(res)
    return ok


def instance_key(graph) -> int:
    """Stable per-instance stream key, so results do not depend on file order."""
    return int.from_bytes(hashlib.sha256(serialize(graph).encode()).digest()[:4], "big")


# --- generate ----------------------------------------------------------------------


def cmd_generate(args) -> int:
    from .counting import instance_seeds

    camp = Campaign(args, "generate")
    seeds = instance_seeds(args.seed, args.rows, args.cols, args.count)
    rows = []
    for i, s in enumerate(seeds):
        g = generate_instance(args.rows, args.cols, args.filling, s)
        name = f"instance_{args.rows}x{args.cols}_{i:04d}.json"
        save_instance(g, camp.out / name)
        camp.outputs.append(name)
        camp.completed += 1
        rows.append((name, g.n, len(g.edges), s))
        print(f"{name} N={g.n} edges={len(g.edges)}")
    camp.write("instances.csv", csv_text(["instance", "N", "edges", "seed"], rows))
    return camp.finish()


# --- count -------------------------------------------------------------------------

COUNT_HEADER = ["instance", "n_rows", "n_cols", "seed", "N", "mis_size", "d_mis", "d_mis_minus_1", "hp", "rho", "polynomial"]


def _count_one(path: Path):
    g = load_instance(path)
    poly = independence_polynomial(g)
    m = metrics_from_polynomial(poly, g.n)
    return (path.stem, g.n_rows, g.n_cols, "" if g.seed is None else g.seed, m.n, m.mis_size,
            str(m.d_mis), str(m.d_mis_minus_1), m.hp, m.rho, " ".join(str(c) for c in poly.coefficients))


def cmd_count(args) -> int:
    camp = Campaign(args, "count")
    workers = worker_count(args.workers)
    if args.instances:
        paths = resolve_instances(args.instances)
        camp.inputs = paths
        rows = _collect(camp, [p.stem for p in paths], run_jobs(_count_one, paths, workers))
        if args.select_hardest:
            frac = parse_fraction(args.select_hardest)
            groups: dict = {}
            for r in rows:
                groups.setdefault((r[1], r[2]), []).append(r)
            rows = []
            for key in sorted(groups):
                grp = sorted(groups[key], key=lambda r: (-r[8], r[0]))
                rows.extend(grp[: max(1, math.ceil(frac * len(grp)))])
    else:
        if not (args.rows and args.cols and args.per_size):
            raise CliError("bad_argument", "count needs --instances or --rows/--cols/--per-size")
        sizes = [(args.rows, args.cols)]
        scan = ensemble_scan(sizes, args.per_size, args.seed, args.filling, workers)
        camp.completed = len(scan)
        if args.select_hardest:
            scan = select_hardest(scan, parse_fraction(args.select_hardest))
        rows = []
        for r in scan:
            m = r.metrics
            name = f"scan_{r.n_rows}x{r.n_cols}_{r.seed}"
            if args.emit_instances:
                save_instance(generate_instance(r.n_rows, r.n_cols, args.filling, r.seed), camp.out / f"{name}.json")
                camp.outputs.append(f"{name}.json")
            rows.append((name, r.n_rows, r.n_cols, r.seed, m.n, m.mis_size, str(m.d_mis),
                         str(m.d_mis_minus_1), m.hp, m.rho, ""))
    camp.write("counts.csv", csv_text(COUNT_HEADER, rows))
    return camp.finish()


# --- anneal ------------------------------------------------------------------------

ANNEAL_HEADER = ["instance", "N", "mis_size", "hp", "rho", "variant", "depth", "restarts",
                 "p_mis", "p_mis_lo", "p_mis_hi", "r", "r_05", "depth_p60"]


def _anneal_one(job):
    path, a = job
    g = load_instance(path)
    m = hardness_metrics(g)
    schedule = None
    if a["temperature"] is not None:
        schedule = TemperatureSchedule.constant(a["temperature"])
    cps = sorted(set(a["checkpoints"]) | {a["depth"]})
    b = anneal_batch(g, a["variant"], schedule, a["depth"], a["restarts"], a["seed"], m.mis_size, cps,
                     MisHamiltonianParams(a["alpha"], a["epsilon"]), instance_key=instance_key(g))
    rep = compute_metrics(b.configs, g, enumerate_optima(g, m.mis_size), rng=np.random.default_rng([a["seed"], instance_key(g)]))
    hits = np.where(b.first_hit >= 0, b.first_hit / g.n, -1.0)
    p60 = depth_to_threshold(hits, 0.6)
    summary = (path.stem, g.n, m.mis_size, m.hp, m.rho, a["variant"], a["depth"], a["restarts"],
               rep.p_mis, *rep.p_mis_interval, rep.r, rep.r_05, p60 if math.isfinite(p60) else "")
    curve = [(path.stem, d, float(p)) for d, p in zip(cps, b.pmis_at_checkpoints())]
    return summary, curve


def cmd_anneal(args) -> int:
    camp = Campaign(args, "anneal")
    paths = resolve_instances(args.instances)
    camp.inputs = paths
    a = dict(variant=args.variant, depth=args.depth, restarts=args.restarts, seed=args.seed,
             checkpoints=parse_floats(args.checkpoints), temperature=args.temperature,
             alpha=args.alpha, epsilon=args.epsilon)
    jobs = [(p, a) for p in paths]
    done = _collect(camp, [p.stem for p in paths], run_jobs(_anneal_one, jobs, worker_count(args.workers)))
    camp.write("anneal.csv", csv_text(ANNEAL_HEADER, [s for s, _ in done]))
    camp.write("anneal_curve.csv", csv_text(["instance", "depth", "p_mis"], [r for _, c in done for r in c]))
    return camp.finish()


# --- simulate ----------------------------------------------------------------------

SIM_HEADER = ["instance", "N", "mis_size", "hp", "rho", "mode", "p_tilde", "total_time", "shots",
              "p_mis", "p_mis_lo", "p_mis_hi", "r", "r_05", "mean_hamming", "delta_min_mhz", "gap_at_edge"]


def _load_pulse(path) -> PulseProgram:
    try:
        return PulseProgram.from_json(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError("missing_input", f"pulse file {path} not found") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError("bad_pulse", f"{path}: {exc}") from None


def _simulate_one(job):
    path, a = job
    g = load_instance(path)
    m = hardness_metrics(g)
    physical = PhysicalParams()
    prob = Problem.build(g, physical, a["mode"])
    pulse = PulseProgram.from_dict(a["pulse"])
    pulses = [pulse] if not a["depths"] else [
        pulse.rescaled(d * math.pi / (2 * math.pi * pulse.omega_mhz)) for d in a["depths"]
    ]
    gap = min_gap_scan(prob.system, physical) if a["gap"] else None
    rows = []
    for j, p in enumerate(pulses):
        if p.variant == "qaoa":
            st = run_qaoa(prob.system, physical, p)
        else:
            st = run_vqaa(prob.system, physical, p)
        rng = np.random.default_rng([a["seed"], instance_key(g), j])
        shots = sample_measurements(st, a["shots"], rng)
        rep = compute_metrics(shots, g, prob.optima, rng=rng)
        rows.append((path.stem, g.n, m.mis_size, m.hp, m.rho, a["mode"], p.effective_depth(physical),
                     p.total_time, a["shots"], rep.p_mis, *rep.p_mis_interval, rep.r, rep.r_05,
                     rep.mean_hamming, "" if gap is None else gap.delta_min_mhz,
                     "" if gap is None else int(gap.at_edge)))
    return rows


def cmd_simulate(args) -> int:
    camp = Campaign(args, "simulate")
    paths = resolve_instances(args.instances)
    pulse = _load_pulse(args.pulse)
    camp.inputs = paths + [Path(args.pulse)]
    depths = parse_floats(args.depths)
    if depths and pulse.variant != "vqaa":
        raise CliError("bad_argument", "--depths rescales a vqaa sweep")
    a = dict(mode=args.mode, pulse=pulse.as_dict(), shots=args.shots, seed=args.seed, depths=depths, gap=args.gap)
    jobs = [(p, a) for p in paths]
    done = _collect(camp, [p.stem for p in paths], run_jobs(_simulate_one, jobs, worker_count(args.workers)))
    camp.write("simulate.csv", csv_text(SIM_HEADER, [r for rows in done for r in rows]))
    return camp.finish()


# --- optimize ----------------------------------------------------------------------


def _optimize_one(job):
    path, a = job
    g = load_instance(path)
    prob = Problem.build(g, PhysicalParams(), a["mode"])
    init = PulseProgram.from_dict(a["pulse"])
    par = parametrization_for(init, init.sweep_time if a["fix_sweep_time"] and init.variant == "vqaa" else None)
    cfg = OptimizerConfig(a["algorithm"], learning_rate=a["learning_rate"], c=a["c"],
                          max_iterations=a["iterations"], seed=int(np.random.SeedSequence([a["seed"], instance_key(g)]).generate_state(1)[0]))
    res = run_closed_loop(prob, init, ObjectiveSpec(a["metric"], a["shots"]), cfg, par)
    return path.stem, res


def cmd_optimize(args) -> int:
    camp = Campaign(args, "optimize")
    paths = resolve_instances(args.instances)
    pulse = _load_pulse(args.pulse)
    camp.inputs = paths + [Path(args.pulse)]
    a = dict(mode=args.mode, pulse=pulse.as_dict(), algorithm=args.algorithm, learning_rate=args.learning_rate,
             c=args.c, iterations=args.iterations, seed=args.seed, metric=args.metric, shots=args.shots,
             fix_sweep_time=args.fix_sweep_time)
    jobs = [(p, a) for p in paths]
    done = _collect(camp, [p.stem for p in paths], run_jobs(_optimize_one, jobs, worker_count(args.workers)))
    rows = []
    for name, res in done:
        camp.write(f"{name}_trace.csv", trace_csv(res))
        camp.write(f"{name}_best.json", res.best_program.to_json() + "\n")
        rows.append((name, res.best_value, len(res.trace), res.evaluations))
    camp.write("optimize.csv", csv_text(["instance", "best_objective", "iterations", "evaluations"], rows))
    return camp.finish()


# --- analyze -----------------------------------------------------------------------


def _column(rows, name, cast=float):
    try:
        return [cast(r[name]) for r in rows]
    except KeyError:
        raise CliError("bad_input", f"input lacks column {name!r}") from None
    except ValueError as exc:
        raise CliError("bad_input", f"column {name!r}: {exc}") from None


def _rows_from(inputs) -> list[dict]:
    rows = []
    for p in inputs:
        rows.extend(read_csv(p))
    if not rows:
        raise CliError("bad_input", "input files contain no rows")
    return rows


def _chain_one(job):
    path, seed = job
    g = load_instance(path)
    m = hardness_metrics(g)
    ch = build_low_energy_chain(g)
    gap = spectral_gap(ch)
    cb = cheeger_bounds(ch)
    entries = entry_histogram(g, 1000, int(np.random.SeedSequence([seed, instance_key(g)]).generate_state(1)[0]))
    row = (path.stem, g.n, m.mis_size, m.hp, gap, cb.phi, cb.lower * g.n, cb.upper * g.n,
           hitting_time_estimate(ch), 2 / m.hp, len(entries))
    return row, [(path.stem, " ".join(map(str, k)), c) for k, c in entries.items()]


def cmd_analyze(args) -> int:
    camp = Campaign(args, "analyze")
    if args.fit == "chain":
        paths = resolve_instances(args.instances)
        camp.inputs = paths
        jobs = [(p, args.seed) for p in paths]
        done = _collect(camp, [p.stem for p in paths], run_jobs(_chain_one, jobs, worker_count(args.workers)))
        header = ["instance", "N", "mis_size", "hp", "gap", "phi", "gap_lower", "gap_upper", "hitting_time",
                  "gap_bound", "entry_states"]
        camp.write("chain.csv", csv_text(header, [r for r, _ in done]))
        camp.write("chain_entries.csv", csv_text(["instance", "vertices", "count"], [e for _, es in done for e in es]))
        return camp.finish()
    inputs = resolve_inputs(args.input)
    camp.inputs = inputs
    rows = _rows_from(inputs)
    ids = [r.get("instance", str(i)) for i, r in enumerate(rows)]
    if args.fit == "hp-scaling":
        if args.protocol == "threshold":
            keep = [i for i, r in enumerate(rows) if r.get("depth_p60", "") not in ("", "inf")]
            sub = [rows[i] for i in keep]
            fit = fit_hp_scaling(_column(sub, "hp"), _column(sub, "depth_p60"), "threshold",
                                 min_decades=args.min_decades, ids=[ids[i] for i in keep])
        else:
            fit = fit_hp_scaling(_column(rows, "hp"), _column(rows, "p_mis"), "depth",
                                 min_decades=args.min_decades, ids=ids)
        fits = fit.as_dict()
    elif args.fit == "pmis-depth":
        groups: dict = {}
        for r in rows:
            groups.setdefault(r["instance"], []).append(r)
        fits = {name: fit_pmis_depth(_column(g, "depth"), _column(g, "p_mis")).as_dict() for name, g in sorted(groups.items())}
    elif args.fit == "landau-zener":
        times = set(_column(rows, "total_time"))
        if len(times) != 1:
            raise CliError("bad_input", "landau-zener fit needs a single sweep duration")
        fits = fit_landau_zener(_column(rows, "delta_min_mhz"), _column(rows, "p_mis"), times.pop(), ids).as_dict()
    elif args.fit == "kz":
        groups = {}
        for r in rows:
            groups.setdefault(r["instance"], []).append(r)
        series = [(name, float(g[0]["rho"]), _column(g, "total_time"), [1 - x for x in _column(g, "r")])
                  for name, g in sorted(groups.items())]
        fits = fit_kz_model(series).as_dict()
    else:
        raise CliError("bad_argument", f"unknown fit {args.fit!r}")
    text = json.dumps(fits, indent=2, sort_keys=True) + "\n"
    camp.write(f"fit_{args.fit}.json", text)
    camp.completed = 1
    sys.stdout.write(text)
    return camp.finish()


# --- plotdata ----------------------------------------------------------------------


def cmd_plotdata(args) -> int:
    camp = Campaign(args, "plotdata")
    inputs = resolve_inputs(args.input)
    camp.inputs = inputs
    rows = _rows_from(inputs)
    if args.kind == "depth-error":
        header = ["instance", "p_tilde", "one_minus_r"]
        out = [(r["instance"], float(r["p_tilde"]), 1 - float(r["r"])) for r in rows]
    elif args.kind == "hp-pmis":
        header = ["instance", "hp", "neg_log_one_minus_pmis"]
        out = []
        for r in rows:
            p = float(r["p_mis"])
            out.append((r["instance"], float(r["hp"]), -math.log1p(-p) if p < 1 else math.inf))
    elif args.kind == "gap-pmis":
        header = ["instance", "delta_min_mhz", "p_mis", "excluded"]
        d = np.array(_column(rows, "delta_min_mhz"))
        t = np.array(_column(rows, "total_time"))
        ok = [bool(landau_zener_mask([x], y)[0]) for x, y in zip(d, t)]
        out = [(r["instance"], float(x), float(r["p_mis"]), int(not k)) for r, x, k in zip(rows, d, ok)]
    else:
        raise CliError("bad_argument", f"unknown plot kind {args.kind!r}")
    camp.completed = len(out)
    camp.write(f"plot_{args.kind}.csv", csv_text(header, out))
    return camp.finish()


# --- parser ------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, instances: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $RYDMIS_WORKERS or 1)")
    p.add_argument("--out", default=".", help="output directory")
    if instances:
        p.add_argument("--instances", nargs="+", help="instance JSON files, globs or directories")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydmis", description="MIS hardness, annealing and Rydberg simulation campaigns")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="random lattice instances")
    _common(p, instances=False)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--filling", type=float, default=0.8)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("count", help="independence polynomial and hardness metrics")
    _common(p)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--per-size", type=int)
    p.add_argument("--filling", type=float, default=0.8)
    p.add_argument("--select-hardest", help="keep the top fraction by HP per lattice size, e.g. 2pct")
    p.add_argument("--emit-instances", action="store_true", help="write instance files for scanned rows")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("anneal", help="simulated annealing restarts")
    _common(p)
    p.add_argument("--variant", choices=["mis", "rydberg"], default="mis")
    p.add_argument("--depth", type=float, default=32.0)
    p.add_argument("--restarts", type=int, default=1000)
    p.add_argument("--checkpoints", help="comma-separated depths for P_MIS curves")
    p.add_argument("--temperature", type=float, default=None, help="constant temperature (default: variant schedule)")
    p.add_argument("--alpha", type=float, default=MisHamiltonianParams().alpha)
    p.add_argument("--epsilon", type=float, default=MisHamiltonianParams().epsilon)
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("simulate", help="state-vector simulation of a pulse program")
    _common(p)
    p.add_argument("--pulse", required=True)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--mode", choices=[m.value for m in BasisMode], default="hard_blockade")
    p.add_argument("--depths", help="comma-separated effective depths to rescale a sweep to")
    p.add_argument("--gap", action="store_true", help="also compute the minimum gap")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="closed-loop pulse optimisation")
    _common(p)
    p.add_argument("--pulse", required=True, help="initial pulse program")
    p.add_argument("--mode", choices=[m.value for m in BasisMode], default="hard_blockade")
    p.add_argument("--algorithm", choices=["adam_spsa", "adam_fd"], default="adam_spsa")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=OptimizerConfig().learning_rate)
    p.add_argument("--c", type=float, default=OptimizerConfig().c)
    p.add_argument("--metric", choices=["one_minus_R", "one_minus_R50"], default="one_minus_R50")
    p.add_argument("--shots", type=int, default=50)
    p.add_argument("--fix-sweep-time", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("analyze", help="fits and Markov-chain analysis")
    _common(p)
    p.add_argument("--fit", choices=["hp-scaling", "pmis-depth", "landau-zener", "kz", "chain"], required=True)
    p.add_argument("--input", nargs="+", help="result CSV files or globs")
    p.add_argument("--protocol", choices=["threshold", "depth"], default="threshold")
    p.add_argument("--min-decades", type=float, default=1.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plotdata", help="tidy CSV series for plotting")
    _common(p, instances=False)
    p.add_argument("--kind", choices=["depth-error", "hp-pmis", "gap-pmis"], required=True)
    p.add_argument("--input", nargs="+", required=True)
    p.set_defaults(func=cmd_plotdata)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "instances", None) is None and args.command in ("anneal", "simulate", "optimize"):
            raise CliError("bad_argument", f"{args.command} needs --instances")
        if args.command == "analyze" and args.fit != "chain" and not args.input:
            raise CliError("bad_argument", "analyze needs --input")
        if args.command == "analyze" and args.fit == "chain" and not args.instances:
            raise CliError("bad_argument", "chain analysis needs --instances")
        return args.func(args)
    except CliError as exc:
        emit_error(exc.kind, str(exc))
        return exc.code
    except (InstanceTooWide, ValueError, OSError) as exc:
        emit_error(type(exc).__name__, str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
