"""Run an ExperimentConfig and persist its records.

Each run writes, into its output directory:

* ``results.csv``: one headered row per (parameter point, seed), floats as
  ``%.16e``. Seed is -1 for rows whose noise involves no randomness.
* ``summary.json``: config, config hash, fits, calibrations, versions and a
  ``status`` field (``ok`` or ``failed`` plus the failing tasks).
* ``timings.csv``: wall time per task. Kept apart so that the two data
  files above are byte-identical between runs of the same config.

Tasks are independent and may run on a thread pool (the propagator
releases the GIL); results are always merged in task order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .classifier import (
    ClassifierDisagreement,
    classify_string,
    logical_projection_oracle,
    minimum_effective_order,
    predict_dominant_scaling,
)
from .config import ExperimentConfig
from .dynamics import (
    OrderStudy,
    PulseSpec,
    Schedule,
    initialization_hamiltonian,
    manipulation_hamiltonian,
    order_study,
)
from .fitting import loglog_slope
from .lattice import LatticeSpec, PauliString
from .protocols import (
    NoiseSpec,
    _hamiltonian_and_basis,
    _nominal,
    calibrate_g_max,
    modulus_angle,
    modulus_axis,
    prepare_product_state,
    run_initialization,
    run_manipulation,
)
from .spectrum import ground_splitting_scan, instantaneous_spectrum

FLOAT_FORMAT = "%.16e"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument, else the THREADS environment variable, else 1."""
    if threads is None:
        env = os.environ.get("THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FORMAT % v
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_clean(obj.tolist())
    return obj


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(_json_clean(obj), indent=2, sort_keys=True) + "\n")


def versions() -> dict[str, str]:
    out = {}
    for pkg in ("protqubit", "numpy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


@dataclass
class TaskOutcome:
    key: tuple
    value: object = None
    error: str | None = None
    wall_time: float = 0.0


def run_tasks(fn: Callable, keys: Sequence[tuple], threads: int) -> list[TaskOutcome]:
    """Apply ``fn`` to every key; outcomes come back in key order."""

    def one(key):
        t = time.perf_counter()
        try:
            return TaskOutcome(key, fn(*key), wall_time=time.perf_counter() - t)
        except Exception as e:  # recorded, the run continues with the other tasks
            return TaskOutcome(key, error=f"{type(e).__name__}: {e}", wall_time=time.perf_counter() - t)

    if threads == 1 or len(keys) <= 1:
        return [one(k) for k in keys]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, keys))


@dataclass
class RunResult:
    out_dir: Path
    header: list[str]
    rows: list[list]
    summary: dict
    timings: list[tuple[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.summary["status"] == "ok"

    def column(self, name: str) -> np.ndarray:
        k = self.header.index(name)
        return np.array([r[k] for r in self.rows])


def lattice_of(cfg: ExperimentConfig) -> LatticeSpec:
    return LatticeSpec(cfg.lattice.n, cfg.lattice.j_x, cfg.lattice.j_y, cfg.lattice.bonds)


def noise_of(cfg: ExperimentConfig, amplitude: float, seed: int) -> NoiseSpec:
    kind = cfg.noise.kind
    if kind == "none":
        return NoiseSpec.none()
    if kind == "directional":
        return NoiseSpec.directional(cfg.noise.axis, amplitude)
    if kind == "random_orientation":
        return NoiseSpec.random_orientation(amplitude, seed)
    return NoiseSpec.coupling_fluctuation(amplitude, seed)


def _amplitudes(cfg: ExperimentConfig) -> tuple[float, ...]:
    return (0.0,) if cfg.noise.kind == "none" else cfg.noise.amplitudes


def _seeds(cfg: ExperimentConfig) -> tuple[int, ...]:
    return cfg.seeds if cfg.random_noise else (-1,)


def _quartiles(values) -> tuple[float, float, float]:
    q25, q50, q75 = np.percentile(np.asarray(values, float), [25, 50, 75])
    return float(q50), float(q25), float(q75)


# --- init_sweep ----------------------------------------------------------

INIT_HEADER = ["config_hash", "tau", "f", "seed", "final_error", "norm_drift", "convergence_deficit"]
TRACE_HEADER = ["tau", "f", "seed", "t", "one_minus_fidelity"]


def _run_init_sweep(cfg, lattice, h, threads):
    keys = [(tau, f, s) for tau in cfg.schedule.taus for f in _amplitudes(cfg) for s in _seeds(cfg)]

    def task(tau, f, seed):
        return run_initialization(
            lattice, Schedule(tau, form=cfg.schedule.form), noise_of(cfg, f, seed),
            n_samples=cfg.schedule.samples, dt=cfg.integrator.dt, verify=cfg.integrator.verify,
        )

    outcomes = run_tasks(task, keys, threads)
    rows, trace = [], []
    for o in outcomes:
        if o.error:
            continue
        r = o.value
        tau, f, seed = o.key
        deficit = float("nan") if r.convergence_deficit is None else r.convergence_deficit
        rows.append([h, tau, f, seed, r.final_error, r.norm_drift, deficit])
        trace.extend([tau, f, seed, t, e] for t, e in zip(r.times, r.errors))

    stats = []
    best = {}
    for f in _amplitudes(cfg):
        for tau in cfg.schedule.taus:
            errs = [r[4] for r in rows if r[1] == tau and r[2] == f]
            if not errs:
                continue
            med, q25, q75 = _quartiles(errs)
            stats.append({"tau": tau, "f": f, "median_error": med, "q25_error": q25,
                          "q75_error": q75, "n_seeds": len(errs)})
            if repr(f) not in best or med < best[repr(f)]["median_error"]:
                best[repr(f)] = {"tau": tau, "median_error": med}
    results = {
        "error_statistics": stats,
        "min_median_error": best,
        "max_norm_drift": max((r[5] for r in rows), default=float("nan")),
    }
    extra = {"trace.csv": (TRACE_HEADER, trace)} if cfg.schedule.samples else {}
    return INIT_HEADER, rows, results, outcomes, extra


# --- manip_sweep ---------------------------------------------------------

MANIP_HEADER = (
    ["config_hash", "g_max", "f", "seed"]
    + [f"{p}_alpha_{k}" for k in ("1", "x", "y", "z") for p in ("re", "im")]
    + [f"abs_alpha_{k}" for k in ("1", "x", "y", "z")]
    + [f"d_abs_alpha_{k}" for k in ("1", "x", "y", "z")]
    + ["leakage", "angle", "d_angle", "axis_x", "axis_y", "axis_z", "norm_drift"]
)


def _run_manip_sweep(cfg, lattice, h, threads):
    p = cfg.pulse
    _, basis = _nominal(lattice)
    duration = p.duration_gaps / basis.gap
    calibration = None
    if p.g_values is None:
        g = calibrate_g_max(lattice, p.axis, p.target_angle, duration, p.envelope)
        calibration = {"target_angle": p.target_angle, "g_max": g, "duration": duration,
                       "envelope": p.envelope, "axis": p.axis}
        g_values = (g,)
    else:
        g_values = p.g_values

    def task(g, f, seed):
        pulse = PulseSpec(p.axis, g, duration, p.envelope)
        noise = None if f == 0 and seed == -1 else noise_of(cfg, f, seed)
        return run_manipulation(lattice, pulse, noise, dt=cfg.integrator.dt, verify=cfg.integrator.verify)

    refs = run_tasks(task, [(g, 0.0, -1) for g in g_values], threads)
    by_key = {o.key: o for o in refs}
    keys = [(g, f, s) for g in g_values for f in _amplitudes(cfg) for s in _seeds(cfg)]
    fresh = run_tasks(task, [k for k in keys if k not in by_key], threads)
    by_key.update({o.key: o for o in fresh})
    outcomes = [by_key[k] for k in keys]
    ref_by_g = {o.key[0]: o.value for o in refs if not o.error}

    rows = []
    for o in outcomes:
        if o.error or o.key[0] not in ref_by_g:
            continue
        g, f, seed = o.key
        d, ref = o.value, ref_by_g[g]
        alphas = d.alphas
        rows.append(
            [h, g, f, seed]
            + [x for a in alphas for x in (a.real, a.imag)]
            + list(d.moduli)
            + list(np.abs(d.moduli - ref.moduli))
            + [d.leakage, modulus_angle(d), abs(modulus_angle(d) - modulus_angle(ref))]
            + list(modulus_axis(d))
            + [d.norm_drift]
        )

    col = {name: k for k, name in enumerate(MANIP_HEADER)}
    per_g = []
    for g in g_values:
        entry = {"g_max": g}
        if g in ref_by_g:
            entry["reference_angle"] = modulus_angle(ref_by_g[g])
            entry["reference_moduli"] = list(ref_by_g[g].moduli)
        amps = sorted({r[2] for r in rows if r[1] == g and r[2] > 0})
        med = {}
        for name in ("d_abs_alpha_1", "d_abs_alpha_x", "d_abs_alpha_y", "d_abs_alpha_z", "d_angle"):
            med[name] = [float(np.median([r[col[name]] for r in rows if r[1] == g and r[2] == f])) for f in amps]
        entry["amplitudes"] = amps
        entry["median_deviations"] = med
        slopes = {}
        for name, ys in med.items():
            xs = np.array(amps)
            ys = np.array(ys)
            ok = (xs > 0) & (ys > 0)
            slopes[name] = loglog_slope(xs[ok], ys[ok]) if ok.sum() >= 2 else float("nan")
        entry["slopes"] = slopes
        per_g.append(entry)

    results = {"calibration": calibration, "per_g_max": per_g,
               "max_norm_drift": max((r[col["norm_drift"]] for r in rows), default=float("nan"))}
    clean = [(g, modulus_angle(ref_by_g[g])) for g in g_values if g in ref_by_g]
    if len(clean) >= 2:
        gs, th = map(np.array, zip(*clean))
        results["angle_vs_g_max_slope"] = loglog_slope(gs, th)
    return MANIP_HEADER, rows, results, refs + fresh, {}


# --- splitting_scan ------------------------------------------------------

SPLIT_HEADER = ["config_hash", "axis", "h", "splitting"]


def _run_splitting_scan(cfg, lattice, h, threads):
    outcomes = run_tasks(lambda: ground_splitting_scan(lattice, cfg.scan.axis, cfg.scan.amplitudes), [()], 1)
    o = outcomes[0]
    if o.error:
        return SPLIT_HEADER, [], {}, outcomes, {}
    scan = o.value
    rows = [[h, scan.axis.value, a, s] for a, s in zip(scan.amplitudes, scan.splittings)]
    return SPLIT_HEADER, rows, {"slope": scan.slope, "gap": scan.gap}, outcomes, {}


# --- spectrum_flow -------------------------------------------------------

def _run_spectrum_flow(cfg, lattice, h, threads):
    keys = [(tau,) for tau in cfg.schedule.taus]

    def task(tau):
        sch = Schedule(tau, form=cfg.schedule.form)
        times = np.linspace(0.0, sch.final_time, cfg.schedule.samples)
        return instantaneous_spectrum(lattice, sch, times)

    outcomes = run_tasks(task, keys, threads)
    header = ["config_hash", "tau", "t"] + [f"E_{k}_over_J" for k in range(lattice.dim)]
    rows, finals = [], []
    for o in outcomes:
        if o.error:
            continue
        spec = o.value
        rows.extend([h, o.key[0], t] + list(lv) for t, lv in zip(spec.times, spec.levels))
        last = spec.levels[-1]
        finals.append({"tau": o.key[0], "final_doublet_splitting": last[1] - last[0],
                       "final_gap": last[2] - last[0]})
    return header, rows, {"final_levels": finals, "units": "J = (j_x + j_y) / 2"}, outcomes, {}


# --- classify ------------------------------------------------------------

CLASSIFY_HEADER = ["config_hash", "string", "row_action", "col_action", "logical_class",
                   "effective_class", "oracle_class", "oracle_residual"]


def _run_classify(cfg, lattice, h, threads):
    c = cfg.classify
    basis = _nominal(lattice)[1] if c.oracle else None

    def task(text):
        s = PauliString.parse(text)
        verdict = classify_string(s, lattice.n)
        if basis is None:
            return verdict, None
        check = logical_projection_oracle(s, basis, lattice, strict=False)
        return verdict, check

    outcomes = run_tasks(task, [(s,) for s in c.strings], threads)
    rows, verdicts, disagreements = [], [], []
    for o in outcomes:
        if o.error:
            continue
        verdict, check = o.value
        text = str(PauliString.parse(o.key[0]))
        if check is None:
            oracle_class, resid = "", float("nan")
        else:
            resid = check.residual
            try:
                oracle_class = check.oracle_class.value
            except ClassifierDisagreement:
                oracle_class = "Mixed"
            if not check.agrees:
                disagreements.append(text)
        rows.append([h, text, verdict.row_action.value, verdict.col_action.value,
                     verdict.logical_class.value, verdict.effective_class.value, oracle_class, resid])
        verdicts.append({"string": text, **verdict.as_dict()})
    predictions = [predict_dominant_scaling(u, v, lattice.n).as_dict() for u, v in c.pairs]
    results = {
        "verdicts": verdicts,
        "predictions": predictions,
        "minimum_effective_order": {u: minimum_effective_order(u, lattice.n) for u in ("X", "Y")},
        "oracle_disagreements": disagreements,
    }
    for text in disagreements:
        outcomes.append(TaskOutcome((text,), error="ClassifierDisagreement: projected block differs from the effective class"))
    return CLASSIFY_HEADER, rows, results, outcomes, {}


_DISPATCH = {
    "init_sweep": _run_init_sweep,
    "manip_sweep": _run_manip_sweep,
    "splitting_scan": _run_splitting_scan,
    "spectrum_flow": _run_spectrum_flow,
    "classify": _run_classify,
}


def run_config(cfg: ExperimentConfig, out_dir: str | Path | None = None, threads: int | None = None) -> RunResult:
    """Dispatch ``cfg`` and write its files into ``out_dir`` (skipped when None)."""
    threads = resolve_threads(threads)
    lattice = lattice_of(cfg)
    h = cfg.config_hash()
    failures = []
    try:
        header, rows, results, outcomes, extra = _DISPATCH[cfg.kind](cfg, lattice, h, threads)
    except Exception as e:  # e.g. calibration failure before any task ran
        header, rows, results, outcomes, extra = ["config_hash"], [], {}, [], {}
        failures.append({"task": "setup", "error": f"{type(e).__name__}: {e}"})
    failures += [{"task": list(o.key), "error": o.error} for o in outcomes if o.error]
    summary = {
        "schema_version": cfg.schema_version,
        "kind": cfg.kind,
        "config_hash": h,
        "config": cfg.to_dict(),
        "versions": versions(),
        "status": "failed" if failures else "ok",
        "failures": failures,
        "n_records": len(rows),
        "results": results,
    }
    timings = [(json.dumps(list(o.key)), o.wall_time) for o in outcomes]
    result = RunResult(Path(out_dir) if out_dir is not None else None, header, rows, _json_clean(summary), timings)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "results.csv", header, rows)
        for name, (hdr, data) in extra.items():
            write_csv(out / name, hdr, data)
        write_json(out / "summary.json", summary)
        write_csv(out / "timings.csv", ["task", "wall_time_s"], timings)
    return result


def certify_integrator(cfg: ExperimentConfig) -> list[OrderStudy]:
    """Convergence-order studies on the hardest Hamiltonians a config integrates.

    Init sweeps: the shortest and longest tau at the largest noise amplitude,
    first seed. Manipulation sweeps: the largest g_max at the largest
    amplitude. Other kinds integrate nothing and return an empty list.
    """
    lattice = lattice_of(cfg)
    f = max(_amplitudes(cfg))
    seed = _seeds(cfg)[0]
    noise = noise_of(cfg, f, seed)
    h0, basis = _hamiltonian_and_basis(lattice, noise)
    field = noise.field_operator(lattice)
    studies = []
    if cfg.kind == "init_sweep":
        for tau in sorted({min(cfg.schedule.taus), max(cfg.schedule.taus)}):
            sch = Schedule(tau, form=cfg.schedule.form)
            ham = initialization_hamiltonian(lattice, sch, field, h0=h0)
            studies.append(order_study(prepare_product_state(lattice), ham, 0.0, sch.final_time))
    elif cfg.kind == "manip_sweep":
        p = cfg.pulse
        duration = p.duration_gaps / _nominal(lattice)[1].gap
        if p.g_values is None:
            g = calibrate_g_max(lattice, p.axis, p.target_angle, duration, p.envelope)
        else:
            g = max(p.g_values)
        pulse = PulseSpec(p.axis, g, duration, p.envelope)
        ham = manipulation_hamiltonian(lattice, pulse, h0, field)
        studies.append(order_study(basis.states, ham, 0.0, duration))
    return studies
