"""Canned configs and plot-ready figure data.

Each panel runs one shipped config into ``<out>/<panel>/`` and adds a
``<panel>.csv`` with just the plotted columns:

==============  ==============================================================
fig1_top        t, one_minus_fidelity (noiseless, tau = 100, n = 2)
fig1_inset      t, E_0_over_J ... E_15_over_J (instantaneous levels)
fig1_bottom     tau, f, median_error, q25_error, q75_error, n_seeds
fig2            f, d_abs_alpha_x, d_abs_alpha_y, d_abs_alpha_z (slopes in summary.json)
==============  ==============================================================
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .config import ExperimentConfig, config_from_dict, dump_config, load_config
from .runner import RunResult, run_config, write_csv

PANELS = ("fig1_top", "fig1_inset", "fig1_bottom", "fig2")


def shipped_config_names() -> list[str]:
    root = resources.files("protqubit") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def shipped_config(name: str) -> ExperimentConfig:
    path = resources.files("protqubit") / "configs" / f"{name}.yaml"
    if not path.is_file():
        raise KeyError(f"no shipped config {name!r}; available: {shipped_config_names()}")
    with resources.as_file(path) as p:
        return load_config(p)


def _figure_rows(panel: str, run: RunResult) -> tuple[list[str], list[list]]:
    s = run.summary["results"]
    if panel == "fig1_top":
        import csv

        with open(run.out_dir / "trace.csv") as fh:
            rows = list(csv.reader(fh))[1:]
        return ["t", "one_minus_fidelity"], [[float(r[3]), float(r[4])] for r in rows]
    if panel == "fig1_inset":
        levels = [h for h in run.header if h.startswith("E_")]
        idx = [run.header.index(h) for h in ["t"] + levels]
        return ["t"] + levels, [[r[k] for k in idx] for r in run.rows]
    if panel == "fig1_bottom":
        cols = ["tau", "f", "median_error", "q25_error", "q75_error", "n_seeds"]
        return cols, [[e[c] for c in cols] for e in s["error_statistics"]]
    if panel == "fig2":
        entry = s["per_g_max"][0]
        med = entry["median_deviations"]
        cols = ["d_abs_alpha_x", "d_abs_alpha_y", "d_abs_alpha_z"]
        return ["f"] + cols, [[f] + [med[c][k] for c in cols] for k, f in enumerate(entry["amplitudes"])]
    raise KeyError(panel)


def reproduce_figures(
    out_dir: str | Path,
    panels: tuple[str, ...] = PANELS,
    seeds=None,
    threads: int | None = None,
) -> dict[str, RunResult]:
    """Run every panel config; ``seeds`` overrides the seed list of random-noise panels."""
    out = Path(out_dir)
    runs = {}
    for panel in panels:
        cfg = shipped_config(panel)
        if seeds is not None and cfg.random_noise:
            cfg = cfg.with_seeds(seeds)
        target = out / panel
        target.mkdir(parents=True, exist_ok=True)
        (target / "config.yaml").write_text(dump_config(cfg))
        run = run_config(cfg, target, threads=threads)
        header, rows = _figure_rows(panel, run)
        write_csv(target / f"{panel}.csv", header, rows)
        runs[panel] = run
    return runs


__all__ = [
    "PANELS",
    "config_from_dict",
    "reproduce_figures",
    "shipped_config",
    "shipped_config_names",
]
