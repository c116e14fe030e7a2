"""Scenario dispatch, worker pool and run-directory persistence."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import datetime as _dt
import json
import logging
import math
import os
from pathlib import Path

import numpy as np

from .. import __version__
from ..masdnp.propagate import epsilon_B, simulate_to_steady_state
from ..masdnp.sweeps import (BoxTemplate, field_profile, fit_effective_field,
                             hyperpolarization_sweep)
from ..results import SweepResult
from ..rqm.kinetics import (KineticState, build_kinetic_generator,
                            d0_equilibrium_polarization, d0_polarization_trace,
                            evolve_kinetics)
from ..rqm.params import STATE_LABELS, M_VALUE, RQM_PAIRS, population_vector
from ..rqm.rates import dq_rate_constants, rqm_polarization, selectivity_factor
from ..rqm.scan import JSCAN_COLUMNS, JSCAN_UNITS, j_scan_row
from ..rqm.levels import level_scheme
from ..spincore import powder_grid

log = logging.getLogger("opdnp")

# 18.8 T block of the reference J-scan table, cm^-1
JSCAN_DEFAULT_J = (-1, -2, -3, -4, -5, -6, -7, -8, -9, -9.5, -10, -10.5, -10.7, -11, -11.1,
                   -11.2, -11.3, -11.4, -11.5, -11.6, -11.7, -11.8, -11.9, -12, -12.2,
                   -12.4, -12.5, -13, -13.5, -14, -15)
FIELD_PROFILE_DEFAULT_B0 = (18.6, 18.7, 18.72, 18.74, 18.76, 18.78, 18.8, 18.82, 18.9, 19.0)
HP_SWEEP_DEFAULT = (-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0)
FIT_DEFAULT_B0 = (14.1, 16.0, 18.8, 20.0, 21.1, 23.5)


class TaskError(RuntimeError):
    pass


@dataclass
class RunManifest:
    config_hash: str
    version: str
    timestamp: str
    seed: int
    scenario: str
    run_dir: str
    status: str = "running"  # running | ok | failed | not-converged
    converged: object = None
    tasks: list = field(default_factory=list)
    error: object = None

    @property
    def ok(self):
        return self.status == "ok"

    def write(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


class _Guarded:
    """Picklable wrapper that tags a worker exception with the task identity."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, item):
        task_id, args = item
        try:
            return self.fn(args)
        except Exception as exc:  # surfaced to the parent with the task id
            raise TaskError(f"task {task_id} failed: {type(exc).__name__}: {exc}") from exc


class Pool:
    """Ordered map over a process pool (or in-process when workers == 1)."""

    def __init__(self, workers):
        self.workers = max(1, int(workers))
        self._ex = ProcessPoolExecutor(self.workers) if self.workers > 1 else None
        self.n_tasks = 0

    def map(self, fn, items):
        items = list(items)
        tagged = [(self.n_tasks + i, a) for i, a in enumerate(items)]
        self.n_tasks += len(items)
        g = _Guarded(fn)
        if self._ex is None:
            return [g(t) for t in tagged]
        return list(self._ex.map(g, tagged))

    def close(self):
        if self._ex is not None:
            self._ex.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ----------------------------------------------------------------------- scenarios

def _grid(cfg):
    return powder_grid(cfg.option("grid_scheme", "golden-spiral"), cfg.option("grid_n", 1000),
                       cfg.seed, cfg.option("grid_path"))


def _run_rqm_rates(cfg, pool):
    params = cfg.rqm_params()
    table = dq_rate_constants(params, _grid(cfg), cfg.option("average", "mean-square"))
    scheme = level_scheme(params.J_CR, params.field_frequency, params.light_speed)
    res = SweepResult(["m_Q", "n_D1", "deltaE", "k_dq", "k_qd"],
                      ["1", "1", "cm-1", "s-1", "s-1"])
    for pair in RQM_PAIRS:
        res.add_row([M_VALUE[pair[0]], M_VALUE[pair[1]], scheme.deltaE[pair],
                     table.k_dq[pair], table.k_qd[pair]])
    if table.diagnostics:
        res.diagnostics["global"] = list(table.diagnostics)
    R = selectivity_factor(table)
    res.provenance = {"R_D1": R, "P": rqm_polarization(R)}
    return res, [{"task": 0, "status": "ok"}]


def _run_rqm_kinetics(cfg, pool):
    params = cfg.rqm_params()
    table = dq_rate_constants(params, _grid(cfg), cfg.option("average", "mean-square"))
    M = build_kinetic_generator(params, table)
    times = np.linspace(0.0, cfg.option("t_end", 20e-6), cfg.option("n_times", 401))
    states = evolve_kinetics(M, KineticState(0.0, population_vector(params)), times,
                             cfg.option("method", "matrix-exponential"))
    t, trace = d0_polarization_trace(states, cfg.option("irf_time", 0.0),
                                     d0_equilibrium_polarization(params))
    res = SweepResult(["t", "normalized_esp"] + [f"p_{lab}" for lab in STATE_LABELS],
                      ["s", "1"] + ["1"] * 8)
    for k, s in enumerate(states):
        res.add_row([t[k], trace[k], *s.populations])
    return res, [{"task": 0, "status": "ok"}]


def _jscan_task(args):
    params, J, grid, average = args
    return j_scan_row(params, J, grid, average=average)


def _run_j_scan(cfg, pool):
    params = cfg.rqm_params()
    Js = cfg.sweep.get("J_CR", JSCAN_DEFAULT_J)
    grid = _grid(cfg)
    out = pool.map(_jscan_task, [(params, float(J), grid, cfg.option("average", "mean-square"))
                                 for J in Js])
    res = SweepResult(JSCAN_COLUMNS, JSCAN_UNITS)
    for row, diag in out:
        res.add_row(row, diag)
    return res, [{"task": i, "status": "ok", "J_CR": float(J)} for i, J in enumerate(Js)]


def _template(cfg):
    kw = {k: cfg.options[k] for k in ("n_units", "n_boxes", "concentration", "min_distance",
                                       "samples_per_period", "max_rotor_periods",
                                       "convergence_tol") if k in cfg.options}
    kw.setdefault("concentration", 10.0)
    kw.setdefault("min_distance", 4.2)
    return BoxTemplate(cfg.spin_spec(), cfg.relax_set(), seed=cfg.seed, **kw)


def _box_run_task(args):
    template, k, drive = args
    state, diag = simulate_to_steady_state(
        template.box(k), template.relax, drive, max_rotor_periods=template.max_rotor_periods,
        convergence_tol=template.convergence_tol,
        samples_per_period=template.samples_per_period)
    return state.P_e, state.P_n, diag.max_dP, diag.converged, diag.periods


def _run_masdnp(cfg, pool):
    tpl = _template(cfg)
    drive = cfg.drive_config()
    out = pool.map(_box_run_task, [(tpl, k, drive) for k in range(tpl.n_boxes)])
    res = SweepResult(["box", "unit", "P_e_a", "P_e_b", "P_n", "eps_B", "max_dP", "converged"],
                      ["1"] * 8)
    tasks = []
    for k, (P_e, P_n, maxd, conv, periods) in enumerate(out):
        eps = epsilon_B(P_n, drive)
        note = [] if conv else [f"box {k} not converged after {periods} rotor periods"]
        for u in range(len(P_n)):
            res.add_row([k, u, P_e[2 * u], P_e[2 * u + 1], P_n[u], eps[u], maxd[u],
                         float(conv)], note)
        tasks.append({"task": k, "status": "ok", "converged": bool(conv),
                      "periods": int(periods)})
    res.provenance = {"eps_B_mean": float(np.mean(res.column("eps_B")))}
    return res, tasks


def _point_tasks(res):
    return [{"task": i, "status": "ok", "converged": bool(c)}
            for i, c in enumerate(res.column("converged"))]


def _run_field_profile(cfg, pool):
    tpl = _template(cfg)
    B0 = cfg.sweep.get("B0", FIELD_PROFILE_DEFAULT_B0)
    modes = cfg.option("modes", ("conventional", "optical", "optical+uw"))
    res = field_profile(tpl, B0, cfg.drive_config(), modes,
                        cfg.option("optical_target", -0.75), map_fn=pool.map)
    return res, _point_tasks(res)


def _run_hp_sweep(cfg, pool):
    tpl = _template(cfg)
    P = cfg.sweep.get("P_target", HP_SWEEP_DEFAULT)
    res = hyperpolarization_sweep(tpl, P, cfg.drive_config(), cfg.option("with_uw", True),
                                  map_fn=pool.map)
    return res, _point_tasks(res)


def read_results_csv(path):
    """Inverse of write_results_csv: SweepResult from a ``name [unit]`` header CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    cols, units = [], []
    for h in rows[0]:
        name, _, unit = h.partition(" [")
        if not unit.endswith("]"):
            raise ValueError(f"header entry {h!r} lacks a unit")
        cols.append(name)
        units.append(unit[:-1])
    return SweepResult(cols, units, [[float(x) for x in r] for r in rows[1:]])


def _run_fit_beff(cfg, pool):
    res = SweepResult(["temperature", "B_eff", "residual", "n_points"], ["K", "T", "1", "1"])
    tasks = []
    if cfg.option("input"):
        src = read_results_csv(cfg.option("input"))
        col = next((c for c in ("eps_B_optical", "eps_B") if c in src.columns), None)
        if col is None:
            raise ValueError("input CSV needs a B0 column and an eps_B_optical column")
        fit = fit_effective_field(src.column("B0"), src.column(col))
        T = cfg.drive_config().temperature
        res.add_row([T, fit.B_eff, fit.residual, fit.n_points])
        res.provenance = {"input": cfg.option("input")}
        return res, [{"task": 0, "status": "ok"}]
    tpl = _template(cfg)
    B0 = cfg.sweep.get("B0", FIT_DEFAULT_B0)
    temps = cfg.sweep.get("temperature", (cfg.drive_config().temperature,))
    profiles = {}
    for T in temps:
        prof = field_profile(tpl, B0, cfg.drive_config().replace(temperature=T), ["optical"],
                             cfg.option("optical_target", -0.75), map_fn=pool.map)
        fit = fit_effective_field(prof.column("B0"), prof.column("eps_B_optical"))
        conv = bool(np.all(prof.column("converged") == 1))
        note = [] if conv else [f"T = {T} K: some boxes not converged"]
        res.add_row([T, fit.B_eff, fit.residual, fit.n_points], note)
        profiles[repr(T)] = {"B0": list(prof.column("B0")),
                             "eps_B": list(prof.column("eps_B_optical"))}
        tasks.append({"task": len(tasks), "status": "ok", "converged": conv,
                      "temperature": T})
    res.provenance = {"profiles": profiles}
    return res, tasks


RUNNERS = {
    "rqm-rates": _run_rqm_rates,
    "rqm-kinetics": _run_rqm_kinetics,
    "j-scan": _run_j_scan,
    "masdnp-run": _run_masdnp,
    "field-profile": _run_field_profile,
    "hp-sweep": _run_hp_sweep,
    "fit-beff": _run_fit_beff,
}


# ----------------------------------------------------------------------- persistence

def format_number(x):
    """17 significant digits: enough to round-trip every double."""
    return format(float(x), ".17g")


def write_results_csv(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header())
        for r in result.rows:
            w.writerow([format_number(x) for x in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def resolve_workers(cfg, workers=None):
    """CLI flag, then config, then OPDNP_WORKERS, then the number of logical cores."""
    for w in (workers, cfg.workers, os.environ.get("OPDNP_WORKERS")):
        if w is not None and w != "":
            w = int(w)
            if w < 1:
                raise ValueError("workers must be >= 1")
            return w
    return os.cpu_count() or 1


def resolve_output(cfg, out=None):
    for o in (out, cfg.output_dir, os.environ.get("OPDNP_OUT")):
        if o:
            return Path(o)
    return Path("runs")


def _fresh_dir(root, stem):
    root.mkdir(parents=True, exist_ok=True)
    for i in range(10000):
        d = root / (stem if i == 0 else f"{stem}-{i}")
        try:
            d.mkdir()
            return d
        except FileExistsError:
            continue
    raise RuntimeError(f"could not create a fresh run directory under {root}")


def run_scenario(cfg, workers=None, out=None):
    """Execute ``cfg`` and persist manifest.json, results.csv and diagnostics.json.

    Returns (RunManifest, SweepResult or None).  The manifest is written before any
    result; its final status is ``ok`` only if every task succeeded and converged.
    """
    from .config import serialize

    n_workers = resolve_workers(cfg, workers)
    now = _dt.datetime.now(_dt.timezone.utc)
    h = cfg.config_hash()
    run_dir = _fresh_dir(resolve_output(cfg, out),
                         f"{now.strftime('%Y%m%dT%H%M%S')}_{cfg.scenario}_{h[:8]}")
    man = RunManifest(h, __version__, now.isoformat(), cfg.seed, cfg.scenario, str(run_dir))
    man.write(run_dir / "manifest.json")
    (run_dir / "config.toml").write_text(serialize(cfg))
    log.info("run %s: %s with %d worker(s)", run_dir, cfg.scenario, n_workers)
    result = None
    diagnostics = {"workers": n_workers}
    try:
        with Pool(n_workers) as pool:
            result, tasks = RUNNERS[cfg.scenario](cfg, pool)
        man.tasks = tasks
        conv = [t["converged"] for t in tasks if "converged" in t]
        man.converged = all(conv) if conv else None
        man.status = "ok" if man.converged in (None, True) else "not-converged"
        write_results_csv(result, run_dir / "results.csv")
        diagnostics.update({"rows": _jsonable(result.diagnostics),
                            "provenance": _jsonable(result.provenance),
                            "columns": result.columns, "units": result.units})
    except Exception as exc:
        log.error("run failed: %s", exc)
        man.status = "failed"
        man.error = f"{type(exc).__name__}: {exc}"
        diagnostics["error"] = man.error
    (run_dir / "diagnostics.json").write_text(
        json.dumps(_jsonable(diagnostics), indent=2, sort_keys=True) + "\n")
    man.write(run_dir / "manifest.json")
    return man, result
