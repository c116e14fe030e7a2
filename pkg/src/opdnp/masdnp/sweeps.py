"""Box-averaged sweeps over field, drive mode and optical target, plus the B_eff fit."""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.optimize import least_squares

from ..results import SweepResult
from .box import build_box
from .propagate import epsilon_B, simulate_to_steady_state
from .system import PRESETS

MODES = ("conventional", "optical", "optical+uw")


class FitDegenerateError(ValueError):
    pass


@dataclass(frozen=True)
class BoxTemplate:
    """Recipe for the boxes averaged at every sweep point.

    Box k is built with seed ``seed + k``; ``n_boxes * n_units`` is the number of
    crystallites in the average.
    """

    spec: object
    relax: object
    n_units: int = 8
    n_boxes: int = 4
    concentration: float = 10.0  # mM
    min_distance: float = 4.2  # nm
    seed: int = 0
    samples_per_period: int = 2048
    max_rotor_periods: int = 200000
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if self.n_units < 1 or self.n_boxes < 1:
            raise ValueError("n_units and n_boxes must be >= 1")

    @classmethod
    def from_preset(cls, name, **kw):
        pr = PRESETS[name]
        kw.setdefault("concentration", pr.concentration)
        kw.setdefault("min_distance", pr.min_distance)
        return cls(pr.spec, pr.relax, **kw)

    @property
    def n_crystallites(self):
        return self.n_units * self.n_boxes

    def replace(self, **kw):
        return replace(self, **kw)

    def box(self, k):
        return build_box(self.spec, self.n_units, self.concentration, self.min_distance,
                         self.seed + k)


def mode_drive(drive, mode, optical_target=-0.75):
    """Drive for one of the three field-profile modes."""
    if mode == "conventional":
        return drive.replace(optical_target=None)
    if mode == "optical":
        return drive.replace(uw_nutation=0.0, optical_target=optical_target)
    if mode == "optical+uw":
        return drive.replace(optical_target=optical_target)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def box_task(args):
    """One independent task: (template, box index, drive) -> (mean eps, converged, periods).

    Module-level so a process pool can pickle it.
    """
    template, k, drive = args
    box = template.box(k)
    state, diag = simulate_to_steady_state(
        box, template.relax, drive, max_rotor_periods=template.max_rotor_periods,
        convergence_tol=template.convergence_tol,
        samples_per_period=template.samples_per_period)
    return float(np.mean(epsilon_B(state.P_n, drive))), diag.converged, diag.periods


def _averaged(template, drives, map_fn):
    """Box-averaged eps for each drive; tasks are merged in submission order."""
    tasks = [(template, k, d) for d in drives for k in range(template.n_boxes)]
    out = list(map_fn(box_task, tasks))
    res = []
    for i in range(len(drives)):
        chunk = out[i * template.n_boxes:(i + 1) * template.n_boxes]
        eps = float(np.mean([c[0] for c in chunk]))
        bad = [k for k, c in enumerate(chunk) if not c[1]]
        res.append((eps, not bad, bad))
    return res


def _column(mode):
    return "eps_B_" + mode.replace("+", "_")


def field_profile(template, B0_values, drive, modes=MODES, optical_target=-0.75,
                  map_fn=map):
    """eps_B against B0 at fixed microwave frequency for each requested mode."""
    B0_values = [float(b) for b in B0_values]
    if not B0_values:
        raise ValueError("B0_values is empty")
    modes = list(modes)
    for m in modes:
        mode_drive(drive, m)
    drives = [mode_drive(drive.replace(B0=b), m, optical_target)
              for b in B0_values for m in modes]
    vals = _averaged(template, drives, map_fn)
    res = SweepResult(["B0"] + [_column(m) for m in modes] + ["converged"],
                      ["T"] + ["1"] * len(modes) + ["1"])
    for i, b in enumerate(B0_values):
        chunk = vals[i * len(modes):(i + 1) * len(modes)]
        notes = [f"{m}: boxes {bad} not converged" for m, (_, ok, bad) in zip(modes, chunk)
                 if not ok]
        res.add_row([b] + [c[0] for c in chunk] + [float(all(c[1] for c in chunk))], notes)
    res.provenance = {"operation": "field_profile", "n_crystallites": template.n_crystallites,
                      "optical_target": optical_target}
    return res


def hyperpolarization_sweep(template, P_targets, drive, with_uw=True, map_fn=map):
    """eps_B against the optical target, without microwaves and (if ``with_uw``) with."""
    P_targets = [float(p) for p in P_targets]
    if not P_targets:
        raise ValueError("P_targets is empty")
    if any(abs(p) > 1 for p in P_targets):
        raise ValueError("optical targets must lie in [-1, 1]")
    series = [("no_uw", 0.0)] + ([("uw", drive.uw_nutation)] if with_uw else [])
    drives = [drive.replace(uw_nutation=nu, optical_target=p)
              for p in P_targets for _, nu in series]
    vals = _averaged(template, drives, map_fn)
    res = SweepResult(["P_target"] + [f"eps_B_{s}" for s, _ in series] + ["converged"],
                      ["1"] * (len(series) + 2))
    for i, p in enumerate(P_targets):
        chunk = vals[i * len(series):(i + 1) * len(series)]
        notes = [f"{s}: boxes {bad} not converged"
                 for (s, _), (_, ok, bad) in zip(series, chunk) if not ok]
        res.add_row([p] + [c[0] for c in chunk] + [float(all(c[1] for c in chunk))], notes)
    res.provenance = {"operation": "hyperpolarization_sweep",
                      "n_crystallites": template.n_crystallites}
    return res


@dataclass(frozen=True)
class EffectiveFieldFit:
    B_eff: float  # T
    residual: float  # RMS relative residual of |eps|
    n_points: int


def _fit_model(B_eff, B0):
    return np.abs(B_eff - B0) / B0


def fit_effective_field(B0, eps=None):
    """Least-squares fit of |eps| = |B_eff - B0| / B0 in B_eff.

    Accepts a SweepResult with a ``B0`` column and one eps column, or two arrays.
    Residuals are relative to |eps|.
    """
    if eps is None:
        res = B0
        cols = [c for c in res.columns if c.startswith("eps_B")]
        if len(cols) != 1:
            raise ValueError(f"need exactly one eps_B column, found {cols}")
        B0, eps = res.column("B0"), res.column(cols[0])
    B0 = np.asarray(B0, dtype=float)
    y = np.abs(np.asarray(eps, dtype=float))
    if B0.shape != y.shape or B0.ndim != 1:
        raise ValueError("B0 and eps must be 1-D arrays of equal length")
    if len(B0) < 3:
        raise ValueError("need at least 3 field points")
    if not (np.all(np.isfinite(B0)) and np.all(np.isfinite(y))) or np.any(B0 <= 0):
        raise ValueError("fields must be positive and values finite")
    if np.ptp(y) == 0:
        raise FitDegenerateError("all |eps_B| equal; B_eff is not determined")
    if np.any(y == 0):
        raise FitDegenerateError("|eps_B| = 0 makes the relative residual undefined")

    def resid(x):
        return (_fit_model(x[0], B0) - y) / y

    best = None
    for sign in (1.0, -1.0):
        x0 = float(np.median(B0 * (1 + sign * y)))
        sol = least_squares(resid, [x0], x_scale=[max(abs(x0), 1.0)])
        if best is None or sol.cost < best.cost:
            best = sol
    r = resid(best.x)
    return EffectiveFieldFit(float(best.x[0]), float(math.sqrt(np.mean(r * r))), len(B0))
