"""Scenario configuration: TOML documents with explicit units on every physical value.

Layout::

    scenario = "field-profile"
    preset = "trityl-tempo"
    seed = 0

    [overrides.spin]          # SpinSystemSpec fields
    D_ab = "30 MHz"
    [overrides.drive]         # DriveConfig fields
    temperature = "100 K"
    [sweep]
    B0 = ["18.6 T", "18.8 T"]
    [options]
    n_units = 8

Sections under ``overrides`` are ``spin``, ``relax``, ``drive`` (MAS-DNP) and ``rqm``
(photophysics).  Values are converted to internal units on parsing and written back in
those units by ``serialize``, so the round trip is exact.
"""

from dataclasses import dataclass, field
import hashlib
import json
import math
import sys

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..masdnp.system import PRESETS as MAS_PRESETS
from ..rqm.params import PRESETS as RQM_PRESETS, RqmParams
from ..spincore import EulerAngles
from ..units import UNITS, parse_quantity

SCENARIOS = ("rqm-rates", "rqm-kinetics", "j-scan", "masdnp-run", "field-profile",
             "hp-sweep", "fit-beff")
RQM_SCENARIOS = ("rqm-rates", "rqm-kinetics", "j-scan")
DEFAULT_PRESET = {"rqm-rates": "jscan-527", "rqm-kinetics": "ancoot-rqm",
                  "j-scan": "jscan-527"}

# internal unit written by serialize() for each dimension
INTERNAL_UNIT = {"frequency": "Hz", "time": "s", "rate": "s-1", "temperature": "K",
                 "field": "T", "wavenumber": "cm-1", "molar_energy": "kJ/mol",
                 "length": "nm", "concentration": "mM", "angle": "rad", "speed": "cm/s"}

POSITIVE = (0.0, math.inf, False)


@dataclass(frozen=True)
class Field:
    """Schema entry: ``dim`` None means dimensionless; ``size`` None means a scalar."""

    dim: object = None
    size: object = None
    kind: str = "float"  # float | int | str | bool
    bounds: tuple = None  # (lo, hi, inclusive)
    choices: tuple = None


def _f(dim=None, size=None, bounds=None):
    return Field(dim, size, "float", bounds)


OVERRIDES = {
    "spin": {
        "g_a": _f(size=3, bounds=(1.9, 2.1, False)),
        "g_b": _f(size=3, bounds=(1.9, 2.1, False)),
        "euler_ab": _f("angle", 3),
        "euler_a": _f("angle", 3),
        "D_ab": _f("frequency"),
        "J_ab": _f("frequency"),
        "A_hf": _f("frequency"),
        "dipolar_angles": _f("angle", 2),
        "hyperfine_angles": _f("angle", 2),
        "hf_electron": Field(kind="str", choices=("a", "b")),
    },
    "relax": {
        "T1e_a_eff": _f("time", bounds=POSITIVE),
        "T1e_b": _f("time", bounds=POSITIVE),
        "T2e": _f("time", bounds=POSITIVE),
        "T1n": _f("time", bounds=POSITIVE),
        "pumped": Field(kind="str", choices=("a", "b")),
    },
    "drive": {
        "uw_frequency": _f("frequency", bounds=POSITIVE),
        "uw_nutation": _f("frequency", bounds=(0.0, math.inf, True)),
        "B0": _f("field", bounds=POSITIVE),
        "temperature": _f("temperature", bounds=POSITIVE),
        "mas_rate": _f("frequency", bounds=POSITIVE),
        "optical_target": _f(bounds=(-1.0, 1.0, True)),
    },
    "rqm": {
        "J_CR": _f("wavenumber"),
        "D_zfs": _f("wavenumber"),
        "E_zfs": _f("wavenumber"),
        "k0_DQ": _f("rate", bounds=(0.0, math.inf, True)),
        "E_a": _f("molar_energy"),
        "temperature": _f("temperature", bounds=POSITIVE),
        "field_frequency": _f("frequency", bounds=POSITIVE),
        "k_qt": _f("rate", bounds=(0.0, math.inf, True)),
        "k_Q0": _f("rate", bounds=(0.0, math.inf, True)),
        "W_Q1": _f("rate", bounds=(0.0, math.inf, True)),
        "W_D1": _f("rate", bounds=(0.0, math.inf, True)),
        "W_D0": _f("rate", bounds=(0.0, math.inf, True)),
        "initial_populations": _f(size=8, bounds=(0.0, math.inf, True)),
        "light_speed": _f("speed", bounds=POSITIVE),
    },
}

OPTIONS = {
    "n_units": Field(kind="int", bounds=(1, math.inf, True)),
    "n_boxes": Field(kind="int", bounds=(1, math.inf, True)),
    "concentration": _f("concentration", bounds=POSITIVE),
    "min_distance": _f("length", bounds=(0.0, math.inf, True)),
    "samples_per_period": Field(kind="int", bounds=(512, math.inf, True)),
    "max_rotor_periods": Field(kind="int", bounds=(1, math.inf, True)),
    "convergence_tol": _f(bounds=POSITIVE),
    "optical_target": _f(bounds=(-1.0, 1.0, True)),
    "modes": Field(kind="str", size="list",
                   choices=("conventional", "optical", "optical+uw")),
    "with_uw": Field(kind="bool"),
    "grid_scheme": Field(kind="str", choices=("golden-spiral", "uniform-random",
                                              "repulsion-file")),
    "grid_n": Field(kind="int", bounds=(1, math.inf, True)),
    "grid_path": Field(kind="str"),
    "average": Field(kind="str", choices=("mean-square", "square-of-mean")),
    "method": Field(kind="str", choices=("matrix-exponential", "rk4-fixed-step")),
    "t_end": _f("time", bounds=POSITIVE),
    "n_times": Field(kind="int", bounds=(2, math.inf, True)),
    "irf_time": _f("time", bounds=(0.0, math.inf, True)),
    "input": Field(kind="str"),
}

SWEEPS = {
    "j-scan": {"J_CR": _f("wavenumber", bounds=(-math.inf, 0.0, False))},
    "field-profile": {"B0": _f("field", bounds=POSITIVE)},
    "hp-sweep": {"P_target": _f(bounds=(-1.0, 1.0, True))},
    "fit-beff": {"B0": _f("field", bounds=POSITIVE),
                 "temperature": _f("temperature", bounds=POSITIVE)},
}

TOP_KEYS = ("scenario", "preset", "seed", "workers", "output_dir", "overrides", "sweep",
            "options")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Validated scenario; every physical value already in internal units."""

    scenario: str
    preset: str
    overrides: dict = field(default_factory=dict)  # section -> {field: value}
    sweep: dict = field(default_factory=dict)  # axis -> tuple of values
    options: dict = field(default_factory=dict)
    seed: int = 0
    workers: object = None
    output_dir: object = None

    # ---- model objects with overrides applied
    def rqm_params(self):
        base = RQM_PRESETS[self.preset]
        return base.replace(**self.overrides.get("rqm", {}))

    def _mas(self):
        return MAS_PRESETS[self.preset]

    def spin_spec(self):
        kw = dict(self.overrides.get("spin", {}))
        for k in ("euler_ab", "euler_a"):
            if k in kw:
                kw[k] = EulerAngles(*kw[k])
        return self._mas().spec.replace(**kw)

    def relax_set(self):
        return self._mas().relax.replace(**self.overrides.get("relax", {}))

    def drive_config(self):
        return self._mas().drive.replace(**self.overrides.get("drive", {}))

    def option(self, name, default=None):
        return self.options.get(name, default)

    def canonical(self):
        """Plain-data form used for hashing and serialization (internal units)."""
        doc = {"scenario": self.scenario, "preset": self.preset, "seed": self.seed}
        if self.overrides:
            doc["overrides"] = {s: {k: _emit(OVERRIDES[s][k], v) for k, v in sec.items()}
                                for s, sec in self.overrides.items() if sec}
        if self.sweep:
            schema = SWEEPS[self.scenario]
            doc["sweep"] = {k: [_emit(schema[k], x) for x in v] for k, v in self.sweep.items()}
        if self.options:
            doc["options"] = {k: _emit(OPTIONS[k], v) for k, v in self.options.items()}
        return doc

    def config_hash(self):
        """SHA-256 of the canonical document; independent of key order, workers and
        output directory."""
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _emit(spec, value):
    if spec.dim is None:
        if spec.size == "list":
            return list(value)
        if spec.size is not None:
            return [float(x) for x in value]
        return value
    unit = INTERNAL_UNIT[spec.dim]
    if spec.size is not None:
        return [f"{float(x)!r} {unit}" for x in value]
    return f"{float(value)!r} {unit}"


def _check_bounds(key, spec, x):
    if spec.bounds is None:
        return
    lo, hi, inclusive = spec.bounds
    ok = (lo <= x <= hi) if inclusive else (lo < x < hi)
    if not ok:
        br = "[]" if inclusive else "()"
        raise ConfigError(f"{key} = {x!r} out of range; expected {br[0]}{lo}, {hi}{br[1]}")


def _scalar(key, spec, raw):
    if spec.kind == "str":
        if not isinstance(raw, str):
            raise ConfigError(f"{key} must be a string")
        if spec.choices and raw not in spec.choices:
            raise ConfigError(f"{key} = {raw!r}; expected one of {list(spec.choices)}")
        return raw
    if spec.kind == "bool":
        if not isinstance(raw, bool):
            raise ConfigError(f"{key} must be true or false")
        return raw
    if spec.kind == "int":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigError(f"{key} must be an integer")
        _check_bounds(key, spec, raw)
        return raw
    if spec.dim is None:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"{key} is dimensionless and must be a number, got {raw!r}")
        x = float(raw)
    else:
        if not isinstance(raw, str):
            raise ConfigError(f"{key} needs a unit, e.g. \"{raw} {INTERNAL_UNIT[spec.dim]}\"")
        try:
            x = parse_quantity(raw, spec.dim)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{key} must be finite")
    _check_bounds(key, spec, x)
    return x


def _value(key, spec, raw):
    if spec.size is None:
        return _scalar(key, spec, raw)
    if not isinstance(raw, list):
        raise ConfigError(f"{key} must be a list")
    if spec.size != "list" and len(raw) != spec.size:
        raise ConfigError(f"{key} needs {spec.size} entries, got {len(raw)}")
    item = Field(spec.dim, None, spec.kind, spec.bounds, spec.choices)
    return tuple(_scalar(f"{key}[{i}]", item, x) for i, x in enumerate(raw))


def _table(name, raw, schema):
    if not isinstance(raw, dict):
        raise ConfigError(f"{name} must be a table")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {unknown}; allowed: {sorted(schema)}")
    return {k: _value(f"{name}.{k}", schema[k], v) for k, v in raw.items()}


def config_from_dict(doc, scenario=None):
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a table")
    unknown = sorted(set(doc) - set(TOP_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {unknown}; allowed: {list(TOP_KEYS)}")
    sc = doc.get("scenario", scenario)
    if sc is None:
        raise ConfigError("missing required key(s): ['scenario']; "
                          f"scenario must be one of {list(SCENARIOS)}")
    if scenario is not None and sc != scenario:
        raise ConfigError(f"config scenario {sc!r} does not match subcommand {scenario!r}")
    if sc not in SCENARIOS:
        raise ConfigError(f"scenario = {sc!r}; expected one of {list(SCENARIOS)}")
    presets = RQM_PRESETS if sc in RQM_SCENARIOS else MAS_PRESETS
    preset = doc.get("preset", DEFAULT_PRESET.get(sc, "trityl-tempo"))
    if preset not in presets:
        raise ConfigError(f"preset = {preset!r}; expected one of {sorted(presets)}")
    sections = ("rqm",) if sc in RQM_SCENARIOS else ("spin", "relax", "drive")
    raw_over = doc.get("overrides", {})
    if not isinstance(raw_over, dict):
        raise ConfigError("overrides must be a table")
    bad = sorted(set(raw_over) - set(sections))
    if bad:
        raise ConfigError(f"override section(s) {bad} not valid for {sc}; "
                          f"allowed: {list(sections)}")
    overrides = {s: _table(f"overrides.{s}", raw_over[s], OVERRIDES[s]) for s in raw_over}
    axes = {k: Field(f.dim, "list", f.kind, f.bounds) for k, f in SWEEPS.get(sc, {}).items()}
    sweep = _table("sweep", doc.get("sweep", {}), axes)
    for k, v in sweep.items():
        if not v:
            raise ConfigError(f"sweep.{k} is empty")
    options = _table("options", doc.get("options", {}), OPTIONS)
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    workers = doc.get("workers")
    if workers is not None and (isinstance(workers, bool) or not isinstance(workers, int)
                                or workers < 1):
        raise ConfigError("workers must be an integer >= 1")
    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir must be a string")
    cfg = ScenarioConfig(sc, preset, overrides, sweep, options, seed, workers, out)
    _validate_models(cfg)
    return cfg


def _validate_models(cfg):
    """Build the model objects once so cross-field checks fail at parse time."""
    try:
        if cfg.scenario in RQM_SCENARIOS:
            cfg.rqm_params()
        else:
            cfg.spin_spec()
            cfg.relax_set()
            cfg.drive_config()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid overrides: {exc}") from None


def parse_config(text, scenario=None):
    """Parse a TOML document into a validated ScenarioConfig."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed document: {exc}") from None
    return config_from_dict(doc, scenario)


def serialize(config):
    """TOML text that parses back to an equal config."""
    doc = config.canonical()
    if config.workers is not None:
        doc["workers"] = config.workers
    if config.output_dir is not None:
        doc["output_dir"] = config.output_dir
    return tomli_w.dumps(doc)

