"""Experiment configuration files (YAML, versioned by ``schema_version``).

A config names one experiment kind plus the blocks that kind reads::

    schema_version: 1
    kind: init_sweep            # init_sweep | manip_sweep | splitting_scan | spectrum_flow | classify
    lattice: {n: 2, j_x: 1.0, j_y: 1.0, bonds: pair}   # bonds: pair | square
    schedule: {taus: [5, 10, 20, 50, 100], form: gaussian, samples: 0}
    pulse: {axis: Y, g_values: null, target_angle: 0.39269908169872414,
            duration_gaps: 200.0, envelope: sin2}
    noise: {kind: none, amplitudes: [0.0], axis: null}
    scan: {axis: X, amplitudes: [0.003, 0.01, 0.03]}
    classify: {strings: ["Y11 Y12"], pairs: [[Y, X]]}
    integrator: {dt: null, verify: false}
    seeds: [0]

Missing blocks take the defaults below. Every numeric field is checked
against the preconditions of the code it feeds before anything runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .dynamics import ENVELOPES, RAMP_FORMS
from .lattice import BOND_CONVENTIONS, MAX_SPINS, Axis, LatticeSpec, PauliString
from .protocols import NOISE_KINDS, _nominal

SCHEMA_VERSION = 1
KINDS = ("init_sweep", "manip_sweep", "splitting_scan", "spectrum_flow", "classify")
RANDOM_NOISE = ("random_orientation", "coupling_fluctuation")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class LatticeBlock:
    n: int = 2
    j_x: float = 1.0
    j_y: float = 1.0
    bonds: str = "pair"


@dataclass(frozen=True)
class ScheduleBlock:
    taus: tuple[float, ...] = (5.0, 10.0, 20.0, 50.0, 100.0)
    form: str = "gaussian"
    samples: int = 0  # evenly spaced trace points per run; 0 = final error only


@dataclass(frozen=True)
class PulseBlock:
    axis: str = "Y"
    g_values: tuple[float, ...] | None = None  # None: calibrate to target_angle
    target_angle: float = 0.39269908169872414  # pi / 8
    duration_gaps: float = 200.0
    envelope: str = "sin2"


@dataclass(frozen=True)
class NoiseBlock:
    kind: str = "none"
    amplitudes: tuple[float, ...] = (0.0,)
    axis: str | None = None


@dataclass(frozen=True)
class ScanBlock:
    axis: str = "X"
    amplitudes: tuple[float, ...] = (0.003, 0.006, 0.01, 0.02, 0.03, 0.06, 0.1)


@dataclass(frozen=True)
class ClassifyBlock:
    strings: tuple[str, ...] = ()
    pairs: tuple[tuple[str, str], ...] = ()
    oracle: bool = True


@dataclass(frozen=True)
class IntegratorBlock:
    dt: float | None = None
    verify: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    lattice: LatticeBlock = field(default_factory=LatticeBlock)
    schedule: ScheduleBlock = field(default_factory=ScheduleBlock)
    pulse: PulseBlock = field(default_factory=PulseBlock)
    noise: NoiseBlock = field(default_factory=NoiseBlock)
    scan: ScanBlock = field(default_factory=ScanBlock)
    classify: ClassifyBlock = field(default_factory=ClassifyBlock)
    integrator: IntegratorBlock = field(default_factory=IntegratorBlock)
    seeds: tuple[int, ...] = (0,)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        validate(self)

    @property
    def random_noise(self) -> bool:
        return self.noise.kind in RANDOM_NOISE

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def with_seeds(self, seeds) -> "ExperimentConfig":
        return replace(self, seeds=tuple(int(s) for s in seeds))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


def _positive_list(values, path: str, allow_zero: bool = False) -> None:
    _require(len(values) > 0, path, "must not be empty")
    for k, v in enumerate(values):
        ok = v >= 0 if allow_zero else v > 0
        _require(ok, f"{path}[{k}]", f"must be {'nonnegative' if allow_zero else 'positive'}, got {v}")


def _axis(value, path: str, allowed=("X", "Y", "Z")) -> None:
    try:
        ax = Axis.parse(value)
    except (ValueError, TypeError, KeyError):
        raise ConfigError(path, f"unknown axis {value!r}") from None
    _require(ax.value in allowed, path, f"axis must be one of {allowed}, got {ax.value}")


def _gap(lat: LatticeBlock) -> float:
    return _nominal(LatticeSpec(lat.n, lat.j_x, lat.j_y, lat.bonds))[1].gap


def validate(cfg: ExperimentConfig) -> None:
    _require(cfg.schema_version == SCHEMA_VERSION, "schema_version",
             f"unsupported version {cfg.schema_version}; expected {SCHEMA_VERSION}")
    _require(cfg.kind in KINDS, "kind", f"must be one of {KINDS}, got {cfg.kind!r}")
    lat = cfg.lattice
    _require(isinstance(lat.n, int) and lat.n >= 2, "lattice.n", f"must be an integer >= 2, got {lat.n}")
    _require(lat.n * lat.n <= MAX_SPINS, "lattice.n", f"n^2 = {lat.n * lat.n} spins exceeds {MAX_SPINS}")
    _require(lat.j_x > 0, "lattice.j_x", f"must be positive, got {lat.j_x}")
    _require(lat.j_y > 0, "lattice.j_y", f"must be positive, got {lat.j_y}")
    _require(lat.bonds in BOND_CONVENTIONS, "lattice.bonds",
             f"must be one of {BOND_CONVENTIONS}, got {lat.bonds!r}")
    _require(len(cfg.seeds) > 0, "seeds", "must not be empty")
    _require(len(set(cfg.seeds)) == len(cfg.seeds), "seeds", "must not repeat")
    for k, s in enumerate(cfg.seeds):
        _require(isinstance(s, int) and 0 <= s < 2 ** 64, f"seeds[{k}]", f"must be a 64-bit unsigned integer, got {s}")
    if cfg.integrator.dt is not None:
        _require(cfg.integrator.dt > 0, "integrator.dt", f"must be positive, got {cfg.integrator.dt}")

    if cfg.kind in ("init_sweep", "spectrum_flow"):
        sch = cfg.schedule
        _positive_list(sch.taus, "schedule.taus")
        _require(sch.form in RAMP_FORMS, "schedule.form", f"must be one of {RAMP_FORMS}, got {sch.form!r}")
        _require(sch.samples >= 0, "schedule.samples", f"must be nonnegative, got {sch.samples}")
        if cfg.kind == "spectrum_flow":
            _require(sch.samples >= 2, "schedule.samples", "spectrum_flow needs at least 2 sample times")
    if cfg.kind in ("init_sweep", "manip_sweep"):
        nz = cfg.noise
        _require(nz.kind in NOISE_KINDS, "noise.kind", f"must be one of {NOISE_KINDS}, got {nz.kind!r}")
        _positive_list(nz.amplitudes, "noise.amplitudes", allow_zero=True)
        if nz.kind == "directional":
            _require(nz.axis is not None, "noise.axis", "directional noise needs an axis")
            _axis(nz.axis, "noise.axis")
        if nz.kind == "coupling_fluctuation":
            for k, a in enumerate(nz.amplitudes):
                _require(a < 1, f"noise.amplitudes[{k}]", f"coupling fluctuation must stay below 1, got {a}")
    if cfg.kind == "manip_sweep":
        p = cfg.pulse
        _axis(p.axis, "pulse.axis", ("X", "Y"))
        _require(p.envelope in ENVELOPES, "pulse.envelope", f"must be one of {ENVELOPES}, got {p.envelope!r}")
        _require(p.duration_gaps > 0, "pulse.duration_gaps", f"must be positive, got {p.duration_gaps}")
        if p.g_values is None:
            _require(0 < p.target_angle < 1.5707963267948966, "pulse.target_angle",
                     f"must lie in (0, pi/2), got {p.target_angle}")
        else:
            _positive_list(p.g_values, "pulse.g_values")
            gap = _gap(lat)
            for k, g in enumerate(p.g_values):
                _require(g < gap, f"pulse.g_values[{k}]", f"must stay below the gap {gap:.6g}, got {g}")
    if cfg.kind == "splitting_scan":
        _axis(cfg.scan.axis, "scan.axis")
        _positive_list(cfg.scan.amplitudes, "scan.amplitudes", allow_zero=True)
        gap = _gap(lat)
        for k, a in enumerate(cfg.scan.amplitudes):
            _require(a < gap / 2, f"scan.amplitudes[{k}]", f"must stay below gap/2 = {gap / 2:.6g}, got {a}")
    if cfg.kind == "classify":
        c = cfg.classify
        _require(c.strings or c.pairs, "classify", "needs strings or pairs")
        for k, s in enumerate(c.strings):
            try:
                ps = PauliString.parse(s)
            except ValueError as e:
                raise ConfigError(f"classify.strings[{k}]", str(e)) from None
            for (i, j), _ in ps.factors:
                _require(i <= lat.n and j <= lat.n, f"classify.strings[{k}]",
                         f"site ({i},{j}) outside the {lat.n}x{lat.n} lattice")
        for k, pair in enumerate(c.pairs):
            _require(len(pair) == 2, f"classify.pairs[{k}]", "must be [manip_axis, noise_axis]")
            _axis(pair[0], f"classify.pairs[{k}][0]", ("X", "Y"))
            _axis(pair[1], f"classify.pairs[{k}][1]")


_BLOCKS = {
    "lattice": LatticeBlock,
    "schedule": ScheduleBlock,
    "pulse": PulseBlock,
    "noise": NoiseBlock,
    "scan": ScanBlock,
    "classify": ClassifyBlock,
    "integrator": IntegratorBlock,
}
_FLOAT_LISTS = {"taus", "amplitudes", "g_values"}
_FLOATS = {"j_x", "j_y", "target_angle", "duration_gaps", "dt"}


def _coerce_block(name: str, raw) -> object:
    cls = _BLOCKS[name]
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be a mapping")
    known = set(cls.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", f"unknown key; expected one of {sorted(known)}")
    out = {}
    for key, value in raw.items():
        path = f"{name}.{key}"
        try:
            if value is None:
                out[key] = None
            elif key in _FLOAT_LISTS:
                if not isinstance(value, (list, tuple)):
                    value = [value]
                out[key] = tuple(float(v) for v in value)
            elif key in _FLOATS:
                out[key] = float(value)
            elif key == "strings":
                out[key] = tuple(str(v) for v in value)
            elif key == "pairs":
                out[key] = tuple(tuple(str(a) for a in p) for p in value)
            elif key in ("n", "samples"):
                if isinstance(value, bool) or int(value) != value:
                    raise ConfigError(path, f"must be an integer, got {value!r}")
                out[key] = int(value)
            elif key in ("verify", "oracle"):
                if not isinstance(value, bool):
                    raise ConfigError(path, f"must be true or false, got {value!r}")
                out[key] = value
            else:
                out[key] = str(value)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(path, f"cannot interpret {value!r}") from None
    return cls(**out)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    known = {"schema_version", "kind", "seeds", *_BLOCKS}
    for key in raw:
        if key not in known:
            raise ConfigError(key, f"unknown key; expected one of {sorted(known)}")
    if "schema_version" not in raw:
        raise ConfigError("schema_version", "missing")
    if "kind" not in raw:
        raise ConfigError("kind", "missing")
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, (list, tuple)):
        seeds = [seeds]
    for k, s in enumerate(seeds):
        if isinstance(s, bool) or not isinstance(s, int):
            raise ConfigError(f"seeds[{k}]", f"must be an integer, got {s!r}")
    blocks = {name: _coerce_block(name, raw.get(name)) for name in _BLOCKS}
    return ExperimentConfig(
        kind=str(raw["kind"]),
        seeds=tuple(seeds),
        schema_version=raw["schema_version"],
        **blocks,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError("<file>", f"not valid YAML: {e}") from None
    return config_from_dict(raw)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
