"""Experiment configuration: angles with units, validation, JSON round-trip.

A config file is a single JSON document with explicit unit suffixes on every
angle ("0.025 deg", "90 arcsec", "1.5e-3 rad").  Parsing is strict: unknown
keys and malformed values raise ``ConfigError`` naming the offending field,
so a typo never silently falls back to a default.  Serialization preserves
the original value and unit of every angle, making parse -> serialize ->
parse the identity.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError
from .montecarlo import NoiseModel, quadrature_phi0
from .optics import DovePrismModel
from .switch import OpticsTrain, SwitchParams

__all__ = [
    "Angle",
    "SweepSpec",
    "NoiseSpec",
    "DoveSpec",
    "OutputSpec",
    "ExperimentConfig",
    "config_hash",
    "resolve_output_dir",
    "preset_names",
    "load_preset",
    "OUTPUT_DIR_ENV",
]

OUTPUT_DIR_ENV = "OAMSWITCH_OUT"

# pi-based so 0.025 deg == 90 arcsec == pi/7200 rad exactly in binary64
_UNIT_RAD = {
    "rad": 1.0,
    "deg": math.pi / 180.0,
    "arcsec": math.pi / 648000.0,
}
_UNIT_ALIASES = {
    "rad": "rad",
    "radian": "rad",
    "radians": "rad",
    "deg": "deg",
    "degree": "deg",
    "degrees": "deg",
    "arcsec": "arcsec",
    "arcsecond": "arcsec",
    "arcseconds": "arcsec",
}


@dataclass(frozen=True)
class Angle:
    """An angle that remembers the unit it was written in."""

    value: float
    unit: str = "rad"

    def __post_init__(self) -> None:
        unit = _UNIT_ALIASES.get(str(self.unit).lower())
        if unit is None:
            raise ConfigError(
                f"unknown angle unit {self.unit!r}; use one of {sorted(_UNIT_RAD)}"
            )
        object.__setattr__(self, "unit", unit)
        v = float(self.value)
        if not math.isfinite(v):
            raise ConfigError(f"angle value must be finite, got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def radians(self) -> float:
        return self.value * _UNIT_RAD[self.unit]

    def to(self, unit: str) -> float:
        target = _UNIT_ALIASES.get(str(unit).lower())
        if target is None:
            raise ConfigError(f"unknown angle unit {unit!r}; use one of {sorted(_UNIT_RAD)}")
        return self.radians / _UNIT_RAD[target]

    @classmethod
    def parse(cls, raw, path: str = "angle") -> "Angle":
        """Accept a bare number (radians) or a "<value> <unit>" string."""
        if isinstance(raw, Angle):
            return raw
        if isinstance(raw, bool):
            raise ConfigError(f"{path}: expected an angle, got a boolean")
        if isinstance(raw, (int, float)):
            return cls(float(raw), "rad")
        if isinstance(raw, str):
            parts = raw.split()
            if len(parts) != 2:
                raise ConfigError(
                    f"{path}: angle strings need exactly a value and a unit, got {raw!r}"
                )
            try:
                value = float(parts[0])
            except ValueError:
                raise ConfigError(f"{path}: cannot parse {parts[0]!r} as a number") from None
            try:
                return cls(value, parts[1])
            except ConfigError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        raise ConfigError(f"{path}: expected an angle number or string, got {type(raw).__name__}")

    def serialize(self) -> str:
        return f"{self.value!r} {self.unit}"


def _reject_unknown(d: Mapping, allowed: Sequence[str], path: str) -> None:
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; allowed keys are {list(allowed)}")


def _as_int(raw, path: str, minimum: int | None = None, maximum: int | None = None) -> int:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{path}: expected an integer, got {raw!r}")
    if isinstance(raw, float) and raw != int(raw):
        raise ConfigError(f"{path}: expected an integer, got {raw!r}")
    v = int(raw)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {v}")
    if maximum is not None and v > maximum:
        raise ConfigError(f"{path}: must be <= {maximum}, got {v}")
    return v


def _as_float(raw, path: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {raw!r}")
    v = float(raw)
    if not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite, got {raw!r}")
    return v


def _as_bool(raw, path: str) -> bool:
    if not isinstance(raw, bool):
        raise ConfigError(f"{path}: expected true or false, got {raw!r}")
    return raw


@dataclass(frozen=True)
class SweepSpec:
    """Inclusive angle grid: ``steps`` samples from ``start`` to ``end``."""

    start: Angle
    end: Angle
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 2:
            raise ConfigError(f"theta_sweep.steps: need at least 2 samples, got {self.steps}")
        if not self.end.radians > self.start.radians:
            raise ConfigError("theta_sweep: end must be greater than start")

    def angles_rad(self) -> list[float]:
        # endpoint pinned exactly so a span declared as one full period is
        # not rounded a hair short of it
        a, b, n = self.start.radians, self.end.radians, self.steps
        grid = [a + (b - a) * (i / (n - 1)) for i in range(n - 1)]
        grid.append(b)
        return grid

    @classmethod
    def from_dict(cls, d: Mapping, path: str = "theta_sweep") -> "SweepSpec":
        if not isinstance(d, Mapping):
            raise ConfigError(f"{path}: expected an object with start/end/steps")
        _reject_unknown(d, ("start", "end", "steps"), path)
        for key in ("start", "end", "steps"):
            if key not in d:
                raise ConfigError(f"{path}.{key}: missing")
        return cls(
            start=Angle.parse(d["start"], f"{path}.start"),
            end=Angle.parse(d["end"], f"{path}.end"),
            steps=_as_int(d["steps"], f"{path}.steps", minimum=2),
        )

    def to_dict(self) -> dict:
        return {
            "start": self.start.serialize(),
            "end": self.end.serialize(),
            "steps": self.steps,
        }


@dataclass(frozen=True)
class NoiseSpec:
    """Declarative noise block; resolved against (m, l, nu) at run time.

    ``target_gap`` asks for rotation jitter sized so an otherwise ideal
    campaign lands that factor above the sampling floor; it is mutually
    exclusive with an explicit ``sigma_theta``.
    """

    visibility: float = 1.0
    sigma_theta: Angle = field(default_factory=lambda: Angle(0.0, "rad"))
    sigma_phi: Angle = field(default_factory=lambda: Angle(0.0, "rad"))
    efficiency: float = 1.0
    target_gap: float | None = None

    def __post_init__(self) -> None:
        if self.target_gap is not None:
            if self.target_gap < 1.0:
                raise ConfigError(f"noise.target_gap: must be >= 1, got {self.target_gap}")
            if self.sigma_theta.radians != 0.0:
                raise ConfigError(
                    "noise: target_gap and a nonzero sigma_theta are mutually exclusive"
                )

    def resolve(self, m: int, l: int, nu: int) -> NoiseModel:
        if self.target_gap is not None:
            jitter = NoiseModel.for_gap(m, l, nu, self.target_gap).sigma_theta
        else:
            jitter = self.sigma_theta.radians
        return NoiseModel(
            visibility=self.visibility,
            sigma_theta=jitter,
            sigma_phi=self.sigma_phi.radians,
            efficiency=self.efficiency,
        )

    @classmethod
    def from_dict(cls, d: Mapping, path: str = "noise") -> "NoiseSpec":
        if not isinstance(d, Mapping):
            raise ConfigError(f"{path}: expected an object")
        allowed = ("visibility", "sigma_theta", "sigma_phi", "efficiency", "target_gap")
        _reject_unknown(d, allowed, path)
        kwargs: dict = {}
        if "visibility" in d:
            kwargs["visibility"] = _as_float(d["visibility"], f"{path}.visibility")
        if "sigma_theta" in d:
            kwargs["sigma_theta"] = Angle.parse(d["sigma_theta"], f"{path}.sigma_theta")
        if "sigma_phi" in d:
            kwargs["sigma_phi"] = Angle.parse(d["sigma_phi"], f"{path}.sigma_phi")
        if "efficiency" in d:
            kwargs["efficiency"] = _as_float(d["efficiency"], f"{path}.efficiency")
        if "target_gap" in d and d["target_gap"] is not None:
            kwargs["target_gap"] = _as_float(d["target_gap"], f"{path}.target_gap")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out: dict = {
            "visibility": self.visibility,
            "sigma_theta": self.sigma_theta.serialize(),
            "sigma_phi": self.sigma_phi.serialize(),
            "efficiency": self.efficiency,
        }
        if self.target_gap is not None:
            out["target_gap"] = self.target_gap
        return out


@dataclass(frozen=True)
class DoveSpec:
    """Rotator-pair imperfection block.  ``alpha0`` orients both prisms."""

    delta: float = 0.2
    rho: float = 0.99
    alpha0: Angle = field(default_factory=lambda: Angle(0.0, "rad"))
    deflection_on: bool = False
    compensation_on: bool = True

    def train(self) -> OpticsTrain:
        alpha = self.alpha0.radians
        base = OpticsTrain.ideal()
        if not self.deflection_on:
            if self.compensation_on:
                return base
            return OpticsTrain(
                stationary=base.stationary,
                rotatable=base.rotatable,
                deflection_on=False,
                compensation_on=False,
            )
        return OpticsTrain.deflected(
            delta=self.delta,
            rho=self.rho,
            alpha_stationary=alpha,
            alpha_rotatable=alpha,
            compensation_on=self.compensation_on,
        )

    @classmethod
    def from_dict(cls, d: Mapping, path: str = "dove") -> "DoveSpec":
        if not isinstance(d, Mapping):
            raise ConfigError(f"{path}: expected an object")
        allowed = ("delta", "rho", "alpha0", "deflection_on", "compensation_on")
        _reject_unknown(d, allowed, path)
        kwargs: dict = {}
        if "delta" in d:
            kwargs["delta"] = _as_float(d["delta"], f"{path}.delta")
        if "rho" in d:
            kwargs["rho"] = _as_float(d["rho"], f"{path}.rho")
            if not 0.0 < kwargs["rho"] <= 1.0:
                raise ConfigError(f"{path}.rho: must lie in (0, 1], got {kwargs['rho']}")
        if "alpha0" in d:
            kwargs["alpha0"] = Angle.parse(d["alpha0"], f"{path}.alpha0")
        if "deflection_on" in d:
            kwargs["deflection_on"] = _as_bool(d["deflection_on"], f"{path}.deflection_on")
        if "compensation_on" in d:
            kwargs["compensation_on"] = _as_bool(d["compensation_on"], f"{path}.compensation_on")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "rho": self.rho,
            "alpha0": self.alpha0.serialize(),
            "deflection_on": self.deflection_on,
            "compensation_on": self.compensation_on,
        }


_FORMATS = ("csv", "json", "svg")


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")

    def __post_init__(self) -> None:
        bad = sorted(set(self.formats) - set(_FORMATS))
        if bad:
            raise ConfigError(f"output.formats: unknown format(s) {bad}; choose from {list(_FORMATS)}")
        if not self.formats:
            raise ConfigError("output.formats: need at least one format")
        # keep declaration order stable for hashing and round-trips
        seen: list[str] = []
        for f in self.formats:
            if f not in seen:
                seen.append(f)
        object.__setattr__(self, "formats", tuple(seen))

    @classmethod
    def from_dict(cls, d: Mapping, path: str = "output") -> "OutputSpec":
        if not isinstance(d, Mapping):
            raise ConfigError(f"{path}: expected an object")
        _reject_unknown(d, ("dir", "formats"), path)
        kwargs: dict = {}
        if "dir" in d:
            if not isinstance(d["dir"], str) or not d["dir"]:
                raise ConfigError(f"{path}.dir: expected a nonempty string")
            kwargs["dir"] = d["dir"]
        if "formats" in d:
            fmts = d["formats"]
            if not isinstance(fmts, Sequence) or isinstance(fmts, str):
                raise ConfigError(f"{path}.formats: expected a list of format names")
            kwargs["formats"] = tuple(str(f) for f in fmts)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {"dir": self.dir, "formats": list(self.formats)}


def _parse_probe(raw, path: str = "probe") -> tuple[tuple[int, complex], ...]:
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: expected an object mapping OAM index to amplitude")
    items: list[tuple[int, complex]] = []
    for key, val in raw.items():
        try:
            k = int(key)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: key {key!r} is not an integer OAM index") from None
        if isinstance(val, bool):
            raise ConfigError(f"{path}[{key}]: expected an amplitude, got a boolean")
        if isinstance(val, (int, float)):
            amp = complex(float(val), 0.0)
        elif isinstance(val, Sequence) and not isinstance(val, str) and len(val) == 2:
            amp = complex(_as_float(val[0], f"{path}[{key}][0]"), _as_float(val[1], f"{path}[{key}][1]"))
        else:
            raise ConfigError(f"{path}[{key}]: expected a number or [re, im] pair, got {val!r}")
        items.append((k, amp))
    if not items:
        raise ConfigError(f"{path}: needs at least one entry")
    items.sort(key=lambda kv: kv[0])
    return tuple(items)


def _serialize_probe(probe: tuple[tuple[int, complex], ...]) -> dict:
    out: dict = {}
    for k, amp in probe:
        out[str(k)] = amp.real if amp.imag == 0.0 else [amp.real, amp.imag]
    return out


_TOP_KEYS = (
    "m",
    "l",
    "theta_true",
    "theta_sweep",
    "nu",
    "trials",
    "phi0",
    "noise",
    "dove",
    "probe",
    "pairs",
    "seed",
    "workers",
    "output",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one command run needs, validated once at parse time."""

    m: int
    l: int
    nu: int
    theta_true: Angle | None = None
    theta_sweep: SweepSpec | None = None
    trials: int = 60
    phi0: Angle | None = None  # None means "place the true angle at quadrature"
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    dove: DoveSpec = field(default_factory=DoveSpec)
    probe: tuple[tuple[int, complex], ...] = ((0, (1.0 + 0.0j)),)
    pairs: tuple[tuple[int, int], ...] | None = None
    seed: int = 0
    workers: int = 1
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self) -> None:
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m: must be a positive integer, got {self.m!r}")
        if self.m % 2 != 0:
            raise ConfigError(
                f"m: the folded train needs an even number of half-passes, got {self.m}"
            )
        if int(self.l) != self.l or self.l < 1:
            raise ConfigError(f"l: must be a positive integer, got {self.l!r}")
        if self.nu < 1:
            raise ConfigError(f"nu: photon count must be >= 1, got {self.nu!r}")
        if self.trials < 1:
            raise ConfigError(f"trials: must be >= 1, got {self.trials!r}")
        if self.theta_true is not None and self.theta_sweep is not None:
            raise ConfigError("theta_true and theta_sweep are mutually exclusive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must fit an unsigned 64-bit integer, got {self.seed!r}")
        if self.workers < 1:
            raise ConfigError(f"workers: must be >= 1, got {self.workers!r}")
        if self.pairs is not None:
            for i, pair in enumerate(self.pairs):
                m, l = pair
                if m < 1 or l < 1:
                    raise ConfigError(f"pairs[{i}]: m and l must be positive, got {pair!r}")

    # -- runtime views -----------------------------------------------------

    def resolved_phi0(self, theta: float | None = None) -> float:
        """Calibration phase in radians; quadrature at ``theta`` when unset."""
        if self.phi0 is not None:
            return self.phi0.radians
        ref = theta
        if ref is None:
            ref = self.theta_true.radians if self.theta_true is not None else 0.0
        return quadrature_phi0(self.m, self.l, ref)

    def params(self, theta: float | None = None) -> SwitchParams:
        if theta is None:
            if self.theta_true is None:
                raise ConfigError("theta_true: missing (this command estimates a fixed angle)")
            theta = self.theta_true.radians
        return SwitchParams(
            m=self.m, l=self.l, theta=float(theta), phi0=self.resolved_phi0(theta)
        )

    def sweep_angles(self) -> list[float]:
        if self.theta_sweep is None:
            raise ConfigError("theta_sweep: missing (this command scans the fringe)")
        return self.theta_sweep.angles_rad()

    def noise_model(self) -> NoiseModel:
        return self.noise.resolve(self.m, self.l, self.nu)

    def train(self) -> OpticsTrain:
        return self.dove.train()

    def probe_dist(self) -> dict[int, complex]:
        return {k: amp for k, amp in self.probe}

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        if not isinstance(d, Mapping):
            raise ConfigError("config: expected a JSON object at top level")
        _reject_unknown(d, _TOP_KEYS, "config")
        for key in ("m", "l", "nu"):
            if key not in d:
                raise ConfigError(f"{key}: missing")
        kwargs: dict = {
            "m": _as_int(d["m"], "m", minimum=1),
            "l": _as_int(d["l"], "l", minimum=1),
            "nu": _as_int(d["nu"], "nu", minimum=1),
        }
        if d.get("theta_true") is not None:
            kwargs["theta_true"] = Angle.parse(d["theta_true"], "theta_true")
        if d.get("theta_sweep") is not None:
            kwargs["theta_sweep"] = SweepSpec.from_dict(d["theta_sweep"])
        if "trials" in d:
            kwargs["trials"] = _as_int(d["trials"], "trials", minimum=1)
        if d.get("phi0") is not None:
            raw = d["phi0"]
            if isinstance(raw, str) and raw.strip().lower() == "quadrature":
                kwargs["phi0"] = None
            else:
                kwargs["phi0"] = Angle.parse(raw, "phi0")
        if "noise" in d:
            kwargs["noise"] = NoiseSpec.from_dict(d["noise"])
        if "dove" in d:
            kwargs["dove"] = DoveSpec.from_dict(d["dove"])
        if "probe" in d:
            kwargs["probe"] = _parse_probe(d["probe"])
        if d.get("pairs") is not None:
            raw_pairs = d["pairs"]
            if not isinstance(raw_pairs, Sequence) or isinstance(raw_pairs, str):
                raise ConfigError("pairs: expected a list of [m, l] pairs")
            pairs = []
            for i, item in enumerate(raw_pairs):
                if not isinstance(item, Sequence) or isinstance(item, str) or len(item) != 2:
                    raise ConfigError(f"pairs[{i}]: expected an [m, l] pair, got {item!r}")
                pairs.append(
                    (_as_int(item[0], f"pairs[{i}][0]", 1), _as_int(item[1], f"pairs[{i}][1]", 1))
                )
            kwargs["pairs"] = tuple(pairs)
        if "seed" in d:
            kwargs["seed"] = _as_int(d["seed"], "seed", minimum=0)
        if "workers" in d:
            kwargs["workers"] = _as_int(d["workers"], "workers", minimum=1)
        if "output" in d:
            kwargs["output"] = OutputSpec.from_dict(d["output"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out: dict = {"m": self.m, "l": self.l, "nu": self.nu}
        if self.theta_true is not None:
            out["theta_true"] = self.theta_true.serialize()
        if self.theta_sweep is not None:
            out["theta_sweep"] = self.theta_sweep.to_dict()
        out["trials"] = self.trials
        out["phi0"] = "quadrature" if self.phi0 is None else self.phi0.serialize()
        out["noise"] = self.noise.to_dict()
        out["dove"] = self.dove.to_dict()
        out["probe"] = _serialize_probe(self.probe)
        if self.pairs is not None:
            out["pairs"] = [[m, l] for m, l in self.pairs]
        out["seed"] = self.seed
        out["workers"] = self.workers
        out["output"] = self.output.to_dict()
        return out

    def physics_dict(self) -> dict:
        """Config view without execution-only fields (worker count, output).

        Two runs that differ only in parallelism or destination produce the
        same results, so result files embed and hash this view.
        """
        d = self.to_dict()
        d.pop("workers", None)
        d.pop("output", None)
        return d

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        return cls.from_json(p.read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


def config_hash(config: ExperimentConfig) -> str:
    """Stable 12-hex-digit digest of the physics-relevant configuration."""
    canonical = json.dumps(config.physics_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def resolve_output_dir(config: ExperimentConfig) -> Path:
    """Output directory, with the environment override taking precedence."""
    env = os.environ.get(OUTPUT_DIR_ENV)
    return Path(env) if env else Path(config.output.dir)


def preset_names() -> list[str]:
    """Names of the configurations shipped with the package."""
    root = resources.files(__package__) / "presets"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> ExperimentConfig:
    ref = resources.files(__package__) / "presets" / f"{name}.json"
    if not ref.is_file():
        raise ConfigError(f"no preset named {name!r}; available: {preset_names()}")
    return ExperimentConfig.from_json(ref.read_text())
