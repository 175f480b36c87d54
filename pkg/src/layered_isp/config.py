"""Experiment configuration: YAML loading, validation and presets.

Every constant defaults to the value of the reference experiments, so an
empty config reproduces the 2D limited-aperture study with lower reference
points. Nested YAML sections map onto flat fields::

    dimension: 2
    medium: {c_minus: 2.0, c_plus: 1.9968584073464102}
    box: {a: 1.0, L: 0.5}
    N: 50
    references: {placement: lower, alpha1: -0.5}
    noise: {eps: [0.0, 0.01], seeds: [0, 1, 2]}
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import io
from .errors import InvalidConfigError
from .inversion import ZERO_MODES
from .lattice import ZERO_DIRECTIONS
from .metrics import NOISE_TARGETS
from .retrieval import SPACINGS, ReferenceConfig

APERTURES = ("limited", "full", "hemisphere")
SOURCES = ("analytic", "fourier")

# YAML section -> {yaml key: field name}
SECTIONS = {
    "medium": {"c_minus": "c_minus", "c_plus": "c_plus"},
    "box": {"a": "a", "L": "L"},
    "quadrature": {"orders": "orders"},
    "source": {"kind": "source", "file": "source_file", "real": "real_source"},
    "references": {"placement": "placement", "alpha1": "alpha1", "alpha2": "alpha2",
                   "alpha2_zero": "alpha2_zero", "spacing": "spacing", "rescale": "rescale"},
    "noise": {"eps": "noise_eps", "seeds": "seeds", "targets": "noise_targets"},
    "aperture": {"mode": "aperture", "compare": "compare_apertures", "zero_direction": "zero_direction"},
    "inversion": {"enabled": "invert", "zero_mode": "zero_mode", "resolution": "resolution"},
}

TABLE_INDICES_3D = ((-2, 0, 1), (1, 0, 3), (17, -13, 0), (-27, 9, 14), (-30, -10, 23))
TABLE_EPS = (0.0, 0.005, 0.01, 0.02, 0.05, 0.10)


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int = 2
    c_minus: float = 2.0
    c_plus: float = 2.0 - math.pi / 1000
    a: float = 1.0
    L: float = 0.5
    N: int = 50
    lam: float = 1e-3
    orders: tuple | None = None  # None picks orders from N and the box
    source: str = "analytic"
    source_file: str | None = None
    real_source: bool = True
    placement: str = "lower"
    alpha1: float | None = None
    alpha2: float | None = None
    alpha2_zero: float | None = None
    spacing: str = "quarter-wave"
    rescale: bool = False
    noise_eps: tuple = (0.0,)
    seeds: tuple = (0,)
    noise_targets: str = "u"
    aperture: str = "limited"
    compare_apertures: bool = False
    zero_direction: str | None = None
    indices: tuple | None = None  # restrict to these indices and their frequency groups
    invert: bool = True
    zero_mode: str = "exact"
    resolution: tuple | None = None
    preset: str | None = None
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        def bad(name, msg):
            raise InvalidConfigError(f"{name}: {msg}")

        if self.dimension not in (2, 3):
            bad("dimension", f"must be 2 or 3, got {self.dimension!r}")
        for name in ("c_minus", "c_plus", "a", "L"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                bad(name, f"must be a positive number, got {v!r}")
        if not isinstance(self.N, int) or isinstance(self.N, bool) or self.N < 1:
            bad("N", f"must be an integer >= 1, got {self.N!r}")
        if not 0 < self.lam < 1:
            bad("lam", f"must lie in (0, 1), got {self.lam!r}")
        if self.orders is not None:
            if len(self.orders) != self.dimension or any(not isinstance(o, int) or o < 1 for o in self.orders):
                bad("quadrature.orders", f"need {self.dimension} integers >= 1, got {self.orders!r}")
        if self.source not in SOURCES:
            bad("source.kind", f"must be one of {SOURCES}, got {self.source!r}")
        if self.source == "fourier":
            if not self.source_file:
                bad("source.file", "required for a fourier source")
            if not self.source_path.is_file():
                bad("source.file", f"no such file {str(self.source_path)!r}")
        if self.placement not in ("lower", "upper"):
            bad("references.placement", f"must be 'lower' or 'upper', got {self.placement!r}")
        if self.spacing not in SPACINGS:
            bad("references.spacing", f"must be one of {SPACINGS}, got {self.spacing!r}")
        try:
            self.references
        except InvalidConfigError as exc:
            bad("references", str(exc))
        if not self.noise_eps or any(not isinstance(e, (int, float)) or not 0 <= e < 1 for e in self.noise_eps):
            bad("noise.eps", f"levels must lie in [0, 1), got {self.noise_eps!r}")
        if not self.seeds or any(not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < 2 ** 64
                                 for s in self.seeds):
            bad("noise.seeds", f"need non-negative integer seeds, got {self.seeds!r}")
        if self.noise_targets not in NOISE_TARGETS:
            bad("noise.targets", f"must be one of {NOISE_TARGETS}, got {self.noise_targets!r}")
        if self.aperture not in APERTURES:
            bad("aperture.mode", f"must be one of {APERTURES}, got {self.aperture!r}")
        if self.zero_direction is not None and self.zero_direction not in ZERO_DIRECTIONS:
            bad("aperture.zero_direction", f"must be one of {ZERO_DIRECTIONS}, got {self.zero_direction!r}")
        if self.zero_mode not in ZERO_MODES:
            bad("inversion.zero_mode", f"must be one of {ZERO_MODES}, got {self.zero_mode!r}")
        if self.zero_mode != "box" and self.L > self.a:
            bad("box.L", f"depth {self.L} exceeds the period {self.a}; only zero_mode 'box' supports it")
        if self.resolution is not None:
            if len(self.resolution) != self.dimension or any(not isinstance(r, int) or r < 2 for r in self.resolution):
                bad("inversion.resolution", f"need {self.dimension} integers >= 2, got {self.resolution!r}")
        if self.indices is not None:
            for l in self.indices:
                if len(l) != self.dimension or max(abs(v) for v in l) > self.N or not any(l):
                    bad("indices", f"{l!r} is not a non-zero index with |l|_inf <= N")
        if self.invert and self.indices is not None:
            bad("inversion.enabled", "inversion needs the whole lattice; drop 'indices' or disable it")

    @property
    def source_path(self):
        p = Path(self.source_file)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def references(self) -> ReferenceConfig:
        base = ReferenceConfig.default(self.placement, self.spacing)
        over = {k: getattr(self, k) for k in ("alpha1", "alpha2", "alpha2_zero") if getattr(self, k) is not None}
        return dataclasses.replace(base, **over) if over else base

    @property
    def grid_resolution(self):
        if self.resolution is not None:
            return self.resolution
        per = 100 if self.dimension == 2 else 24
        return tuple([per] * (self.dimension - 1) + [max(2, round(per * self.L / self.a))])

    def as_dict(self):
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def hash(self):
        """Hash of every field that can change numerical output."""
        d = self.as_dict()
        if self.source == "fourier":
            d["source_digest"] = hashlib.sha256(self.source_path.read_bytes()).hexdigest()
        return io.config_hash(d)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _tuple(v):
    if isinstance(v, list):
        return tuple(_tuple(x) for x in v)
    return v


def config_from_dict(data: dict, base_dir=".", base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from parsed YAML, flattening the nested sections.

    Keys override ``base`` (or the preset named in ``data``, or the defaults).
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InvalidConfigError("config: top level must be a mapping")
    flat = {}
    names = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"base_dir"}
    for key, value in data.items():
        if key in SECTIONS:
            if not isinstance(value, dict):
                raise InvalidConfigError(f"{key}: expected a mapping")
            for sub, v in value.items():
                if sub not in SECTIONS[key]:
                    raise InvalidConfigError(f"{key}.{sub}: unknown key")
                flat[SECTIONS[key][sub]] = v
        elif key in names:
            flat[key] = value
        else:
            raise InvalidConfigError(f"{key}: unknown key")
    if "preset" in flat and flat["preset"] is not None:
        base = preset(flat["preset"])
    for k in ("noise_eps", "seeds"):
        if k in flat and not isinstance(flat[k], list):
            flat[k] = [flat[k]]
    for k in ("c_minus", "c_plus", "a", "L", "lam", "alpha1", "alpha2", "alpha2_zero"):
        if isinstance(flat.get(k), int) and not isinstance(flat[k], bool):
            flat[k] = float(flat[k])
    if "noise_eps" in flat:
        flat["noise_eps"] = [float(e) if isinstance(e, int) and not isinstance(e, bool) else e
                             for e in flat["noise_eps"]]
    merged = base.as_dict() if base is not None else {}
    merged.update({k: _tuple(v) for k, v in flat.items()})
    try:
        return ExperimentConfig(**merged, base_dir=str(base_dir))
    except TypeError as exc:
        raise InvalidConfigError(f"config: {exc}") from None


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise InvalidConfigError(f"config: no such file {str(path)!r}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"config: invalid YAML ({exc})") from None
    return config_from_dict(data, base_dir=path.parent, base=base)


PRESETS = {
    "table1": dict(noise_eps=TABLE_EPS, seeds=(0, 1, 2, 3, 4), invert=False),
    "table2": dict(placement="upper", noise_eps=TABLE_EPS, seeds=(0, 1, 2, 3, 4), invert=False),
    "table3": dict(dimension=3, N=30, indices=TABLE_INDICES_3D, noise_eps=TABLE_EPS,
                   seeds=(0, 1, 2, 3, 4), invert=False),
    "table4": dict(dimension=3, N=30, placement="upper", indices=TABLE_INDICES_3D,
                   noise_eps=TABLE_EPS, seeds=(0, 1, 2, 3, 4), invert=False),
    "fig2": dict(compare_apertures=True),
    "fig3": dict(dimension=3, N=10),
}


def preset(name) -> ExperimentConfig:
    if name not in PRESETS:
        raise InvalidConfigError(f"preset: unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig(**PRESETS[name], preset=name)
