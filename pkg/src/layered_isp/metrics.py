"""Noise injection and error functionals."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, UndefinedMetricError
from .forward import FarFieldDataset, PhaselessDataset
from .sources import GridField

GENERATOR = "philox4x64"
NOISE_TARGETS = ("u", "all")


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform multiplicative noise ``m -> (1 + eps r) m`` with ``r ~ U[-1, 1]``.

    ``targets="u"`` perturbs only ``|u|``; ``"all"`` draws an independent
    ``r`` for each of ``|u|``, ``|v1|``, ``|v2|``.
    """

    eps: float = 0.0
    seed: int = 0
    targets: str = "u"

    def __post_init__(self):
        if not self.eps >= 0:
            raise InvalidConfigError(f"noise level must be >= 0, got {self.eps!r}")
        if self.targets not in NOISE_TARGETS:
            raise InvalidConfigError(f"noise targets must be one of {NOISE_TARGETS}, got {self.targets!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidConfigError("seed must fit in 64 unsigned bits")


def noise_draws(spec: NoiseSpec, n_rows):
    """``(n_rows, 3)`` uniform draws; row ``i`` depends only on ``(seed, i)``.

    Philox is counter based and emits four 64-bit words per block; row ``i``
    takes the first three words of block ``i`` of the stream keyed by
    ``seed``, so it can be regenerated alone via ``Philox(key=seed).advance(i)``.
    """
    bitgen = np.random.Philox(key=int(spec.seed))
    return np.random.Generator(bitgen).uniform(-1.0, 1.0, size=(n_rows, 4))[:, :3]


def add_noise(p: PhaselessDataset, spec: NoiseSpec) -> PhaselessDataset:
    if spec.eps == 0:
        return p.replace(p.magnitudes.copy(), noise_eps=0, noise_seed=spec.seed)
    r = noise_draws(spec, len(p.magnitudes))
    if spec.targets == "u":
        r[:, 1:] = 0.0
    noisy = (1.0 + spec.eps * r) * p.magnitudes
    clamped = int(np.count_nonzero(noisy < 0))
    noisy = np.maximum(noisy, 0.0)
    return p.replace(noisy, noise_eps=repr(float(spec.eps)), noise_seed=spec.seed,
                     noise_targets=spec.targets, generator=GENERATOR, clamped=clamped)


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=complex)


def _pair(exact, recovered):
    lat = exact.lattice
    u, v = _values(exact), _values(recovered)
    if u.shape != v.shape:
        raise InvalidConfigError("exact and recovered data cover different lattices")
    rec_lat = getattr(recovered, "lattice", lat)
    if rec_lat is not lat and not np.array_equal(rec_lat.indices, lat.indices):
        raise InvalidConfigError("exact and recovered data cover different lattices")
    mask = lat.nonzero_mask
    return u[mask], v[mask]


def err_l2(exact: FarFieldDataset, recovered) -> float:
    """Relative l2 error over the non-zero lattice entries."""
    u, v = _pair(exact, recovered)
    den = np.linalg.norm(u)
    if den == 0:
        raise UndefinedMetricError("exact data vanish; relative l2 error undefined")
    return float(np.linalg.norm(u - v) / den)


def err_inf(exact: FarFieldDataset, recovered) -> float:
    u, v = _pair(exact, recovered)
    den = np.max(np.abs(u)) if u.size else 0.0
    if den == 0:
        raise UndefinedMetricError("exact data vanish; relative max error undefined")
    return float(np.max(np.abs(u - v)) / den)


def err_at_index(exact: FarFieldDataset, recovered, l) -> float:
    row = exact.lattice.row_of(l)
    if row is None:
        raise KeyError(f"index {tuple(l)} not in the lattice")
    u = _values(exact)[row]
    if u == 0:
        raise UndefinedMetricError(f"exact far field vanishes at index {tuple(l)}")
    return float(abs(u - _values(recovered)[row]) / abs(u))


def grid_rel_l2(a: GridField, b: GridField) -> float:
    """``||a - b|| / ||b||`` over grid samples."""
    if a.values.shape != b.values.shape:
        raise InvalidConfigError(f"grid shapes differ: {a.values.shape} vs {b.values.shape}")
    den = np.linalg.norm(b.values)
    if den == 0:
        raise UndefinedMetricError("reference grid vanishes")
    return float(np.linalg.norm(a.values - b.values) / den)


def metric_record(metric, value, eps=0.0, seed=None, config_hash=""):
    return {"metric": metric, "value": value, "eps": eps, "seed": seed, "config_hash": config_hash}


def dump_metrics(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
