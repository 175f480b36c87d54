"""Far-field synthesis for buried sources and point sources."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import InvalidConfigError, InvalidPointError, SchemaError
from .lattice import AdmissibleSet, LatticeEntry
from .medium import Medium, reflection_H, transmission_T
from .quadrature import QuadratureRule, SourceBox, plane_wave_transform, weighted_values
from .sources import SourceSpec


@dataclass(eq=False)
class FarFieldDataset:
    lattice: AdmissibleSet
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.lattice),):
            raise InvalidConfigError(f"expected {len(self.lattice)} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            bad = [tuple(self.lattice.indices[i]) for i in np.flatnonzero(~np.isfinite(self.values))[:5]]
            raise InvalidConfigError(f"non-finite far-field values at indices {bad}")

    def __mul__(self, alpha):
        return FarFieldDataset(self.lattice, alpha * self.values, dict(self.meta))

    __rmul__ = __mul__

    def value(self, l):
        row = self.lattice.row_of(l)
        if row is None:
            raise KeyError(tuple(l))
        return complex(self.values[row])

    def to_csv(self, path, meta=None):
        write_farfield_csv(self, path, meta)


@dataclass(eq=False)
class PhaselessDataset:
    """Magnitude triples ``(|u|, |v1|, |v2|)`` per lattice entry.

    ``scaling`` holds the reference strengths ``(c1, c2)`` and ``offsets`` the
    radial offsets ``(alpha1, alpha2)`` used for each entry; both describe the
    measurement setup and are reused by retrieval. ``degenerate`` marks
    entries whose frequency carried no measurable field.
    """

    lattice: AdmissibleSet
    magnitudes: np.ndarray  # (E, 3)
    scaling: np.ndarray  # (E, 2)
    offsets: np.ndarray  # (E, 2)
    degenerate: np.ndarray  # (E,) bool
    refs: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.magnitudes = np.asarray(self.magnitudes, dtype=float).reshape(-1, 3)
        if np.any(self.magnitudes < 0):
            raise InvalidConfigError("magnitudes must be non-negative")
        self.scaling = np.asarray(self.scaling, dtype=float).reshape(-1, 2)
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1, 2)
        self.degenerate = np.asarray(self.degenerate, dtype=bool)

    def replace(self, magnitudes, **meta):
        m = dict(self.meta)
        m.update(meta)
        return PhaselessDataset(self.lattice, magnitudes, self.scaling, self.offsets,
                                self.degenerate, self.refs, m)

    def to_csv(self, path, meta=None):
        write_phaseless_csv(self, path, meta)


def far_field_source(m: Medium, box: SourceBox, rule: QuadratureRule, s: SourceSpec,
                     entry: LatticeEntry) -> complex:
    """``T(theta) * int_V0 exp(-i k_- x^t . y) S(y) dy`` for one lattice entry."""
    if rule.box != box:
        raise InvalidConfigError("quadrature rule was built for a different box")
    K = entry.k_minus * entry.direction.as_array()
    val = plane_wave_transform(rule, weighted_values(rule, s), K)[0]
    return transmission_T(m, entry.observation_theta) * complex(val)


def synthesize_dataset(m: Medium, box: SourceBox, rule: QuadratureRule, s: SourceSpec,
                       lattice: AdmissibleSet, workers=1) -> FarFieldDataset:
    if rule.box != box:
        raise InvalidConfigError("quadrature rule was built for a different box")
    if lattice.n != box.n or s.n != box.n:
        raise InvalidConfigError("lattice, box and source dimensions differ")
    K = lattice.k_minus[:, None] * lattice.directions
    integrals = plane_wave_transform(rule, weighted_values(rule, s), K, workers)
    T = transmission_T(m, lattice.obs_theta)
    values = T * integrals
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise InvalidConfigError(f"non-finite far field at index {tuple(lattice.indices[bad[0]])}")
    return FarFieldDataset(lattice, values, {"orders": "x".join(map(str, rule.orders))})


def point_far_field(m: Medium, obs_theta, obs_dirs, trans_dirs, omega, z):
    """Vectorised far field of point sources at ``z`` (one row per direction).

    Lower points give ``T exp(-i k_- x^t . z)``; upper points give
    ``H exp(-i k_+ x . z^s) + exp(-i k_+ x . z)``.
    """
    z = np.asarray(z, dtype=float)
    obs_dirs = np.atleast_2d(obs_dirs)
    trans_dirs = np.atleast_2d(trans_dirs)
    z = np.broadcast_to(z, obs_dirs.shape)
    zn = z[:, -1]
    if np.any(zn == 0):
        raise InvalidPointError("reference point lies on the interface")
    omega = np.broadcast_to(np.asarray(omega, dtype=float), zn.shape)
    obs_theta = np.broadcast_to(np.asarray(obs_theta, dtype=float), zn.shape)
    k_minus = omega / m.c_minus
    k_plus = omega / m.c_plus
    T = np.asarray(transmission_T(m, obs_theta))
    H = np.asarray(reflection_H(m, obs_theta))
    zs = z.copy()
    zs[:, -1] = -zs[:, -1]
    lower = T * np.exp(-1j * k_minus * np.sum(trans_dirs * z, axis=1))
    upper = (H * np.exp(-1j * k_plus * np.sum(obs_dirs * zs, axis=1))
             + np.exp(-1j * k_plus * np.sum(obs_dirs * z, axis=1)))
    return np.where(zn < 0, lower, upper)


def far_field_point(m: Medium, entry: LatticeEntry, z) -> complex:
    """Far field of a unit point source at ``z`` observed along ``entry``."""
    z = np.asarray(z, dtype=float).reshape(1, -1)
    return complex(point_far_field(m, entry.observation_theta, entry.observation.as_array(),
                                   entry.direction.as_array(), entry.omega, z)[0])


def reference_field(refs, m: Medium, lattice: AdmissibleSet, offsets):
    """``Phi_j`` for both reference points of every entry, shape ``(E, 2)``."""
    obs = lattice.obs_directions
    cols = []
    for j in range(2):
        z = offsets[:, j, None] * obs
        cols.append(point_far_field(m, lattice.obs_theta, obs, lattice.directions, lattice.omega, z))
    return np.stack(cols, axis=1)


def synthesize_phaseless(dataset: FarFieldDataset, refs, m: Medium) -> PhaselessDataset:
    """Magnitudes of ``u`` and of ``v_j = u - c_j Phi_j`` for both reference points."""
    from .retrieval import reference_offsets, scaling_factors

    lat = dataset.lattice
    u = dataset.values
    offsets = reference_offsets(refs, m, lat)
    phi = reference_field(refs, m, lat, offsets)
    c, degenerate = scaling_factors(np.abs(u), phi, lat, refs.degenerate_threshold)
    v = u[:, None] - c * phi
    mags = np.column_stack([np.abs(u), np.abs(v)])
    return PhaselessDataset(lat, mags, c, offsets, degenerate, refs, dict(dataset.meta))


def _index_cols(n):
    return [f"l{j + 1}" for j in range(n)]


def farfield_header(n):
    return _index_cols(n) + ["theta_l", "omega", "re", "im"]


def phaseless_header(n):
    return _index_cols(n) + ["theta_l", "omega", "abs_u", "abs_v1", "abs_v2",
                             "c1", "c2", "alpha1", "alpha2", "degenerate"]


def write_farfield_csv(d: FarFieldDataset, path, meta=None):
    lat = d.lattice
    meta = {**d.meta, **(meta or {})}
    rows = [[int(v) for v in lat.indices[i]] + [float(lat.theta[i]), float(lat.omega[i]),
                                                float(d.values[i].real), float(d.values[i].imag)]
            for i in range(len(lat))]
    return io.write_table(path, "farfield", farfield_header(lat.n), rows, meta)


def write_phaseless_csv(p: PhaselessDataset, path, meta=None):
    lat = p.lattice
    meta = {**p.meta, **(meta or {})}
    rows = []
    for i in range(len(lat)):
        rows.append([int(v) for v in lat.indices[i]]
                    + [float(lat.theta[i]), float(lat.omega[i])]
                    + [float(x) for x in p.magnitudes[i]] + [float(x) for x in p.scaling[i]]
                    + [float(x) for x in p.offsets[i]] + [int(p.degenerate[i])])
    return io.write_table(path, "phaseless", phaseless_header(lat.n), rows, meta)


def _check_indices(lat, rows, path):
    if len(rows) != len(lat):
        present = {tuple(int(v) for v in r[:lat.n]) for _, r in rows if all(x.lstrip("-").isdigit() for x in r[:lat.n])}
        missing = [tuple(int(v) for v in l) for l in lat.indices if tuple(int(v) for v in l) not in present]
        raise SchemaError(f"{path}: {len(rows)} rows for {len(lat)} lattice entries; absent indices: {missing[:20]}")
    for row, (line, r) in enumerate(rows):
        l = tuple(io.parse_int(x, line, f"l{j + 1}") for j, x in enumerate(r[:lat.n]))
        if l != tuple(int(v) for v in lat.indices[row]):
            raise SchemaError(f"index {l} does not match lattice entry {tuple(lat.indices[row])}", line=line)
        theta = io.parse_float(r[lat.n], line, "theta_l")
        omega = io.parse_float(r[lat.n + 1], line, "omega")
        if not (math.isclose(theta, lat.theta[row], rel_tol=1e-12, abs_tol=1e-15)
                and math.isclose(omega, lat.omega[row], rel_tol=1e-12)):
            raise SchemaError(f"direction or frequency of index {l} differs from the lattice", line=line)


def read_farfield_csv(path, lattice: AdmissibleSet) -> FarFieldDataset:
    meta, rows = io.read_table(path, "farfield", farfield_header(lattice.n))
    _check_indices(lattice, rows, path)
    n = lattice.n
    vals = np.array([complex(io.parse_float(r[n + 2], line, "re"), io.parse_float(r[n + 3], line, "im"))
                     for line, r in rows])
    if not np.all(np.isfinite(vals)):
        line = rows[int(np.flatnonzero(~np.isfinite(vals))[0])][0]
        raise SchemaError("non-finite far-field value", line=line)
    meta.pop("schema", None)
    meta.pop("kind", None)
    return FarFieldDataset(lattice, vals, meta)


def read_phaseless_csv(path, lattice: AdmissibleSet, refs=None) -> PhaselessDataset:
    meta, rows = io.read_table(path, "phaseless", phaseless_header(lattice.n))
    _check_indices(lattice, rows, path)
    n = lattice.n
    names = phaseless_header(n)
    data = np.array([[io.parse_float(x, line, names[n + 2 + j]) for j, x in enumerate(r[n + 2:])]
                     for line, r in rows]).reshape(-1, 8)
    for k, (line, _) in enumerate(rows):
        if np.any(data[k, :3] < 0) or not np.all(np.isfinite(data[k])):
            raise SchemaError("magnitudes must be finite and non-negative", line=line)
    meta.pop("schema", None)
    meta.pop("kind", None)
    return PhaselessDataset(lattice, data[:, :3], data[:, 3:5], data[:, 5:7], data[:, 7] != 0, refs, meta)
