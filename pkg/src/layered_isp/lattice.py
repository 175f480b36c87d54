"""Admissible Fourier indices, directions and frequencies.

Each non-zero index ``l`` is probed by a single far-field sample whose
transmitted direction in the lower medium is ``l/|l|`` and whose lower
wavenumber is ``2*pi*|l|/a``. The zero index is replaced by the small
wavenumber ``2*pi*lam/a``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import InvalidConfigError, SchemaError
from .medium import Direction, Medium, aperture_contains, observation_angle

ZERO_DIRECTIONS = ("vertical", "horizontal")


@dataclass(frozen=True)
class LatticeEntry:
    index: tuple
    direction: Direction  # transmitted direction in the lower medium
    theta: float  # polar angle of ``direction``
    observation: Direction  # measurement direction in the upper medium
    k_minus: float
    omega: float
    k_plus: float

    @property
    def observation_theta(self):
        return self.observation.theta

    @property
    def is_zero(self):
        return not any(self.index)


@dataclass(frozen=True, eq=False)
class AdmissibleSet:
    """Immutable set of lattice entries stored column-wise.

    Rows follow lexicographic order of the index tuples. ``entries`` gives
    per-row :class:`LatticeEntry` views.
    """

    medium: Medium
    n: int
    N: int
    a: float
    lam: float
    full_aperture: bool
    zero_direction: str
    indices: np.ndarray  # (E, n) int
    directions: np.ndarray  # (E, n) transmitted directions
    theta: np.ndarray
    obs_theta: np.ndarray
    phi: np.ndarray
    k_minus: np.ndarray
    omega: np.ndarray
    k_plus: np.ndarray
    grazing: bool = False
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for arr in (self.indices, self.directions, self.theta, self.obs_theta,
                    self.phi, self.k_minus, self.omega, self.k_plus):
            arr.setflags(write=False)
        self._lookup.update({tuple(int(v) for v in l): i for i, l in enumerate(self.indices)})

    def __len__(self):
        return len(self.indices)

    @property
    def obs_directions(self):
        t, p = self.obs_theta, self.phi
        if self.n == 2:
            return np.stack([np.cos(t), np.sin(t)], axis=1)
        return np.stack([np.cos(p) * np.cos(t), np.sin(p) * np.cos(t), np.sin(t)], axis=1)

    @property
    def zero_row(self):
        return self._lookup[(0,) * self.n]

    @property
    def nonzero_mask(self):
        return np.any(self.indices != 0, axis=1)

    def row_of(self, l):
        return self._lookup.get(tuple(int(v) for v in l))

    def entry(self, row) -> LatticeEntry:
        d = self.directions[row]
        obs = self.obs_directions[row]
        return LatticeEntry(
            index=tuple(int(v) for v in self.indices[row]),
            direction=Direction(self.n, float(self.theta[row]), float(self.phi[row]), tuple(float(c) for c in d)),
            theta=float(self.theta[row]),
            observation=Direction(self.n, float(self.obs_theta[row]), float(self.phi[row]), tuple(float(c) for c in obs)),
            k_minus=float(self.k_minus[row]),
            omega=float(self.omega[row]),
            k_plus=float(self.k_plus[row]),
        )

    @property
    def entries(self):
        return [self.entry(i) for i in range(len(self))]

    def frequency_keys(self):
        """Integer key per row shared by rows with the same frequency.

        ``|l|^2`` for non-zero indices, ``-1`` for the zero index.
        """
        sq = np.sum(self.indices.astype(np.int64) ** 2, axis=1)
        return np.where(sq == 0, -1, sq)

    def subset(self, rows):
        rows = np.asarray(sorted(set(int(r) for r in rows)), dtype=int)
        return self._with_rows(rows)

    def _with_rows(self, rows, extra=None):
        cols = {
            "indices": self.indices, "directions": self.directions, "theta": self.theta,
            "obs_theta": self.obs_theta, "phi": self.phi, "k_minus": self.k_minus,
            "omega": self.omega, "k_plus": self.k_plus,
        }
        out = {k: np.array(v[rows]) for k, v in cols.items()}
        if extra is not None:
            for k in cols:
                out[k] = np.concatenate([out[k], extra[k]])
            order = np.lexsort(out["indices"].T[::-1])
            out = {k: v[order] for k, v in out.items()}
        return AdmissibleSet(self.medium, self.n, self.N, self.a, self.lam,
                             self.full_aperture, self.zero_direction, grazing=self.grazing, **out)

    def with_extra_index(self, l):
        """Copy of this set with index ``l`` added, bypassing the aperture filter.

        Used to probe boundary indices (``l_n = 0``) that the admissible
        filter excludes.
        """
        if self.row_of(l) is not None:
            return self
        cols = _columns(self.medium, self.n, self.a, self.lam, np.array([l]), self.zero_direction)
        if np.isnan(cols["obs_theta"][0]):
            raise InvalidConfigError(f"index {tuple(l)} has no real observation direction")
        return self._with_rows(np.arange(len(self)), extra=cols)

    def to_csv(self, path, meta=None):
        write_lattice_csv(self, path, meta)


def _zero_vector(n, zero_direction):
    v = np.zeros(n)
    if zero_direction == "vertical":
        v[-1] = 1.0
    else:
        v[0] = 1.0
    return v


def _columns(m, n, a, lam, idx, zero_direction):
    idx = np.asarray(idx, dtype=np.int64).reshape(-1, n)
    norm = np.sqrt(np.sum(idx.astype(float) ** 2, axis=1))
    zero = norm == 0
    dirs = np.empty(idx.shape, dtype=float)
    dirs[~zero] = idx[~zero] / norm[~zero, None]
    dirs[zero] = _zero_vector(n, zero_direction)
    if n == 2:
        horiz = dirs[:, 0]
        theta = np.arctan2(dirs[:, 1], dirs[:, 0])
        phi = np.zeros(len(idx))
    else:
        horiz = np.hypot(dirs[:, 0], dirs[:, 1])
        theta = np.arctan2(dirs[:, 2], horiz)
        phi = np.where(horiz > 0, np.arctan2(dirs[:, 1], dirs[:, 0]), 0.0)
    k_minus = np.where(zero, 2 * math.pi * lam / a, 2 * math.pi * norm / a)
    omega = k_minus * m.c_minus
    return {
        "indices": idx,
        "directions": dirs,
        "theta": theta,
        "obs_theta": observation_angle(m, horiz) if len(idx) else np.zeros(0),
        "phi": phi,
        "k_minus": k_minus,
        "omega": omega,
        "k_plus": omega / m.c_plus,
    }


def build_admissible_set(m: Medium, n: int, N: int, a: float, lam: float,
                         full_aperture: bool = False, zero_direction: str | None = None,
                         grazing: bool = False) -> AdmissibleSet:
    """Enumerate the admissible indices for truncation order ``N``.

    Every ``l`` with ``1 <= |l|_inf <= N``, ``l_n > 0`` and transmitted angle
    inside the aperture is kept; ``full_aperture`` drops the angle test.
    ``grazing`` (full aperture only) also admits ``l_n = 0``, probing the
    whole closed upper hemisphere. The zero index is always present; its
    measurement direction defaults to vertical in limited mode and to the
    first axis otherwise.
    """
    if n not in (2, 3):
        raise InvalidConfigError(f"dimension must be 2 or 3, got {n!r}")
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidConfigError(f"truncation order N must be an integer >= 1, got {N!r}")
    if not a > 0:
        raise InvalidConfigError(f"period a must be positive, got {a!r}")
    if not 0 < lam < 1:
        raise InvalidConfigError(f"lam must lie in (0, 1), got {lam!r}")
    if zero_direction is None:
        zero_direction = "horizontal" if full_aperture else "vertical"
    if zero_direction not in ZERO_DIRECTIONS:
        raise InvalidConfigError(f"zero_direction must be one of {ZERO_DIRECTIONS}, got {zero_direction!r}")

    if grazing and not full_aperture:
        raise InvalidConfigError("grazing indices (l_n = 0) require full_aperture")

    ranges = [range(-N, N + 1)] * (n - 1) + [range(0 if grazing else 1, N + 1)]
    idx = np.array(list(itertools.product(*ranges)), dtype=np.int64)
    if not grazing:
        idx = np.vstack([idx, np.zeros((1, n), dtype=np.int64)])
    order = np.lexsort(idx.T[::-1])
    cols = _columns(m, n, a, lam, idx[order], zero_direction)

    keep = ~np.isnan(cols["obs_theta"])
    if not full_aperture:
        keep &= aperture_contains(m, n, cols["theta"])
    keep |= np.all(cols["indices"] == 0, axis=1)
    if np.isnan(cols["obs_theta"][np.all(cols["indices"] == 0, axis=1)]).any():
        raise InvalidConfigError("zero-index measurement direction is not observable for this medium")
    cols = {k: v[keep] for k, v in cols.items()}
    return AdmissibleSet(m, n, int(N), float(a), float(lam), bool(full_aperture), zero_direction,
                         grazing=bool(grazing), **cols)


def entry_for_index(s: AdmissibleSet, l):
    """The entry with index ``l``, or ``None`` when it is not admissible."""
    row = s.row_of(l)
    return None if row is None else s.entry(row)


def lattice_header(n):
    ls = [f"l{j + 1}" for j in range(n)]
    ds = [f"d{j + 1}" for j in range(n)]
    return ls + ["theta_l", "omega", "k_minus", "k_plus"] + ds + ["obs_theta"]


def write_lattice_csv(s: AdmissibleSet, path, meta=None):
    meta = dict(meta or {})
    meta.update(n=s.n, N=s.N, a=io.fmt(s.a), lam=io.fmt(s.lam),
                full_aperture=int(s.full_aperture), grazing=int(s.grazing), zero_direction=s.zero_direction,
                c_minus=io.fmt(s.medium.c_minus), c_plus=io.fmt(s.medium.c_plus))
    rows = []
    for i in range(len(s)):
        rows.append([int(v) for v in s.indices[i]]
                    + [float(s.theta[i]), float(s.omega[i]), float(s.k_minus[i]), float(s.k_plus[i])]
                    + [float(v) for v in s.directions[i]] + [float(s.obs_theta[i])])
    return io.write_table(path, "lattice", lattice_header(s.n), rows, meta)


def read_lattice_csv(path) -> AdmissibleSet:
    """Rebuild a lattice from its CSV; columns are recomputed from the indices."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    n = next((int(tok[2:]) for tok in first.split() if tok.startswith("n=")), None)
    if n not in (2, 3):
        raise SchemaError(f"{path}: lattice file lacks a valid dimension", line=1)
    meta, rows = io.read_table(path, "lattice", lattice_header(n))
    try:
        m = Medium(float(meta["c_minus"]), float(meta["c_plus"]))
        N, a, lam = int(meta["N"]), float(meta["a"]), float(meta["lam"])
        full, zero_dir = bool(int(meta["full_aperture"])), meta["zero_direction"]
        grazing = bool(int(meta.get("grazing", 0)))
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"{path}: incomplete lattice metadata ({exc})", line=1) from None
    idx = np.array([[io.parse_int(x, line, f"l{j + 1}") for j, x in enumerate(r[:n])] for line, r in rows],
                   dtype=np.int64).reshape(-1, n)
    if not np.any(np.all(idx == 0, axis=1)):
        raise SchemaError(f"{path}: lattice has no zero-index entry")
    cols = _columns(m, n, a, lam, idx, zero_dir)
    bad = np.flatnonzero(np.isnan(cols["obs_theta"]))
    if bad.size:
        raise SchemaError(f"index {tuple(idx[bad[0]])} has no observation direction", line=rows[bad[0]][0])
    order = np.lexsort(idx.T[::-1])
    cols = {k: v[order] for k, v in cols.items()}
    return AdmissibleSet(m, n, N, a, lam, full, zero_dir, grazing=grazing, **cols)
