"""Evaluable source functions and grid sampling.

All sources evaluate on an ``(P, n)`` array of points and return ``P`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import InvalidConfigError, SchemaError
from .quadrature import QuadratureRule, SourceBox, plane_wave_transform, weighted_values


class SourceSpec:
    n: int
    real_valued = True

    def __call__(self, y):
        raise NotImplementedError


class AnalyticSource2D(SourceSpec):
    """Gaussian bump plus a saddle-shaped Gaussian centred on the box floor."""

    n = 2

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        x1, x2 = y[..., 0], y[..., 1]
        return (1.1 * np.exp(-200 * ((x1 - 0.01) ** 2 + (x2 + 0.38) ** 2))
                - 100 * ((x2 + 0.5) ** 2 - x1 ** 2) * np.exp(-90 * (x1 ** 2 + (x2 + 0.5) ** 2)))


class AnalyticSource3D(SourceSpec):
    n = 3

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        x1, x2, x3 = y[..., 0], y[..., 1], y[..., 2]
        return (1.1 * np.exp(-200 * ((x1 - 0.01) ** 2 + (x2 - 0.12) ** 2 + (x3 + 0.5) ** 2))
                - 100 * (x2 ** 2 - x1 ** 2) * np.exp(-90 * (x1 ** 2 + x2 ** 2 + (x3 + 0.5) ** 2)))


@dataclass
class CallableSource(SourceSpec):
    func: object
    n: int
    real_valued: bool = True

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(self.func(y)), y.shape[:-1])


@dataclass
class FourierSeriesSource(SourceSpec):
    """Finite series ``sum_l c_l exp(i 2 pi l . y / a)``."""

    coefficients: dict
    a: float
    n: int = field(default=0)

    def __post_init__(self):
        self.coefficients = {tuple(int(v) for v in k): complex(c) for k, c in self.coefficients.items()}
        dims = {len(k) for k in self.coefficients}
        if len(dims) > 1:
            raise InvalidConfigError("Fourier indices of mixed dimension")
        if not self.n:
            self.n = dims.pop() if dims else 2
        elif dims and dims != {self.n}:
            raise InvalidConfigError(f"Fourier indices do not match dimension {self.n}")

    @property
    def real_valued(self):
        c = self.coefficients
        return all(abs(c.get(tuple(-v for v in k), 0) - np.conj(z)) <= 1e-14 * max(1.0, abs(z))
                   for k, z in c.items())

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape[:-1], dtype=complex)
        for l in sorted(self.coefficients):
            out += self.coefficients[l] * np.exp(1j * (2 * math.pi / self.a) * (y @ np.array(l, dtype=float)))
        return out

    def on_grid(self, axes_coords):
        """Evaluate on a tensor grid given per-axis coordinate vectors."""
        if not self.coefficients:
            return np.zeros(tuple(len(x) for x in axes_coords), dtype=complex)
        idx = np.array(sorted(self.coefficients), dtype=np.int64)
        vals = np.array([self.coefficients[tuple(l)] for l in idx])
        lo = idx.min(axis=0)
        dense = np.zeros(tuple(idx.max(axis=0) - lo + 1), dtype=complex)
        dense[tuple((idx - lo).T)] = vals
        mats = [np.exp(1j * (2 * math.pi / self.a) * np.outer(x, np.arange(lo[j], lo[j] + dense.shape[j])))
                for j, x in enumerate(axes_coords)]
        if self.n == 2:
            return mats[0] @ dense @ mats[1].T
        return np.einsum("ia,jb,kc,abc->ijk", mats[0], mats[1], mats[2], dense, optimize=True)


ANALYTIC = {"analytic-2d": AnalyticSource2D, "analytic-3d": AnalyticSource3D}


def eval_source(s: SourceSpec, y):
    """Value of ``s`` at a single point or an array of points."""
    y = np.asarray(y, dtype=float)
    v = s(y.reshape(-1, y.shape[-1]))
    return v.reshape(y.shape[:-1]) if y.ndim > 1 else v[0]


def oracle_coefficients(s: SourceSpec, rule: QuadratureRule, indices, workers=1):
    """Quadrature Fourier coefficients ``a^-n * int_V0 S conj(phi_l)`` for each index."""
    box = rule.box
    idx = np.asarray(indices, dtype=float).reshape(-1, box.n)
    wv = weighted_values(rule, s)
    return plane_wave_transform(rule, wv, (2 * math.pi / box.a) * idx, workers) / box.a ** box.n


def fourier_coefficient_oracle(s: SourceSpec, box: SourceBox, l, rule: QuadratureRule):
    if rule.box != box:
        raise InvalidConfigError("quadrature rule was built for a different box")
    return complex(oracle_coefficients(s, rule, [l])[0])


@dataclass(eq=False)
class GridField:
    """Samples at uniform cell centres of the box, row-major over the axes."""

    box: SourceBox
    resolution: tuple
    values: np.ndarray

    def __post_init__(self):
        self.resolution = tuple(int(r) for r in self.resolution)
        self.values = np.asarray(self.values).reshape(self.resolution)

    @property
    def axes(self):
        return cell_centres(self.box, self.resolution)

    @property
    def points(self):
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def to_csv(self, path, meta=None):
        write_grid_csv(self, path, meta)


def cell_centres(box: SourceBox, resolution):
    out = []
    for (lo, hi), r in zip(box.bounds, resolution):
        h = (hi - lo) / r
        out.append(lo + (np.arange(r) + 0.5) * h)
    return out


def sample_grid(s: SourceSpec, box: SourceBox, resolution) -> GridField:
    if isinstance(resolution, (int, np.integer)):
        resolution = (int(resolution),) * box.n
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != box.n or min(resolution) < 2:
        raise InvalidConfigError(f"grid resolution must have {box.n} entries >= 2, got {resolution}")
    axes = cell_centres(box, resolution)
    if isinstance(s, FourierSeriesSource):
        vals = s.on_grid(axes)
    else:
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=1)
        vals = np.asarray(s(pts)).reshape(resolution)
    return GridField(box, resolution, vals)


def grid_header(n):
    return [f"x{j + 1}" for j in range(n)] + ["re", "im"]


def write_grid_csv(g: GridField, path, meta=None):
    meta = dict(meta or {})
    meta.update(n=g.box.n, a=io.fmt(g.box.a), L=io.fmt(g.box.L),
                resolution="x".join(str(r) for r in g.resolution))
    vals = np.asarray(g.values, dtype=complex).reshape(-1)
    rows = [[float(c) for c in p] + [float(v.real), float(v.imag)] for p, v in zip(g.points, vals)]
    return io.write_table(path, "grid", grid_header(g.box.n), rows, meta)


def read_grid_csv(path) -> GridField:
    meta, rows = io.read_table(path, "grid", _grid_header_from(path))
    n = int(meta["n"])
    box = SourceBox(n, float(meta["a"]), float(meta["L"]))
    res = tuple(int(r) for r in meta["resolution"].split("x"))
    vals = np.array([complex(io.parse_float(r[n], i, "re"), io.parse_float(r[n + 1], i, "im")) for i, r in rows])
    if vals.size != math.prod(res):
        raise SchemaError(f"{path}: expected {math.prod(res)} samples, found {vals.size}")
    return GridField(box, res, vals)


def _grid_header_from(path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    for tok in first.split():
        if tok.startswith("n="):
            return grid_header(int(tok[2:]))
    raise SchemaError(f"{path}: grid file lacks dimension metadata", line=1)
