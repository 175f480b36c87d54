"""Tensor-product Gauss-Legendre quadrature over the source box."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidConfigError, InvalidOrderError

# entries per batch in plane_wave_transform; fixed so results do not depend on worker count
CHUNK = 128


@dataclass(frozen=True)
class SourceBox:
    """``(-a/2, a/2)^(n-1) x (-L, 0)``."""

    n: int
    a: float
    L: float

    def __post_init__(self):
        if self.n not in (2, 3):
            raise InvalidConfigError(f"dimension must be 2 or 3, got {self.n!r}")
        if not (self.a > 0 and self.L > 0):
            raise InvalidConfigError(f"box sizes must be positive, got a={self.a}, L={self.L}")

    @property
    def bounds(self):
        return [(-self.a / 2, self.a / 2)] * (self.n - 1) + [(-self.L, 0.0)]

    @property
    def volume(self):
        return self.a ** (self.n - 1) * self.L

    def lengths(self):
        return [hi - lo for lo, hi in self.bounds]


@lru_cache(maxsize=64)
def _leggauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_1d(order, lo=-1.0, hi=1.0):
    """Gauss-Legendre nodes and weights on ``(lo, hi)``, exact to degree ``2*order - 1``."""
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise InvalidOrderError(f"quadrature order must be an integer >= 1, got {order!r}")
    if not lo < hi:
        raise InvalidConfigError(f"empty interval ({lo}, {hi})")
    x, w = _leggauss(int(order))
    half = 0.5 * (hi - lo)
    return half * x + 0.5 * (hi + lo), half * w


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    box: SourceBox
    orders: tuple
    axes: tuple  # per-axis (nodes, weights)

    @property
    def weights(self):
        w = self.axes[0][1]
        for _, wj in self.axes[1:]:
            w = np.multiply.outer(w, wj)
        return w.reshape(-1)

    @property
    def nodes(self):
        grids = np.meshgrid(*[x for x, _ in self.axes], indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    @property
    def shape(self):
        return tuple(len(x) for x, _ in self.axes)

    def __len__(self):
        return math.prod(self.orders)


def tensor_rule(box: SourceBox, orders) -> QuadratureRule:
    if isinstance(orders, (int, np.integer)):
        orders = (int(orders),) * box.n
    orders = tuple(int(o) for o in orders)
    if len(orders) != box.n:
        raise InvalidConfigError(f"need {box.n} quadrature orders, got {len(orders)}")
    axes = tuple(gauss_legendre_1d(o, lo, hi) for o, (lo, hi) in zip(orders, box.bounds))
    return QuadratureRule(box, orders, axes)


FLOOR_ORDERS = {2: 100, 3: 50}


def default_orders(box: SourceBox, N: int):
    """Per-axis orders that resolve every lattice frequency up to ``N``.

    The highest per-axis angular frequency is ``2*pi*N/a``; Gauss-Legendre
    needs a bit over ``pi*N*len/a`` nodes to resolve it on an interval of
    length ``len``. The reference 100 (2D) and 50 (3D) points act as a floor.
    """
    floor = FLOOR_ORDERS[box.n]
    return tuple(max(floor, math.ceil(math.pi * N * ln / box.a) + 20) for ln in box.lengths())


def integrate(rule: QuadratureRule, f):
    """``sum_i w_i f(node_i)``; ``f`` maps an ``(P, n)`` array of points to ``P`` values."""
    vals = np.asarray(f(rule.nodes))
    return np.sum(rule.weights * vals)


def weighted_values(rule: QuadratureRule, f):
    """Quadrature weights times ``f`` at the nodes, shaped like the tensor grid."""
    vals = np.asarray(f(rule.nodes)).reshape(rule.shape)
    w = rule.axes[0][1]
    for _, wj in rule.axes[1:]:
        w = np.multiply.outer(w, wj)
    return w * vals


def _transform_chunk(axes, wv, K):
    x0 = axes[0][0]
    acc = np.exp(-1j * np.outer(K[:, 0], x0)) @ wv.reshape(len(x0), -1)
    if len(axes) == 2:
        e1 = np.exp(-1j * np.outer(K[:, 1], axes[1][0]))
        return np.sum(acc * e1, axis=1)
    n1, n2 = len(axes[1][0]), len(axes[2][0])
    acc = acc.reshape(len(K), n1, n2)
    e1 = np.exp(-1j * np.outer(K[:, 1], axes[1][0]))
    e2 = np.exp(-1j * np.outer(K[:, 2], axes[2][0]))
    return np.sum(np.sum(acc * e2[:, None, :], axis=2) * e1, axis=1)


def plane_wave_transform(rule: QuadratureRule, wv, wavevectors, workers=1):
    """``sum_i wv_i exp(-i K . y_i)`` for each row ``K`` of ``wavevectors``.

    ``wv`` holds weight-times-integrand values on the tensor grid (see
    :func:`weighted_values`). Work is split into fixed-size batches so the
    output is bit-identical for any ``workers``.
    """
    K = np.asarray(wavevectors, dtype=float).reshape(-1, rule.box.n)
    wv = np.asarray(wv).reshape(rule.shape)
    out = np.empty(len(K), dtype=complex)
    starts = range(0, len(K), CHUNK)

    def run(s):
        out[s:s + CHUNK] = _transform_chunk(rule.axes, wv, K[s:s + CHUNK])

    if workers > 1 and len(K) > CHUNK:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out
