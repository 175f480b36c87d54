"""Fourier-coefficient inversion of phased far-field data.

A far-field sample along ``x_l = l/|l|`` at wavenumber ``2*pi*|l|/a`` is,
up to ``a^n T``, the Fourier coefficient of index ``l``. The zero coefficient
comes from the small-wavenumber sample after removing the contribution of
every other mode.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import InvalidConfigError, SchemaError
from .lattice import AdmissibleSet, LatticeEntry
from .medium import Medium, transmission_T
from .quadrature import SourceBox
from .sources import FourierSeriesSource, GridField, sample_grid

MEASURED = "measured"
SYMMETRY = "symmetry"
UNOBSERVABLE = "unobservable"
ZERO_MODE = "zero-mode"
MISSING = "missing"
PROVENANCE = (MEASURED, SYMMETRY, UNOBSERVABLE, ZERO_MODE, MISSING)

ZERO_MODES = ("exact", "box", "prefactor")
_T_FLOOR = 1e-14


@dataclass(eq=False)
class CoefficientTable:
    n: int
    N: int
    a: float
    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __getitem__(self, l):
        return self.values[tuple(l)]

    def set(self, l, value, how):
        l = tuple(int(v) for v in l)
        self.values[l] = complex(value)
        self.provenance[l] = how

    def copy(self):
        return CoefficientTable(self.n, self.N, self.a, dict(self.values), dict(self.provenance))

    def counts(self):
        out = {p: 0 for p in PROVENANCE}
        for p in self.provenance.values():
            out[p] += 1
        return out

    @property
    def complete(self):
        return len(self.values) == (2 * self.N + 1) ** self.n

    def as_source(self):
        return FourierSeriesSource(self.values, self.a, self.n)

    def to_csv(self, path, meta=None):
        write_coefficients_csv(self, path, meta)


def coefficient_from_farfield(value, entry: LatticeEntry, m: Medium, a: float, n: int) -> complex:
    """``u / (a^n T(theta))`` with ``theta`` the entry's observation angle."""
    T = transmission_T(m, entry.observation_theta)
    if abs(T) < _T_FLOOR:
        raise InvalidConfigError(f"transmission coefficient vanishes at index {entry.index}")
    return complex(value) / (a ** n * T)


def _interval_integral(beta, lo, hi):
    """``int_lo^hi exp(i beta t) dt`` with the ``beta -> 0`` limit handled."""
    beta = np.asarray(beta, dtype=float)
    small = np.abs(beta) * (hi - lo) < 1e-8
    b = np.where(small, 1.0, beta)
    val = (np.exp(1j * b * hi) - np.exp(1j * b * lo)) / (1j * b)
    # second-order Taylor term keeps the small-beta branch accurate to ~1e-17
    taylor = (hi - lo) + 0.5j * beta * (hi ** 2 - lo ** 2)
    return np.where(small, taylor, val)


def period_cell(box: SourceBox):
    """Bounds of the period cell ``[-a/2, a/2]^(n-1) x [-a, 0]`` holding the box."""
    return [(-box.a / 2, box.a / 2)] * (box.n - 1) + [(-box.a, 0.0)]


def overlap_integrals(indices, direction, lam, box: SourceBox, domain="cell"):
    """``int phi_l conj(phi_{lam d})`` for each index ``l``, in closed form.

    ``domain="cell"`` integrates over the period cell, where the series of
    the zero-extended source converges; ``"box"`` over the box itself.
    """
    idx = np.asarray(indices, dtype=float).reshape(-1, box.n)
    d = np.asarray(direction, dtype=float)
    out = np.ones(len(idx), dtype=complex)
    bounds = period_cell(box) if domain == "cell" else box.bounds
    for j, (lo, hi) in enumerate(bounds):
        beta = (2 * math.pi / box.a) * (idx[:, j] - lam * d[j])
        out *= _interval_integral(beta, lo, hi)
    return out


def zero_mode_correction(u0, entry: LatticeEntry, coeffs: CoefficientTable, box: SourceBox,
                         a: float, lam: float, N: int, m: Medium, mode="exact") -> complex:
    """Zero coefficient from the small-wavenumber sample.

    Solves ``u0/T = s_0 I_0 + sum_l s_l I_l`` where ``I_l`` overlaps mode ``l``
    with the probing plane wave. The source vanishes on the period cell
    outside the box, so the identity holds with cell overlaps, whose tail
    beyond order ``N`` is ``O(lam)`` small. ``mode="box"`` overlaps over the
    box instead (same identity, slowly converging tail). ``mode="prefactor"``
    uses cell overlaps but replaces ``1/I_0`` by ``lam*pi / (a^n sin(lam*pi))``,
    which equals it only for a probe along the first axis.
    """
    if not 0 < lam < 1:
        raise InvalidConfigError(f"lam must lie in (0, 1), got {lam!r}")
    if mode not in ZERO_MODES:
        raise InvalidConfigError(f"zero-mode correction must be one of {ZERO_MODES}, got {mode!r}")
    if box.a != a:
        raise InvalidConfigError("box period differs from a")
    domain = "box" if mode == "box" else "cell"
    if domain == "cell" and box.L > a:
        raise InvalidConfigError(f"box depth L={box.L} exceeds the period a={a}; use mode='box'")
    d = entry.direction.as_array()
    others = [l for l in sorted(coeffs.values) if any(l) and max(abs(v) for v in l) <= N]
    rhs = complex(u0) / transmission_T(m, entry.observation_theta)
    if others:
        s = np.array([coeffs.values[l] for l in others])
        rhs -= np.sum(s * overlap_integrals(others, d, lam, box, domain))
    if mode == "prefactor":
        return rhs * lam * math.pi / (a ** box.n * math.sin(lam * math.pi))
    I0 = overlap_integrals([(0,) * box.n], d, lam, box, domain)[0]
    return complex(rhs / I0)


def complete_by_symmetry(coeffs: CoefficientTable, real_source=True) -> CoefficientTable:
    """Fill every index with ``|l|_inf <= N``.

    Measured indices have ``l_n >= 0``. For a real source each gains the
    conjugate partner ``-l``; indices never measured (``l_n = 0`` without
    grazing probes, or outside the aperture) are set to zero as unobservable. Without the real-source
    assumption lower indices cannot be inferred and are marked missing.
    """
    out = coeffs.copy()
    n, N = coeffs.n, coeffs.N
    if not coeffs.values:
        return out
    for l in itertools.product(range(-N, N + 1), repeat=n):
        if l in out.values or not any(l):
            continue
        mirror = tuple(-v for v in l)
        if real_source and coeffs.provenance.get(mirror) == MEASURED:
            out.set(l, np.conj(coeffs.values[mirror]), SYMMETRY)
        elif l[-1] < 0 and not real_source:
            out.set(l, 0.0, MISSING)
        else:
            out.set(l, 0.0, UNOBSERVABLE)
    return out


def reconstruct(coeffs: CoefficientTable, box: SourceBox, resolution) -> GridField:
    """Sample the truncated series on a cell-centred grid."""
    return sample_grid(coeffs.as_source(), box, resolution)


def invert_values(values, lattice: AdmissibleSet, m: Medium, box: SourceBox,
                  zero_mode="exact", real_source=True) -> CoefficientTable:
    """Full coefficient table from one complex far-field value per lattice entry."""
    values = np.asarray(values, dtype=complex)
    if values.shape != (len(lattice),):
        raise InvalidConfigError(f"expected {len(lattice)} far-field values, got {values.shape}")
    n, a = lattice.n, lattice.a
    T = transmission_T(m, lattice.obs_theta)
    if np.any(np.abs(T) < _T_FLOOR):
        raise InvalidConfigError("transmission coefficient vanishes on the lattice")
    coef = values / (a ** n * T)
    table = CoefficientTable(n, lattice.N, a)
    zero = lattice.zero_row
    for i in range(len(lattice)):
        if i != zero:
            table.set(lattice.indices[i], coef[i], MEASURED)
    table = complete_by_symmetry(table, real_source)
    s0 = zero_mode_correction(values[zero], lattice.entry(zero), table, box, a, lattice.lam,
                              lattice.N, m, zero_mode)
    if real_source:
        # the zero coefficient of a real source is real; the imaginary part is truncation error
        s0 = s0.real
    table.set((0,) * n, s0, ZERO_MODE)
    return table


def coefficients_header(n):
    return [f"l{j + 1}" for j in range(n)] + ["re", "im", "provenance"]


def write_coefficients_csv(t: CoefficientTable, path, meta=None):
    meta = dict(meta or {})
    meta.update(n=t.n, N=t.N, a=io.fmt(t.a))
    rows = [list(l) + [float(t.values[l].real), float(t.values[l].imag), t.provenance.get(l, MEASURED)]
            for l in sorted(t.values)]
    return io.write_table(path, "coefficients", coefficients_header(t.n), rows, meta)


def read_coefficients_csv(path) -> CoefficientTable:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    n = next((int(tok[2:]) for tok in first.split() if tok.startswith("n=")), None)
    if n is None:
        raise SchemaError(f"{path}: coefficient file lacks dimension metadata", line=1)
    meta, rows = io.read_table(path, "coefficients", coefficients_header(n))
    t = CoefficientTable(n, int(meta.get("N", 0)), float(meta.get("a", 1.0)))
    for line, r in rows:
        l = tuple(io.parse_int(x, line, f"l{j + 1}") for j, x in enumerate(r[:n]))
        if r[n + 2] not in PROVENANCE:
            raise SchemaError(f"unknown provenance {r[n + 2]!r}", line=line)
        t.set(l, complex(io.parse_float(r[n], line, "re"), io.parse_float(r[n + 1], line, "im")), r[n + 2])
    if not t.N and t.values:
        t.N = max(max(abs(v) for v in l) for l in t.values)
    return t
