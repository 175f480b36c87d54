"""Phase retrieval from magnitude triples with two reference point sources.

For every measured direction ``x`` two reference points ``z_j = alpha_j x`` are
added with strengths ``c_j``. Subtracting ``|u|^2`` from ``|u - c_j Phi_j|^2``
leaves two linear equations in ``(Re u, Im u)``, solved by Cramer's rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import InvalidConfigError, InvalidScalingError, NearSingularError, SchemaError
from .forward import PhaselessDataset, reference_field
from .lattice import AdmissibleSet
from .medium import Medium

FLAG_OK = "ok"
FLAG_DEGENERATE = "degenerate"
FLAG_SINGULAR = "near-singular"
DEGENERATE_FLOOR = float(np.sqrt(np.finfo(float).tiny))  # ~1.5e-154


@dataclass(frozen=True)
class ReferenceConfig:
    """Reference point placement.

    ``alpha1``/``alpha2`` are signed radial offsets along the observation
    direction (negative = below the interface). With ``spacing="quarter-wave"``
    the second offset is chosen per entry so the two reference fields differ
    in phase by a quarter wave, which keeps the 2x2 system well conditioned at
    every frequency; ``alpha2`` and ``alpha2_zero`` are then unused. With
    ``spacing="fixed"`` the offsets are constant, with ``alpha2_zero`` at the
    zero-index frequency. Either way, entries whose relative determinant falls
    below ``conditioning_floor`` get their second point moved (``alpha2``
    halved, or the quarter-wave separation halved) up to ``max_fallback`` times.

    Retrieval is homogeneous in ``u``, so a frequency is only degenerate when
    its largest ``|u|`` falls below ``degenerate_threshold``, by default the
    smallest magnitude whose square is still a normal float.
    """

    alpha1: float = -0.5
    alpha2: float = -0.25
    alpha2_zero: float = -4.0
    placement: str = "lower"
    spacing: str = "quarter-wave"
    det_threshold: float = 1e-12
    conditioning_floor: float = 0.1
    degenerate_threshold: float = DEGENERATE_FLOOR
    max_fallback: int = 8

    def __post_init__(self):
        if self.placement not in ("lower", "upper"):
            raise InvalidConfigError(f"placement must be 'lower' or 'upper', got {self.placement!r}")
        if self.spacing not in SPACINGS:
            raise InvalidConfigError(f"spacing must be one of {SPACINGS}, got {self.spacing!r}")
        if self.alpha1 == self.alpha2:
            raise InvalidConfigError("reference offsets alpha1 and alpha2 must differ")
        sign = -1 if self.placement == "lower" else 1
        for name in ("alpha1", "alpha2", "alpha2_zero"):
            v = getattr(self, name)
            if v == 0 or np.sign(v) != sign:
                raise InvalidConfigError(f"{name}={v} inconsistent with placement {self.placement!r}")
        if self.alpha1 == self.alpha2_zero:
            raise InvalidConfigError("alpha1 and alpha2_zero must differ")
        if not self.det_threshold > 0:
            raise InvalidConfigError("det_threshold must be positive")

    @classmethod
    def default(cls, placement="lower", spacing="quarter-wave"):
        if placement == "upper":
            return cls(alpha1=0.5, alpha2=0.25, alpha2_zero=4.0, placement="upper", spacing=spacing)
        return cls(spacing=spacing)

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


SPACINGS = ("quarter-wave", "fixed")


@dataclass(eq=False)
class RetrievalReport:
    lattice: AdmissibleSet
    values: np.ndarray
    det: np.ndarray  # |det D| per entry
    flags: list
    meta: dict = field(default_factory=dict)

    @property
    def flagged(self):
        return [i for i, f in enumerate(self.flags) if f != FLAG_OK]

    def value(self, l):
        row = self.lattice.row_of(l)
        if row is None:
            raise KeyError(tuple(l))
        return complex(self.values[row])

    def to_csv(self, path, meta=None):
        write_retrieval_csv(self, path, meta)


def relative_det(phi):
    """``|det D| / (|row1| |row2|)`` for ``D = [[Re Phi1, Im Phi1], [Re Phi2, Im Phi2]]``."""
    phi = np.asarray(phi)
    det = phi[..., 0].real * phi[..., 1].imag - phi[..., 0].imag * phi[..., 1].real
    scale = np.abs(phi[..., 0]) * np.abs(phi[..., 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0, np.abs(det) / np.where(scale > 0, scale, 1.0), 0.0)


def reference_offsets(refs: ReferenceConfig, m: Medium, lattice: AdmissibleSet):
    """Per-entry ``(alpha1, alpha2)`` after spacing rule and conditioning fallback."""
    offsets = np.empty((len(lattice), 2))
    offsets[:, 0] = refs.alpha1
    if refs.spacing == "quarter-wave":
        if refs.placement == "lower":
            # phase of Phi is -k_- (x^t . x) alpha for z = alpha x below the interface
            k_eff = lattice.k_minus * np.sum(lattice.directions * lattice.obs_directions, axis=1)
        else:
            k_eff = lattice.k_plus
        offsets[:, 1] = refs.alpha1 + np.sign(refs.alpha1) * np.pi / (2 * k_eff)
    else:
        offsets[:, 1] = refs.alpha2
        offsets[~lattice.nonzero_mask, 1] = refs.alpha2_zero
    for _ in range(refs.max_fallback):
        bad = relative_det(reference_field(refs, m, lattice, offsets)) < refs.conditioning_floor
        if not bad.any():
            break
        if refs.spacing == "quarter-wave":
            offsets[bad, 1] = offsets[bad, 0] + 0.5 * (offsets[bad, 1] - offsets[bad, 0])
        else:
            offsets[bad, 1] *= 0.5
    return offsets


def scaling_factors(abs_u, phi, lattice: AdmissibleSet, threshold=DEGENERATE_FLOOR):
    """Reference strengths ``c_j = max|u| / max|Phi_j|`` per frequency.

    Maxima run over all entries sharing a frequency. Returns per-entry
    ``(E, 2)`` strengths and a degenerate mask (zero measured field, ``c = 0``).
    """
    abs_u = np.asarray(abs_u, dtype=float)
    keys = lattice.frequency_keys()
    uniq, inv = np.unique(keys, return_inverse=True)
    umax = np.zeros(len(uniq))
    np.maximum.at(umax, inv, abs_u)
    pmax = np.zeros((len(uniq), 2))
    for j in range(2):
        np.maximum.at(pmax[:, j], inv, np.abs(phi[:, j]))
    degenerate_group = umax < threshold
    c = np.where(degenerate_group[:, None], 0.0, umax[:, None] / pmax)
    return c[inv], degenerate_group[inv]


def retrieval_rhs(abs_u, abs_v, c, phi):
    """``f_j = -(|v_j|^2 - |u|^2 - c_j^2 |Phi_j|^2) / (2 c_j)``."""
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise InvalidScalingError("reference strength must be positive")
    out = -(np.square(abs_v) - np.square(abs_u) - c ** 2 * np.abs(phi) ** 2) / (2 * c)
    return float(out) if np.ndim(out) == 0 else out


def _cramer(phi1, phi2, f1, f2):
    r1, i1, r2, i2 = phi1.real, phi1.imag, phi2.real, phi2.imag
    det = r1 * i2 - i1 * r2
    det_r = f1 * i2 - i1 * f2
    det_i = r1 * f2 - f1 * r2
    return det, det_r, det_i


def solve_phase(phi1, phi2, f1, f2, det_threshold=1e-12) -> complex:
    """Solve ``Re Phi_j Re u + Im Phi_j Im u = f_j`` (j = 1, 2) for ``u``."""
    phi1, phi2 = complex(phi1), complex(phi2)
    det, det_r, det_i = _cramer(phi1, phi2, f1, f2)
    scale = abs(phi1) * abs(phi2)
    if scale == 0 or abs(det) < det_threshold * scale:
        raise NearSingularError(f"retrieval system is near-singular (|det D|={abs(det):.3e})", det=abs(det))
    return complex(det_r / det, det_i / det)


def retrieve_dataset(p: PhaselessDataset, refs: ReferenceConfig, m: Medium,
                     lattice: AdmissibleSet | None = None, rescale=False) -> RetrievalReport:
    """Recover complex far-field values from a phaseless dataset.

    The reference strengths and offsets recorded with the data are reused.
    With ``rescale`` the strengths are recomputed from the measured ``|u|``
    instead. Bad entries are flagged and set to zero; the dataset is never
    aborted for a single entry.
    """
    lat = lattice if lattice is not None else p.lattice
    if len(lat) != len(p.lattice) or not np.array_equal(lat.indices, p.lattice.indices):
        raise InvalidConfigError("phaseless data were measured on a different lattice")
    phi = reference_field(refs, m, lat, p.offsets)
    abs_u, abs_v = p.magnitudes[:, 0], p.magnitudes[:, 1:]
    if rescale:
        c, degenerate = scaling_factors(abs_u, phi, lat, refs.degenerate_threshold)
    else:
        c, degenerate = p.scaling, p.degenerate | np.any(p.scaling <= 0, axis=1)
    safe_c = np.where(c > 0, c, 1.0)
    f = -(np.square(abs_v) - np.square(abs_u)[:, None] - safe_c ** 2 * np.abs(phi) ** 2) / (2 * safe_c)
    det, det_r, det_i = _cramer(phi[:, 0], phi[:, 1], f[:, 0], f[:, 1])
    scale = np.abs(phi[:, 0]) * np.abs(phi[:, 1])
    singular = np.abs(det) < refs.det_threshold * scale
    ok = ~(degenerate | singular)
    safe_det = np.where(ok, det, 1.0)
    values = np.where(ok, det_r / safe_det + 1j * det_i / safe_det, 0.0)
    flags = [FLAG_DEGENERATE if d else FLAG_SINGULAR if s else FLAG_OK for d, s in zip(degenerate, singular)]
    return RetrievalReport(lat, values, np.abs(det), flags, dict(p.meta))


def retrieval_header(n):
    return [f"l{j + 1}" for j in range(n)] + ["omega", "re", "im", "abs_det", "flag"]


def write_retrieval_csv(r: RetrievalReport, path, meta=None):
    lat = r.lattice
    meta = {**r.meta, **(meta or {})}
    rows = [[int(v) for v in lat.indices[i]] + [float(lat.omega[i]), float(r.values[i].real),
                                                float(r.values[i].imag), float(r.det[i]), r.flags[i]]
            for i in range(len(lat))]
    return io.write_table(path, "retrieval", retrieval_header(lat.n), rows, meta)


def read_retrieval_csv(path, lattice: AdmissibleSet) -> RetrievalReport:
    n = lattice.n
    meta, rows = io.read_table(path, "retrieval", retrieval_header(n))
    if len(rows) != len(lattice):
        raise SchemaError(f"{path}: {len(rows)} rows for {len(lattice)} lattice entries")
    vals, dets, flags = [], [], []
    for row, (line, r) in enumerate(rows):
        l = tuple(io.parse_int(x, line, f"l{j + 1}") for j, x in enumerate(r[:n]))
        if l != tuple(int(v) for v in lattice.indices[row]):
            raise SchemaError(f"index {l} does not match lattice entry {tuple(lattice.indices[row])}", line=line)
        vals.append(complex(io.parse_float(r[n + 1], line, "re"), io.parse_float(r[n + 2], line, "im")))
        dets.append(io.parse_float(r[n + 3], line, "abs_det"))
        if r[n + 4] not in (FLAG_OK, FLAG_DEGENERATE, FLAG_SINGULAR):
            raise SchemaError(f"unknown flag {r[n + 4]!r}", line=line)
        flags.append(r[n + 4])
    meta.pop("schema", None)
    meta.pop("kind", None)
    return RetrievalReport(lattice, np.array(vals), np.array(dets), flags, meta)
