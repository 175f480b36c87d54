import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layered_isp.errors import InvalidConfigError, InvalidScalingError, NearSingularError, SchemaError
from layered_isp.forward import reference_field, synthesize_dataset, synthesize_phaseless
from layered_isp.lattice import build_admissible_set
from layered_isp.medium import Medium, transmission_T
from layered_isp.metrics import err_inf, err_l2
from layered_isp.quadrature import SourceBox, tensor_rule
from layered_isp.retrieval import (FLAG_DEGENERATE, FLAG_OK, ReferenceConfig, read_retrieval_csv, reference_offsets,
                                   relative_det, retrieval_rhs, retrieve_dataset, scaling_factors, solve_phase)
from layered_isp.sources import AnalyticSource2D, CallableSource

BOX = SourceBox(2, 1.0, 0.5)
cplx = st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False)


def test_rhs_examples():
    assert retrieval_rhs(0.0, 2.0, 2.0, 1.0) == 0.0
    assert retrieval_rhs(1.0, 0.0, 1.0, 1.0) == 1.0
    with pytest.raises(InvalidScalingError):
        retrieval_rhs(1.0, 1.0, 0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(cplx, cplx, st.floats(0.1, 10))
def test_rhs_identity(u, phi, c):
    f = retrieval_rhs(abs(u), abs(u - c * phi), c, phi)
    expect = phi.real * u.real + phi.imag * u.imag
    scale = abs(u) ** 2 + (c * abs(phi)) ** 2
    assert abs(f - expect) <= 1e-12 * scale / c


def test_solver_examples():
    assert solve_phase(1, 1j, 0.3, -0.7) == pytest.approx(0.3 - 0.7j, abs=1e-15)
    with pytest.raises(NearSingularError) as info:
        solve_phase(1 + 1j, 1 + 1j, 1, 1)
    assert info.value.det == 0.0


@settings(max_examples=200, deadline=None)
@given(cplx, cplx, cplx)
def test_solver_recovers_u(u, p1, p2):
    if relative_det(np.array([p1, p2])) < 0.1:
        return
    f1 = p1.real * u.real + p1.imag * u.imag
    f2 = p2.real * u.real + p2.imag * u.imag
    assert abs(solve_phase(p1, p2, f1, f2) - u) <= 1e-12 * max(1.0, abs(u)) * 10


def test_reference_config_validation():
    with pytest.raises(InvalidConfigError):
        ReferenceConfig(alpha1=0.5)
    with pytest.raises(InvalidConfigError):
        ReferenceConfig(alpha1=-0.25, alpha2=-0.25)
    with pytest.raises(InvalidConfigError):
        ReferenceConfig(placement="sideways")
    up = ReferenceConfig.default("upper")
    assert up.alpha1 > 0 and up.alpha2_zero == 4.0


@pytest.mark.parametrize("placement", ["lower", "upper"])
@pytest.mark.parametrize("spacing", ["quarter-wave", "fixed"])
def test_offsets_keep_sign_and_conditioning(ref_medium, placement, spacing):
    lat = build_admissible_set(ref_medium, 2, 20, 1.0, 1e-3)
    refs = ReferenceConfig.default(placement, spacing)
    off = reference_offsets(refs, ref_medium, lat)
    sign = -1 if placement == "lower" else 1
    assert np.all(np.sign(off) == sign)
    det = relative_det(reference_field(refs, ref_medium, lat, off))
    if spacing == "quarter-wave":
        assert det.min() >= refs.conditioning_floor


def test_scaling_factor_properties(ref_medium):
    lat = build_admissible_set(ref_medium, 2, 10, 1.0, 1e-3)
    refs = ReferenceConfig.default()
    off = reference_offsets(refs, ref_medium, lat)
    phi = reference_field(refs, ref_medium, lat, off)
    u = np.random.default_rng(0).uniform(0.1, 1, len(lat))
    c, deg = scaling_factors(u, phi, lat)
    c2, _ = scaling_factors(2 * u, phi, lat)
    assert np.array_equal(c2, 2 * c)
    assert not deg.any()
    # lower points are unimodular up to T, so the max over a frequency group is max T there
    keys = lat.frequency_keys()
    T = transmission_T(ref_medium, lat.obs_theta)
    for key in np.unique(keys)[:20]:
        rows = keys == key
        assert np.max(np.abs(phi[rows, 0])) == pytest.approx(np.max(T[rows]), rel=1e-14)
    c0, deg0 = scaling_factors(np.zeros(len(lat)), phi, lat)
    assert deg0.all() and not c0.any()


@pytest.fixture(scope="module")
def small_data(ref_medium):
    lat = build_admissible_set(ref_medium, 2, 20, 1.0, 1e-3)
    return synthesize_dataset(ref_medium, BOX, tensor_rule(BOX, 120), AnalyticSource2D(), lat)


@pytest.mark.parametrize("placement", ["lower", "upper"])
@pytest.mark.parametrize("spacing", ["quarter-wave", "fixed"])
def test_noiseless_round_trip(small_data, ref_medium, placement, spacing):
    refs = ReferenceConfig.default(placement, spacing)
    rep = retrieve_dataset(synthesize_phaseless(small_data, refs, ref_medium), refs, ref_medium)
    assert err_l2(small_data, rep) <= 1e-10 and err_inf(small_data, rep) <= 1e-10
    assert rep.flagged == []


def test_rescale_matches_recorded_when_clean(small_data, ref_medium):
    refs = ReferenceConfig.default()
    p = synthesize_phaseless(small_data, refs, ref_medium)
    a = retrieve_dataset(p, refs, ref_medium)
    b = retrieve_dataset(p, refs, ref_medium, rescale=True)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12, atol=1e-18)


def test_zero_source_flags_everything(ref_medium):
    lat = build_admissible_set(ref_medium, 2, 5, 1.0, 1e-3)
    data = synthesize_dataset(ref_medium, BOX, tensor_rule(BOX, 20), CallableSource(lambda y: 0.0, 2), lat)
    refs = ReferenceConfig.default()
    rep = retrieve_dataset(synthesize_phaseless(data, refs, ref_medium), refs, ref_medium)
    assert set(rep.flags) == {FLAG_DEGENERATE}
    assert not rep.values.any()


def test_lattice_mismatch(small_data, ref_medium):
    refs = ReferenceConfig.default()
    p = synthesize_phaseless(small_data, refs, ref_medium)
    other = build_admissible_set(ref_medium, 2, 4, 1.0, 1e-3)
    with pytest.raises(InvalidConfigError):
        retrieve_dataset(p, refs, ref_medium, other)


def test_retrieval_csv_round_trip(tmp_path, small_data, ref_medium):
    refs = ReferenceConfig.default()
    rep = retrieve_dataset(synthesize_phaseless(small_data, refs, ref_medium), refs, ref_medium)
    rep.to_csv(tmp_path / "r.csv", {"config_hash": "h"})
    back = read_retrieval_csv(tmp_path / "r.csv", small_data.lattice)
    assert back.values.tobytes() == rep.values.tobytes()
    assert back.flags == [FLAG_OK] * len(rep.flags)
    text = (tmp_path / "r.csv").read_text().replace(",ok", ",maybe", 1)
    (tmp_path / "r.csv").write_text(text)
    with pytest.raises(SchemaError, match="line 3"):
        read_retrieval_csv(tmp_path / "r.csv", small_data.lattice)
