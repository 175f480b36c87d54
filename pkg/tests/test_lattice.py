import math

import numpy as np
import pytest

from layered_isp.errors import InvalidConfigError, SchemaError
from layered_isp.lattice import build_admissible_set, entry_for_index, read_lattice_csv
from layered_isp.medium import Direction, Medium, aperture_contains, transmitted_direction


@pytest.fixture(scope="module")
def ref_set(ref_medium):
    return build_admissible_set(ref_medium, 2, 50, 1.0, 1e-3)


def test_reference_count_matches_enumeration(ref_set, oracle):
    # direct enumeration of the admissible definition gives 4954 non-zero indices
    assert int(ref_set.nonzero_mask.sum()) == oracle["count_2d_N50"] == 4954
    assert len(ref_set) == 4955


def test_3d_count_matches_enumeration(ref_medium, oracle):
    s = build_admissible_set(ref_medium, 3, 10, 1.0, 1e-3)
    assert int(s.nonzero_mask.sum()) == oracle["count_3d_N10"]


def test_full_aperture_small_enumeration(ref_medium):
    s = build_admissible_set(ref_medium, 2, 1, 1.0, 1e-3, full_aperture=True)
    nonzero = [tuple(l) for l in s.indices if any(l)]
    assert nonzero == [(-1, 1), (0, 1), (1, 1)]


def test_grazing_adds_ln_zero(ref_medium):
    s = build_admissible_set(ref_medium, 2, 1, 1.0, 1e-3, full_aperture=True, grazing=True)
    assert [tuple(l) for l in s.indices] == [(-1, 0), (-1, 1), (0, 0), (0, 1), (1, 0), (1, 1)]
    with pytest.raises(InvalidConfigError):
        build_admissible_set(ref_medium, 2, 1, 1.0, 1e-3, grazing=True)


def test_entry_formulas(ref_set):
    e = entry_for_index(ref_set, (3, 4))
    assert e.k_minus == pytest.approx(10 * math.pi, rel=1e-15)
    assert e.omega == pytest.approx(20 * math.pi, rel=1e-15)
    assert e.theta == pytest.approx(math.atan(4 / 3), rel=1e-15)
    assert e.direction.vector == (0.6, 0.8)


def test_entry_lookup_examples(ref_set):
    assert entry_for_index(ref_set, (1, 0)) is None
    zero = entry_for_index(ref_set, (0, 0))
    assert zero.k_minus == pytest.approx(2 * math.pi * 1e-3, rel=1e-15)
    assert zero.is_zero
    assert entry_for_index(ref_set, (0, 1)).theta == pytest.approx(math.pi / 2)


def test_invariants(ref_set, ref_medium):
    s = ref_set
    nz = s.nonzero_mask
    assert len({tuple(l) for l in s.indices}) == len(s)
    assert np.all(np.abs(s.indices[nz]).max(axis=1) <= 50)
    assert np.all(s.indices[nz, -1] > 0)
    assert np.all(aperture_contains(ref_medium, 2, s.theta[nz]))
    assert np.allclose(s.omega / ref_medium.c_minus, s.k_minus, rtol=1e-12, atol=0)
    assert np.allclose(s.omega / ref_medium.c_plus, s.k_plus, rtol=1e-12, atol=0)
    order = [tuple(l) for l in s.indices]
    assert order == sorted(order)


def test_direction_is_transmitted_direction(ref_set, ref_medium):
    rng = np.random.default_rng(3)
    for row in rng.choice(len(ref_set), 40, replace=False):
        e = ref_set.entry(row)
        obs = Direction.from_angles(2, e.observation_theta)
        t = transmitted_direction(ref_medium, obs)
        if not e.is_zero:
            np.testing.assert_allclose(t.vector, e.direction.vector, atol=1e-10)
            l = np.array(e.index, dtype=float)
            np.testing.assert_array_equal(e.direction.as_array(), l / np.linalg.norm(l))


def test_zero_direction_defaults(ref_medium):
    lim = build_admissible_set(ref_medium, 2, 3, 1.0, 1e-3)
    full = build_admissible_set(ref_medium, 2, 3, 1.0, 1e-3, full_aperture=True)
    assert lim.entry(lim.zero_row).direction.vector == (0.0, 1.0)
    v = full.entry(full.zero_row).direction.as_array()
    assert v[0] == 1.0 and np.linalg.norm(v) == 1.0


def test_shrinking_aperture_gives_subset():
    prev = None
    for cp in (1.999, 1.9, 1.5, 1.0):
        s = build_admissible_set(Medium(2, cp), 2, 20, 1.0, 1e-3)
        cur = {tuple(l) for l in s.indices}
        if prev is not None:
            assert cur <= prev
        prev = cur


@pytest.mark.parametrize("kwargs", [dict(N=0), dict(a=0.0), dict(lam=1.0), dict(n=4)])
def test_invalid_config(ref_medium, kwargs):
    args = dict(n=2, N=3, a=1.0, lam=1e-3)
    args.update(kwargs)
    with pytest.raises(InvalidConfigError):
        build_admissible_set(ref_medium, args["n"], args["N"], args["a"], args["lam"])


def test_extra_index_and_subset(ref_medium):
    s = build_admissible_set(ref_medium, 3, 20, 1.0, 1e-3)
    assert s.row_of((17, -13, 0)) is None
    t = s.with_extra_index((17, -13, 0))
    e = entry_for_index(t, (17, -13, 0))
    assert e.observation_theta == pytest.approx(ref_medium.theta_c, abs=1e-7)
    sub = t.subset([t.row_of((17, -13, 0)), t.zero_row])
    assert [tuple(l) for l in sub.indices] == [(0, 0, 0), (17, -13, 0)]


def test_frequency_keys(ref_medium):
    s = build_admissible_set(ref_medium, 2, 5, 1.0, 1e-3)
    keys = s.frequency_keys()
    assert keys[s.zero_row] == -1
    assert keys[s.row_of((3, 4))] == keys[s.row_of((0, 5))] == 25


def test_csv_round_trip(tmp_path, ref_medium):
    s = build_admissible_set(ref_medium, 3, 4, 1.0, 1e-3, full_aperture=True, grazing=True)
    s.to_csv(tmp_path / "lat.csv", {"config_hash": "abc"})
    r = read_lattice_csv(tmp_path / "lat.csv")
    assert r.grazing and r.full_aperture and r.N == 4
    for name in ("indices", "directions", "theta", "obs_theta", "k_minus", "omega", "k_plus"):
        np.testing.assert_array_equal(getattr(r, name), getattr(s, name))


def test_csv_reader_reports_line(tmp_path, ref_medium):
    s = build_admissible_set(ref_medium, 2, 2, 1.0, 1e-3)
    s.to_csv(tmp_path / "lat.csv")
    lines = (tmp_path / "lat.csv").read_text().splitlines()
    lines[4] = "x" + lines[4][1:]
    (tmp_path / "lat.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match="line 5"):
        read_lattice_csv(tmp_path / "lat.csv")
