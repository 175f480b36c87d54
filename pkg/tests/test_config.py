import math

import pytest

from layered_isp.config import (PRESETS, TABLE_EPS, TABLE_INDICES_3D, ExperimentConfig, config_from_dict,
                                load_config, preset)
from layered_isp.errors import InvalidConfigError


def test_defaults_are_reference_values():
    c = ExperimentConfig()
    assert (c.dimension, c.N, c.a, c.L, c.lam) == (2, 50, 1.0, 0.5, 1e-3)
    assert c.c_minus == 2.0 and c.c_plus == 2 - math.pi / 1000
    r = c.references
    assert (r.alpha1, r.alpha2, r.alpha2_zero, r.placement) == (-0.5, -0.25, -4.0, "lower")
    assert c.grid_resolution == (100, 50)


def test_empty_yaml_gives_defaults(tmp_path):
    (tmp_path / "c.yaml").write_text("")
    assert load_config(tmp_path / "c.yaml") == ExperimentConfig()


def test_nested_yaml(tmp_path):
    (tmp_path / "c.yaml").write_text(
        "dimension: 3\nN: 4\nmedium: {c_minus: 2, c_plus: 1.5}\nbox: {a: 1, L: 1}\n"
        "references: {placement: upper, alpha1: 0.75}\nnoise: {eps: 0.01, seeds: [1, 2]}\n"
        "aperture: {mode: hemisphere}\n")
    c = load_config(tmp_path / "c.yaml")
    assert c.dimension == 3 and c.c_plus == 1.5 and c.L == 1.0
    assert c.references.alpha1 == 0.75 and c.references.placement == "upper"
    assert c.noise_eps == (0.01,) and c.seeds == (1, 2)
    assert c.aperture == "hemisphere"


@pytest.mark.parametrize("data, field", [
    ({"dimension": 4}, "dimension"),
    ({"medium": {"c_minus": -1}}, "c_minus"),
    ({"N": 0}, "N"),
    ({"references": {"placement": "upper"}, "medium": {}, "references_": 1}, "references_"),
    ({"references": {"alpha1": 0.5}}, "references"),
    ({"noise": {"eps": [1.5]}}, "noise.eps"),
    ({"noise": {"seeds": [-1]}}, "noise.seeds"),
    ({"aperture": {"mode": "wide"}}, "aperture.mode"),
    ({"box": {"L": 2.0}}, "box.L"),
    ({"medium": {"speed": 1}}, "medium.speed"),
    ({"source": {"kind": "fourier"}}, "source.file"),
    ({"indices": [[0, 1]]}, "inversion.enabled"),
    ({"indices": [[0, 99]], "inversion": {"enabled": False}}, "indices"),
    ({"quadrature": {"orders": [10]}}, "quadrature.orders"),
])
def test_validation_names_field(data, field):
    with pytest.raises(InvalidConfigError, match=field.replace(".", r"\.")):
        config_from_dict(data)


def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(InvalidConfigError, match="no such file"):
        load_config(tmp_path / "nope.yaml")
    (tmp_path / "bad.yaml").write_text("a: [1,\n")
    with pytest.raises(InvalidConfigError, match="invalid YAML"):
        load_config(tmp_path / "bad.yaml")


def test_presets():
    assert set(PRESETS) == {"table1", "table2", "table3", "table4", "fig2", "fig3"}
    t1 = preset("table1")
    assert t1.noise_eps == TABLE_EPS and len(t1.noise_eps) == 6 and t1.seeds == (0, 1, 2, 3, 4)
    assert preset("table2").placement == "upper"
    t3 = preset("table3")
    assert t3.dimension == 3 and t3.N == 30 and t3.indices == TABLE_INDICES_3D
    assert preset("fig3").N == 10
    with pytest.raises(InvalidConfigError):
        preset("table9")


def test_yaml_overrides_preset(tmp_path):
    (tmp_path / "c.yaml").write_text("preset: table1\nnoise: {seeds: [3]}\n")
    c = load_config(tmp_path / "c.yaml")
    assert c.noise_eps == TABLE_EPS and c.seeds == (3,)


def test_hash_tracks_numerics_only(tmp_path):
    a = ExperimentConfig()
    assert a.hash() == ExperimentConfig(base_dir="/elsewhere").hash()
    assert a.hash() != a.replace(N=49).hash()
    assert a.hash() != a.replace(noise_targets="all").hash()


def test_fourier_source_digest(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("x")
    c = config_from_dict({"source": {"kind": "fourier", "file": "s.csv"}}, base_dir=tmp_path)
    h = c.hash()
    f.write_text("y")
    assert c.hash() != h
