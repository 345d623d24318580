import pytest

from talbotlau import ConfigError, RunConfig, load_config, parse_config
from talbotlau.constants import MEV_NM3


def test_empty_config_reproduces_reference_setup():
    cfg = parse_config("")
    ic = cfg.interferometer_config()
    assert ic.period == pytest.approx(991e-9)
    assert ic.g2.open_fraction == pytest.approx(0.40)
    assert ic.separation == pytest.approx(0.38)
    assert ic.molecule.mass_amu == 614.0 and ic.molecule.c3 == 0.0
    geom = cfg.beamline_geometry()
    assert geom.oven_slit_width == pytest.approx(200e-6)
    assert geom.detector_z == pytest.approx(2.9)
    heights = cfg.heights()
    assert len(heights) == 43 and heights[0] == pytest.approx(250e-6)
    s = cfg.synthesis_settings()
    assert s.n_stripes == 30 and s.exposure == pytest.approx(480.0)
    assert s.adsorber_step / s.grating_step == pytest.approx(4250.0)
    assert cfg.analysis.averaging_mode == "average_visibility"
    assert load_config(None).hash() == cfg.hash()


def test_sections_and_overrides():
    cfg = parse_config(
        """
seed = 7
[molecule]
c3_J_m3 = 8.0109e-50
[gratings]
open_fraction = 0.45
[gratings.g3]
open_fraction = 0.30
[imaging]
tilt_urad = 200
noisy_calibration = true
"""
    )
    assert cfg.seed == 7
    assert cfg.molecule_species().c3 == pytest.approx(8.0109e-50)
    assert cfg.grating("g1").open_fraction == pytest.approx(0.45)
    assert cfg.grating("g3").open_fraction == pytest.approx(0.30)
    assert cfg.synthesis_settings().tilt == pytest.approx(200e-6)
    assert cfg.synthesis_settings().noisy_calibration


def test_int_promotes_to_float_but_not_the_reverse():
    assert parse_config("[interferometer]\nseparation_m = 1\n").interferometer.separation_m == 1.0
    with pytest.raises(ConfigError):
        parse_config("[interferometer]\nn_max = 40.5\n")


@pytest.mark.parametrize(
    "text, line",
    [
        ("seed = 1\n[gratings]\nperiod_nm = -5\n", 3),
        ("[molecule]\nmass = 614\n", 2),
        ("[beamline]\n\noven_slit_um = 'wide'\n", 3),
        ("[analysis]\naveraging_mode = 'median'\n", 2),
        ("[colour]\nx = 1\n", 1),
        ("seed = 1\n[imaging\n", 2),
        ("[analysis]\nscattering_fraction = 1.0\n", 2),
        ("[imaging]\nvignetting = 1.5\n", 2),
        ("[gratings.g2]\nperiod_nm = 1000\n", 2),
        ("[gratings]\nopen_fraction = 1.0\n", 2),
        ("[beamline]\ndetector_z_m = 1.0\n", 2),
    ],
)
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_hash_tracks_content_not_formatting():
    a = parse_config("seed = 3\n")
    b = parse_config("# comment\nseed   =   3\n")
    c = parse_config("seed = 4\n")
    assert a.hash() == b.hash() != c.hash()
    assert len(a.hash()) == 64


def test_with_overrides():
    cfg = RunConfig().with_overrides(seed=5, output_dir="elsewhere", height_count=3)
    assert cfg.seed == 5 and cfg.output_dir == "elsewhere"
    assert len(cfg.heights()) == 3
    same = RunConfig().with_overrides()
    assert same.hash() == RunConfig().hash()


def test_tabulated_source_is_validated():
    ok = parse_config(
        "[source]\ndistribution = 'tabulated'\ntable_velocities_mps = [100, 200, 300]\ntable_weights = [1, 2, 1]\n"
    )
    assert ok.source_model().distribution == "tabulated"
    with pytest.raises(ConfigError):
        parse_config("[source]\ndistribution = 'tabulated'\ntable_velocities_mps = [100]\ntable_weights = [1]\n")


def test_illustrative_interaction_units():
    cfg = parse_config(f"[molecule]\nc3_J_m3 = {5 * MEV_NM3!r}\n")
    assert cfg.molecule_species().c3 / MEV_NM3 == pytest.approx(5.0)
