import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from conftest import C3_ILLUSTRATIVE, make_config
from talbotlau import (
    DegenerateConfigurationError,
    DomainError,
    GratingSpec,
    InterferometerConfig,
    MoleculeSpecies,
    NumericalError,
    de_broglie_wavelength,
    fringe_signal,
    grating_coefficients,
    quantum_visibility,
    talbot_lau_coefficients,
    talbot_length,
    talbot_parameter,
)
from talbotlau.physics import (
    check_hermitian,
    intensity_coefficients,
    open_half_width,
    real_signal,
    signal_harmonics,
    transmission,
    visibility_curve,
    visibility_from_components,
    vdw_phase,
)

TPP = MoleculeSpecies()
D = 991e-9

# frozen from h / (m v) with the exact SI Planck constant and the 2018 atomic mass unit
LAMBDA_250 = 2.5995522568549825e-12
TALBOT_140 = 0.21156157124741348


# -- wavelength and Talbot length ----------------------------------------------


def test_wavelength_reference_value():
    assert de_broglie_wavelength(TPP, 250.0) == pytest.approx(LAMBDA_250, rel=1e-12)
    assert de_broglie_wavelength(TPP, 250.0) == pytest.approx(2.600e-12, rel=2e-4)


def test_wavelength_scales_inversely():
    assert de_broglie_wavelength(TPP, 125.0) == pytest.approx(5.200e-12, rel=2e-4)
    heavy = MoleculeSpecies("dimer", 1228.0)
    assert de_broglie_wavelength(heavy, 250.0) == pytest.approx(1.300e-12, rel=2e-4)


@pytest.mark.parametrize("v", [0.0, -1.0, float("nan")])
def test_wavelength_rejects_bad_velocity(v):
    with pytest.raises(DomainError):
        de_broglie_wavelength(TPP, v)


def test_talbot_length_reference_values():
    assert talbot_length(D, de_broglie_wavelength(TPP, 250.0)) == pytest.approx(0.378, rel=1e-3)
    assert talbot_length(D, de_broglie_wavelength(TPP, 140.0)) == pytest.approx(TALBOT_140, rel=1e-12)
    assert talbot_length(1e-3, 1e-6) == pytest.approx(1.0)


@pytest.mark.parametrize("d, lam", [(0.0, 1e-12), (1e-6, 0.0), (-1e-6, 1e-12)])
def test_talbot_length_rejects_bad_input(d, lam):
    with pytest.raises(DomainError):
        talbot_length(d, lam)


@given(
    m=st.floats(10, 1e5),
    v=st.floats(1, 5000),
    k=st.floats(0.1, 10),
)
def test_wavelength_depends_on_momentum_only(m, v, k):
    a = de_broglie_wavelength(MoleculeSpecies("a", m), v)
    b = de_broglie_wavelength(MoleculeSpecies("b", m * k), v / k)
    assert a == pytest.approx(b, rel=1e-12)


# -- grating coefficients --------------------------------------------------------


def test_binary_coefficients():
    b = grating_coefficients(GratingSpec(D, 0.4), TPP, 200.0, n_max=5)
    assert b[5] == pytest.approx(0.4)
    assert b[6].real == pytest.approx(np.sin(0.4 * np.pi) / np.pi, rel=1e-14)
    assert b[6].real == pytest.approx(0.30273, abs=5e-6)
    # independent quadrature of the slit
    ref = quad(lambda x: np.cos(2 * np.pi * x / D), -0.2 * D, 0.2 * D, epsabs=0)[0] / D
    assert b[6].real == pytest.approx(ref, rel=1e-10)


def test_open_grating_does_not_diffract():
    b = grating_coefficients(GratingSpec(D, 1.0), TPP, 200.0, n_max=6)
    assert b[6] == pytest.approx(1.0)
    assert np.allclose(np.delete(b, 6), 0.0, atol=1e-15)


def test_n_max_must_be_positive():
    with pytest.raises(DomainError):
        grating_coefficients(GratingSpec(), TPP, 200.0, n_max=0)


def test_vdw_coefficients_match_direct_quadrature():
    mol = MoleculeSpecies(c3=C3_ILLUSTRATIVE)
    g = GratingSpec()
    v = 150.0
    b = grating_coefficients(g, mol, v, n_max=4)
    xo = open_half_width(g, mol, v)
    for n in (0, 1, 3):
        re = quad(lambda x: np.cos(vdw_phase(x, g, mol, v)) * np.cos(2 * np.pi * n * x / D), -xo, xo, limit=400, epsabs=0, epsrel=1e-10)[0]
        im = quad(lambda x: np.sin(vdw_phase(x, g, mol, v)) * np.cos(2 * np.pi * n * x / D), -xo, xo, limit=400, epsabs=0, epsrel=1e-10)[0]
        assert b[4 + n] == pytest.approx((re + 1j * im) / D, abs=1e-8)
        assert b[4 - n] == pytest.approx(b[4 + n], abs=1e-15)


def test_phase_cap_absorbs_wall_margin():
    mol = MoleculeSpecies(c3=C3_ILLUSTRATIVE)
    g = GratingSpec()
    xo = open_half_width(g, mol, 150.0, phase_cap=50.0)
    assert 0 < xo < 0.5 * g.slit_width
    assert vdw_phase(xo, g, mol, 150.0) == pytest.approx(50.0, rel=1e-9)
    t = transmission(np.array([0.0, 0.5 * (xo + 0.5 * g.slit_width), 0.5 * D]), g, mol, 150.0)
    assert abs(t[0]) == pytest.approx(1.0)
    assert t[1] == 0 and t[2] == 0


def test_parseval_convergence_without_interaction():
    g = GratingSpec(D, 0.4)
    sums = []
    for n_max in (8, 16, 32):
        b = grating_coefficients(g, TPP, 200.0, n_max=n_max)
        sums.append(np.sum(np.abs(b) ** 2))
    errs = [abs(s - 0.4) for s in sums]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3


# -- Talbot-Lau coefficients -------------------------------------------------------


@given(xi=st.floats(-5, 5), m=st.integers(-6, 6), seed=st.integers(0, 2**16))
def test_tl_coefficients_periodic_in_xi(xi, m, seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=33) + 1j * rng.normal(size=33)
    a = talbot_lau_coefficients(b, xi, 6)[m]
    c = talbot_lau_coefficients(b, xi + 2.0, 6)[m]
    assert abs(a - c) <= 1e-12 * max(1.0, abs(a)) * 33


def test_tl_coefficients_at_zero_are_intensity_fourier_coefficients():
    g = GratingSpec()
    v = 180.0
    # binary slit: fast convergence
    b = grating_coefficients(g, TPP, v, n_max=400)
    tl = talbot_lau_coefficients(b, 0.0, 4)
    for m in range(-4, 5):
        ref = quad(lambda x: np.cos(2 * np.pi * m * x / D), -0.2 * D, 0.2 * D, epsabs=0)[0] / D
        assert tl[m] == pytest.approx(ref, abs=1e-3)


def test_tl_coefficients_at_zero_converge_with_interaction():
    # the capped wall phase has a hard edge, so convergence in n_max is slow but monotone
    mol = MoleculeSpecies(c3=C3_ILLUSTRATIVE)
    g = GratingSpec()
    v = 180.0
    xo = open_half_width(g, mol, v)
    for m in (0, 1, 2):
        ref = quad(lambda x: np.cos(2 * np.pi * m * x / D), -xo, xo, epsabs=0)[0] / D
        errs = []
        for n_max in (40, 100, 400):
            tl = talbot_lau_coefficients(grating_coefficients(g, mol, v, n_max=n_max), 0.0, 2)
            assert abs(tl[m].imag) < 1e-9
            errs.append(abs(tl[m].real - ref))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 0.012


@given(xi=st.floats(-3, 3), f=st.floats(0.1, 0.9))
def test_b0_is_real(xi, f):
    b = grating_coefficients(GratingSpec(D, f), TPP, 200.0, n_max=30)
    assert abs(talbot_lau_coefficients(b, xi, 1)[0].imag) < 1e-14


def test_b0_at_zero_is_open_fraction():
    b = grating_coefficients(GratingSpec(D, 0.4), TPP, 200.0, n_max=400)
    assert talbot_lau_coefficients(b, 0.0, 0)[0].real == pytest.approx(0.4, abs=1e-3)


@pytest.mark.parametrize("v", [120.0, 250.0, 333.0])
def test_mean_flux_is_independent_of_talbot_parameter(v):
    # the m = 0 harmonic enters the signal at argument 0 * xi, giving f**3 for equal binary gratings
    s = signal_harmonics(make_config(), v)
    assert s[10] == pytest.approx(0.4**3, rel=1e-12)


def test_truncation_is_flagged():
    b = np.ones(11, dtype=complex)  # n_max = 5
    assert talbot_lau_coefficients(b, 0.3, 2).warning is None
    assert "truncated" in talbot_lau_coefficients(b, 0.3, 3).warning
    with pytest.raises(DomainError):
        talbot_lau_coefficients(np.ones(10), 0.3, 2)


# -- fringe signal ------------------------------------------------------------------


def test_reference_geometry_parameter():
    assert talbot_parameter(make_config(), 250.0) == pytest.approx(0.38 / 0.3777885200846669, rel=1e-12)


def test_open_gratings_give_flat_signal():
    cfg = make_config(open_fraction=1.0)
    sig = fringe_signal(cfg, 200.0)
    assert np.ptp(sig.values) < 1e-12
    vis = quantum_visibility(cfg, 200.0)
    assert vis.exact == pytest.approx(0.0, abs=1e-12)
    assert vis.sinusoidal == pytest.approx(0.0, abs=1e-12)


@given(v=st.floats(60, 600), f=st.floats(0.1, 0.9), c3=st.sampled_from([0.0, C3_ILLUSTRATIVE]))
def test_signal_is_hermitian_real_and_non_negative(v, f, c3):
    sig = fringe_signal(make_config(c3, f), v, resolution=64)
    check_hermitian(sig.fourier_components)
    assert np.all(sig.values >= -1e-9 * sig.values.max())
    assert 0 <= sig.visibility_exact <= 1
    # 2 |S_1| / S_0 may exceed one for peaked fringes, but not two
    assert 0 <= sig.visibility_sinusoidal <= 2 + 1e-12


def test_imaginary_residue_fails_loudly():
    comps = np.array([0.1 + 0.05j, 1.0, 0.1 + 0.05j])  # not Hermitian
    with pytest.raises(NumericalError):
        check_hermitian(comps)
    with pytest.raises(NumericalError):
        real_signal(comps, np.linspace(0, D, 16), D)


def test_zero_mean_flux_is_degenerate():
    with pytest.raises(DegenerateConfigurationError):
        visibility_from_components(np.array([0.2, 0.0, 0.2]))


def test_resolution_and_velocity_preconditions(paper_config):
    with pytest.raises(DomainError):
        fringe_signal(paper_config, 0.0)
    with pytest.raises(DomainError):
        fringe_signal(paper_config, 200.0, resolution=1)


def test_visibility_non_monotonic_over_velocity_scan(paper_config):
    v = np.linspace(100, 350, 51)
    vis = visibility_curve(paper_config, v)
    d = np.diff(vis)
    extrema = int(np.sum(np.sign(d[1:]) != np.sign(d[:-1])))
    assert extrema >= 2


@given(amp=st.floats(0.0, 0.9), second=st.floats(0.0, 0.02), phase=st.floats(-np.pi, np.pi))
def test_exact_visibility_not_below_sinusoidal_for_first_harmonic_signals(amp, second, phase):
    # S(x) = 1 + amp cos(kx + phase) + second cos(2kx)
    comps = np.zeros(5, dtype=complex)
    comps[2] = 1.0
    comps[3] = 0.5 * amp * np.exp(1j * phase)
    comps[1] = np.conj(comps[3])
    comps[4] = comps[0] = 0.5 * second
    x = np.linspace(0, D, 4096, endpoint=False)
    s = real_signal(comps, x, D)
    v_exact = (s.max() - s.min()) / (s.max() + s.min())
    assert v_exact >= visibility_from_components(comps) - 2 * second - 1e-6


@given(v=st.floats(80, 400), k=st.floats(0.25, 4.0))
def test_visibility_depends_on_mass_and_speed_through_talbot_parameter(v, k):
    # without the wall interaction only m v enters
    a = make_config()
    heavy = InterferometerConfig(a.g1, a.g2, a.g3, a.separation, MoleculeSpecies("x", 614.0 * k))
    va = quantum_visibility(a, v)
    vb = quantum_visibility(heavy, v / k)
    assert vb.sinusoidal == pytest.approx(va.sinusoidal, rel=1e-9, abs=1e-12)
    assert vb.exact == pytest.approx(va.exact, rel=1e-9, abs=1e-12)


def test_doubling_mass_and_speed_changes_visibility_with_interaction():
    # the wall phase scales with 1/v alone, so the scaling symmetry is broken
    a = make_config(C3_ILLUSTRATIVE)
    b = InterferometerConfig(a.g1, a.g2, a.g3, a.separation, MoleculeSpecies("x", 1228.0, C3_ILLUSTRATIVE))
    assert abs(quantum_visibility(a, 150.0).sinusoidal - quantum_visibility(b, 75.0).sinusoidal) > 1e-3


def test_harmonics_use_parseval_mean():
    cfg = make_config(C3_ILLUSTRATIVE)
    s = signal_harmonics(cfg, 150.0)
    xo = open_half_width(cfg.g2, cfg.molecule, 150.0)
    a0 = intensity_coefficients(cfg.g1, cfg.molecule, 150.0, 1)[1].real
    assert s[10].real == pytest.approx(a0 * (2 * xo / D) * a0, rel=1e-12)
