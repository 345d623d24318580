"""Harmonic model against direct wave propagation through the three gratings."""

import numpy as np
import pytest

from conftest import C3_ILLUSTRATIVE, make_config
from talbotlau import DomainError, fresnel_fringe_signal, fringe_signal
from talbotlau.fresnel import propagate_periodic

CASES = [
    # open fraction, velocity, c3, grid
    (0.40, 250.0, 0.0, 2**14),
    (0.50, 180.0, 0.0, 2**14),
    (0.30, 300.0, 0.0, 2**14),
    (0.40, 140.0, C3_ILLUSTRATIVE, 2**15),
    (0.40, 220.0, 4 * C3_ILLUSTRATIVE, 2**15),
]


def _vis(y):
    return (y.max() - y.min()) / (y.max() + y.min())


@pytest.mark.parametrize("f, v, c3, n_grid", CASES)
def test_harmonic_model_matches_propagation(f, v, c3, n_grid):
    cfg = make_config(c3, f)
    _, oracle = fresnel_fringe_signal(cfg, v, n_grid=n_grid)
    sig = fringe_signal(cfg, v, resolution=256)
    model = sig.values / sig.values.mean()
    assert abs(sig.visibility_exact - _vis(oracle)) / _vis(oracle) < 0.02
    assert np.max(np.abs(model - oracle)) / oracle.max() < 0.05


def test_free_propagation_preserves_norm_and_self_images():
    n, d, lam = 1024, 1.0, 1e-3
    x = np.arange(n) / n * d
    field = np.where(np.abs(x - 0.5) < 0.2, 1.0, 0.0).astype(complex)
    out = propagate_periodic(field, d, lam, 0.37)
    assert np.sum(np.abs(out) ** 2) == pytest.approx(np.sum(np.abs(field) ** 2), rel=1e-12)
    # a full Talbot length 2 d^2 / lam reproduces the field exactly for a band-limited periodic input
    back = propagate_periodic(field, d, lam, 2 * d * d / lam)
    assert np.allclose(back, field, atol=1e-9)


def test_grid_must_divide():
    with pytest.raises(DomainError):
        fresnel_fringe_signal(make_config(), 200.0, n_grid=1000, n_tilts=256)
