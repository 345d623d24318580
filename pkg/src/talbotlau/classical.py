"""Classical moiré (shadow) prediction by Monte Carlo ray tracing.

Rays leave the open slits of the first grating on straight lines, are
filtered by the second grating, receive an impulsive van der Waals kick in
its mid-plane and are histogrammed modulo the period at the third grating.
No wave physics enters here; the interaction model is the same potential
whose eikonal phase the quantum model uses.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, DomainError
from .physics import (
    DEFAULT_PHASE_CAP,
    GratingSpec,
    InterferometerConfig,
    MoleculeSpecies,
    open_half_width,
)

CHUNK_SIZE = 1 << 18
ACCEPTANCE_FACTOR = 3.0


def vdw_kick(x, g: GratingSpec, molecule: MoleculeSpecies, v: float):
    """Transverse velocity change (m/s) of a molecule crossing the slit at ``x``.

    Thin-grating impulse ``-(L_g / (m v)) dV/dx`` for the wall potential
    ``V(x) = -C3 [(a/2 - x)^-3 + (a/2 + x)^-3]``. Positive ``x`` is kicked
    towards the wall at ``+a/2``.
    """
    if not v > 0:
        raise DomainError(f"velocity must be positive, got {v}")
    x = np.asarray(x, dtype=float)
    half = 0.5 * g.slit_width
    if np.any(np.abs(x) >= half):
        raise DomainError("kick is only defined strictly inside the open slit")
    dV_dx = -3.0 * molecule.c3 * ((half - x) ** -4 - (half + x) ** -4)
    return -g.thickness / (molecule.mass * v) * dV_dx


@dataclass(frozen=True)
class McResult:
    bin_counts: np.ndarray  # arrivals modulo d at the third grating
    scan_positions: np.ndarray
    scan_counts: np.ndarray  # transmitted through G3 at each scan position
    n_samples: int
    n_transmitted: int
    seed: int
    velocity: float
    angular_half_range: float
    visibility: float
    statistical_error: float


def _wrap(x, d):
    return x - d * np.floor(x / d + 0.5)


def _trace_chunk(
    config: InterferometerConfig,
    v: float,
    n: int,
    rng: np.random.Generator,
    n_bins: int,
    theta_max: float,
    phase_cap: float,
) -> np.ndarray:
    d, L, mol = config.period, config.separation, config.molecule
    x1_open = open_half_width(config.g1, mol, v, phase_cap)
    x2_open = open_half_width(config.g2, mol, v, phase_cap)
    x0 = rng.uniform(-x1_open, x1_open, n)
    theta = rng.uniform(-theta_max, theta_max, n)
    at_g2 = x0 + theta * L
    local = _wrap(at_g2, d)
    passed = np.abs(local) < x2_open  # absorbed margin and bars both stop the ray
    at_g2, local, theta = at_g2[passed], local[passed], theta[passed]
    if mol.c3 > 0:
        theta = theta + vdw_kick(local, config.g2, mol, v) / v
    at_g3 = at_g2 + theta * L
    idx = np.floor(np.mod(at_g3, d) / d * n_bins).astype(np.int64)
    np.clip(idx, 0, n_bins - 1, out=idx)
    return np.bincount(idx, minlength=n_bins)


def moire_signal(
    config: InterferometerConfig,
    v: float,
    n_samples: int = 1_000_000,
    seed: int = 0,
    scan_points: int = 50,
    bins_per_scan: int = 20,
    acceptance_factor: float = ACCEPTANCE_FACTOR,
    phase_cap: float = DEFAULT_PHASE_CAP,
    n_jobs: int = 1,
) -> McResult:
    """Classical shadow signal versus third-grating shift.

    Ray angles are uniform over ``+-acceptance_factor * d / L``, an integer
    number of periods of lateral walk across the second grating, so the
    angular average is exact for infinite gratings. Sampling is split into
    fixed-size chunks with spawned seed streams; the result depends only on
    ``seed`` and ``n_samples``, not on ``n_jobs``.
    """
    if not v > 0:
        raise DomainError(f"velocity must be positive, got {v}")
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    d, L = config.period, config.separation
    theta_max = acceptance_factor * d / L
    n_bins = scan_points * bins_per_scan
    sizes = [CHUNK_SIZE] * (n_samples // CHUNK_SIZE)
    if n_samples % CHUNK_SIZE:
        sizes.append(n_samples % CHUNK_SIZE)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(k):
        rng = np.random.default_rng(streams[k])
        return _trace_chunk(config, v, sizes[k], rng, n_bins, theta_max, phase_cap)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    counts = np.sum(parts, axis=0)
    n_tr = int(counts.sum())
    if n_tr == 0:
        raise DegenerateConfigurationError("no ray reached the third grating")

    centers = (np.arange(n_bins) + 0.5) * d / n_bins
    shifts = np.arange(scan_points) * d / scan_points
    x3_open = open_half_width(config.g3, config.molecule, v, phase_cap)
    mask = np.abs(_wrap(centers[None, :] - shifts[:, None], d)) <= x3_open
    scan = mask.astype(np.int64) @ counts
    vis, err = _visibility_with_error(scan, mask, counts, int(n_samples))
    return McResult(
        counts, shifts, scan, int(n_samples), n_tr, int(seed), float(v), theta_max, vis, err
    )


def _visibility_with_error(scan: np.ndarray, mask: np.ndarray, counts: np.ndarray,
                           n_trials: int) -> tuple[float, float]:
    """``(max - min) / (max + min)`` with a multinomial error.

    Every launched ray is one trial, so each scan count is binomial in
    ``n_trials``; the max and min windows covary through the bins they share
    and through the fixed number of trials.
    """
    i_hi, i_lo = int(np.argmax(scan)), int(np.argmin(scan))
    hi, lo = float(scan[i_hi]), float(scan[i_lo])
    if hi + lo == 0:
        raise DegenerateConfigurationError("third grating transmits nothing")
    shared = float(counts[mask[i_hi] & mask[i_lo]].sum())
    var_hi = hi * (1.0 - hi / n_trials)
    var_lo = lo * (1.0 - lo / n_trials)
    cov = shared - hi * lo / n_trials
    g_hi = 2.0 * lo / (hi + lo) ** 2
    g_lo = -2.0 * hi / (hi + lo) ** 2
    var = g_hi**2 * var_hi + g_lo**2 * var_lo + 2 * g_hi * g_lo * cov
    return (hi - lo) / (hi + lo), float(np.sqrt(max(var, 0.0)))


def classical_visibility_curve(
    config: InterferometerConfig,
    velocities,
    n_samples: int = 1_000_000,
    seed: int = 0,
    **kwargs,
) -> list[tuple[float, float, float]]:
    """``(v, visibility, error)`` per velocity; point ``i`` uses seed ``seed + i``."""
    velocities = [float(v) for v in velocities]
    if not velocities or any(v <= 0 for v in velocities):
        raise DomainError("velocities must be a non-empty list of positive speeds")
    out = []
    for i, v in enumerate(velocities):
        r = moire_signal(config, v, n_samples, seed + i, **kwargs)
        out.append((v, r.visibility, r.statistical_error))
    return out
