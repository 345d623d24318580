"""Gravitational velocity selection and velocity-averaged visibilities.

Molecules fly on free-fall parabolas fixed by the oven slit, a selection
slit and the arrival point on the detector plate. Heights are measured
downwards from the reference point hit by an infinitely fast molecule
travelling through both slit centres.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .constants import AMU, BOLTZMANN, STANDARD_GRAVITY
from .errors import DomainError, EmptyAcceptanceError
from .physics import InterferometerConfig, harmonics_table, visibility_from_components


@dataclass(frozen=True)
class BeamlineGeometry:
    oven_slit_width: float = 200e-6
    selection_slit_width: float = 150e-6
    selection_slit_z: float = 1.2
    detector_z: float = 2.9
    gravity: float = STANDARD_GRAVITY
    height_reference_offset: float = 0.0
    # vertical slit centres; collinear by default
    oven_slit_center: float = 0.0
    selection_slit_center: float = 0.0

    def __post_init__(self):
        if not 0 < self.selection_slit_z < self.detector_z:
            raise DomainError("need 0 < selection_slit_z < detector_z")
        if self.oven_slit_width < 0 or self.selection_slit_width < 0:
            raise DomainError("slit widths must be non-negative")
        if not self.gravity > 0:
            raise DomainError("gravity must be positive")

    @property
    def fall_constant(self) -> float:
        """``g z_d (z_d - z_s) / 2`` in m^3/s^2; ``h = K / v**2`` for the central ray."""
        zd, zs = self.detector_z, self.selection_slit_z
        return 0.5 * self.gravity * zd * (zd - zs)

    def arrival_height(self, v, y_oven=0.0, y_selection=0.0):
        """Detector height of the parabola through ``(0, y_oven)`` and ``(z_s, y_selection)``."""
        v = np.asarray(v, dtype=float)
        lever = self.detector_z / self.selection_slit_z
        rise = y_oven + (y_selection - y_oven) * lever
        return self.fall_constant / v**2 - rise + self.height_reference_offset


@dataclass(frozen=True)
class SourceModel:
    """Thermal source.

    ``effusive_flux`` weights velocities as ``v**3 exp(-v**2 / v_p**2)`` with
    ``v_p = sqrt(2 k T / m)``. ``tabulated`` interpolates ``table_weights``
    over ``table_velocities``.
    """

    temperature: float = 693.15
    mass_amu: float = 614.0
    distribution: Literal["effusive_flux", "tabulated"] = "effusive_flux"
    table_velocities: tuple[float, ...] = ()
    table_weights: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError("source temperature must be positive")
        if self.distribution not in ("effusive_flux", "tabulated"):
            raise DomainError(f"unknown source distribution {self.distribution!r}")
        if self.distribution == "tabulated":
            tv, tw = np.asarray(self.table_velocities), np.asarray(self.table_weights)
            if len(tv) < 2 or len(tv) != len(tw):
                raise DomainError("tabulated source needs matching velocity/weight tables")
            if np.any(np.diff(tv) <= 0) or np.any(tv <= 0):
                raise DomainError("tabulated velocities must be positive and increasing")
            if np.any(tw < 0) or not np.sum(tw) > 0:
                raise DomainError("tabulated weights must be non-negative and normalisable")

    @property
    def most_probable_speed(self) -> float:
        return float(np.sqrt(2.0 * BOLTZMANN * self.temperature / (self.mass_amu * AMU)))

    def weight(self, v):
        """Unnormalised flux density at ``v``."""
        v = np.asarray(v, dtype=float)
        if self.distribution == "tabulated":
            return np.interp(v, self.table_velocities, self.table_weights, left=0.0, right=0.0)
        u = v / self.most_probable_speed
        return np.where(v > 0, u**3 * np.exp(-(u**2)), 0.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.distribution == "tabulated":
            grid = np.linspace(self.table_velocities[0], self.table_velocities[-1], 4097)
            cdf = np.concatenate([[0.0], np.cumsum(0.5 * (self.weight(grid[1:]) + self.weight(grid[:-1])))])
            return np.interp(rng.uniform(0, cdf[-1], n), cdf, grid)
        # (v / v_p)^2 is Gamma(2, 1) distributed under v^3 exp(-v^2/v_p^2) dv
        return self.most_probable_speed * np.sqrt(rng.gamma(2.0, 1.0, n))


def fall_height(v, geom: BeamlineGeometry):
    """Height below reference of the central ray at speed ``v``."""
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr <= 0):
        raise DomainError("velocity must be positive")
    out = geom.fall_constant / v_arr**2 + geom.height_reference_offset
    return float(out) if out.ndim == 0 else out


def velocity_from_height(h, geom: BeamlineGeometry):
    """Inverse of :func:`fall_height`."""
    drop = np.asarray(h, dtype=float) - geom.height_reference_offset
    if np.any(drop <= 0):
        raise DomainError("height must lie below the reference point")
    out = np.sqrt(geom.fall_constant / drop)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class VelocityDistribution:
    velocities: np.ndarray
    weights: np.ndarray
    mean: float
    relative_spread: float  # FWHM / mean
    n_accepted: int = 0

    def __post_init__(self):
        w = self.weights
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise DomainError("weights must be non-negative and sum to one")

    @classmethod
    def delta(cls, v: float) -> "VelocityDistribution":
        return cls(np.array([float(v)]), np.array([1.0]), float(v), 0.0, 1)

    @classmethod
    def from_points(cls, velocities, weights) -> "VelocityDistribution":
        v = np.asarray(velocities, dtype=float)
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        mean = float(np.sum(w * v))
        return cls(v, w, mean, fwhm(v, w) / mean, len(v))


def fwhm(x: np.ndarray, y: np.ndarray) -> float:
    """Full width at half maximum of a sampled profile, linearly interpolated."""
    if len(x) < 3:
        return 0.0
    k = int(np.argmax(y))
    half = 0.5 * y[k]
    lo = k
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = k
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1

    def cross(i, j):
        if y[i] == y[j]:
            return x[i]
        return x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i])

    left = cross(lo, lo + 1) if y[lo] <= half else x[0]
    right = cross(hi - 1, hi) if y[hi] <= half else x[-1]
    return float(right - left)


def _trajectory_samples(h, window, geom, source, n_samples, rng):
    """Importance-sampled velocities of trajectories landing in ``h +- window/2``.

    Slit positions and the landing height are drawn uniformly and the speed
    follows from the parabola; weights ``source(v) / |dh/dv|`` turn this
    into the conditional distribution of the source given the window.
    """
    y1 = geom.oven_slit_center + geom.oven_slit_width * (rng.random(n_samples) - 0.5)
    y2 = geom.selection_slit_center + geom.selection_slit_width * (rng.random(n_samples) - 0.5)
    target = h + window * (rng.random(n_samples) - 0.5)
    lever = geom.detector_z / geom.selection_slit_z
    drop = target - geom.height_reference_offset + y1 + (y2 - y1) * lever
    ok = drop > 0
    v = np.sqrt(geom.fall_constant / drop[ok])
    w = source.weight(v) * v**3 / (2.0 * geom.fall_constant)
    keep = w > 0
    return v[keep], w[keep]


def velocity_distribution_at_height(
    h: float,
    geom: BeamlineGeometry,
    source: SourceModel,
    window: float = 33e-6,
    n_samples: int = 100_000,
    seed: int = 0,
    bins: int | np.ndarray = 41,
) -> VelocityDistribution:
    """Velocity distribution of molecules deposited within ``window`` around ``h``.

    ``bins`` is either a bin count (spanning the accepted range) or explicit
    bin edges; the returned grid holds bin centres.
    """
    if not window > 0:
        raise DomainError("integration window must be positive")
    rng = np.random.default_rng(seed)
    v, w = _trajectory_samples(h, window, geom, source, n_samples, rng)
    if len(v) == 0 or not w.sum() > 0:
        raise EmptyAcceptanceError(f"no trajectory reaches height {h:.4g} m")
    mean = float(np.sum(w * v) / np.sum(w))
    if np.isscalar(bins) and np.ptp(v) <= 1e-12 * mean:
        return VelocityDistribution(np.array([mean]), np.array([1.0]), mean, 0.0, len(v))
    hist, edges = np.histogram(v, bins=bins, weights=w)
    if not hist.sum() > 0:
        raise EmptyAcceptanceError("accepted velocities fall outside the requested bins")
    centers = 0.5 * (edges[1:] + edges[:-1])
    weights = hist / hist.sum()
    return VelocityDistribution(centers, weights, mean, fwhm(centers, weights) / mean, len(v))


def deposition_profile(
    heights,
    geom: BeamlineGeometry,
    source: SourceModel,
    window: float = 33e-6,
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> np.ndarray:
    """Fraction of all deposited molecules landing within ``window`` of each height."""
    rng = np.random.default_rng(seed)
    v = source.sample(rng, n_samples)
    y1 = geom.oven_slit_center + geom.oven_slit_width * (rng.random(n_samples) - 0.5)
    y2 = geom.selection_slit_center + geom.selection_slit_width * (rng.random(n_samples) - 0.5)
    h_arr = np.sort(geom.arrival_height(v, y1, y2))
    heights = np.asarray(heights, dtype=float)
    lo = np.searchsorted(h_arr, heights - 0.5 * window)
    hi = np.searchsorted(h_arr, heights + 0.5 * window)
    return (hi - lo) / n_samples


AveragingMode = Literal["average_visibility", "average_signal"]


def average_over_distribution(
    dist: VelocityDistribution,
    config: InterferometerConfig,
    mode: AveragingMode = "average_visibility",
    harmonics: np.ndarray | None = None,
    **physics_kwargs,
) -> float:
    """Velocity-averaged visibility for a given distribution.

    ``average_visibility`` integrates ``V(v) w(v)``; ``average_signal``
    averages the complex harmonics first, so fringes whose phases differ
    across the distribution partially cancel. ``harmonics`` may carry a
    precomputed table matching ``dist.velocities``.
    """
    support = dist.weights > 0
    v = dist.velocities[support]
    w = dist.weights[support]
    table = harmonics[support] if harmonics is not None else harmonics_table(config, v, **physics_kwargs)
    if mode == "average_visibility":
        vis = np.array([visibility_from_components(row) for row in table])
        return float(np.sum(w * vis))
    if mode == "average_signal":
        return visibility_from_components(w @ table)
    raise DomainError(f"unknown averaging mode {mode!r}")


def averaged_visibility(
    h: float,
    config: InterferometerConfig,
    geom: BeamlineGeometry,
    source: SourceModel,
    mode: AveragingMode = "average_visibility",
    window: float = 33e-6,
    n_samples: int = 100_000,
    seed: int = 0,
    **physics_kwargs,
) -> float:
    dist = velocity_distribution_at_height(h, geom, source, window, n_samples, seed)
    return average_over_distribution(dist, config, mode, **physics_kwargs)


def scattering_correction(
    heights,
    visibilities,
    deposition,
    fraction: float = 0.2,
    window: float = 33e-6,
    detector_extent: float = 3000e-6,
) -> np.ndarray:
    """Dilute fringes with a uniform background of scattered molecules.

    A share ``fraction`` of the molecules in the most populated height
    window is spread evenly over ``detector_extent``; ``deposition`` gives
    the per-window molecule count at each height.
    """
    if not 0 <= fraction < 1:
        raise DomainError(f"scattered fraction must lie in [0, 1), got {fraction}")
    heights = np.asarray(heights, dtype=float)
    vis = np.asarray(visibilities, dtype=float)
    n = np.asarray(deposition, dtype=float)
    if not (heights.shape == vis.shape == n.shape):
        raise DomainError("heights, visibilities and deposition must have equal length")
    if fraction == 0:
        return vis.copy()
    background = fraction * n.max() / detector_extent * window
    denom = n + background
    return np.where(denom > 0, vis * n / np.where(denom > 0, denom, 1.0), vis)
