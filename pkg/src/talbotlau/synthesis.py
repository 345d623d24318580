"""Synthetic stripe stacks generated from the interferometer and beamline models.

Every pixel row of a stripe image sits at a height ``h`` and therefore
collects the velocity class selected by the free-fall parabola. The local
fringe is the velocity-averaged complex harmonic vector of the quantum
model, and the local molecule density follows the deposition profile.
Stripe ``i`` samples the fringe at the grating displacement

    x_i(h) = i * grating_step + tilt * h + drift * (i + 1/2) / n_stripes

so a tilt between the grating lines and the gravity axis becomes a phase
gradient along ``h`` and a linear drift appears as a slow phase ramp.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamline import (
    BeamlineGeometry,
    SourceModel,
    deposition_profile,
    velocity_distribution_at_height,
)
from .errors import DomainError, EmptyAcceptanceError
from .imaging import (
    FrameKind,
    ImageFrame,
    NoiseModel,
    StripeStack,
    correct_frame,
    synthesize_frame,
)
from .physics import (
    DEFAULT_M_MAX,
    DEFAULT_N_MAX,
    DEFAULT_PHASE_CAP,
    InterferometerConfig,
    harmonics_table,
)


@dataclass(frozen=True)
class StackSynthesisConfig:
    n_stripes: int = 30
    grating_step: float = 100e-9
    adsorber_step: float = 425e-6
    exposure: float = 480.0  # s per stripe
    pixel_pitch: float = 2e-6
    frame_width: float = 200e-6
    h_min: float = 100e-6
    h_max: float = 1900e-6
    exposed_width: float = 165e-6
    background: float = 1.0
    efficiency: float = 1.0
    peak_density: float = 1.0
    illumination: float = 1000.0
    vignetting: float = 0.2  # relative illumination loss at the frame corners
    dark: float = 100.0
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(0.0, 0.0))
    noisy_calibration: bool = False  # reference/dark are usually averages of many exposures
    tilt: float = 0.0  # rad
    drift: float = 0.0  # m, accumulated linearly over the scan
    exposure_scale: float = 1.0
    physics_step: float = 10e-6
    window: float = 33e-6
    velocity_bin: float = 2.0  # m/s
    velocity_samples: int = 20_000
    deposition_samples: int = 1_000_000

    def __post_init__(self):
        if self.n_stripes < 1:
            raise DomainError("n_stripes must be positive")
        for name in ("grating_step", "adsorber_step", "pixel_pitch", "frame_width", "exposed_width",
                     "physics_step", "window", "velocity_bin"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not self.h_max > self.h_min:
            raise DomainError("h_max must exceed h_min")
        if not 0 <= self.vignetting < 1:
            raise DomainError("vignetting must lie in [0, 1)")
        if self.exposure_scale < 0 or self.peak_density < 0:
            raise DomainError("exposure_scale and peak_density must be non-negative")


@dataclass(frozen=True)
class HeightModel:
    """Fringe and deposition on a coarse height grid (the injected truth)."""

    heights: np.ndarray
    harmonics: np.ndarray  # normalised so that S_0 == 1; zero rows where nothing lands
    deposition: np.ndarray  # fraction of molecules per window
    mean_velocity: np.ndarray

    @property
    def visibility(self) -> np.ndarray:
        mid = self.harmonics.shape[1] // 2
        return 2.0 * np.abs(self.harmonics[:, mid + 1])

    @property
    def phase(self) -> np.ndarray:
        mid = self.harmonics.shape[1] // 2
        return np.angle(self.harmonics[:, mid + 1])


def velocity_edges(geom: BeamlineGeometry, source: SourceModel, h_min: float, h_max: float,
                   window: float, bin_width: float) -> np.ndarray:
    """Common velocity bins covering every trajectory that lands in ``[h_min, h_max]``."""
    lever = geom.detector_z / geom.selection_slit_z
    spread = 0.5 * geom.oven_slit_width * abs(lever - 1) + 0.5 * geom.selection_slit_width * lever
    spread += window + abs(geom.oven_slit_center) + abs(geom.selection_slit_center) * lever
    k = geom.fall_constant
    lo_drop = h_min - geom.height_reference_offset - spread
    v_cap = 6.0 * source.most_probable_speed if source.distribution == "effusive_flux" else max(
        source.table_velocities
    )
    v_hi = min(np.sqrt(k / lo_drop), v_cap) if lo_drop > 0 else v_cap
    v_lo = np.sqrt(k / (h_max - geom.height_reference_offset + spread))
    n = max(int(np.ceil((v_hi - v_lo) / bin_width)), 1)
    return np.linspace(v_lo, v_lo + n * bin_width, n + 1)


def height_model(
    config: InterferometerConfig,
    geom: BeamlineGeometry,
    source: SourceModel,
    heights,
    window: float = 33e-6,
    velocity_bin: float = 2.0,
    velocity_samples: int = 20_000,
    deposition_samples: int = 1_000_000,
    seed: int = 0,
    n_max: int = DEFAULT_N_MAX,
    m_max: int = DEFAULT_M_MAX,
    phase_cap: float = DEFAULT_PHASE_CAP,
) -> HeightModel:
    """Velocity-averaged (complex) harmonics and deposition at each height."""
    heights = np.asarray(heights, dtype=float)
    edges = velocity_edges(geom, source, heights.min(), heights.max(), window, velocity_bin)
    centers = 0.5 * (edges[1:] + edges[:-1])
    table = harmonics_table(config, centers, n_max=n_max, m_max=m_max, phase_cap=phase_cap)
    seeds = np.random.SeedSequence(seed).generate_state(len(heights) + 1)
    rows, vmean = [], []
    for k, h in enumerate(heights):
        try:
            dist = velocity_distribution_at_height(
                h, geom, source, window, velocity_samples, int(seeds[k]), bins=edges
            )
        except EmptyAcceptanceError:
            rows.append(np.zeros(2 * m_max + 1, dtype=complex))
            vmean.append(np.nan)
            continue
        s = dist.weights @ table
        rows.append(s / s[m_max].real)
        vmean.append(dist.mean)
    dep = deposition_profile(heights, geom, source, window, deposition_samples, int(seeds[-1]))
    return HeightModel(heights, np.array(rows), dep, np.array(vmean))


@dataclass(frozen=True)
class SyntheticStack:
    raw_frames: tuple[np.ndarray, ...]
    reference: np.ndarray
    dark: np.ndarray
    pixel_pitch: float
    origin: tuple[float, float]
    stripe_centers: tuple[float, ...]
    settings: StackSynthesisConfig
    model: HeightModel
    grating_period: float

    def corrected_stack(self) -> StripeStack:
        ref = ImageFrame(self.reference, self.pixel_pitch, FrameKind.REFERENCE, self.origin)
        dark = ImageFrame(self.dark, self.pixel_pitch, FrameKind.DARK, self.origin)
        frames = tuple(
            correct_frame(ImageFrame(f, self.pixel_pitch, FrameKind.FLUORESCENCE, self.origin), ref, dark)
            for f in self.raw_frames
        )
        s = self.settings
        return StripeStack(
            frames, s.grating_step, s.adsorber_step, self.grating_period, s.exposure, self.stripe_centers
        )

    def truth(self, heights=None) -> dict:
        """Injected visibility and phase (including the tilt term) at ``heights``."""
        h = self.model.heights if heights is None else np.asarray(heights, dtype=float)
        s = self.settings
        mid = self.model.harmonics.shape[1] // 2
        s1 = self.model.harmonics[:, mid + 1]
        s1 = np.interp(h, self.model.heights, s1.real) + 1j * np.interp(h, self.model.heights, s1.imag)
        vis = 2.0 * np.abs(s1)
        phase = np.angle(s1) + 2 * np.pi * s.tilt * h / self.grating_period
        return {
            "heights": h,
            "visibility": vis,
            "phase": phase,
            "tilt": s.tilt,
            "phase_gradient": 2 * np.pi * s.tilt / self.grating_period,
            "drift": s.drift,
        }


def synthesize_stack(
    config: InterferometerConfig,
    geom: BeamlineGeometry,
    source: SourceModel,
    settings: StackSynthesisConfig = StackSynthesisConfig(),
    seed: int = 0,
    n_max: int = DEFAULT_N_MAX,
    m_max: int = DEFAULT_M_MAX,
    phase_cap: float = DEFAULT_PHASE_CAP,
) -> SyntheticStack:
    s = settings
    d = config.period
    pitch = s.pixel_pitch
    n_rows = int(round((s.h_max - s.h_min) / pitch)) + 1
    n_cols = int(round(s.frame_width / pitch))
    h_rows = s.h_min + np.arange(n_rows) * pitch
    x_cols = np.arange(n_cols) * pitch
    center = 0.5 * (n_cols - 1) * pitch
    origin = (0.0, s.h_min)

    coarse = np.arange(s.h_min - s.physics_step, s.h_max + 1.5 * s.physics_step, s.physics_step)
    ss = np.random.SeedSequence(seed)
    model_seed, *frame_seeds = ss.generate_state(s.n_stripes + 3)
    model = height_model(
        config, geom, source, coarse, s.window, s.velocity_bin, s.velocity_samples,
        s.deposition_samples, int(model_seed), n_max, m_max, phase_cap,
    )
    harm = np.stack(
        [np.interp(h_rows, coarse, model.harmonics[:, k].real)
         + 1j * np.interp(h_rows, coarse, model.harmonics[:, k].imag)
         for k in range(model.harmonics.shape[1])],
        axis=1,
    )
    dep = np.interp(h_rows, coarse, model.deposition)
    dep_norm = dep / dep.max() if dep.max() > 0 else dep
    m = np.arange(-m_max, m_max + 1)
    stripe = (np.abs(x_cols - center) <= 0.5 * s.exposed_width).astype(float)

    xx = (x_cols - center) / max(center, pitch)
    hh = (h_rows - 0.5 * (s.h_min + s.h_max)) / (0.5 * (s.h_max - s.h_min))
    illum = s.illumination * (1 - 0.5 * s.vignetting * (xx[None, :] ** 2 + hh[:, None] ** 2))

    common = dict(background=s.background, illumination=illum, pixel_pitch=pitch, origin=origin,
                  shape=(n_rows, n_cols))
    cal_noise = s.noise if s.noisy_calibration else None
    reference = synthesize_frame(0.0, dark=s.dark, efficiency=s.efficiency, noise=cal_noise,
                                 seed=int(frame_seeds[0]), **common)
    dark = synthesize_frame(0.0, illumination=0.0, background=0.0, dark=s.dark, noise=cal_noise,
                            seed=int(frame_seeds[1]), pixel_pitch=pitch, origin=origin,
                            shape=(n_rows, n_cols))
    frames = []
    for i in range(s.n_stripes):
        shift = i * s.grating_step + s.tilt * h_rows + s.drift * (i + 0.5) / s.n_stripes
        fringe = (np.exp(2j * np.pi * np.outer(shift, m) / d) * harm).sum(axis=1).real
        density = s.peak_density * s.exposure_scale * np.clip(dep_norm * fringe, 0, None)
        img = synthesize_frame(density[:, None] * stripe[None, :], efficiency=s.efficiency,
                               dark=s.dark, noise=s.noise, seed=int(frame_seeds[i + 2]), **common)
        frames.append(img.intensities)
    return SyntheticStack(
        tuple(frames), reference.intensities, dark.intensities, pitch, origin,
        tuple([center] * s.n_stripes), s, model, d,
    )


@dataclass(frozen=True)
class BandStackConfig:
    """Stripe stack with one horizontal band per analysis height.

    Inside each band the injected density ``offset (1 + V cos(2 pi x_i / d + phi))``
    does not depend on the pixel, so a rectangle of the band's height sees an
    exactly sinusoidal fringe. Used for calibration studies of the imaging
    chain.
    """

    n_stripes: int = 30
    grating_step: float = 100e-9
    grating_period: float = 991e-9
    pixel_pitch: float = 1e-6
    band_height: float = 33e-6
    rect_width: float = 100e-6
    frame_width: float = 120e-6
    background: float = 1.0
    efficiency: float = 1.0
    illumination: float = 1000.0
    vignetting: float = 0.0
    dark: float = 100.0


def readout_sigma_for_snr(snr: float, offset: float, n_pixels: int, illumination: float,
                          efficiency: float = 1.0) -> float:
    """Per-pixel readout noise giving a rectangle-mean fringe offset the ratio ``snr``.

    The corrected offset is ``efficiency * offset / B`` and one corrected
    pixel carries noise ``sigma / (B I)``; averaging ``n_pixels`` divides
    the latter by ``sqrt(n_pixels)``, so ``B`` drops out.
    """
    if not snr > 0 or n_pixels < 1:
        raise DomainError("snr and n_pixels must be positive")
    return efficiency * offset * illumination * np.sqrt(n_pixels) / snr


def band_stack(
    heights,
    visibilities,
    phases,
    offsets=1.0,
    config: BandStackConfig = BandStackConfig(),
    readout_sigma: float = 0.0,
    seed: int = 0,
) -> tuple[StripeStack, np.ndarray]:
    """Corrected stripe stack plus the band centres (analysis heights).

    ``heights`` must be separated by at least one band height. Rows outside
    every band hold the mean density of the nearest band.
    """
    c = config
    h = np.asarray(heights, dtype=float)
    try:
        vis, ph, off = (np.broadcast_to(np.asarray(a, float), h.shape) for a in (visibilities, phases, offsets))
    except ValueError:
        raise DomainError("need one visibility, phase and offset per height") from None
    if np.any(np.diff(h) < c.band_height):
        raise DomainError("heights must be spaced by at least one band height")
    pitch = c.pixel_pitch
    h0 = h[0] - c.band_height
    n_rows = int(round((h[-1] + c.band_height - h0) / pitch)) + 1
    n_cols = int(round(c.frame_width / pitch))
    rows = h0 + np.arange(n_rows) * pitch
    band = np.argmin(np.abs(rows[:, None] - h[None, :]), axis=1)
    cols = np.arange(n_cols) * pitch
    xc = 0.5 * (n_cols - 1) * pitch
    xx = (cols - xc) / max(xc, pitch)
    hh = (rows - rows.mean()) / max(0.5 * np.ptp(rows), pitch)
    illum = c.illumination * (1 - 0.5 * c.vignetting * (xx[None, :] ** 2 + hh[:, None] ** 2))
    origin = (0.0, h0)
    noise = NoiseModel(0.0, readout_sigma) if readout_sigma else None
    common = dict(background=c.background, efficiency=c.efficiency, illumination=illum, dark=c.dark,
                  pixel_pitch=pitch, origin=origin, shape=(n_rows, n_cols))
    ref = ImageFrame(synthesize_frame(0.0, **common).intensities, pitch, FrameKind.REFERENCE, origin)
    dark = ImageFrame(np.full((n_rows, n_cols), c.dark), pitch, FrameKind.DARK, origin)
    seeds = np.random.SeedSequence(seed).generate_state(c.n_stripes)
    frames = []
    for i in range(c.n_stripes):
        x = i * c.grating_step
        density = (off * (1 + vis * np.cos(2 * np.pi * x / c.grating_period + ph)))[band]
        raw = synthesize_frame(np.repeat(density[:, None], n_cols, axis=1), noise=noise,
                               seed=int(seeds[i]), **common)
        frames.append(correct_frame(raw, ref, dark))
    stack = StripeStack(tuple(frames), c.grating_step, grating_period=c.grating_period,
                        stripe_centers=(xc,) * c.n_stripes)
    return stack, h
