"""Fluorescence images of mechanically magnified deposition stripes.

Forward model for a fluorescence image of a surface carrying ``N`` molecules
per unit area::

    I_f = (eta N + B) K I_i + I_c

with illumination ``I_i``, collection efficiency ``K``, substrate background
``B`` and dark signal ``I_c``. A reference image of a clean surface has
``N = 0``; together they give the flat-field corrected density
``(eta / B) N = (I_f - I_c) / (I_r - I_c) - 1``.

Frames are indexed ``[row, column]``: rows run along the deposition height
(downwards), columns across a stripe.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from .beamline import BeamlineGeometry, velocity_from_height
from .errors import DataError, DomainError, FitError


class FrameKind(str, Enum):
    FLUORESCENCE = "fluorescence"
    REFERENCE = "reference"
    DARK = "dark"
    CORRECTED = "corrected"


@dataclass(frozen=True)
class ImageFrame:
    """A single-channel image with physical pixel coordinates.

    ``origin`` is the ``(x, h)`` position in metres of the centre of pixel
    ``[0, 0]``. ``valid`` marks usable pixels; ``None`` means all valid.
    """

    intensities: np.ndarray
    pixel_pitch: float
    kind: FrameKind = FrameKind.FLUORESCENCE
    origin: tuple[float, float] = (0.0, 0.0)
    valid: np.ndarray | None = None

    def __post_init__(self):
        data = np.array(self.intensities, dtype=float)
        if data.ndim != 2:
            raise DomainError("frames must be two-dimensional")
        if not self.pixel_pitch > 0:
            raise DomainError("pixel pitch must be positive")
        data.flags.writeable = False
        object.__setattr__(self, "intensities", data)
        if self.valid is not None:
            mask = np.array(self.valid, dtype=bool)
            if mask.shape != data.shape:
                raise DomainError("validity mask shape differs from the image")
            mask.flags.writeable = False
            object.__setattr__(self, "valid", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.intensities.shape

    @property
    def height(self) -> int:
        return self.shape[0]

    @property
    def width(self) -> int:
        return self.shape[1]

    @cached_property
    def validity(self) -> np.ndarray:
        ok = np.isfinite(self.intensities) if self.valid is None else self.valid & np.isfinite(self.intensities)
        ok.flags.writeable = False
        return ok

    def x_coords(self) -> np.ndarray:
        return self.origin[0] + np.arange(self.width) * self.pixel_pitch

    def h_coords(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.height) * self.pixel_pitch


@dataclass(frozen=True)
class NoiseModel:
    """Scaled-Poisson shot noise and additive Gaussian readout noise.

    With ``shot_gain`` set, a pixel of mean ``I`` becomes
    ``shot_gain * Poisson(I / shot_gain)``.
    """

    shot_gain: float | None = None
    readout_sigma: float = 0.0


def _as_field(value, shape, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), shape)
    if np.any(arr < 0):
        raise DomainError(f"{name} must be non-negative")
    return arr


def synthesize_frame(
    density,
    illumination=1.0,
    collection=1.0,
    background: float = 1.0,
    efficiency: float = 1.0,
    dark=0.0,
    noise: NoiseModel | None = None,
    seed: int | None = None,
    pixel_pitch: float = 1e-6,
    origin: tuple[float, float] = (0.0, 0.0),
    shape: tuple[int, int] | None = None,
) -> ImageFrame:
    """Evaluate the fluorescence forward model pixel by pixel.

    Scalars broadcast to the frame shape, which comes from the first array
    argument or from ``shape``.
    """
    if shape is None:
        arrays = [np.asarray(a) for a in (density, illumination, collection, dark)]
        shape = next((a.shape for a in arrays if a.ndim == 2), None)
        if shape is None:
            raise DomainError("cannot infer the frame shape from scalar inputs")
    if background < 0 or efficiency < 0:
        raise DomainError("background and efficiency must be non-negative")
    n = _as_field(density, shape, "density")
    i_i = _as_field(illumination, shape, "illumination")
    k = _as_field(collection, shape, "collection")
    i_c = _as_field(dark, shape, "dark signal")
    image = (efficiency * n + background) * k * i_i + i_c
    if noise is not None and (noise.shot_gain or noise.readout_sigma):
        rng = np.random.default_rng(seed)
        if noise.shot_gain:
            image = noise.shot_gain * rng.poisson(image / noise.shot_gain)
        if noise.readout_sigma:
            image = image + rng.normal(0.0, noise.readout_sigma, shape)
    kind = FrameKind.FLUORESCENCE if np.any(n) else FrameKind.REFERENCE
    return ImageFrame(image, pixel_pitch, kind, origin)


def synthesize_reference(illumination=1.0, collection=1.0, background=1.0, dark=0.0, **kwargs):
    """Image of a clean surface: the forward model with no molecules."""
    return synthesize_frame(0.0, illumination, collection, background, 1.0, dark, **kwargs)


def correct_frame(
    fluorescence: ImageFrame, reference: ImageFrame, dark: ImageFrame, eps: float = 1e-9
) -> ImageFrame:
    """Flat-field corrected density ``(I_f - I_c) / (I_r - I_c) - 1``.

    Pixels whose reference signal does not exceed the dark level by more
    than ``eps`` are flagged invalid and set to NaN.
    """
    if not fluorescence.shape == reference.shape == dark.shape:
        raise DataError(
            f"frame shapes differ: {fluorescence.shape}, {reference.shape}, {dark.shape}"
        )
    i_f, i_r, i_c = fluorescence.intensities, reference.intensities, dark.intensities
    denom = i_r - i_c
    valid = (denom > eps) & fluorescence.validity & reference.validity & dark.validity
    out = np.full(i_f.shape, np.nan)
    np.divide(i_f - i_c, denom, out=out, where=valid)
    out[valid] -= 1.0
    return ImageFrame(out, fluorescence.pixel_pitch, FrameKind.CORRECTED, fluorescence.origin, valid)


@dataclass(frozen=True)
class StripeIntegral:
    value: float
    valid_fraction: float
    n_pixels: int


def integrate_stripe(
    frame: ImageFrame,
    stripe_center: float,
    h: float,
    rect_width: float = 100e-6,
    rect_height: float = 33e-6,
) -> StripeIntegral:
    """Mean corrected density over a rectangle centred at ``(stripe_center, h)``.

    Pixels whose centres fall inside the rectangle are used; invalid pixels
    are excluded from both the sum and the normalisation.
    """
    x, hh = frame.x_coords(), frame.h_coords()
    half_pix = 0.5 * frame.pixel_pitch
    tol = 1e-9 * frame.pixel_pitch
    x_lo, x_hi = stripe_center - rect_width / 2, stripe_center + rect_width / 2
    h_lo, h_hi = h - rect_height / 2, h + rect_height / 2
    if (
        x_lo < x[0] - half_pix - tol
        or x_hi > x[-1] + half_pix + tol
        or h_lo < hh[0] - half_pix - tol
        or h_hi > hh[-1] + half_pix + tol
    ):
        raise DomainError("integration rectangle extends beyond the frame")
    cols = (x >= x_lo - tol) & (x < x_hi - tol)
    rows = (hh >= h_lo - tol) & (hh < h_hi - tol)
    block = frame.intensities[np.ix_(rows, cols)]
    ok = frame.validity[np.ix_(rows, cols)]
    n_total = block.size
    if n_total == 0:
        raise DomainError("integration rectangle contains no pixel centres")
    n_ok = int(ok.sum())
    if n_ok == 0:
        raise DataError(f"no valid pixels in the rectangle at h={h:.4g} m")
    return StripeIntegral(float(block[ok].sum() / n_ok), n_ok / n_total, n_ok)


@dataclass(frozen=True)
class FringeFit:
    """Least-squares fit of ``offset + amplitude cos(2 pi x / d + phase)``.

    ``covariance`` refers to the linear parameters ``(a0, a1, b1)`` of
    ``a0 + a1 cos(2 pi x / d) + b1 sin(2 pi x / d)``.
    """

    offset: float
    amplitude: float
    phase: float
    visibility: float
    visibility_err: float
    phase_err: float
    covariance: np.ndarray
    residual_norm: float
    n_samples: int
    flags: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return self.offset > 0

    def model(self, x, period: float):
        return self.offset + self.amplitude * np.cos(2 * np.pi * np.asarray(x) / period + self.phase)


def fit_fringe(values, positions, period: float = 991e-9, sigma: float | None = None) -> FringeFit:
    """Fit a sinusoid of known period to fringe samples.

    Parameters
    ----------
    values : array_like
        Integrated signal per grating position.
    positions : array_like
        Grating positions in metres (``i * step`` for stripe ``i``).
    period : float
        Grating period.
    sigma : float, optional
        Known per-sample noise. By default it is estimated from the residuals.

    Raises
    ------
    FitError
        Fewer than five samples, rank deficiency, or a non-positive offset.
    """
    y = np.asarray(values, dtype=float)
    x = np.asarray(positions, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise FitError("values and positions must be 1-D arrays of equal length")
    n = len(y)
    if n < 5:
        raise FitError(f"need at least 5 samples, got {n}")
    if not np.all(np.isfinite(y)):
        raise FitError("fringe samples contain non-finite values")
    theta = 2 * np.pi * x / period
    design = np.column_stack([np.ones(n), np.cos(theta), np.sin(theta)])
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("fringe samples do not constrain the sinusoid (rank deficient)")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    a0, a1, b1 = coef
    resid = y - design @ coef
    rss = float(resid @ resid)
    if sigma is None:
        s2 = rss / (n - 3) if n > 3 else 0.0
    else:
        s2 = float(sigma) ** 2
    cov = s2 * np.linalg.inv(design.T @ design)
    if not a0 > 0:
        raise FitError(f"fitted offset {a0:.4g} is not positive")

    amp = float(np.hypot(a1, b1))
    # a1 cos + b1 sin = amp cos(theta + phase)
    phase = float(np.arctan2(-b1, a1))
    vis = amp / a0
    if amp > 0:
        grad_v = np.array([-amp / a0**2, a1 / (amp * a0), b1 / (amp * a0)])
        grad_p = np.array([0.0, b1 / amp**2, -a1 / amp**2])
        vis_err = float(np.sqrt(grad_v @ cov @ grad_v))
        phase_err = float(np.sqrt(grad_p @ cov @ grad_p))
    else:
        vis_err = float(np.sqrt(0.5 * (cov[1, 1] + cov[2, 2]))) / a0
        phase_err = np.pi
    flags = []
    if vis > 1:
        flags.append("visibility_above_one")
    spacing = np.median(np.diff(np.sort(x))) if n > 1 else 0.0
    if np.ptp(x) + spacing < period * (1 - 1e-9):
        flags.append("less_than_one_period")
    return FringeFit(a0, amp, phase, vis, vis_err, phase_err, cov, float(np.sqrt(rss)), n, tuple(flags))


@dataclass(frozen=True)
class StripeStack:
    """Corrected images of the deposition stripes, one frame per grating position.

    Stripe ``i`` was exposed with the third grating displaced by
    ``i * grating_step``. ``stripe_centers`` holds the lateral stripe
    position inside each frame (frame centre by default).
    """

    frames: tuple[ImageFrame, ...]
    grating_step: float = 100e-9
    adsorber_step: float = 425e-6
    grating_period: float = 991e-9
    exposure_per_stripe: float = 480.0
    stripe_centers: tuple[float, ...] | None = None
    grating_positions_override: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise DomainError("a stripe stack needs at least one frame")
        if self.stripe_centers is None:
            centers = tuple(f.origin[0] + 0.5 * (f.width - 1) * f.pixel_pitch for f in self.frames)
            object.__setattr__(self, "stripe_centers", centers)
        if len(self.stripe_centers) != len(self.frames):
            raise DomainError("one stripe centre per frame required")

    @property
    def n_stripes(self) -> int:
        return len(self.frames)

    @property
    def magnification(self) -> float:
        return self.adsorber_step / self.grating_step

    @property
    def grating_positions(self) -> np.ndarray:
        if self.grating_positions_override is not None:
            return np.asarray(self.grating_positions_override, dtype=float)
        return np.arange(self.n_stripes) * self.grating_step

    @property
    def adsorber_positions(self) -> np.ndarray:
        return np.arange(self.n_stripes) * self.adsorber_step

    @property
    def periods_spanned(self) -> float:
        return self.n_stripes * self.grating_step / self.grating_period


def stripe_phase(i: int, grating_step: float = 100e-9, period: float = 991e-9) -> float:
    """Nominal grating phase of stripe ``i``."""
    return 2 * np.pi * i * grating_step / period


def fringe_samples(
    stack: StripeStack, h: float, rect_width: float = 100e-6, rect_height: float = 33e-6
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Integrated density of every stripe at height ``h``.

    Stripes whose rectangle holds no valid pixel are dropped and reported.
    Returns ``(values, grating_positions, notes)``.
    """
    values, positions, notes = [], [], []
    for i, (frame, xc) in enumerate(zip(stack.frames, stack.stripe_centers)):
        try:
            res = integrate_stripe(frame, xc, h, rect_width, rect_height)
        except DataError as exc:
            notes.append(f"stripe {i}: {exc}")
            continue
        values.append(res.value)
        positions.append(stack.grating_positions[i])
    return np.array(values), np.array(positions), notes


@dataclass(frozen=True)
class CurvePoint:
    height: float
    velocity: float
    visibility: float
    visibility_err: float
    phase: float
    phase_err: float
    fit: FringeFit | None = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.fit is not None


@dataclass(frozen=True)
class VisibilityCurve:
    points: tuple[CurvePoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        h = [p.height for p in self.points]
        if any(b <= a for a, b in zip(h, h[1:])):
            raise DomainError("curve heights must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points], dtype=float)

    @property
    def valid_points(self) -> list[CurvePoint]:
        return [p for p in self.points if p.ok]

    @property
    def failures(self) -> list[CurvePoint]:
        return [p for p in self.points if not p.ok]


def visibility_vs_height(
    stack: StripeStack,
    heights: Sequence[float],
    geom: BeamlineGeometry | None = None,
    rect_width: float = 100e-6,
    rect_height: float = 33e-6,
) -> VisibilityCurve:
    """Fit the fringe at each height; failures are kept as NaN points with a note."""
    geom = geom or BeamlineGeometry()
    points = []
    for h in heights:
        try:
            v = velocity_from_height(h, geom)
        except DomainError:
            v = float("nan")
        try:
            vals, pos, notes = fringe_samples(stack, h, rect_width, rect_height)
            fit = fit_fringe(vals, pos, stack.grating_period)
        except (FitError, DataError, DomainError) as exc:
            nan = float("nan")
            points.append(CurvePoint(h, v, nan, nan, nan, nan, None, str(exc)))
            continue
        points.append(
            CurvePoint(
                h, v, fit.visibility, fit.visibility_err, fit.phase, fit.phase_err, fit, "; ".join(notes)
            )
        )
    return VisibilityCurve(tuple(points))


@dataclass(frozen=True)
class PhaseGradient:
    slope: float  # rad/m
    slope_err: float
    intercept: float
    heights: np.ndarray
    unwrapped: np.ndarray
    ambiguous: bool


def unwrap_sequential(phases) -> tuple[np.ndarray, bool]:
    """Shift each phase by the multiple of 2 pi nearest to its predecessor.

    The flag is set when a remaining step exceeds pi/2.
    """
    out = np.array(phases, dtype=float)
    for k in range(1, len(out)):
        out[k] -= 2 * np.pi * np.round((out[k] - out[k - 1]) / (2 * np.pi))
    ambiguous = bool(np.any(np.abs(np.diff(out)) > np.pi / 2))
    return out, ambiguous


def phase_gradient(curve: VisibilityCurve, max_phase_err: float = 0.5) -> PhaseGradient:
    """Weighted straight-line fit of the unwrapped fringe phase against height.

    Points with a phase error above ``max_phase_err`` (low-contrast heights)
    are skipped.
    """
    pts = curve.valid_points
    return phase_gradient_from_arrays(
        [p.height for p in pts], [p.phase for p in pts], [p.phase_err for p in pts], max_phase_err
    )


def phase_gradient_from_arrays(heights, phases, phase_errs, max_phase_err: float = 0.5) -> PhaseGradient:
    h, phi, err = (np.asarray(a, dtype=float) for a in (heights, phases, phase_errs))
    keep = np.isfinite(h) & np.isfinite(phi) & np.isfinite(err) & (err > 0) & (err <= max_phase_err)
    if keep.sum() < 3:
        raise FitError(f"need at least 3 well-determined phases, got {int(keep.sum())}")
    order = np.argsort(h[keep])
    h, phi, err = h[keep][order], phi[keep][order], err[keep][order]
    phi, ambiguous = unwrap_sequential(phi)
    w = 1.0 / err**2
    design = np.column_stack([np.ones_like(h), h - h.mean()])
    lhs = design.T @ (design * w[:, None])
    coef = np.linalg.solve(lhs, design.T @ (w * phi))
    cov = np.linalg.inv(lhs)
    chi2 = float(np.sum(w * (phi - design @ coef) ** 2))
    dof = len(h) - 2
    if dof > 0:
        cov = cov * max(1.0, chi2 / dof)  # inflate when the scatter exceeds the error bars
    intercept = coef[0] - coef[1] * h.mean()
    return PhaseGradient(float(coef[1]), float(np.sqrt(cov[1, 1])), float(intercept), h, phi, ambiguous)


def tilt_from_phase_gradient(slope: float, d: float = 991e-9) -> float:
    """Roll angle between gratings producing a vertical phase gradient ``slope``.

    A roll by ``theta`` displaces the grating by ``theta h`` at height ``h``,
    i.e. a phase ``2 pi theta h / d``.
    """
    if not np.isfinite(slope):
        raise DomainError("slope must be finite")
    return slope * d / (2 * np.pi)


# -- drift ------------------------------------------------------------------


@dataclass(frozen=True)
class DriftBound:
    bound: float  # m, over the full duration
    rate: float  # m/s, weighted linear trend
    rate_err: float
    noise_floor: float  # m, bound expected from fit noise alone
    trend_detected: bool
    block_offsets: np.ndarray  # displacement of each block relative to block 0, m
    block_offset_errs: np.ndarray


def _wrap_phase(p):
    return (np.asarray(p) + np.pi) % (2 * np.pi) - np.pi


def _block_phases(blocks) -> tuple[np.ndarray, np.ndarray]:
    """Phase and phase error per (block, height); NaN where a fit is missing.

    The residual variance of each height is pooled over all blocks before
    it enters the phase errors: a ten-sample fit leaves only seven degrees
    of freedom, too few for usable inverse-variance weights on its own.
    """
    n_heights = max(len(b) for b in blocks)
    phase = np.full((len(blocks), n_heights), np.nan)
    err = np.full_like(phase, np.nan)
    rss = np.zeros(n_heights)
    dof = np.zeros(n_heights)
    for i, b in enumerate(blocks):
        for k, f in enumerate(b):
            if f is None or not (np.isfinite(f.phase_err) and f.phase_err > 0) or f.n_samples <= 3:
                continue
            phase[i, k], err[i, k] = f.phase, f.phase_err
            rss[k] += f.residual_norm**2
            dof[k] += f.n_samples - 3
    for i, b in enumerate(blocks):
        for k, f in enumerate(b):
            if np.isfinite(err[i, k]) and f.residual_norm > 0:
                own = f.residual_norm**2 / (f.n_samples - 3)
                err[i, k] *= np.sqrt(rss[k] / dof[k] / own)
    return phase, err


def _pair_shift(phase: np.ndarray, err: np.ndarray, a: int, b: int) -> tuple[float, float]:
    """Inverse-variance mean phase change from block a to block b over common heights."""
    var = err[a] ** 2 + err[b] ** 2
    ok = np.isfinite(var) & (var > 0)
    if not ok.any():
        raise FitError("no common valid heights between stripe blocks")
    w = 1.0 / var[ok]
    return float(np.sum(w * _wrap_phase(phase[b, ok] - phase[a, ok])) / w.sum()), float(1 / np.sqrt(w.sum()))


def _trend(phase: np.ndarray, err: np.ndarray, times: np.ndarray) -> tuple[float, float]:
    """Common phase rate with a free phase offset per height (weighted least squares).

    Phases at each height are taken relative to its first fitted block and
    wrapped into (-pi, pi].
    """
    sxy = sxx = 0.0
    for k in range(phase.shape[1]):
        ok = np.isfinite(err[:, k])
        if ok.sum() < 2:
            continue
        t, w = times[ok], 1.0 / err[ok, k] ** 2
        phi = _wrap_phase(phase[ok, k] - phase[ok, k][0])
        t_bar = np.sum(w * t) / w.sum()
        p_bar = np.sum(w * phi) / w.sum()
        sxy += float(np.sum(w * (t - t_bar) * (phi - p_bar)))
        sxx += float(np.sum(w * (t - t_bar) ** 2))
    if sxx == 0:
        raise FitError("no height has fits in two blocks")
    return sxy / sxx, 1.0 / np.sqrt(sxx)


def drift_bound(
    block_fits: Sequence,
    block_times: Sequence[float],
    duration: float,
    period: float = 991e-9,
    n_sigma: float = 2.0,
) -> DriftBound:
    """Upper bound on slow grating drift from time-ordered stripe blocks.

    Each entry of ``block_fits`` is a :class:`FringeFit` or a list of fits at
    common heights. For every pair of blocks the phase change is turned into
    a displacement ``d dphi / (2 pi)``, padded by ``n_sigma`` standard errors
    and scaled from the pair's time separation to ``duration``; the largest
    value is the bound. The trend is a weighted linear fit of phase against
    time with a free offset per height.
    """
    blocks = [list(b) if isinstance(b, (list, tuple)) else [b] for b in block_fits]
    times = np.asarray(block_times, dtype=float)
    if len(blocks) < 2:
        raise FitError("need at least two stripe blocks")
    if len(times) != len(blocks):
        raise FitError("one time per block required")
    phase, err = _block_phases(blocks)
    to_len = period / (2 * np.pi)
    bound = floor = 0.0
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            dt = abs(times[j] - times[i])
            if dt == 0:
                continue
            dphi, e = _pair_shift(phase, err, i, j)
            scale = duration / dt
            bound = max(bound, (abs(dphi) + n_sigma * e) * to_len * scale)
            floor = max(floor, n_sigma * e * to_len * scale)

    offsets, errs = [0.0], [0.0]
    for k in range(1, len(blocks)):
        dphi, e = _pair_shift(phase, err, 0, k)
        offsets.append(dphi * to_len)
        errs.append(e * to_len)
    rate, rate_err = _trend(phase, err, times)
    rate, rate_err = rate * to_len, rate_err * to_len
    detected = bool(abs(rate) > 3 * rate_err)
    return DriftBound(bound, rate, rate_err, floor, detected, np.array(offsets), np.array(errs))


def block_fits_from_stack(
    stack: StripeStack,
    heights: Sequence[float],
    block_size: int = 10,
    rect_width: float = 100e-6,
    rect_height: float = 33e-6,
) -> tuple[list[list[FringeFit | None]], np.ndarray]:
    """Fit each consecutive block of ``block_size`` stripes at every height.

    Returns the fits (outer: block, inner: height; ``None`` where a fit
    failed) and the mean exposure time of each block, measured from the
    start of the scan.
    """
    n_blocks = stack.n_stripes // block_size
    if n_blocks < 2:
        raise FitError(f"{stack.n_stripes} stripes give fewer than two blocks of {block_size}")
    samples = []
    for h in heights:
        vals = []
        for frame, xc in zip(stack.frames, stack.stripe_centers):
            try:
                vals.append(integrate_stripe(frame, xc, h, rect_width, rect_height).value)
            except (DataError, DomainError):
                vals.append(np.nan)
        samples.append(np.array(vals))
    positions = stack.grating_positions
    fits: list[list[FringeFit | None]] = []
    times = []
    for b in range(n_blocks):
        sl = slice(b * block_size, (b + 1) * block_size)
        row = []
        for vals in samples:
            y, x = vals[sl], positions[sl]
            keep = np.isfinite(y)
            try:
                row.append(fit_fringe(y[keep], x[keep], stack.grating_period))
            except FitError:
                row.append(None)
        fits.append(row)
        idx = np.arange(stack.n_stripes)[sl]
        times.append((idx.mean() + 0.5) * stack.exposure_per_stripe)
    return fits, np.array(times)
