"""Near-field (Talbot-Lau) fringe formation for a symmetric three-grating setup.

Gratings are described by their complex transmission ``t(x)`` over one
period. The second grating diffracts; the first and third act through their
intensity transmission ``|t(x)|**2`` only. All lengths are in metres and all
velocities in m/s.

The fringe signal recorded by scanning the third grating by ``x_s`` is

    S(x_s) = sum_m S_m exp(2 pi i m x_s / d),
    S_m = A_{-m} * B_{2m}(m L / L_T) * C_{-m},

with ``A`` and ``C`` the Fourier coefficients of the first and third
intensity transmissions and ``B`` the Talbot-Lau coefficients of the
second grating. The doubled index reflects the geometric magnification of
two between the second and third grating planes; the convention is checked
against a direct wave propagation in :mod:`talbotlau.fresnel`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import brentq

from .constants import AMU, HBAR, PLANCK
from .errors import DegenerateConfigurationError, DomainError, NumericalError

DEFAULT_N_MAX = 40
DEFAULT_M_MAX = 10
DEFAULT_PHASE_CAP = 50.0  # rad
DEFAULT_EPSREL = 1e-8
REALNESS_TOL = 1e-9


@dataclass(frozen=True)
class MoleculeSpecies:
    """Interfering particle.

    ``c3`` is the van der Waals coefficient of the particle-wall potential
    ``V(r) = -c3 / r**3`` in J m^3. Zero switches the interaction off.
    """

    name: str = "TPP"
    mass_amu: float = 614.0
    c3: float = 0.0

    def __post_init__(self):
        if not self.mass_amu > 0:
            raise DomainError(f"mass must be positive, got {self.mass_amu}")
        if not self.c3 >= 0:
            raise DomainError(f"c3 must be non-negative, got {self.c3}")

    @property
    def mass(self) -> float:
        """Mass in kg."""
        return self.mass_amu * AMU


@dataclass(frozen=True)
class GratingSpec:
    period: float = 991e-9
    open_fraction: float = 0.40
    thickness: float = 500e-9

    def __post_init__(self):
        if not self.period > 0:
            raise DomainError(f"grating period must be positive, got {self.period}")
        if not 0 < self.open_fraction <= 1:
            raise DomainError(f"open fraction must lie in (0, 1], got {self.open_fraction}")
        if not self.thickness >= 0:
            raise DomainError(f"thickness must be non-negative, got {self.thickness}")

    @property
    def slit_width(self) -> float:
        return self.open_fraction * self.period


@dataclass(frozen=True)
class InterferometerConfig:
    """Symmetric three-grating interferometer (equal spacings)."""

    g1: GratingSpec = field(default_factory=GratingSpec)
    g2: GratingSpec = field(default_factory=GratingSpec)
    g3: GratingSpec = field(default_factory=GratingSpec)
    separation: float = 0.38
    molecule: MoleculeSpecies = field(default_factory=MoleculeSpecies)

    def __post_init__(self):
        if not self.separation > 0:
            raise DomainError(f"grating separation must be positive, got {self.separation}")
        periods = {self.g1.period, self.g2.period, self.g3.period}
        if len(periods) != 1:
            raise DomainError("all three gratings must share one period")

    @property
    def period(self) -> float:
        return self.g2.period


def de_broglie_wavelength(molecule: MoleculeSpecies, v: float) -> float:
    """Return ``h / (m v)`` in metres."""
    if not v > 0:
        raise DomainError(f"velocity must be positive, got {v}")
    return PLANCK / (molecule.mass * v)


def talbot_length(d: float, wavelength: float) -> float:
    """Return the Talbot length ``d**2 / wavelength``."""
    if not d > 0 or not wavelength > 0:
        raise DomainError("period and wavelength must be positive")
    return d * d / wavelength


def talbot_parameter(config: InterferometerConfig, v: float) -> float:
    """Grating separation in units of the Talbot length, ``L / L_T``."""
    lam = de_broglie_wavelength(config.molecule, v)
    return config.separation / talbot_length(config.period, lam)


# -- grating transmission ---------------------------------------------------


def _phase_prefactor(g: GratingSpec, molecule: MoleculeSpecies, v: float) -> float:
    if not v > 0:
        raise DomainError(f"velocity must be positive, got {v}")
    return molecule.c3 * g.thickness / (HBAR * v)


def vdw_phase(x, g: GratingSpec, molecule: MoleculeSpecies, v: float):
    """Eikonal phase (rad) picked up at slit coordinate ``x`` (slit centred at 0).

    Diverges at the walls ``|x| = a/2``; callers restrict ``x`` to the
    transmitting window returned by :func:`open_half_width`.
    """
    half = 0.5 * g.slit_width
    x = np.asarray(x, dtype=float)
    return _phase_prefactor(g, molecule, v) * ((half - x) ** -3 + (half + x) ** -3)


def vdw_phase_gradient(x, g: GratingSpec, molecule: MoleculeSpecies, v: float):
    """Analytic derivative of :func:`vdw_phase` with respect to ``x`` (rad/m)."""
    half = 0.5 * g.slit_width
    x = np.asarray(x, dtype=float)
    return 3.0 * _phase_prefactor(g, molecule, v) * ((half - x) ** -4 - (half + x) ** -4)


def open_half_width(
    g: GratingSpec, molecule: MoleculeSpecies, v: float, phase_cap: float = DEFAULT_PHASE_CAP
) -> float:
    """Half width of the transmitting part of a slit.

    Points where the van der Waals phase exceeds ``phase_cap`` are treated as
    absorbed. Returns 0 when the whole slit is absorbed.
    """
    half = 0.5 * g.slit_width
    k = _phase_prefactor(g, molecule, v)
    if k == 0.0:
        return half
    if 2.0 * k / half**3 > phase_cap:
        return 0.0
    # phi is even and increases monotonically towards the walls
    f = lambda x: k * ((half - x) ** -3 + (half + x) ** -3) - phase_cap
    # f > 0 at half a capture radius from the wall
    hi = half - 0.5 * (k / phase_cap) ** (1.0 / 3.0)
    return brentq(f, 0.0, hi, xtol=1e-18, rtol=1e-14)


def transmission(
    x, g: GratingSpec, molecule: MoleculeSpecies, v: float, phase_cap: float = DEFAULT_PHASE_CAP
):
    """Complex transmission of grating ``g`` at positions ``x`` (periodic in ``d``)."""
    d = g.period
    x = np.asarray(x, dtype=float)
    local = x - d * np.round(x / d)
    x_open = open_half_width(g, molecule, v, phase_cap)
    inside = np.abs(local) <= x_open
    out = np.zeros(local.shape, dtype=complex)
    if molecule.c3 == 0.0:
        out[inside] = 1.0
    else:
        out[inside] = np.exp(1j * vdw_phase(local[inside], g, molecule, v))
    return out


def _indices(n_max: int) -> np.ndarray:
    return np.arange(-n_max, n_max + 1)


def _box_coefficients(half_width: float, d: float, n_max: int) -> np.ndarray:
    n = _indices(n_max)
    out = np.empty(n.shape, dtype=complex)
    nz = n != 0
    out[nz] = np.sin(2 * np.pi * n[nz] * half_width / d) / (np.pi * n[nz])
    out[~nz] = 2.0 * half_width / d
    return out


def grating_coefficients(
    g: GratingSpec,
    molecule: MoleculeSpecies,
    v: float,
    n_max: int = DEFAULT_N_MAX,
    phase_cap: float = DEFAULT_PHASE_CAP,
    epsrel: float = DEFAULT_EPSREL,
) -> np.ndarray:
    """Fourier coefficients ``b_n`` of the grating transmission, ``|n| <= n_max``.

    Element ``n + n_max`` of the returned array holds ``b_n``. Without a van
    der Waals interaction these are the binary-grating values
    ``sin(pi n f) / (pi n)``; otherwise the slit integral is evaluated by
    adaptive quadrature over the transmitting window.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    d = g.period
    x_open = open_half_width(g, molecule, v, phase_cap)
    if molecule.c3 == 0.0 or x_open == 0.0:
        return _box_coefficients(x_open, d, n_max)
    k = 2 * np.pi * np.arange(n_max + 1) / d
    # the phase is even in x, so b_n = (2/d) int_0^x_open exp(i phi) cos(k_n x) dx
    integrand = lambda x: np.exp(1j * vdw_phase(x, g, molecule, v)) * np.cos(k * x)
    half, _ = quad_vec(integrand, 0.0, x_open, epsrel=epsrel, epsabs=1e-14 * d, limit=2000)
    half = 2.0 * half / d
    return np.concatenate([half[:0:-1], half])


def intensity_coefficients(
    g: GratingSpec,
    molecule: MoleculeSpecies,
    v: float,
    n_max: int = DEFAULT_N_MAX,
    phase_cap: float = DEFAULT_PHASE_CAP,
) -> np.ndarray:
    """Fourier coefficients of ``|t(x)|**2``, laid out as in :func:`grating_coefficients`."""
    return _box_coefficients(open_half_width(g, molecule, v, phase_cap), g.period, n_max)


# -- Talbot-Lau coefficients ------------------------------------------------


@dataclass(frozen=True)
class TalbotLauCoefficients:
    """``B_m(xi)`` for ``|m| <= m_max``; ``values[m + m_max]`` holds ``B_m``."""

    values: np.ndarray
    xi: float
    m_max: int
    n_max: int
    warning: str | None = None

    def __getitem__(self, m: int) -> complex:
        if abs(m) > self.m_max:
            raise IndexError(m)
        return self.values[m + self.m_max]


def _tl_coefficient(b: np.ndarray, m: int, xi: float) -> complex:
    """Single ``B_m(xi) = sum_j b_j conj(b_{j-m}) exp(i pi xi (m - 2j))`` over the truncated range."""
    n_max = (len(b) - 1) // 2
    lo, hi = max(-n_max, m - n_max), min(n_max, m + n_max)
    if lo > hi:
        return 0.0 + 0.0j
    j = np.arange(lo, hi + 1)
    terms = b[j + n_max] * np.conj(b[j - m + n_max])
    return complex(np.sum(terms * np.exp(1j * np.pi * xi * (m - 2 * j))))


def talbot_lau_coefficients(b: np.ndarray, xi: float, m_max: int) -> TalbotLauCoefficients:
    """Talbot-Lau coefficients of a grating with Fourier coefficients ``b``.

    ``b`` must have odd length ``2 n_max + 1``. A truncation ``n_max < 2 m_max``
    is allowed but flagged in ``warning``.
    """
    b = np.asarray(b, dtype=complex)
    if b.ndim != 1 or len(b) % 2 != 1:
        raise DomainError("coefficient array must have odd length 2*n_max + 1")
    n_max = (len(b) - 1) // 2
    warning = None
    if n_max < 2 * m_max:
        warning = f"n_max={n_max} < 2*m_max={2 * m_max}: high orders are truncated"
    values = np.array([_tl_coefficient(b, m, xi) for m in range(-m_max, m_max + 1)])
    return TalbotLauCoefficients(values, float(xi), m_max, n_max, warning)


# -- fringe signal ----------------------------------------------------------


class Visibility(NamedTuple):
    sinusoidal: float
    exact: float


@dataclass(frozen=True)
class FringeSignal:
    """Transmitted flux versus lateral shift of the third grating over one period."""

    positions: np.ndarray
    values: np.ndarray
    fourier_components: np.ndarray
    m_max: int
    velocity: float
    xi: float
    warning: str | None = None

    def component(self, m: int) -> complex:
        return self.fourier_components[m + self.m_max]

    @property
    def visibility_exact(self) -> float:
        hi, lo = float(self.values.max()), float(self.values.min())
        return (hi - lo) / (hi + lo)

    @property
    def visibility_sinusoidal(self) -> float:
        return 2.0 * abs(self.component(1)) / self.component(0).real

    @property
    def phase(self) -> float:
        """Phase of the first harmonic, ``arg S_1``."""
        return float(np.angle(self.component(1)))


def signal_harmonics(
    config: InterferometerConfig,
    v: float,
    n_max: int = DEFAULT_N_MAX,
    m_max: int = DEFAULT_M_MAX,
    phase_cap: float = DEFAULT_PHASE_CAP,
    epsrel: float = DEFAULT_EPSREL,
) -> np.ndarray:
    """Fourier components ``S_m`` (``|m| <= m_max``) of the fringe signal.

    ``B_0`` is taken from Parseval's theorem (the mean of ``|t2|**2``) rather
    than the truncated sum: with a van der Waals phase the slit edges scatter
    a sizeable flux into orders far beyond ``n_max``, which then arrives as a
    fringe-free background.
    """
    mol = config.molecule
    xi = talbot_parameter(config, v)
    b = grating_coefficients(config.g2, mol, v, n_max, phase_cap, epsrel)
    a = intensity_coefficients(config.g1, mol, v, n_max, phase_cap)
    c = intensity_coefficients(config.g3, mol, v, n_max, phase_cap)
    b0_exact = intensity_coefficients(config.g2, mol, v, 1, phase_cap)[1].real
    out = np.empty(2 * m_max + 1, dtype=complex)
    for m in range(-m_max, m_max + 1):
        a_m = a[-m + n_max] if abs(m) <= n_max else 0.0
        c_m = c[-m + n_max] if abs(m) <= n_max else 0.0
        tl = b0_exact if m == 0 else _tl_coefficient(b, 2 * m, m * xi)
        out[m + m_max] = a_m * tl * c_m
    return out


def check_hermitian(components: np.ndarray, tol: float = REALNESS_TOL) -> None:
    """Raise :class:`NumericalError` unless ``S_{-m} == conj(S_m)``."""
    scale = max(abs(components[len(components) // 2]), np.abs(components).max(), 1e-300)
    mismatch = np.abs(components - np.conj(components[::-1])).max()
    if mismatch > tol * scale:
        raise NumericalError(f"fringe harmonics are not Hermitian (mismatch {mismatch:.3e})")


def reconstruct(components: np.ndarray, positions: np.ndarray, d: float) -> np.ndarray:
    """Evaluate ``sum_m S_m exp(2 pi i m x / d)``; returns the complex sum."""
    m_max = (len(components) - 1) // 2
    m = np.arange(-m_max, m_max + 1)
    return np.exp(2j * np.pi * np.outer(positions, m) / d) @ components


def real_signal(components: np.ndarray, positions: np.ndarray, d: float) -> np.ndarray:
    """Reconstruct a signal and verify that it is real before dropping ``imag``."""
    raw = reconstruct(components, positions, d)
    scale = np.abs(raw).max()
    residue = np.abs(raw.imag).max()
    if residue > REALNESS_TOL * max(scale, 1e-300):
        raise NumericalError(
            f"reconstructed signal has imaginary residue {residue:.3e} (scale {scale:.3e})"
        )
    return raw.real


def fringe_signal(
    config: InterferometerConfig,
    v: float,
    resolution: int = 256,
    n_max: int = DEFAULT_N_MAX,
    m_max: int = DEFAULT_M_MAX,
    phase_cap: float = DEFAULT_PHASE_CAP,
    epsrel: float = DEFAULT_EPSREL,
) -> FringeSignal:
    if not v > 0:
        raise DomainError(f"velocity must be positive, got {v}")
    if resolution < 2:
        raise DomainError("resolution must be at least 2")
    comps = signal_harmonics(config, v, n_max, m_max, phase_cap, epsrel)
    check_hermitian(comps)
    d = config.period
    positions = np.arange(resolution) * d / resolution
    values = real_signal(comps, positions, d)
    warning = None
    if n_max < 2 * m_max:
        warning = f"n_max={n_max} < 2*m_max={2 * m_max}: high orders are truncated"
    return FringeSignal(
        positions, values, comps, m_max, float(v), talbot_parameter(config, v), warning
    )


def visibility_from_components(components: np.ndarray) -> float:
    """Sinusoidal visibility ``2 |S_1| / S_0``; may exceed one for strongly peaked fringes."""
    mid = len(components) // 2
    s0 = components[mid].real
    if not s0 > 0:
        raise DegenerateConfigurationError(f"mean flux S_0 = {s0} is not positive")
    return 2.0 * abs(components[mid + 1]) / s0


def quantum_visibility(
    config: InterferometerConfig,
    v: float,
    resolution: int = 256,
    **kwargs,
) -> Visibility:
    """Fringe visibility at a single velocity.

    Returns ``Visibility(sinusoidal, exact)``: ``2 |S_1| / S_0`` and
    ``(max - min) / (max + min)`` of the reconstructed signal.
    """
    sig = fringe_signal(config, v, resolution, **kwargs)
    v_sin = visibility_from_components(sig.fourier_components)
    return Visibility(v_sin, sig.visibility_exact)


def visibility_curve(config: InterferometerConfig, velocities, **kwargs) -> np.ndarray:
    """Sinusoidal visibility over a velocity grid."""
    return np.array([quantum_visibility(config, float(v), **kwargs).sinusoidal for v in velocities])


def harmonics_table(config: InterferometerConfig, velocities, **kwargs) -> np.ndarray:
    """Stack of ``S_m`` vectors, one row per velocity."""
    return np.array([signal_harmonics(config, float(v), **kwargs) for v in velocities])
