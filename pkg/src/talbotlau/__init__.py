"""Near-field (Talbot-Lau) molecule interferometry with velocity-resolved fluorescence readout."""

from .beamline import (
    BeamlineGeometry,
    SourceModel,
    VelocityDistribution,
    average_over_distribution,
    averaged_visibility,
    deposition_profile,
    fall_height,
    scattering_correction,
    velocity_distribution_at_height,
    velocity_from_height,
)
from .classical import McResult, classical_visibility_curve, moire_signal, vdw_kick
from .config import RunConfig, load_config, parse_config
from .errors import (
    ConfigError,
    DataError,
    DegenerateConfigurationError,
    DomainError,
    EmptyAcceptanceError,
    FitError,
    NumericalError,
    TalbotLauError,
)
from .fresnel import fresnel_fringe_signal, propagate_periodic
from .imaging import (
    DriftBound,
    FringeFit,
    ImageFrame,
    NoiseModel,
    StripeStack,
    VisibilityCurve,
    correct_frame,
    drift_bound,
    fit_fringe,
    integrate_stripe,
    phase_gradient,
    synthesize_frame,
    tilt_from_phase_gradient,
    visibility_vs_height,
)
from .physics import (
    FringeSignal,
    GratingSpec,
    InterferometerConfig,
    MoleculeSpecies,
    Visibility,
    de_broglie_wavelength,
    fringe_signal,
    grating_coefficients,
    quantum_visibility,
    talbot_lau_coefficients,
    talbot_length,
    talbot_parameter,
)
from .synthesis import StackSynthesisConfig, SyntheticStack, synthesize_stack

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
