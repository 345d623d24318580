"""Run configuration: TOML sections with every default set to the reference apparatus.

An empty file reproduces the standard geometry. Unknown keys, wrong types
and out-of-range values raise :class:`ConfigError` carrying the line
number of the offending entry.

Sections and keys (units in the key names)::

    seed = 0
    output_dir = "out"

    [molecule]        name, mass_amu, c3_J_m3
    [gratings]        period_nm, open_fraction, thickness_nm
    [gratings.g1]     per-grating overrides of the same keys (also g2, g3)
    [interferometer]  separation_m, n_max, m_max, phase_cap_rad, resolution
    [beamline]        oven_slit_um, selection_slit_um, selection_slit_z_m,
                      detector_z_m, gravity_m_s2, height_offset_um,
                      oven_slit_center_um, selection_slit_center_um
    [source]          temperature_K, distribution, table_velocities_mps,
                      table_weights
    [imaging]         stack geometry, forward-model levels, noise, injected
                      tilt/drift (see ImagingSection)
    [analysis]        heights, averaging mode, scattering model, Monte Carlo
                      sample counts, drift blocks, optional measured overlay
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .beamline import BeamlineGeometry, SourceModel
from .errors import ConfigError, DomainError
from .imaging import NoiseModel
from .physics import GratingSpec, InterferometerConfig, MoleculeSpecies
from .synthesis import StackSynthesisConfig


@dataclass
class MoleculeSection:
    name: str = "TPP"
    mass_amu: float = 614.0
    c3_J_m3: float = 0.0


@dataclass
class GratingSection:
    period_nm: float = 991.0
    open_fraction: float = 0.40
    thickness_nm: float = 500.0


@dataclass
class InterferometerSection:
    separation_m: float = 0.38
    n_max: int = 40
    m_max: int = 10
    phase_cap_rad: float = 50.0
    resolution: int = 256


@dataclass
class BeamlineSection:
    oven_slit_um: float = 200.0
    selection_slit_um: float = 150.0
    selection_slit_z_m: float = 1.2
    detector_z_m: float = 2.9
    gravity_m_s2: float = 9.81
    height_offset_um: float = 0.0
    oven_slit_center_um: float = 0.0
    selection_slit_center_um: float = 0.0


@dataclass
class SourceSection:
    temperature_K: float = 693.15
    distribution: str = "effusive_flux"
    table_velocities_mps: list = field(default_factory=list)
    table_weights: list = field(default_factory=list)


@dataclass
class ImagingSection:
    n_stripes: int = 30
    grating_step_nm: float = 100.0
    adsorber_step_um: float = 425.0
    exposure_min: float = 8.0
    rect_width_um: float = 100.0
    rect_height_um: float = 33.0
    pixel_pitch_um: float = 2.0
    frame_width_um: float = 200.0
    frame_top_um: float = 100.0
    frame_bottom_um: float = 1900.0
    exposed_width_um: float = 165.0
    background: float = 1.0
    efficiency: float = 1.0
    peak_density: float = 1.0
    illumination: float = 1000.0
    vignetting: float = 0.2
    dark: float = 100.0
    shot_gain: float = 0.0
    readout_sigma: float = 0.0
    noisy_calibration: bool = False
    tilt_urad: float = 0.0
    drift_nm: float = 0.0
    exposure_scale: float = 1.0
    file_format: str = "tiff"
    flat_field_eps: float = 1e-9


@dataclass
class AnalysisSection:
    height_start_um: float = 250.0
    height_stop_um: float = 1650.0
    height_count: int = 43
    averaging_mode: str = "average_visibility"
    scattering_fraction: float = 0.2
    detector_extent_um: float = 3000.0
    classical_samples: int = 200_000
    velocity_samples: int = 20_000
    velocity_bin_mps: float = 2.0
    deposition_samples: int = 1_000_000
    physics_step_um: float = 10.0
    block_size: int = 10
    max_phase_err_rad: float = 0.5
    drift_sigma: float = 2.0
    fringe_plot_heights_um: list = field(default_factory=lambda: [400.0, 700.0, 1000.0, 1300.0])
    measured_csv: str = ""


SECTIONS = {
    "molecule": MoleculeSection,
    "gratings": GratingSection,
    "interferometer": InterferometerSection,
    "beamline": BeamlineSection,
    "source": SourceSection,
    "imaging": ImagingSection,
    "analysis": AnalysisSection,
}
GRATING_NAMES = ("g1", "g2", "g3")


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    molecule: MoleculeSection = field(default_factory=MoleculeSection)
    gratings: GratingSection = field(default_factory=GratingSection)
    grating_overrides: dict = field(default_factory=dict)  # "g1" -> {key: value}
    interferometer: InterferometerSection = field(default_factory=InterferometerSection)
    beamline: BeamlineSection = field(default_factory=BeamlineSection)
    source: SourceSection = field(default_factory=SourceSection)
    imaging: ImagingSection = field(default_factory=ImagingSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    source_text: str = field(default="", repr=False, compare=False)

    # -- domain objects ----------------------------------------------------

    def grating(self, name: str) -> GratingSpec:
        values = asdict(self.gratings)
        values.update(self.grating_overrides.get(name, {}))
        return GratingSpec(values["period_nm"] * 1e-9, values["open_fraction"], values["thickness_nm"] * 1e-9)

    def molecule_species(self) -> MoleculeSpecies:
        m = self.molecule
        return MoleculeSpecies(m.name, m.mass_amu, m.c3_J_m3)

    def interferometer_config(self) -> InterferometerConfig:
        return InterferometerConfig(
            self.grating("g1"), self.grating("g2"), self.grating("g3"),
            self.interferometer.separation_m, self.molecule_species(),
        )

    def physics_kwargs(self) -> dict:
        i = self.interferometer
        return {"n_max": i.n_max, "m_max": i.m_max, "phase_cap": i.phase_cap_rad}

    def beamline_geometry(self) -> BeamlineGeometry:
        b = self.beamline
        return BeamlineGeometry(
            b.oven_slit_um * 1e-6, b.selection_slit_um * 1e-6, b.selection_slit_z_m, b.detector_z_m,
            b.gravity_m_s2, b.height_offset_um * 1e-6, b.oven_slit_center_um * 1e-6,
            b.selection_slit_center_um * 1e-6,
        )

    def source_model(self) -> SourceModel:
        s = self.source
        return SourceModel(
            s.temperature_K, self.molecule.mass_amu, s.distribution,
            tuple(float(v) for v in s.table_velocities_mps), tuple(float(w) for w in s.table_weights),
        )

    def heights(self) -> np.ndarray:
        a = self.analysis
        return np.linspace(a.height_start_um, a.height_stop_um, a.height_count) * 1e-6

    def synthesis_settings(self) -> StackSynthesisConfig:
        im, a = self.imaging, self.analysis
        return StackSynthesisConfig(
            n_stripes=im.n_stripes,
            grating_step=im.grating_step_nm * 1e-9,
            adsorber_step=im.adsorber_step_um * 1e-6,
            exposure=im.exposure_min * 60.0,
            pixel_pitch=im.pixel_pitch_um * 1e-6,
            frame_width=im.frame_width_um * 1e-6,
            h_min=im.frame_top_um * 1e-6,
            h_max=im.frame_bottom_um * 1e-6,
            exposed_width=im.exposed_width_um * 1e-6,
            background=im.background,
            efficiency=im.efficiency,
            peak_density=im.peak_density,
            illumination=im.illumination,
            vignetting=im.vignetting,
            dark=im.dark,
            noise=NoiseModel(im.shot_gain, im.readout_sigma),
            noisy_calibration=im.noisy_calibration,
            tilt=im.tilt_urad * 1e-6,
            drift=im.drift_nm * 1e-9,
            exposure_scale=im.exposure_scale,
            physics_step=a.physics_step_um * 1e-6,
            window=im.rect_height_um * 1e-6,
            velocity_bin=a.velocity_bin_mps,
            velocity_samples=a.velocity_samples,
            deposition_samples=a.deposition_samples,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source_text")
        d.pop("output_dir")  # where results go does not change them
        return d

    def hash(self) -> str:
        """SHA-256 of the resolved configuration (output directory excluded)."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None, **analysis) -> "RunConfig":
        out = replace(self)
        if seed is not None:
            out.seed = int(seed)
        if output_dir is not None:
            out.output_dir = str(output_dir)
        if analysis:
            out.analysis = replace(self.analysis, **analysis)
        return out


# -- loading -----------------------------------------------------------------


def _locate(text: str, table: str | None, key: str | None) -> int | None:
    """Line (1-based) of ``key`` inside ``[table]`` (top level when ``table`` is None)."""
    current = None
    header_line = None
    for n, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.\s]+?)\s*\]", stripped)
        if m:
            current = re.sub(r"\s+", "", m.group(1))
            if key is None and current == table:
                return n
            if current == table:
                header_line = n
            continue
        if key is not None and current == table and re.match(rf"^{re.escape(key)}\s*=", stripped):
            return n
    return header_line


def _coerce(value, default, where: str, line: int | None):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        )
        value = [float(v) for v in value] if ok else value
    else:  # pragma: no cover
        ok = True
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}", line)
    return value


def _section(cls, raw: dict, text: str, table: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{table}] must be a table", _locate(text, None, table))
    defaults = cls()
    known = {f.name for f in fields(cls)}
    values = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown key {table}.{key}", _locate(text, table, key))
        values[key] = _coerce(value, getattr(defaults, key), f"{table}.{key}", _locate(text, table, key))
    return replace(defaults, **values)


_POSITIVE = {
    "molecule": ("mass_amu",),
    "gratings": ("period_nm", "thickness_nm"),
    "interferometer": ("separation_m", "n_max", "m_max", "phase_cap_rad", "resolution"),
    "beamline": ("oven_slit_um", "selection_slit_um", "selection_slit_z_m", "detector_z_m", "gravity_m_s2"),
    "source": ("temperature_K",),
    "imaging": ("n_stripes", "grating_step_nm", "adsorber_step_um", "exposure_min", "rect_width_um",
                "rect_height_um", "pixel_pitch_um", "frame_width_um", "exposed_width_um", "illumination"),
    "analysis": ("height_count", "detector_extent_um", "classical_samples", "velocity_samples",
                 "velocity_bin_mps", "deposition_samples", "physics_step_um", "block_size",
                 "max_phase_err_rad"),
}
_NON_NEGATIVE = {
    "molecule": ("c3_J_m3",),
    "imaging": ("background", "efficiency", "peak_density", "dark", "shot_gain", "readout_sigma",
                "exposure_scale", "flat_field_eps"),
    "analysis": ("drift_sigma",),
}
_CHOICES = {
    ("source", "distribution"): ("effusive_flux", "tabulated"),
    ("imaging", "file_format"): ("tiff", "png"),
    ("analysis", "averaging_mode"): ("average_visibility", "average_signal"),
}


def _validate(cfg: RunConfig, text: str) -> None:
    def fail(table, key, msg):
        raise ConfigError(f"{table}.{key}: {msg}", _locate(text, table, key))

    sections = {name: getattr(cfg, name) for name in SECTIONS}
    for table, keys in _POSITIVE.items():
        for key in keys:
            if not getattr(sections[table], key) > 0:
                fail(table, key, "must be positive")
    for table, keys in _NON_NEGATIVE.items():
        for key in keys:
            if getattr(sections[table], key) < 0:
                fail(table, key, "must be non-negative")
    for (table, key), options in _CHOICES.items():
        if getattr(sections[table], key) not in options:
            fail(table, key, f"must be one of {', '.join(options)}")
    for name in (None, *GRATING_NAMES):
        g = dict(asdict(cfg.gratings), **cfg.grating_overrides.get(name, {})) if name else asdict(cfg.gratings)
        table = f"gratings.{name}" if name else "gratings"
        if not 0 < g["open_fraction"] < 1:
            fail(table, "open_fraction", "must lie strictly between 0 and 1")
        for key in ("period_nm", "thickness_nm"):
            if not g[key] > 0:
                fail(table, key, "must be positive")
    if len({cfg.grating(n).period for n in GRATING_NAMES}) != 1:
        culprit = next((g for g in GRATING_NAMES if "period_nm" in cfg.grating_overrides.get(g, {})), None)
        line = _locate(text, f"gratings.{culprit}", "period_nm") if culprit else None
        raise ConfigError("all three gratings must share one period", line)
    b = cfg.beamline
    if not b.detector_z_m > b.selection_slit_z_m:
        fail("beamline", "detector_z_m", "detector must lie beyond the selection slit")
    im = cfg.imaging
    if not im.frame_bottom_um > im.frame_top_um:
        fail("imaging", "frame_bottom_um", "must exceed frame_top_um")
    if not 0 <= im.vignetting < 1:
        fail("imaging", "vignetting", "must lie in [0, 1)")
    if im.rect_width_um > im.frame_width_um:
        fail("imaging", "rect_width_um", "integration rectangle is wider than the frame")
    a = cfg.analysis
    if not a.height_stop_um > a.height_start_um and a.height_count > 1:
        fail("analysis", "height_stop_um", "must exceed height_start_um")
    if not 0 <= a.scattering_fraction < 1:
        fail("analysis", "scattering_fraction", "must lie in [0, 1)")
    if a.height_start_um - a.height_stop_um == 0 and a.height_count > 1:
        fail("analysis", "height_count", "several heights need a non-empty range")
    s = cfg.source
    if s.distribution == "tabulated":
        try:
            cfg.source_model()
        except DomainError as exc:
            fail("source", "table_velocities_mps", str(exc))
    try:
        cfg.interferometer_config()
        cfg.beamline_geometry()
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed TOML: {exc}", int(m.group(1)) if m else None) from exc
    cfg = RunConfig(source_text=text)
    for key, value in raw.items():
        if key in ("seed", "output_dir"):
            cfg = replace(cfg, **{key: _coerce(value, getattr(cfg, key), key, _locate(text, None, key))})
        elif key in SECTIONS:
            value = dict(value) if isinstance(value, dict) else value
            if key == "gratings" and isinstance(value, dict):
                overrides = {}
                for g in GRATING_NAMES:
                    if g in value:
                        sub = _section(GratingSection, value.pop(g), text, f"gratings.{g}")
                        given = set(raw["gratings"][g])
                        overrides[g] = {k: v for k, v in asdict(sub).items() if k in given}
                cfg = replace(cfg, grating_overrides=overrides)
            cfg = replace(cfg, **{key: _section(SECTIONS[key], value, text, key)})
        else:
            raise ConfigError(f"unknown section or key {key!r}", _locate(text, None, key) or _locate(text, key, None))
    _validate(cfg, text)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML file; ``None`` gives the default configuration."""
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
