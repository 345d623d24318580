"""Reading and writing stripe stacks and curve tables.

A stack directory holds one image per stripe, a reference image, a dark
image and a ``stack.json`` sidecar::

    {
      "format": "talbotlau-stack/1",
      "pixel_pitch_m": 2e-06,
      "origin_m": [0.0, 0.0001],
      "grating_period_m": 9.91e-07,
      "grating_step_m": 1e-07,
      "adsorber_step_m": 0.000425,
      "exposure_s": 480.0,
      "reference": "reference.tiff",
      "dark": "dark.tiff",
      "stripes": [
        {"index": 0, "file": "stripe_000.tiff", "grating_position_m": 0.0,
         "adsorber_position_m": 0.0, "exposure_s": 480.0, "stripe_center_m": 9.9e-05},
        ...
      ]
    }

Images are single-channel float32 TIFF or 16-bit grayscale PNG (integer
counts).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import DataError
from .imaging import (
    FrameKind,
    ImageFrame,
    StripeStack,
    VisibilityCurve,
    correct_frame,
)

SIDECAR = "stack.json"
STACK_FORMAT = "talbotlau-stack/1"
CURVE_COLUMNS = ("height_um", "velocity_mps", "visibility", "visibility_err", "phase_rad", "phase_err_rad")


def write_image(path: Path, data: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() == ".png":
        counts = np.clip(np.rint(data), 0, 65535).astype(np.uint16)
        Image.fromarray(counts).save(path, format="PNG")
    elif path.suffix.lower() in (".tif", ".tiff"):
        Image.fromarray(np.asarray(data, dtype=np.float32), mode="F").save(path, format="TIFF")
    else:
        raise DataError(f"unsupported image format: {path.suffix}")


def read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img.load()
            return np.array(img, dtype=float)
    except FileNotFoundError:
        raise
    except Exception as exc:  # PIL raises several unrelated types for bad data
        raise DataError(f"cannot decode {path}: {exc}") from exc


def write_stack(
    directory: Path,
    frames: Sequence[np.ndarray],
    reference: np.ndarray,
    dark: np.ndarray,
    *,
    pixel_pitch: float,
    origin: tuple[float, float],
    grating_period: float,
    grating_step: float,
    adsorber_step: float,
    exposure: float,
    stripe_centers: Sequence[float],
    file_format: str = "tiff",
    extra: dict | None = None,
) -> Path:
    """Write raw fluorescence frames, reference and dark images plus the sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = {"tiff": "tiff", "tif": "tiff", "png": "png"}.get(file_format.lower())
    if ext is None:
        raise DataError(f"unknown image format {file_format!r}")
    write_image(directory / f"reference.{ext}", reference)
    write_image(directory / f"dark.{ext}", dark)
    stripes = []
    for i, frame in enumerate(frames):
        name = f"stripe_{i:03d}.{ext}"
        write_image(directory / name, frame)
        stripes.append(
            {
                "index": i,
                "file": name,
                "grating_position_m": i * grating_step,
                "adsorber_position_m": i * adsorber_step,
                "exposure_s": exposure,
                "stripe_center_m": float(stripe_centers[i]),
            }
        )
    meta = {
        "format": STACK_FORMAT,
        "pixel_pitch_m": pixel_pitch,
        "origin_m": list(origin),
        "grating_period_m": grating_period,
        "grating_step_m": grating_step,
        "adsorber_step_m": adsorber_step,
        "exposure_s": exposure,
        "reference": f"reference.{ext}",
        "dark": f"dark.{ext}",
        "stripes": stripes,
    }
    if extra:
        meta.update(extra)
    (directory / SIDECAR).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return directory / SIDECAR


_REQUIRED = (
    "pixel_pitch_m",
    "origin_m",
    "grating_period_m",
    "grating_step_m",
    "adsorber_step_m",
    "reference",
    "dark",
    "stripes",
)


def read_sidecar(directory: Path) -> dict:
    path = Path(directory) / SIDECAR
    if not path.is_file():
        raise DataError(f"missing stack sidecar {path}")
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed sidecar {path}: {exc}") from exc
    missing = [k for k in _REQUIRED if k not in meta]
    if missing:
        raise DataError(f"sidecar {path} lacks {', '.join(missing)}")
    indices = [s.get("index") for s in meta["stripes"]]
    if indices != list(range(len(indices))):
        raise DataError("sidecar stripe indices must run 0, 1, 2, ... in order")
    return meta


def load_stack(directory: Path, eps: float = 1e-9) -> tuple[StripeStack, dict, list[str]]:
    """Load and flat-field correct a stack directory.

    A stripe image that exists but cannot be decoded, or whose shape is
    wrong, is replaced by an all-invalid frame and reported in the returned
    notes. Missing files and sidecar inconsistencies raise :class:`DataError`.
    """
    directory = Path(directory)
    meta = read_sidecar(directory)
    pitch = float(meta["pixel_pitch_m"])
    origin = tuple(float(o) for o in meta["origin_m"])

    def frame(name, kind):
        path = directory / name
        if not path.is_file():
            raise DataError(f"sidecar lists missing image {path}")
        return ImageFrame(read_image(path), pitch, kind, origin)

    reference = frame(meta["reference"], FrameKind.REFERENCE)
    dark = frame(meta["dark"], FrameKind.DARK)
    if reference.shape != dark.shape:
        raise DataError("reference and dark images differ in shape")
    notes: list[str] = []
    corrected, centers, positions = [], [], []
    for s in meta["stripes"]:
        path = directory / s["file"]
        if not path.is_file():
            raise DataError(f"sidecar lists missing image {path}")
        try:
            raw = ImageFrame(read_image(path), pitch, FrameKind.FLUORESCENCE, origin)
            if raw.shape != reference.shape:
                raise DataError(f"shape {raw.shape} differs from reference {reference.shape}")
        except DataError as exc:
            notes.append(f"stripe {s['index']}: {exc}")
            raw = ImageFrame(np.full(reference.shape, np.nan), pitch, FrameKind.FLUORESCENCE, origin)
        corrected.append(correct_frame(raw, reference, dark, eps))
        centers.append(float(s.get("stripe_center_m", origin[0] + 0.5 * (reference.width - 1) * pitch)))
        positions.append(float(s["grating_position_m"]))
    stack = StripeStack(
        tuple(corrected),
        grating_step=float(meta["grating_step_m"]),
        adsorber_step=float(meta["adsorber_step_m"]),
        grating_period=float(meta["grating_period_m"]),
        exposure_per_stripe=float(meta.get("exposure_s", 480.0)),
        stripe_centers=tuple(centers),
        grating_positions_override=tuple(positions),
    )
    return stack, meta, notes


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.10g}"


def table_to_csv(columns: Sequence[str], rows: Sequence[Sequence[float]], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(float(x)) for x in r])
    return buf.getvalue()


def curve_to_csv(curve: VisibilityCurve, comments: Sequence[str] = ()) -> str:
    rows = [
        (p.height * 1e6, p.velocity, p.visibility, p.visibility_err, p.phase, p.phase_err) for p in curve.points
    ]
    return table_to_csv(CURVE_COLUMNS, rows, comments)


def read_csv_table(path: Path) -> dict[str, np.ndarray]:
    """Read a comment-prefixed CSV into columns of floats."""
    try:
        lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    except FileNotFoundError as exc:
        raise DataError(f"missing table {path}") from exc
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration as exc:
        raise DataError(f"empty table {path}") from exc
    rows = list(reader)
    try:
        data = np.array([[float(x) for x in r] for r in rows], dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise DataError(f"non-numeric entry in {path}: {exc}") from exc
    return {name: data[:, k] for k, name in enumerate(header)}
