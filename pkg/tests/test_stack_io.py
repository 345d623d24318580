import json

import numpy as np
import pytest

from talbotlau import DataError, visibility_vs_height
from talbotlau.stack_io import (
    CURVE_COLUMNS,
    curve_to_csv,
    load_stack,
    read_csv_table,
    read_image,
    read_sidecar,
    table_to_csv,
    write_image,
    write_stack,
)

D, STEP = 991e-9, 100e-9


def _raw(n_stripes=12, shape=(60, 110), vis=0.3, phase=0.4):
    ref = np.full(shape, 1100.0)
    dark = np.full(shape, 100.0)
    frames = []
    for i in range(n_stripes):
        density = 1 + vis * np.cos(2 * np.pi * i * STEP / D + phase)
        frames.append((density + 1.0) * 1000.0 + 100.0)  # B = 1, I = 1000
    return [np.full(shape, f) for f in frames], ref, dark


def _write(tmp_path, fmt="tiff", **kw):
    frames, ref, dark = _raw(**kw)
    write_stack(tmp_path, frames, ref, dark, pixel_pitch=2e-6, origin=(0.0, 100e-6), grating_period=D,
                grating_step=STEP, adsorber_step=425e-6, exposure=480.0, stripe_centers=[109e-6] * len(frames),
                file_format=fmt)
    return frames


def test_tiff_round_trip_is_float_exact(tmp_path):
    data = np.random.default_rng(0).uniform(0, 5000, (7, 9)).astype(np.float32)
    write_image(tmp_path / "a.tiff", data)
    assert np.array_equal(read_image(tmp_path / "a.tiff"), data.astype(float))


def test_png_stores_rounded_counts(tmp_path):
    data = np.array([[0.4, 1.6], [70000.0, -3.0]])
    write_image(tmp_path / "a.png", data)
    assert np.array_equal(read_image(tmp_path / "a.png"), [[0, 2], [65535, 0]])


def test_unknown_format_and_corrupt_file(tmp_path):
    with pytest.raises(DataError):
        write_image(tmp_path / "a.bmp", np.zeros((2, 2)))
    (tmp_path / "bad.tiff").write_bytes(b"not an image")
    with pytest.raises(DataError):
        read_image(tmp_path / "bad.tiff")


@pytest.mark.parametrize("fmt", ["tiff", "png"])
def test_stack_round_trip_recovers_fringe(tmp_path, fmt):
    _write(tmp_path, fmt)
    stack, meta, notes = load_stack(tmp_path)
    assert notes == [] and stack.n_stripes == 12
    assert meta["format"] == "talbotlau-stack/1"
    assert np.allclose(stack.grating_positions, np.arange(12) * STEP)
    p = visibility_vs_height(stack, [160e-6]).points[0]
    assert p.visibility == pytest.approx(0.3, abs=1e-3 if fmt == "png" else 1e-6)


def test_sidecar_errors(tmp_path):
    with pytest.raises(DataError):
        read_sidecar(tmp_path)
    _write(tmp_path)
    meta = json.loads((tmp_path / "stack.json").read_text())
    (tmp_path / "stack.json").write_text("{broken")
    with pytest.raises(DataError):
        read_sidecar(tmp_path)
    bad = dict(meta)
    del bad["grating_step_m"]
    (tmp_path / "stack.json").write_text(json.dumps(bad))
    with pytest.raises(DataError, match="grating_step_m"):
        read_sidecar(tmp_path)
    bad = dict(meta, stripes=meta["stripes"][::-1])
    (tmp_path / "stack.json").write_text(json.dumps(bad))
    with pytest.raises(DataError):
        read_sidecar(tmp_path)


def test_missing_listed_image_is_fatal(tmp_path):
    _write(tmp_path)
    (tmp_path / "stripe_003.tiff").unlink()
    with pytest.raises(DataError):
        load_stack(tmp_path)


def test_corrupt_stripe_is_masked_and_reported(tmp_path):
    _write(tmp_path)
    (tmp_path / "stripe_004.tiff").write_bytes(b"garbage")
    stack, _, notes = load_stack(tmp_path)
    assert len(notes) == 1 and notes[0].startswith("stripe 4")
    assert not stack.frames[4].validity.any()
    curve = visibility_vs_height(stack, [160e-6])
    assert curve.points[0].visibility == pytest.approx(0.3, abs=1e-6)
    assert "stripe 4" in curve.points[0].note


def test_sidecar_is_sorted_and_stable(tmp_path):
    _write(tmp_path / "a")
    _write(tmp_path / "b")
    assert (tmp_path / "a" / "stack.json").read_bytes() == (tmp_path / "b" / "stack.json").read_bytes()
    assert (tmp_path / "a" / "stripe_000.tiff").read_bytes() == (tmp_path / "b" / "stripe_000.tiff").read_bytes()


def test_csv_round_trip(tmp_path):
    text = table_to_csv(("a", "b"), [(1.0, np.nan), (2.5e-7, 3.0)], comments=["hello"])
    assert text.splitlines()[0] == "# hello"
    (tmp_path / "t.csv").write_text(text)
    table = read_csv_table(tmp_path / "t.csv")
    assert np.isnan(table["b"][0]) and table["a"][1] == 2.5e-7


def test_curve_csv_columns(tmp_path):
    _write(tmp_path)
    stack, _, _ = load_stack(tmp_path)
    (tmp_path / "c.csv").write_text(curve_to_csv(visibility_vs_height(stack, [160e-6, 180e-6])))
    table = read_csv_table(tmp_path / "c.csv")
    assert tuple(table) == CURVE_COLUMNS
    assert table["height_um"].tolist() == [160.0, 180.0]


def test_bad_tables(tmp_path):
    with pytest.raises(DataError):
        read_csv_table(tmp_path / "none.csv")
    (tmp_path / "e.csv").write_text("# only a comment\n")
    with pytest.raises(DataError):
        read_csv_table(tmp_path / "e.csv")
    (tmp_path / "x.csv").write_text("a,b\n1,zz\n")
    with pytest.raises(DataError):
        read_csv_table(tmp_path / "x.csv")
