import json

import numpy as np
import pytest
from PIL import Image
from pydantic import ValidationError

from analysis import Verdict, classify
from dynsys import Point3
from params import Params
from raster import GRAY_LEVELS, MAXVAL, RasterSpec, pixel_point, render_raster

HYPERPLANE = RasterSpec(nx=3, ny=3)


@pytest.mark.parametrize("kwargs", [
    {"width": 0},
    {"nx": 1},
    {"channel": "phase"},
    {"fixed_axis": 3},
    {"center_x": float("inf")},
    {"colour": "gray"},
])
def test_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        RasterSpec(**kwargs)


def test_pixel_origin_is_top_left():
    assert pixel_point(HYPERPLANE, 0, 0) == (-1 + 0j, 1 + 0j, 0j)
    assert pixel_point(HYPERPLANE, 2, 2) == (1 + 0j, -1 + 0j, 0j)
    spec = RasterSpec(fixed_axis=0, fixed_re=0.5, fixed_im=-1, nx=3, ny=3)
    assert pixel_point(spec, 1, 1) == (0.5 - 1j, 0j, 0j)


def test_classification_on_hyperplane():
    image = render_raster(Params(2, 1, 0.5), HYPERPLANE)
    assert image.samples.dtype == np.uint16
    expected = np.full((3, 3), GRAY_LEVELS[Verdict.FIBONACCI.value], dtype=np.uint16)
    expected[1, 1] = GRAY_LEVELS[Verdict.CONVERGES.value]
    np.testing.assert_array_equal(image.samples, expected)
    assert image.meta["counts"][Verdict.CONVERGES.value] == 1
    assert image.meta["counts"][Verdict.FIBONACCI.value] == 8


@pytest.mark.parametrize("workers", [2, 4, 8])
def test_rows_are_deterministic_across_workers(workers):
    spec = RasterSpec(fixed_re=0.5, nx=4, ny=9, width=3, height=3)
    params = Params(2, 1, 0.5)
    serial = render_raster(params, spec, workers=1)
    parallel = render_raster(params, spec, workers=workers)
    np.testing.assert_array_equal(serial.samples, parallel.samples)
    assert serial.pgm_bytes() == parallel.pgm_bytes()


def test_pixels_match_classify():
    spec = RasterSpec(fixed_re=1.0, nx=3, ny=3, width=4, height=4)
    params = Params(2, 1, 0.7)
    image = render_raster(params, spec)
    for iy in range(3):
        for ix in range(3):
            verdict = classify(params, Point3.from_complex(*pixel_point(spec, ix, iy))).verdict
            assert image.samples[iy, ix] == GRAY_LEVELS[verdict.value]


def test_written_files(tmp_path):
    image = render_raster(Params(2, 1, 0.5), HYPERPLANE)
    path = tmp_path / "slice.pgm"
    sidecar = image.write(str(path))
    assert path.read_bytes().startswith(b"P5\n3 3\n65535\n")
    with Image.open(path) as im:
        assert im.size == (3, 3)
        assert im.getextrema() == (0, GRAY_LEVELS[Verdict.FIBONACCI.value])
    meta = json.loads(open(sidecar, encoding="utf-8").read())
    assert meta["channel"] == "classification"
    assert meta["maxval"] == MAXVAL
    assert meta["params"]["q"] == 2
    assert meta["spec"]["nx"] == 3


def test_green_channel():
    spec = RasterSpec(fixed_re=1.0, nx=3, ny=3, width=20, height=20, channel="green", green_clamp=5.0)
    image = render_raster(Params(2, 1, 0.9), spec)
    assert image.samples.shape == (3, 3)
    assert 0.0 <= image.meta["min"] <= image.meta["max"] <= 5.0
    assert image.meta["missing"] == 0
    assert image.samples.max() == MAXVAL


def test_g_magnitude_channel():
    spec = RasterSpec(nx=3, ny=3, channel="g-magnitude")
    image = render_raster(Params(2, 1, 0.5), spec)
    assert image.meta["log_scale"] is True
    # g vanishes only at the centre of this window
    assert image.samples[1, 1] == 0
    assert image.meta["min"] == 0.0


def test_fibonacci_level_only_below_critical_modulus():
    spec = RasterSpec(fixed_re=1.0, nx=5, ny=5, width=1.0, height=1.0)
    fibonacci = GRAY_LEVELS[Verdict.FIBONACCI.value]
    assert (render_raster(Params(2, 1, 0.3), spec).samples == fibonacci).any()
    assert not (render_raster(Params(2, 1, 0.9), spec).samples == fibonacci).any()
