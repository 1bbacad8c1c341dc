import math

import pytest

from data_processor import OrbitTable
from dynsys import Point3, orbit
from params import Params
from plotter import LOG_MAG_LABEL, OrbitPlotter
from raster import RasterSpec, render_raster


def test_orbit_plot(tmp_path):
    params = Params(2, 1, 0.5)
    table = OrbitTable()
    table.load_records(orbit(params, Point3.from_complex(1, 0, 0), 12))
    plotter = OrbitPlotter()
    plotter.plot_log_magnitude(table, params)
    fig, ax = plotter.get_plot()
    assert len(ax.lines) == 2
    assert "q=2" in fig._suptitle.get_text()
    assert ax.get_ylabel() == LOG_MAG_LABEL
    path = tmp_path / "orbit.png"
    plotter.save_plot(str(path))
    assert path.read_bytes()[:4] == b"\x89PNG"


def test_orbit_plot_uses_max_of_both_coordinates():
    table = OrbitTable()
    table.load_records(orbit(Params(2, 1, 0.5), Point3.from_complex(0, 1, 0), 5))
    plotter = OrbitPlotter()
    plotter.plot_log_magnitude(table)
    _, ax = plotter.get_plot()
    # P(0) = 0 still plots at n = 0 through |P(-1)| = 1
    assert list(ax.lines[0].get_xdata()[:4]) == [0, 1, 2, 3]
    assert list(ax.lines[0].get_ydata()[:4]) == pytest.approx([0.0, 0.0, 0.0, math.log(2.0)])


def test_orbit_plot_rejects_empty_table():
    with pytest.raises(ValueError):
        OrbitPlotter().plot_log_magnitude(OrbitTable())


def test_raster_preview(tmp_path):
    image = render_raster(Params(2, 1, 0.5), RasterSpec(nx=3, ny=3))
    plotter = OrbitPlotter()
    plotter.plot_raster_preview(image)
    _, ax = plotter.get_plot()
    assert tuple(ax.images[0].get_extent()) == (-1.0, 1.0, -1.0, 1.0)
    assert "FibonacciEscape" in ax.get_xlabel()
    plotter.save_plot(str(tmp_path / "preview.png"))
