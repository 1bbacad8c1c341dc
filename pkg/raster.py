"""
Raster rendering of two-dimensional real slices of C^3.

One coordinate is held fixed at a complex value; the other two run over real values on a
regular grid. Pixel (0, 0) is the top-left corner of the window.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from analysis import DEFAULT_BUDGET, VERDICT_ORDER, classify, series_g
from dynsys import Point3
from green import DEFAULT_TARGET_ERROR, green_plus
from params import Params
from utils import parallel_map

logger = logging.getLogger(__name__)

MAXVAL = 65535
GRAY_STEP = 21845
GRAY_LEVELS = {verdict.value: i * GRAY_STEP for i, verdict in enumerate(VERDICT_ORDER)}

Channel = Literal["classification", "green", "g-magnitude"]


class RasterSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    fixed_axis: int = Field(2, ge=0, le=2, description="Index of the coordinate held fixed")
    fixed_re: float = 0.0
    fixed_im: float = 0.0
    center_x: float = 0.0
    center_y: float = 0.0
    width: float = Field(2.0, gt=0.0)
    height: float = Field(2.0, gt=0.0)
    nx: int = Field(64, ge=2)
    ny: int = Field(64, ge=2)
    channel: Channel = "classification"
    green_clamp: float = Field(10.0, gt=0.0, description="G values are clamped to [0, green_clamp]")

    @model_validator(mode="after")
    def _finite_window(self) -> "RasterSpec":
        values = (self.center_x, self.center_y, self.width, self.height, self.fixed_re, self.fixed_im)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("Raster window must be finite")
        return self

    @property
    def free_axes(self) -> Tuple[int, int]:
        axes = [k for k in range(3) if k != self.fixed_axis]
        return axes[0], axes[1]

    @property
    def fixed_value(self) -> complex:
        return complex(self.fixed_re, self.fixed_im)


def pixel_point(spec: RasterSpec, ix: int, iy: int) -> Tuple[complex, complex, complex]:
    """Coordinates of pixel (ix, iy); x grows to the right, y grows upward."""
    x = spec.center_x - spec.width / 2 + spec.width * ix / (spec.nx - 1)
    y = spec.center_y + spec.height / 2 - spec.height * iy / (spec.ny - 1)
    coords = [0j, 0j, 0j]
    ax, ay = spec.free_axes
    coords[ax] = complex(x)
    coords[ay] = complex(y)
    coords[spec.fixed_axis] = spec.fixed_value
    return coords[0], coords[1], coords[2]


def _pixel_value(params: Params, spec: RasterSpec, coords, budget: int, target_error: float):
    point = Point3.from_complex(*coords)
    if spec.channel == "classification":
        return classify(params, point, budget, target_error).verdict.value
    if spec.channel == "green":
        return green_plus(params, point, target_error).value
    series = series_g(params, point)
    return abs(series.value) if series.converged else math.nan


def render_row(iy: int, params: Params, spec: RasterSpec, budget: int, target_error: float) -> list:
    return [_pixel_value(params, spec, pixel_point(spec, ix, iy), budget, target_error)
            for ix in range(spec.nx)]


@dataclass
class RasterImage:
    samples: np.ndarray  # (ny, nx) uint16
    meta: Dict = field(default_factory=dict)

    def pgm_bytes(self) -> bytes:
        ny, nx = self.samples.shape
        header = f"P5\n{nx} {ny}\n{MAXVAL}\n".encode("ascii")
        return header + self.samples.astype(">u2").tobytes()

    def write(self, path: str) -> str:
        """Write the PGM and its ``.json`` sidecar; returns the sidecar path."""
        with open(path, "wb") as fh:
            fh.write(self.pgm_bytes())
        sidecar = path + ".json"
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump(self.meta, fh, sort_keys=True, indent=2)
            fh.write("\n")
        logger.info("Wrote %s (%dx%d) and %s", path, self.samples.shape[1], self.samples.shape[0], sidecar)
        return sidecar


def _classification_samples(rows: List[list]) -> Tuple[np.ndarray, Dict]:
    samples = np.array([[GRAY_LEVELS[v] for v in row] for row in rows], dtype=np.uint16)
    flat = [v for row in rows for v in row]
    counts = {verdict.value: flat.count(verdict.value) for verdict in VERDICT_ORDER}
    return samples, {"counts": counts, "gray_levels": dict(GRAY_LEVELS)}


def _scaled_samples(rows: List[list], clamp: Tuple[float, float], log_scale: bool) -> Tuple[np.ndarray, Dict]:
    values = np.array(rows, dtype=float)
    missing = ~np.isfinite(values)
    if log_scale:
        values = np.log1p(values)
    values = np.clip(values, *clamp)
    finite = values[~missing]
    vmin = float(finite.min()) if finite.size else 0.0
    vmax = float(finite.max()) if finite.size else 0.0
    if vmax > vmin:
        scaled = np.rint((values - vmin) / (vmax - vmin) * MAXVAL)
    else:
        scaled = np.zeros_like(values)
    scaled[missing] = MAXVAL
    return scaled.astype(np.uint16), {"min": vmin, "max": vmax, "missing": int(missing.sum()),
                                      "log_scale": log_scale}


def render_raster(params: Params, spec: RasterSpec, workers: int = 1, budget: int = DEFAULT_BUDGET,
                  target_error: float = DEFAULT_TARGET_ERROR) -> RasterImage:
    """
    Evaluate the channel on every pixel, one row per work item, rows gathered in order.

    Args:
        params: Map parameters
        spec: Slice, window and channel
        workers: Process count for the row pool
        budget: Classification step budget
        target_error: Green estimate error target

    Returns:
        RasterImage with 16-bit samples and the sidecar metadata
    """
    task = partial(render_row, params=params, spec=spec, budget=budget, target_error=target_error)
    rows = parallel_map(task, range(spec.ny), workers)
    if spec.channel == "classification":
        samples, extra = _classification_samples(rows)
    elif spec.channel == "green":
        samples, extra = _scaled_samples(rows, (0.0, spec.green_clamp), log_scale=False)
    else:
        # |g| spans many decades, so it is stored as ln(1 + |g|)
        samples, extra = _scaled_samples(rows, (0.0, math.inf), log_scale=True)
    meta = {"channel": spec.channel, "params": params.as_dict(), "spec": spec.model_dump(),
            "width": spec.nx, "height": spec.ny, "maxval": MAXVAL}
    meta.update(extra)
    return RasterImage(samples, meta)
