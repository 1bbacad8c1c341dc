import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from typing import Optional, Tuple

from data_processor import OrbitTable
from params import LN_PHI, Params
from raster import GRAY_LEVELS, RasterImage

LOG_MAG_LABEL = 'ln max(|P(n)|, |P(n-1)|)'


class OrbitPlotter:
    def __init__(self):
        self.fig = None
        self.ax = None

    def setup_plot(self, title: Optional[str] = None, figsize: Tuple[float, float] = (8, 6)) -> None:
        """
        Start a fresh figure.

        Args:
            title: Optional figure title
            figsize: Figure size in inches
        """
        plt.close('all')
        self.fig, self.ax = plt.subplots(figsize=figsize)
        if title:
            self.fig.suptitle(title)
        self.ax.grid(True, alpha=0.4)

    def plot_log_magnitude(self, table: OrbitTable, params: Optional[Params] = None,
                           show_reference: bool = True) -> None:
        """
        Plot ln max(|P(n)|, |P(n-1)|) against n.

        Args:
            table: Loaded orbit table
            params: Parameters, used for the title
            show_reference: Draw the Fibonacci slope n ln(phi) through the first finite point
        """
        if not table.validate():
            raise ValueError("Invalid orbit table")
        title = None
        if params is not None:
            title = f"q={params.q}, d={params.d}, alpha={params.alpha.real:g}{params.alpha.imag:+g}i"
        self.setup_plot(title)

        steps = table.steps
        logs = table.log_mags
        finite = np.isfinite(logs)
        self.ax.plot(steps[finite], logs[finite], 'b.-', linewidth=1.5, label=LOG_MAG_LABEL)

        if show_reference and finite.any():
            n0 = steps[finite][0]
            ref = logs[finite][0] + (steps - n0) * LN_PHI
            self.ax.plot(steps, ref, color='gray', linestyle='--', alpha=0.7, label='slope ln(phi)')

        self.ax.set_xlabel('n')
        self.ax.set_ylabel(LOG_MAG_LABEL)
        self.ax.legend(loc='best')

    def plot_raster_preview(self, image: RasterImage) -> None:
        """Show the 16-bit samples in gray with the window extent on the axes."""
        spec = image.meta.get("spec", {})
        self.setup_plot(f"{image.meta.get('channel', '')} channel")
        extent = None
        if spec:
            x0 = spec["center_x"] - spec["width"] / 2
            y0 = spec["center_y"] - spec["height"] / 2
            extent = (x0, x0 + spec["width"], y0, y0 + spec["height"])
        self.ax.imshow(image.samples, cmap='gray', vmin=0, vmax=65535, extent=extent,
                       interpolation='nearest')
        self.ax.set_aspect('equal')
        if image.meta.get("channel") == "classification":
            counts = image.meta.get("counts", {})
            legend = ", ".join(f"{name}={GRAY_LEVELS[name]} ({counts.get(name, 0)})" for name in GRAY_LEVELS)
            self.ax.set_xlabel(legend, fontsize=7)

    def save_plot(self, filename: str) -> None:
        """
        Save the plot to a file.

        Args:
            filename: Output filename
        """
        self.fig.savefig(filename, bbox_inches='tight', dpi=150)
        plt.close(self.fig)

    def get_plot(self) -> Tuple[plt.Figure, plt.Axes]:
        return self.fig, self.ax
