import io
import logging
from typing import Dict, List, Optional, Sequence, TextIO, Union

import numpy as np
import pandas as pd

from dynsys import OrbitRecord
from numcore import sc_log_abs
from params import Params
from utils import format_scaled

logger = logging.getLogger(__name__)

VERDICTS = ["ConvergesToFixedPoint", "FibonacciEscape", "MaximalEscape", "Undetermined"]

ORBIT_COLUMNS = ["n", "re_p", "im_p", "log_mag", "ratio_re", "ratio_im", "g_re", "g_im"]

SWEEP_COLUMNS = [
    "alpha_modulus", "alpha_re", "alpha_im", "subcritical", "point_index",
    "z0_re", "z0_im", "z1_re", "z1_im", "z2_re", "z2_im",
    "verdict", "n_decision", "limit_re", "limit_im", "green_value", "green_error_bound",
]

FLOAT_FORMAT = "%.17g"


class OrbitTable:
    """Orbit records flattened into the columns written by ``skewdyn orbit``."""

    def __init__(self):
        self.steps = np.array([], dtype=int)
        self.log_mags = np.array([], dtype=float)
        self.p_values: List[tuple] = []
        self.ratios: List[Optional[complex]] = []
        self.g_values: List[Optional[complex]] = []

    def load_records(self, records: Sequence[OrbitRecord]) -> bool:
        """
        Load orbit records.

        Args:
            records: Records as produced by dynsys.orbit

        Returns:
            bool: True if the loaded table validates
        """
        self.clear_data()
        self.steps = np.array([r.step for r in records], dtype=int)
        self.log_mags = np.array([r.log_mag.to_float() for r in records], dtype=float)
        self.p_values = [format_scaled(r.point.z0) for r in records]
        self.ratios = [r.ratio for r in records]
        self.g_values = [r.g_partial for r in records]
        return self.validate()

    def clear_data(self) -> None:
        self.steps = np.array([], dtype=int)
        self.log_mags = np.array([], dtype=float)
        self.p_values = []
        self.ratios = []
        self.g_values = []

    def validate(self) -> bool:
        """Steps must start at 0 and increase by one."""
        if len(self.steps) == 0:
            return False
        if not (len(self.steps) == len(self.log_mags) == len(self.p_values)):
            return False
        return bool(self.steps[0] == 0 and np.all(np.diff(self.steps) == 1))

    def to_frame(self) -> pd.DataFrame:
        def parts(values):
            re = [np.nan if v is None else v.real for v in values]
            im = [np.nan if v is None else v.imag for v in values]
            return re, im

        ratio_re, ratio_im = parts(self.ratios)
        g_re, g_im = parts(self.g_values)
        return pd.DataFrame({
            "n": self.steps,
            "re_p": [p[0] for p in self.p_values],
            "im_p": [p[1] for p in self.p_values],
            "log_mag": self.log_mags,
            "ratio_re": ratio_re,
            "ratio_im": ratio_im,
            "g_re": g_re,
            "g_im": g_im,
        }, columns=ORBIT_COLUMNS)


def write_csv(frame: pd.DataFrame, target: Union[str, TextIO, None] = None) -> str:
    """Comma-separated, header row, LF endings, 17 significant digits. Returns the text."""
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")
    text = buffer.getvalue()
    if isinstance(target, str):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif target is not None:
        target.write(text)
    return text


def classification_row(params: Params, index: int, coords: Sequence[complex], result: Dict) -> Dict:
    evidence = result["evidence"]
    limit = evidence.get("fibonacci_limit")
    green = evidence.get("green")
    row = {
        "alpha_modulus": params.modulus,
        "alpha_re": params.alpha.real,
        "alpha_im": params.alpha.imag,
        "subcritical": params.is_subcritical,
        "point_index": index,
        "verdict": result["verdict"],
        "n_decision": evidence["n_decision"],
        "limit_re": np.nan if limit is None else limit[0],
        "limit_im": np.nan if limit is None else limit[1],
        "green_value": np.nan if green is None else green["value"],
        "green_error_bound": np.nan if green is None else green["error_bound"],
    }
    for k, c in enumerate(coords):
        row[f"z{k}_re"] = c.real
        row[f"z{k}_im"] = c.imag
    return row


def sweep_frame(rows: Sequence[Dict]) -> pd.DataFrame:
    if not rows:
        return pd.DataFrame(columns=SWEEP_COLUMNS)
    return pd.DataFrame(list(rows), columns=SWEEP_COLUMNS)


def histogram_frame(frame: pd.DataFrame, moduli: Sequence[float]) -> pd.DataFrame:
    """Verdict counts per alpha modulus, every verdict as a column, moduli in the given order."""
    index = pd.Index(list(dict.fromkeys(moduli)), name="alpha_modulus")
    if frame.empty:
        return pd.DataFrame(0, index=index, columns=VERDICTS)
    counts = pd.crosstab(frame["alpha_modulus"], frame["verdict"])
    return counts.reindex(index=index, columns=VERDICTS, fill_value=0).fillna(0).astype(int)


def write_sweep(frame: pd.DataFrame, histogram: pd.DataFrame, target: Union[str, TextIO, None] = None) -> str:
    """Row table followed by a blank line and the per-alpha verdict histogram."""
    text = write_csv(frame)
    if not frame.empty:
        text += "\n" + write_csv(histogram.reset_index())
    if isinstance(target, str):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif target is not None:
        target.write(text)
    return text


def growth_summary(records: Sequence[OrbitRecord]) -> Dict[str, float]:
    """Final log-magnitude and the last log-ratio, for orbit plots and reports."""
    logs = np.array([sc_log_abs(r.point.z0).to_float() for r in records])
    finite = logs[np.isfinite(logs)]
    summary = {"steps": float(len(records)), "final_log_mag": float(finite[-1]) if finite.size else -np.inf}
    if finite.size >= 2 and finite[-2] > 0:
        summary["log_ratio"] = float(finite[-1] / finite[-2])
    return summary
