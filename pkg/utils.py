import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar

import mpmath
import numpy as np

from numcore import ScaledComplex

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "SKEWDYN_THREADS"

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: int = logging.WARNING) -> logging.Logger:
    """
    Attach a single stderr handler to the root logger.

    Args:
        level: Logging level for the root logger

    Returns:
        The configured root logger
    """
    root = logging.getLogger()
    root.setLevel(level)
    if not any(getattr(h, "_skewdyn", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._skewdyn = True
        root.addHandler(handler)
    return root


@dataclass
class CheckReport:
    """Outcome of one verification check, echoed by ``skewdyn verify``."""
    name: str
    passed: bool
    anchor: str = ""
    lhs: Any = None
    rhs: Any = None
    tolerance: Optional[float] = None
    detail: str = ""
    heuristic: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}"
        if self.detail:
            text += f" {self.detail}"
        if self.anchor:
            text += f" [{self.anchor}]"
        return text


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return f"{x:.17g}"


def format_scaled(x: ScaledComplex) -> tuple:
    """(re, im) strings with 17 significant digits, valid beyond the double range."""
    if x.is_zero:
        return "0", "0"
    if abs(x.exponent) < 1000:
        c = x.to_complex()
        if math.isfinite(c.real) and math.isfinite(c.imag):
            return format_float(c.real), format_float(c.imag)
    value = x.to_mpc()
    return mpmath.nstr(value.real, 17), mpmath.nstr(value.imag, 17)


def make_rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(seed)


def resolve_threads(configured: int) -> int:
    """The worker count, with SKEWDYN_THREADS taking precedence over the configured value."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return configured
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"Invalid {THREADS_ENV}={raw!r}: not an integer")
    if value < 1:
        raise ValueError(f"Invalid {THREADS_ENV}={raw!r}: must be >= 1")
    return value


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """
    Map ``func`` over ``items`` preserving input order.

    Args:
        func: Picklable callable (module-level function or functools.partial of one)
        items: Work items
        workers: Process count; 1 runs inline

    Returns:
        Results in input order
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items, chunksize=chunk))
