"""
Green function estimators with a-posteriori error bounds.

For a polynomial map f of degree q with ||f(z)|| <= C max(1, ||z||)^q in the max-norm,
consecutive quotients log+||f^n(p)|| / q^n differ by at most ln(C) / q^(n+1), so stopping
at step n leaves a tail of at most ln(C) / (q^n (q - 1)).

    Psi:      C = 3 max(1, |p2|^d)
    Psi^-1:   C = 3 max(1, |p2|^d)            (|alpha| = 1, |z2| is preserved)
    phi, Phi: C = 3 max(1, |alpha^l|)         (|alpha^l (w0 + w1 + w0^q)| <= 3 |alpha^l| max(1, ||w||)^q)
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from dynsys import DEFAULT_STOP, Point3, StopPolicy, apply_henon, apply_phi, apply_psi, apply_psi_inv, h_map, theta
from numcore import LogMagnitude, ScaledComplex, max_log_abs, sc_log_abs
from params import Params, require_unimodular
from utils import CheckReport

logger = logging.getLogger(__name__)

LN3 = math.log(3.0)
DEFAULT_TARGET_ERROR = 1e-6
DEFAULT_MAX_STEPS = 200


@dataclass(frozen=True)
class GreenEstimate:
    value: float
    error_bound: float
    n_used: int
    escaped: bool
    stopped_early: bool = False
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "error_bound": self.error_bound,
            "n_used": self.n_used,
            "escaped": self.escaped,
            "stopped_early": self.stopped_early,
            "note": self.note,
        }


def _tail_bound(log_c: float, q: int, n: int) -> float:
    return log_c / (float(q) ** n * (q - 1))


def _estimate(state, step: Callable, norm_log: Callable[[object], LogMagnitude], q: int, log_c: float,
              target_error: float, max_steps: int, stop_policy: StopPolicy) -> GreenEstimate:
    if target_error <= 0:
        raise ValueError(f"target_error must be > 0, got {target_error}")
    contracted = 0
    n = 0
    while True:
        lm = norm_log(state)
        bound = _tail_bound(log_c, q, n)
        value = lm.log_plus() / float(q) ** n
        if bound <= target_error or n >= max_steps or lm.to_float() > stop_policy.log_ceiling:
            return GreenEstimate(value, bound, n, value - bound > 0)
        contracted = contracted + 1 if lm.to_float() < stop_policy.log_eps_zero else 0
        if contracted >= stop_policy.window:
            logger.debug("Bounded orbit detected at n=%d, reporting G = 0", n)
            return GreenEstimate(0.0, bound, n, False, stopped_early=True, note="bounded orbit detected")
        state = step(state)
        n += 1


def _hyperplane_estimate(q: int, log_c: float, target_error: float) -> GreenEstimate:
    if target_error <= 0:
        raise ValueError(f"target_error must be > 0, got {target_error}")
    n = 0
    while _tail_bound(log_c, q, n) > target_error:
        n += 1
    return GreenEstimate(0.0, _tail_bound(log_c, q, n), n, False, note="invariant hyperplane z2 = 0")


def psi_log_constant(params: Params, z2: ScaledComplex) -> float:
    return LN3 + params.d * sc_log_abs(z2).log_plus()


def henon_log_constant(params: Params) -> float:
    return LN3 + max(0.0, math.log(abs(params.alpha_l)))


def green_plus(params: Params, p: Point3, target_error: float = DEFAULT_TARGET_ERROR,
               max_steps: int = DEFAULT_MAX_STEPS, stop_policy: StopPolicy = DEFAULT_STOP) -> GreenEstimate:
    """G+ of Psi at p, within the returned error bound."""
    log_c = psi_log_constant(params, p.z2)
    if p.z2.is_zero:
        return _hyperplane_estimate(params.q, log_c, target_error)
    return _estimate(p, lambda x: apply_psi(params, x), Point3.norm_log, params.q, log_c,
                     target_error, max_steps, stop_policy)


def green_minus(params: Params, p: Point3, target_error: float = DEFAULT_TARGET_ERROR,
                max_steps: int = DEFAULT_MAX_STEPS, stop_policy: StopPolicy = DEFAULT_STOP) -> GreenEstimate:
    """G- of Psi (iterating the inverse); only defined for |alpha| = 1."""
    require_unimodular(params)
    log_c = psi_log_constant(params, p.z2)
    if p.z2.is_zero:
        return _hyperplane_estimate(params.q, log_c, target_error)
    return _estimate(p, lambda x: apply_psi_inv(params, x), Point3.norm_log, params.q, log_c,
                     target_error, max_steps, stop_policy)


def green_plus_henon(params: Params, w: Tuple[ScaledComplex, ScaledComplex],
                     target_error: float = DEFAULT_TARGET_ERROR, max_steps: int = DEFAULT_MAX_STEPS,
                     stop_policy: StopPolicy = DEFAULT_STOP) -> GreenEstimate:
    return _estimate(tuple(w), lambda x: apply_henon(params, x), lambda x: max_log_abs(*x), params.q,
                     henon_log_constant(params), target_error, max_steps, stop_policy)


def green_plus_phi(params: Params, p: Point3, target_error: float = DEFAULT_TARGET_ERROR,
                   max_steps: int = DEFAULT_MAX_STEPS, stop_policy: StopPolicy = DEFAULT_STOP) -> GreenEstimate:
    """G+ of Phi on C^3."""
    return _estimate(p, lambda x: apply_phi(params, x), Point3.norm_log, params.q,
                     henon_log_constant(params), target_error, max_steps, stop_policy)


def check_functional_equation(params: Params, p: Point3,
                              target_error: float = DEFAULT_TARGET_ERROR) -> CheckReport:
    before = green_plus(params, p, target_error)
    after = green_plus(params, apply_psi(params, p), target_error)
    diff = abs(after.value - params.q * before.value)
    tolerance = params.q * (before.error_bound + after.error_bound)
    return CheckReport(
        name="green-functional-equation",
        passed=diff <= tolerance,
        anchor="G(Psi(p)) = q G(p)",
        lhs=after.value,
        rhs=params.q * before.value,
        tolerance=tolerance,
        detail=f"diff={diff:.3e} tol={tolerance:.3e}",
        heuristic=before.stopped_early or after.stopped_early,
        extra={"n_used": max(before.n_used, after.n_used), "max_error_bound": max(before.error_bound, after.error_bound)},
    )


def check_semiconjugacy(params: Params, p: Point3, target_error: float = DEFAULT_TARGET_ERROR) -> CheckReport:
    """
    Compare G+ of Psi at p with G+ of phi at h(p) and with G+ of Phi at theta(p).

    Raises:
        BranchUndefinedError: z2 = 0 with fractional l
    """
    psi_est = green_plus(params, p, target_error)
    henon_est = green_plus_henon(params, h_map(params, p), target_error)
    phi_est = green_plus_phi(params, theta(params, p), target_error)
    diff_h = abs(psi_est.value - henon_est.value)
    tol_h = psi_est.error_bound + henon_est.error_bound
    diff_theta = abs(psi_est.value - phi_est.value)
    tol_theta = psi_est.error_bound + phi_est.error_bound
    return CheckReport(
        name="green-semiconjugacy",
        passed=diff_h <= tol_h and diff_theta <= tol_theta,
        anchor="G_Psi = G_phi o h = G_Phi o theta",
        lhs=psi_est.value,
        rhs=henon_est.value,
        tolerance=tol_h,
        detail=f"diff_h={diff_h:.3e} diff_theta={diff_theta:.3e} tol={tol_h:.3e}",
        heuristic=any(e.stopped_early for e in (psi_est, henon_est, phi_est)),
        extra={"n_used": max(psi_est.n_used, henon_est.n_used, phi_est.n_used),
               "max_error_bound": max(psi_est.error_bound, henon_est.error_bound, phi_est.error_bound)},
    )


@dataclass(frozen=True)
class GrowthFit:
    c1: float
    l_tilde: float
    ceiling_slope: float
    ceiling_constant: float
    worst_index: int

    def a_priori_ceiling(self, log_norm: float) -> float:
        """ceiling_slope log+||p|| + ceiling_constant."""
        return self.ceiling_slope * max(0.0, log_norm) + self.ceiling_constant


def fit_growth_ceiling(params: Params, points: Sequence[Point3],
                       target_error: float = DEFAULT_TARGET_ERROR) -> GrowthFit:
    """
    Smallest C1 with G+(p) <= l_tilde log+||p|| + C1 over the sample.

    Starting the telescoping at n = 0 gives the a-priori ceiling
    G+ <= (1 + l) log+||p|| + ln3/(q - 1), reported as ceiling_slope and ceiling_constant.
    Since l_tilde >= 1 + l, C1 never exceeds ceiling_constant beyond the estimate error
    when |alpha| <= 1.
    """
    if not points:
        raise ValueError("fit_growth_ceiling needs at least one point")
    slack = np.array([
        green_plus(params, p, target_error).value - params.l_tilde * p.norm_log().log_plus()
        for p in points
    ])
    worst = int(np.argmax(slack))
    return GrowthFit(float(slack[worst]), params.l_tilde, 1.0 + float(params.l), LN3 / (params.q - 1), worst)


@dataclass(frozen=True)
class ContinuityScan:
    radii: List[float]
    values: List[float]
    bounds: List[float]

    @property
    def max_jump(self) -> float:
        if len(self.values) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values))))


def continuity_scan(params: Params, p: Sequence[complex], direction: Sequence[complex], radii: Sequence[float],
                    target_error: float = DEFAULT_TARGET_ERROR) -> ContinuityScan:
    """G+ along p + t * direction; a qualitative look at continuity, no exponent is fitted."""
    values, bounds = [], []
    for t in radii:
        point = Point3.from_complex(*(a + t * b for a, b in zip(p, direction)))
        est = green_plus(params, point, target_error)
        values.append(est.value)
        bounds.append(est.error_bound)
    return ContinuityScan(list(radii), values, bounds)
