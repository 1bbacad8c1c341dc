"""
Series, stable manifold and point classification.

g(z) = phi z0 + z1 + z2^d sum_j P(j)(z)^q phi^-j alpha^(jd) vanishes exactly on the stable
manifold of 0 when |alpha| is sub-critical, and its partial sums satisfy

    P(n+1) + P(n) / phi = phi^n g_n.

Points are classified by how P(n) grows: convergence to the fixed point, escape at the
Fibonacci rate phi^n, or escape at the maximal rate (G+ > 0).
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Iterator, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import pandas as pd

import data_processor
from dynsys import DEFAULT_STOP, SC_PHI_INV, OrbitRecord, Point3, StopPolicy, apply_psi, iterate_orbit, orbit_mp
from green import DEFAULT_TARGET_ERROR, LN3, GreenEstimate, green_minus, green_plus
from numcore import ONE, ZERO, ScaledComplex, sc_add, sc_log_abs, sc_mul, sc_powi, sc_sub
from params import LN_PHI, PHI, Params, require_contracting, require_subcritical, require_unimodular
from utils import CheckReport, make_rng, parallel_map

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 2000
DEFAULT_MAX_TERMS = 500

SERIES_REL_TOL = 1e-16
SERIES_CONVERGED_RUN = 5
SERIES_DIVERGENCE = 1e6
LEMMA_REL_TOL = 1e-8

FIB_WINDOW = 20
FIB_RATIO_TOL = 1e-8
FIB_CAUCHY_TOL = 1e-10
# agreement required between the limit at detection and at twice that step
FIB_DOUBLING_TOL = 1e-8
# |limit| below this times max(|p0|, |p1|) is rounding noise on the stable manifold
ZERO_LIMIT_TOL = 1e-9

G_ZERO_TOL = 1e-8
DECAY_NOISE_FLOOR = 1e-13
TAIL_CUTOFF = 1e-20

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
NEWTON_PREC = 256
VALIDATION_STEPS = 60
VALIDATION_NORM = 1e-6

SC_PHI = ScaledComplex.from_complex(PHI)


class InvalidRegionError(ValueError):
    """Raised when a RegionSpec violates its admissibility condition."""


class NoConvergenceError(RuntimeError):
    """Raised when Newton iteration or its orbit validation fails."""


class Verdict(str, Enum):
    CONVERGES = "ConvergesToFixedPoint"
    FIBONACCI = "FibonacciEscape"
    MAXIMAL = "MaximalEscape"
    UNDETERMINED = "Undetermined"


VERDICT_ORDER = [Verdict.CONVERGES, Verdict.FIBONACCI, Verdict.MAXIMAL, Verdict.UNDETERMINED]


# --- series ----------------------------------------------------------------

@dataclass(frozen=True)
class SeriesState:
    n: int
    g_n: complex
    term_n: complex
    tail_bound: Optional[float] = None


@dataclass
class SeriesResult:
    value: Optional[complex]
    status: str  # converged | diverged | unknown
    states: List[SeriesState] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _series_terms(params: Params, p: Point3) -> Iterator[ScaledComplex]:
    """Yields P(j)^q phi^-j alpha^(jd) for j = 0, 1, ..."""
    step_weight = sc_mul(SC_PHI_INV, ScaledComplex.from_complex(params.alpha_d))
    weight = ONE
    point = p
    while True:
        yield sc_mul(sc_powi(point.z0, params.q), weight)
        point = apply_psi(params, point)
        weight = sc_mul(weight, step_weight)


def _base_value(p: Point3) -> complex:
    return PHI * p.z0.to_complex() + p.z1.to_complex()


def series_g(params: Params, p: Point3, max_terms: int = DEFAULT_MAX_TERMS) -> SeriesResult:
    if max_terms < 1:
        raise ValueError(f"max_terms must be >= 1, got {max_terms}")
    base = _base_value(p)
    if p.z2.is_zero:
        return SeriesResult(base, "converged", [SeriesState(0, base, 0j, 0.0)])

    z2_d = sc_powi(p.z2, params.d).to_complex()
    g = base
    reference = max(abs(PHI * p.z0.to_complex()), abs(p.z1.to_complex()))
    states: List[SeriesState] = []
    small_run = 0
    previous_term = None
    log_divergence = math.log(SERIES_DIVERGENCE)
    for n, term_sc in zip(range(max_terms), _series_terms(params, p)):
        lm = sc_log_abs(term_sc)
        if not lm.neg_inf and lm.value > log_divergence:
            logger.debug("Series diverged at n=%d", n)
            return SeriesResult(None, "diverged", states)
        term = term_sc.to_complex()
        increment = z2_d * term
        g += increment
        if n == 0:
            reference = max(reference, abs(increment))
        tail = None
        if previous_term is not None and 0 < abs(term) < abs(previous_term):
            rho = abs(term) / abs(previous_term)
            tail = abs(increment) * rho / (1.0 - rho)
        elif term == 0:
            tail = 0.0
        states.append(SeriesState(n, g, term, tail))
        previous_term = term
        small_run = small_run + 1 if abs(increment) <= SERIES_REL_TOL * max(abs(g), reference) else 0
        if small_run >= SERIES_CONVERGED_RUN:
            return SeriesResult(g, "converged", states)
    return SeriesResult(g, "unknown", states)


def _relative_gap(a: ScaledComplex, b: ScaledComplex) -> float:
    diff = sc_log_abs(sc_sub(a, b))
    if diff.neg_inf:
        return 0.0
    scale = max(sc_log_abs(a).to_float(), sc_log_abs(b).to_float())
    return math.exp(diff.value - scale)


def check_lemma_identity(params: Params, p: Point3, n: int) -> CheckReport:
    """
    P(n+1) + P(n)/phi against phi^n (phi p0 + p1 + p2^d sum_{j<=n} P(j)^q phi^-j alpha^(jd)),
    the left side from the recurrence, the right side with independently formed powers.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    firsts = [p.z0]
    point = p
    for _ in range(n + 1):
        point = apply_psi(params, point)
        firsts.append(point.z0)
    left = sc_add(firsts[n + 1], sc_mul(SC_PHI_INV, firsts[n]))

    alpha = ScaledComplex.from_complex(params.alpha)
    total = ZERO
    for j in range(n + 1):
        weight = ONE if j == 0 else sc_mul(sc_powi(SC_PHI_INV, j), sc_powi(alpha, j * params.d))
        total = sc_add(total, sc_mul(sc_powi(firsts[j], params.q), weight))
    z2_d = sc_powi(p.z2, params.d) if not p.z2.is_zero else ZERO
    inner = sc_add(sc_add(sc_mul(SC_PHI, p.z0), p.z1), sc_mul(z2_d, total))
    right = inner if n == 0 else sc_mul(sc_powi(SC_PHI, n), inner)

    gap = _relative_gap(left, right)
    return CheckReport(
        name="lemma-identity",
        passed=gap <= LEMMA_REL_TOL,
        anchor="P(n+1) + P(n)/phi = phi^n g_n",
        lhs=left,
        rhs=right,
        tolerance=LEMMA_REL_TOL,
        detail=f"n={n} rel={gap:.3e}",
    )


# --- orbit scanning --------------------------------------------------------

class _FibonacciTracker:
    """Watches P(n+1)/P(n) -> phi and P(n) phi^-n for Cauchy convergence."""

    def __init__(self, window: int = FIB_WINDOW):
        self.window = window
        self.ratio_ok = deque(maxlen=window)
        self.limits = deque(maxlen=window + 1)
        self.phi_inv_power = ONE

    def update(self, record: OrbitRecord) -> Optional[complex]:
        limit_sc = sc_mul(record.point.z0, self.phi_inv_power)
        self.phi_inv_power = sc_mul(self.phi_inv_power, SC_PHI_INV)
        lm = sc_log_abs(limit_sc)
        if not lm.neg_inf and lm.value > 690.0:
            self.ratio_ok.clear()
            self.limits.clear()
            return None
        limit = limit_sc.to_complex()
        ratio = record.ratio
        self.ratio_ok.append(ratio is not None and abs(ratio - PHI) <= FIB_RATIO_TOL)
        self.limits.append(limit)
        if len(self.ratio_ok) < self.window or not all(self.ratio_ok):
            return None
        scale = max(abs(limit), 1e-300)
        if all(abs(limit - other) <= FIB_CAUCHY_TOL * scale for other in self.limits):
            return limit
        return None


@dataclass
class OrbitScan:
    outcome: str  # contracted | escaped | fibonacci | exhausted
    n: int
    limit: Optional[complex] = None
    max_log_mag: float = -math.inf

    def limit_vanishes(self, p: Point3) -> bool:
        scale = max(abs(p.z0.to_complex()), abs(p.z1.to_complex()))
        return self.limit is not None and abs(self.limit) <= ZERO_LIMIT_TOL * scale


def scan_orbit(params: Params, p: Point3, budget: int = DEFAULT_BUDGET,
               stop_policy: StopPolicy = DEFAULT_STOP) -> OrbitScan:
    """
    Follow the orbit until it contracts, escapes, or shows a Fibonacci limit that agrees
    with the limit seen at twice the detection step.
    """
    tracker = _FibonacciTracker()
    candidate: Optional[Tuple[int, complex]] = None
    max_log = -math.inf
    n = 0
    for record in iterate_orbit(params, p, stop_policy):
        n = record.step
        max_log = max(max_log, record.log_mag.to_float())
        if record.stop_reason == "contracted":
            return OrbitScan("contracted", n, max_log_mag=max_log)
        if record.stop_reason in ("escape", "ceiling"):
            return OrbitScan("escaped", n, max_log_mag=max_log)
        limit = tracker.update(record)
        if candidate is None:
            if limit is not None:
                candidate = (n, limit)
        elif n >= 2 * candidate[0]:
            first = candidate[1]
            if limit is not None and abs(limit - first) <= FIB_DOUBLING_TOL * max(abs(first), 1e-300):
                return OrbitScan("fibonacci", n, limit, max_log)
            candidate = (n, limit) if limit is not None else None
        if candidate is None and n >= budget:
            break
        if n >= 2 * budget:
            break
    return OrbitScan("exhausted", n, max_log_mag=max_log)


# --- classification --------------------------------------------------------

@dataclass
class ClassificationEvidence:
    n_decision: int
    budget: int
    fibonacci_limit: Optional[complex] = None
    green: Optional[GreenEstimate] = None
    g_value: Optional[complex] = None
    note: str = ""


@dataclass
class Classification:
    verdict: Verdict
    evidence: ClassificationEvidence

    def as_dict(self) -> dict:
        ev = self.evidence
        return {
            "verdict": self.verdict.value,
            "evidence": {
                "n_decision": ev.n_decision,
                "budget": ev.budget,
                "fibonacci_limit": None if ev.fibonacci_limit is None
                else [ev.fibonacci_limit.real, ev.fibonacci_limit.imag],
                "green": None if ev.green is None else ev.green.as_dict(),
                "g_value": None if ev.g_value is None else [ev.g_value.real, ev.g_value.imag],
                "note": ev.note,
            },
        }


def classify(params: Params, p: Point3, budget: int = DEFAULT_BUDGET,
             target_error: float = DEFAULT_TARGET_ERROR, stop_policy: StopPolicy = DEFAULT_STOP,
             max_terms: int = DEFAULT_MAX_TERMS) -> Classification:
    scan = scan_orbit(params, p, budget, stop_policy)
    series = series_g(params, p, max_terms)
    g_value = series.value if series.converged else None
    evidence = ClassificationEvidence(scan.n, budget, g_value=g_value)

    if scan.outcome == "contracted":
        verdict = Verdict.CONVERGES
        evidence.note = "orbit contracted below eps_zero"
    elif scan.outcome == "fibonacci" and scan.limit_vanishes(p):
        verdict = Verdict.CONVERGES
        evidence.note = "Fibonacci limit vanishes; only rounding drift leaves the stable manifold"
    elif scan.outcome == "fibonacci":
        verdict = Verdict.FIBONACCI
        evidence.fibonacci_limit = scan.limit
    elif scan.outcome == "escaped":
        estimate = green_plus(params, p, target_error)
        evidence.green = estimate
        verdict = Verdict.MAXIMAL if estimate.escaped else Verdict.UNDETERMINED
    else:
        verdict = Verdict.UNDETERMINED
        evidence.note = f"no decision within budget {budget}"
    logger.debug("classify -> %s at n=%d", verdict.value, scan.n)
    return Classification(verdict, evidence)


def fibonacci_limit(params: Params, p: Point3, budget: int = DEFAULT_BUDGET) -> Optional[complex]:
    """lim P(n) phi^-n when it exists and is nonzero, else None."""
    scan = scan_orbit(params, p, budget)
    if scan.outcome != "fibonacci" or scan.limit_vanishes(p):
        return None
    return scan.limit


# --- stable manifold -------------------------------------------------------

@dataclass
class StableVerdict:
    verdict: str
    g_value: Optional[complex]
    decay_slope: Optional[float]
    orbit_agrees: Optional[bool]
    note: str = ""


def _tail_decay(params: Params, p: Point3, max_terms: int) -> Tuple[Optional[complex], Optional[float], bool]:
    """(g, slope of ln|r_j| + j ln(phi), diverged)."""
    terms = []
    largest = 0.0
    log_divergence = math.log(SERIES_DIVERGENCE)
    for _, term_sc in zip(range(max_terms), _series_terms(params, p)):
        lm = sc_log_abs(term_sc)
        if not lm.neg_inf and lm.value > log_divergence:
            return None, None, True
        term = term_sc.to_complex()
        terms.append(term)
        largest = max(largest, abs(term))
        # the remaining tail is far below double resolution
        if abs(term) <= TAIL_CUTOFF * largest:
            break
    terms = np.array(terms, dtype=complex)
    z2_d = sc_powi(p.z2, params.d).to_complex() if not p.z2.is_zero else 0j
    g = _base_value(p) + z2_d * terms.sum()

    tails = np.abs(np.cumsum(terms[::-1])[::-1])
    # r_j excludes term j itself
    tails = np.append(tails[1:], 0.0)
    if not np.any(tails > 0):
        return g, None, False
    keep = tails > DECAY_NOISE_FLOOR * tails.max()
    idx = np.nonzero(keep)[0]
    if idx.size < 3:
        return g, None, False
    y = np.log(tails[idx]) + idx * LN_PHI
    slope = float(np.polyfit(idx.astype(float), y, 1)[0])
    return g, slope, False


def _g_vanishes(p: Point3, g: complex, params: Params) -> bool:
    scale = max(abs(PHI * p.z0.to_complex()), abs(p.z1.to_complex()), abs(p.z2.to_complex()) ** params.d, 1e-300)
    return abs(g) <= G_ZERO_TOL * scale


def stable_criterion(params: Params, p: Point3, max_terms: int = DEFAULT_MAX_TERMS,
                     budget: int = DEFAULT_BUDGET) -> StableVerdict:
    """
    Membership in W^s(0) from two independent signals: the series (g(p) = 0 with a
    summable tail sum |r_j| phi^j) and the orbit itself.
    """
    require_contracting(params)
    g, slope, diverged = _tail_decay(params, p, max_terms)
    series_in = not diverged and _g_vanishes(p, g, params) and (slope is None or slope < 0)

    scan = scan_orbit(params, p, budget)
    if scan.outcome == "contracted" or (scan.outcome == "fibonacci" and scan.limit_vanishes(p)):
        orbit_in: Optional[bool] = True
    elif scan.outcome in ("escaped", "fibonacci"):
        orbit_in = False
    else:
        orbit_in = None

    if series_in and orbit_in is True:
        verdict = "in_Ws"
    elif not series_in and orbit_in is False:
        verdict = "not_in_Ws"
    else:
        verdict = "undetermined"
    return StableVerdict(verdict, g, slope, orbit_in is series_in if orbit_in is not None else None,
                         note=f"orbit scan: {scan.outcome} at n={scan.n}")


def bounded_criterion(params: Params, p: Point3, max_terms: int = DEFAULT_MAX_TERMS,
                      budget: int = DEFAULT_BUDGET) -> StableVerdict:
    """
    For |alpha| = 1: a point of Z whose tails r_j phi^j are summable has a bounded orbit.
    Meant for explicitly constructed points of Z.
    """
    require_unimodular(params)
    g, slope, diverged = _tail_decay(params, p, max_terms)
    series_in = not diverged and _g_vanishes(p, g, params) and (slope is None or slope < 0)

    scan = scan_orbit(params, p, budget)
    start = max(p.norm_log().to_float(), 0.0)
    if scan.outcome == "fibonacci" and scan.limit_vanishes(p):
        bounded: Optional[bool] = True
    elif scan.outcome in ("escaped", "fibonacci"):
        bounded = False
    elif scan.outcome == "exhausted" and scan.max_log_mag <= start + math.log(10.0):
        bounded = True
    else:
        bounded = None

    if series_in and bounded is True:
        verdict = "bounded"
    elif not series_in and bounded is False:
        verdict = "unbounded"
    else:
        verdict = "undetermined"
    return StableVerdict(verdict, g, slope, bounded is series_in if bounded is not None else None,
                         note=f"orbit scan: {scan.outcome} at n={scan.n}")


def classify_bidirectional(params: Params, p: Point3, target_error: float = DEFAULT_TARGET_ERROR,
                           budget: int = DEFAULT_BUDGET) -> str:
    """
    For |alpha| = 1 every point has a bounded orbit, lies on {z2 = 0} minus the origin,
    or has G+ > 0 or G- > 0.
    """
    require_unimodular(params)
    coords = p.to_complex()
    if all(c == 0 for c in coords):
        return "bounded"
    if p.z2.is_zero:
        return "invariant_hyperplane"
    if green_plus(params, p, target_error).escaped or green_minus(params, p, target_error).escaped:
        return "escapes"
    scan = scan_orbit(params, p, budget)
    if scan.outcome == "fibonacci" and scan.limit_vanishes(p):
        return "bounded"
    if scan.outcome == "exhausted" and scan.max_log_mag <= max(p.norm_log().to_float(), 0.0) + math.log(10.0):
        return "bounded"
    return "undetermined"


@dataclass
class StableRoot:
    p0: complex
    p0_exact: mpmath.mpc
    iterations: int
    residual: float
    validation_norm: float
    truncation: int


def default_truncation(params: Params) -> int:
    """Smallest N with |alpha|^(Nd) phi^-N < 1e-30."""
    rate = LN_PHI - params.d * math.log(params.modulus)
    return max(1, math.floor(30.0 * math.log(10.0) / rate) + 1)


def _g_truncated(params: Params, p0, p1, p2, n_terms: int, phi, alpha):
    """g_N and dg_N/dp0 by forward-mode differentiation of the recurrence."""
    q, d = params.q, params.d
    prev, cur = p1, p0
    d_prev, d_cur = mpmath.mpc(0), mpmath.mpc(1)
    z = p2
    w = mpmath.mpc(1)
    step = alpha ** d / phi
    total = mpmath.mpc(0)
    d_total = mpmath.mpc(0)
    for j in range(n_terms + 1):
        power = cur ** (q - 1)
        total += cur * power * w
        d_total += q * power * d_cur * w
        if j < n_terms:
            zd = z ** d
            prev, cur, d_prev, d_cur = cur, cur + prev + cur * power * zd, d_cur, d_cur + d_prev + q * power * d_cur * zd
            z *= alpha
            w *= step
    p2d = p2 ** d
    return phi * p0 + p1 + p2d * total, phi + p2d * d_total


def stable_root(params: Params, p1: complex, p2: complex, truncation: Optional[int] = None,
                tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER,
                validation_steps: int = VALIDATION_STEPS) -> StableRoot:
    """
    The p0 with (p0, p1, p2) on the stable manifold: Newton on the truncated g_N from the
    seed -p1/phi, carried out at 256 bits and validated by the 256-bit orbit.

    Raises:
        ParameterDomainError: |alpha| not sub-critical
        NoConvergenceError: Newton fails or the validation orbit does not contract
    """
    require_subcritical(params)
    n_terms = truncation if truncation is not None else default_truncation(params)
    with mpmath.workprec(NEWTON_PREC):
        phi = (1 + mpmath.sqrt(5)) / 2
        alpha = mpmath.mpc(params.alpha)
        m1, m2 = mpmath.mpc(p1), mpmath.mpc(p2)
        root = -m1 / phi
        iterations = 0
        if p2 != 0:
            converged_at = None
            for iterations in range(1, max_iter + 1):
                g, dg = _g_truncated(params, root, m1, m2, n_terms, phi, alpha)
                if dg == 0 or not mpmath.isfinite(g):
                    raise NoConvergenceError(f"Newton breakdown at iteration {iterations}")
                delta = g / dg
                root -= delta
                if converged_at is None and abs(delta) <= tol * max(1, abs(root)):
                    converged_at = iterations
                # two extra steps polish the root to working precision
                if converged_at is not None and iterations >= converged_at + 2:
                    break
            if converged_at is None:
                raise NoConvergenceError(f"Newton did not converge in {max_iter} iterations")
        residual = float(abs(_g_truncated(params, root, m1, m2, n_terms, phi, alpha)[0]))

    final = orbit_mp(params, (root, mpmath.mpc(p1), mpmath.mpc(p2)), validation_steps, NEWTON_PREC)[-1]
    norm = float(max(abs(c) for c in final))
    if not norm < VALIDATION_NORM:
        raise NoConvergenceError(f"Validation orbit norm {norm:.3e} after {validation_steps} steps")
    p0 = complex(root) if p2 != 0 else -complex(p1) / PHI
    logger.debug("stable_root p1=%s p2=%s -> p0=%s in %d iterations", p1, p2, p0, iterations)
    return StableRoot(p0, root, iterations, residual, norm, n_terms)


# --- regions -----------------------------------------------------------------

class Region(str, Enum):
    OMEGA = "Omega"
    OMEGA_PRIME = "OmegaPrime"


@dataclass(frozen=True)
class RegionSpec:
    region: Region
    M: Optional[int] = None
    epsilon: Optional[float] = None

    def resolved(self, params: Params) -> "RegionSpec":
        """Fill defaults from params and enforce the admissibility condition."""
        if self.region == Region.OMEGA:
            m = params.min_escape_exponent if self.M is None else self.M
            if m < 0 or not m * (params.q - 1) + params.d * params.gamma > 0:
                raise InvalidRegionError(f"M={m} violates M(q-1) + d*gamma > 0 for |alpha|={params.modulus}")
            return RegionSpec(self.region, m, None)
        eps = params.default_epsilon if self.epsilon is None else self.epsilon
        if eps is None or eps <= 0:
            raise InvalidRegionError(f"No admissible epsilon for |alpha|={params.modulus}")
        if not ((1 + eps) * PHI) ** params.q * params.modulus ** params.d < PHI:
            raise InvalidRegionError(f"epsilon={eps} violates ((1+eps) phi)^q |alpha|^d < phi")
        return RegionSpec(self.region, None, eps)


def region_test(params: Params, p: Point3, spec: RegionSpec) -> bool:
    spec = spec.resolved(params)
    l0 = sc_log_abs(p.z0).to_float()
    l1 = sc_log_abs(p.z1).to_float()
    l2 = sc_log_abs(p.z2).to_float()
    if spec.region == Region.OMEGA:
        if not l0 > l1 > -math.inf or l2 == -math.inf:
            return False
        return (params.q - 1) * l1 + params.d * l2 > math.log(2 + PHI ** spec.M)
    total = abs(p.z0.to_complex()) + abs(p.z1.to_complex())
    if total == 0 or l2 == -math.inf:
        return True
    return (params.q - 1) * math.log(total) + params.d * l2 < math.log(PHI * spec.epsilon)


def sink_radius(params: Params, epsilon: Optional[float] = None) -> float:
    """delta = (phi eps)^(1/(q-1)); h maps Omega' onto the polydisc of this radius."""
    eps = RegionSpec(Region.OMEGA_PRIME, epsilon=epsilon).resolved(params).epsilon
    return (PHI * eps) ** (1.0 / (params.q - 1))


def _phases(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(1j * rng.uniform(-np.pi, np.pi, n))


def sample_omega(params: Params, n: int, seed: Optional[int] = 0, M: Optional[int] = None) -> List[Point3]:
    spec = RegionSpec(Region.OMEGA, M=M).resolved(params)
    rng = make_rng(seed)
    threshold = 2 + PHI ** spec.M
    r1 = rng.uniform(1.0, 3.0, n)
    r0 = r1 * rng.uniform(1.1, 3.0, n)
    r2 = (threshold * rng.uniform(1.2, 3.0, n) / r1 ** (params.q - 1)) ** (1.0 / params.d)
    z0, z1, z2 = r0 * _phases(rng, n), r1 * _phases(rng, n), r2 * _phases(rng, n)
    return [Point3.from_complex(complex(a), complex(b), complex(c)) for a, b, c in zip(z0, z1, z2)]


def sample_omega_prime(params: Params, n: int, seed: Optional[int] = 0,
                       epsilon: Optional[float] = None) -> List[Point3]:
    """Points of Omega' off {z2 = 0}."""
    spec = RegionSpec(Region.OMEGA_PRIME, epsilon=epsilon).resolved(params)
    rng = make_rng(seed)
    s = rng.uniform(0.05, 1.0, n)
    t = rng.uniform(0.1, 0.9, n)
    cap = PHI * spec.epsilon / s ** (params.q - 1)
    r2 = (cap * rng.uniform(0.2, 0.9, n)) ** (1.0 / params.d)
    z0 = t * s * _phases(rng, n)
    z1 = (1 - t) * s * _phases(rng, n)
    z2 = r2 * _phases(rng, n)
    return [Point3.from_complex(complex(a), complex(b), complex(c)) for a, b, c in zip(z0, z1, z2)]


def sample_box(n: int, seed: Optional[int] = 0, radius: float = 1.0) -> List[Point3]:
    """Real and imaginary parts uniform in [-radius, radius]."""
    rng = make_rng(seed)
    parts = rng.uniform(-radius, radius, (n, 6))
    return [Point3.from_complex(complex(r[0], r[1]), complex(r[2], r[3]), complex(r[4], r[5])) for r in parts]


def sample_fibres(n: int, seed: Optional[int] = 0, p1_radius: float = 1.0,
                  p2_radius: float = 0.5) -> List[Tuple[complex, complex]]:
    """(p1, p2) uniform in the product of the closed discs of the given radii."""
    rng = make_rng(seed)
    radii = np.sqrt(rng.uniform(0.0, 1.0, (n, 2))) * np.array([p1_radius, p2_radius])
    values = radii * _phases(rng, 2 * n).reshape(n, 2)
    return [(complex(a), complex(b)) for a, b in values]


# --- maximal speed -----------------------------------------------------------

@dataclass
class SpeedCertificate:
    monotone: bool
    superpolynomial: bool
    recursive_bound: bool
    worst_bound_slack: float
    eta: float
    eta_from: int
    log_ratio: float
    ratio_converged: bool
    green: GreenEstimate

    @property
    def passed(self) -> bool:
        return (self.monotone and self.superpolynomial and self.recursive_bound and self.eta > 1.0
                and self.ratio_converged and self.green.escaped)

    def as_dict(self) -> dict:
        return {
            "monotone": self.monotone, "superpolynomial": self.superpolynomial,
            "recursive_bound": self.recursive_bound, "worst_bound_slack": self.worst_bound_slack,
            "eta": self.eta, "eta_from": self.eta_from, "log_ratio": self.log_ratio,
            "ratio_converged": self.ratio_converged, "green_plus": self.green.as_dict(), "passed": self.passed,
        }


def speed_certificate(params: Params, p: Point3, n: int = 25, M: Optional[int] = None,
                      target_error: float = DEFAULT_TARGET_ERROR, ratio_tol: float = 1e-3) -> SpeedCertificate:
    """
    Maximal-speed evidence for a point of Omega, with x(n) = ln|P(n)|:

    - |P(n)| non-decreasing and |P(n)| >= |p1| phi^(Mn);
    - x(n+1) >= q x(n) + n d gamma ln(phi) + d ln|p2| - ln 3 at every step;
    - eta = exp(min x(k) / q^k over k >= eta_from) > 1, so |P(k)| >= eta^(q^k) on the run,
      eta_from being the first step with x(k) > 0;
    - x(n) / x(n-1) within ratio_tol of q.
    """
    m = RegionSpec(Region.OMEGA, M=M).resolved(params).M
    policy = StopPolicy(log_escape=math.inf)
    logs = [sc_log_abs(p.z1).to_float()]
    for record in iterate_orbit(params, p, policy):
        logs.append(sc_log_abs(record.point.z0).to_float())
        if record.step >= n or record.stop_reason:
            break
    firsts = np.array(logs[1:])
    monotone = bool(np.all(np.diff(logs) >= 0))
    steps = np.arange(firsts.size)
    superpolynomial = bool(np.all(firsts >= logs[0] + m * steps * LN_PHI - 1e-9))

    # |P(n)|^q |alpha^n p2|^d <= 3 |P(n+1)| once |P(n)| is non-decreasing
    log_p2 = sc_log_abs(p.z2).to_float()
    floor = (params.q * firsts[:-1] + steps[:-1] * params.d * math.log(params.modulus)
             + params.d * log_p2 - LN3)
    slack = firsts[1:] - floor
    tolerance = 1e-9 * np.maximum(1.0, np.abs(firsts[1:]))
    recursive_bound = bool(np.all(slack >= -tolerance)) if slack.size else False
    worst_slack = float(slack.min()) if slack.size else math.nan

    positive = np.nonzero(firsts > 0)[0]
    if positive.size:
        start = int(positive[0])
        eta = float(np.exp(np.min(firsts[start:] / float(params.q) ** steps[start:])))
    else:
        start, eta = -1, 1.0
    ratio = float(firsts[-1] / firsts[-2]) if firsts.size >= 2 and firsts[-2] > 0 else math.nan
    return SpeedCertificate(monotone, superpolynomial, recursive_bound, worst_slack, eta, start, ratio,
                            abs(ratio - params.q) <= ratio_tol, green_plus(params, p, target_error))


# --- phase transition --------------------------------------------------------

@dataclass
class SampleSpec:
    n_points: int
    seed: Optional[int] = 0
    epsilon: Optional[float] = None
    extra_points: Sequence[Tuple[complex, complex, complex]] = ()


@dataclass
class TransitionTable:
    rows: pd.DataFrame
    histogram: pd.DataFrame

    def fibonacci_rows(self, modulus: float):
        df = self.rows
        return df[(df["alpha_modulus"] == modulus) & (df["verdict"] == Verdict.FIBONACCI.value)]


def _sampling_params(params_family: Sequence[Params]) -> Params:
    """Largest sub-critical member; its Omega' lies inside those of the smaller moduli."""
    sub = [p for p in params_family if p.is_subcritical]
    if sub:
        return max(sub, key=lambda p: p.modulus)
    ref = params_family[0]
    return ref.with_modulus(0.9 * ref.critical_modulus)


def _classify_task(item, budget: int, target_error: float) -> dict:
    params, index, coords = item
    point = Point3.from_complex(*coords)
    result = classify(params, point, budget, target_error)
    return data_processor.classification_row(params, index, coords, result.as_dict())


def transition_points(params_family: Sequence[Params], sample_spec: SampleSpec) -> List[Tuple[complex, complex, complex]]:
    points: List[Tuple[complex, complex, complex]] = []
    if sample_spec.n_points > 0:
        sampling = _sampling_params(params_family)
        points = [pt.to_complex() for pt in
                  sample_omega_prime(sampling, sample_spec.n_points, sample_spec.seed, sample_spec.epsilon)]
    points.extend(tuple(complex(c) for c in extra) for extra in sample_spec.extra_points)
    return points


def phase_transition_probe(params_family: Sequence[Params], sample_spec: SampleSpec, workers: int = 1,
                           budget: int = DEFAULT_BUDGET,
                           target_error: float = DEFAULT_TARGET_ERROR) -> TransitionTable:
    """Classify the same sample under every member of the family; rows follow family order."""
    if not params_family:
        raise ValueError("phase_transition_probe needs at least one parameter set")
    points = transition_points(params_family, sample_spec)
    items = [(params, i, coords) for params in params_family for i, coords in enumerate(points)]
    rows = parallel_map(partial(_classify_task, budget=budget, target_error=target_error), items, workers)
    frame = data_processor.sweep_frame(rows)
    return TransitionTable(frame, data_processor.histogram_frame(frame, [p.modulus for p in params_family]))
