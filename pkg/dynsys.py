"""
The maps of the skew-product family and their orbits.

Psi(z0, z1, z2) = (z0 + z1 + z0^q z2^d, z0, alpha z2) is a skew product over the
rotation z2 -> alpha z2. Its first coordinate along an orbit obeys

    P(n+1) = P(n) + P(n-1) + P(n)^q (alpha^n z2)^d,   P(0) = z0, P(-1) = z1,

and it is semi-conjugate, through theta = (z0 z2^l, z1 z2^l, z2), to
Phi = (alpha^l (z0 + z1 + z0^q), alpha^l z0, alpha z2) whose first two coordinates form
the Henon-type map phi. On the invariant hyperplane {z2 = 0} the dynamics is the linear
Fibonacci map.

Cocycle matrices act on row vectors: ``M . v := v M^T``.
"""

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import mpmath

from numcore import (ONE, ZERO, LogMagnitude, ScaledComplex, max_log_abs, sc_add, sc_div,
                     sc_log_abs, sc_mul, sc_pow_real, sc_powi, sc_sub)
from params import PHI, Params
from utils import CheckReport

logger = logging.getLogger(__name__)

SC_PHI_INV = ScaledComplex.from_complex(1.0 / PHI)

# ln of the largest magnitude converted back to native complex
NATIVE_LOG_LIMIT = 690.0


class BranchUndefinedError(ValueError):
    """Raised when z2 = 0 is fed to z2**l with fractional l."""


@dataclass(frozen=True)
class Point3:
    z0: ScaledComplex
    z1: ScaledComplex
    z2: ScaledComplex

    @classmethod
    def from_complex(cls, z0: complex, z1: complex, z2: complex) -> "Point3":
        return cls(ScaledComplex.from_complex(z0), ScaledComplex.from_complex(z1),
                   ScaledComplex.from_complex(z2))

    def to_complex(self) -> Tuple[complex, complex, complex]:
        return self.z0.to_complex(), self.z1.to_complex(), self.z2.to_complex()

    def norm_log(self) -> LogMagnitude:
        return max_log_abs(self.z0, self.z1, self.z2)


@dataclass(frozen=True)
class CocycleMatrix:
    m00: ScaledComplex
    m01: ScaledComplex
    m10: ScaledComplex
    m11: ScaledComplex

    def __matmul__(self, other: "CocycleMatrix") -> "CocycleMatrix":
        return CocycleMatrix(
            sc_add(sc_mul(self.m00, other.m00), sc_mul(self.m01, other.m10)),
            sc_add(sc_mul(self.m00, other.m01), sc_mul(self.m01, other.m11)),
            sc_add(sc_mul(self.m10, other.m00), sc_mul(self.m11, other.m10)),
            sc_add(sc_mul(self.m10, other.m01), sc_mul(self.m11, other.m11)),
        )

    def to_complex(self) -> Tuple[Tuple[complex, complex], Tuple[complex, complex]]:
        return ((self.m00.to_complex(), self.m01.to_complex()),
                (self.m10.to_complex(), self.m11.to_complex()))

    def norm_log(self) -> LogMagnitude:
        return max_log_abs(self.m00, self.m01, self.m10, self.m11)


IDENTITY = CocycleMatrix(ONE, ZERO, ZERO, ONE)


@dataclass(frozen=True)
class StopPolicy:
    """
    Early-termination rules for orbit loops.

    Args:
        log_escape: Stop once the log-magnitude exceeds this (natural-log units)
        eps_zero: Norm below which a step counts as contracted
        window: Consecutive contracted steps required to stop
        log_ceiling: Hard stop keeping exponents far from any limit
    """
    log_escape: float = 1e4
    eps_zero: float = 1e-12
    window: int = 10
    log_ceiling: float = 1e15

    @property
    def log_eps_zero(self) -> float:
        return math.log(self.eps_zero)


DEFAULT_STOP = StopPolicy()


@dataclass
class OrbitRecord:
    step: int
    point: Point3
    log_mag: LogMagnitude
    g_partial: Optional[complex] = None
    ratio: Optional[complex] = None
    stop_reason: Optional[str] = field(default=None, compare=False)


def _sc(params_value: complex) -> ScaledComplex:
    return ScaledComplex.from_complex(params_value)


def _z2_power_l(params: Params, z2: ScaledComplex) -> ScaledComplex:
    l = params.l
    if l.denominator == 1:
        return sc_powi(z2, l.numerator) if not z2.is_zero else ZERO
    if z2.is_zero:
        raise BranchUndefinedError(f"z2**{l} is undefined at z2 = 0 for fractional l")
    return sc_pow_real(z2, float(l))


def apply_psi(params: Params, p: Point3) -> Point3:
    nonlinear = sc_mul(sc_powi(p.z0, params.q), sc_powi(p.z2, params.d))
    return Point3(sc_add(sc_add(p.z0, p.z1), nonlinear), p.z0, sc_mul(_sc(params.alpha), p.z2))


def apply_psi_inv(params: Params, p: Point3) -> Point3:
    z2_prev = sc_div(p.z2, _sc(params.alpha))
    nonlinear = sc_mul(sc_powi(p.z1, params.q), sc_powi(z2_prev, params.d))
    return Point3(p.z1, sc_sub(sc_sub(p.z0, p.z1), nonlinear), z2_prev)


def apply_henon(params: Params, w: Tuple[ScaledComplex, ScaledComplex]) -> Tuple[ScaledComplex, ScaledComplex]:
    w0, w1 = w
    a_l = _sc(params.alpha_l)
    return (sc_mul(a_l, sc_add(sc_add(w0, w1), sc_powi(w0, params.q))), sc_mul(a_l, w0))


def apply_phi(params: Params, p: Point3) -> Point3:
    w0, w1 = apply_henon(params, (p.z0, p.z1))
    return Point3(w0, w1, sc_mul(_sc(params.alpha), p.z2))


def theta(params: Params, p: Point3) -> Point3:
    t = _z2_power_l(params, p.z2)
    return Point3(sc_mul(p.z0, t), sc_mul(p.z1, t), p.z2)


def h_map(params: Params, p: Point3) -> Tuple[ScaledComplex, ScaledComplex]:
    image = theta(params, p)
    return image.z0, image.z1


def iterate_orbit(params: Params, p: Point3, stop_policy: StopPolicy = DEFAULT_STOP) -> Iterator[OrbitRecord]:
    """
    Yield the records of the forward orbit of p, starting at n = 0, until the stop
    policy fires. The caller bounds the number of steps.

    g_partial is g_n = phi z0 + z1 + z2^d sum_{j<=n} P(j)^q phi^-j alpha^(jd).
    """
    alpha_d = _sc(params.alpha_d)
    z2_d = sc_powi(p.z2, params.d) if not p.z2.is_zero else ZERO
    g = sc_add(sc_mul(ScaledComplex.from_complex(PHI), p.z0), p.z1)
    weight = ONE  # phi^-n alpha^(nd)
    step_weight = sc_mul(SC_PHI_INV, alpha_d)
    point = p
    contracted = 0
    n = 0
    while True:
        g = sc_add(g, sc_mul(z2_d, sc_mul(sc_powi(point.z0, params.q), weight)))
        log_mag = max_log_abs(point.z0, point.z1)
        ratio = None
        if not point.z1.is_zero:
            quotient = sc_div(point.z0, point.z1)
            if quotient.is_zero or sc_log_abs(quotient).value < NATIVE_LOG_LIMIT:
                ratio = quotient.to_complex()
        g_log = sc_log_abs(g)
        g_partial = g.to_complex() if g_log.neg_inf or g_log.value < NATIVE_LOG_LIMIT else None
        record = OrbitRecord(n, point, log_mag, g_partial, ratio)

        norm = point.norm_log()
        contracted = contracted + 1 if norm.neg_inf or norm.value < stop_policy.log_eps_zero else 0
        if not log_mag.neg_inf and log_mag.value > stop_policy.log_escape:
            record.stop_reason = "escape"
        elif not log_mag.neg_inf and log_mag.value > stop_policy.log_ceiling:
            record.stop_reason = "ceiling"
        elif contracted >= stop_policy.window:
            record.stop_reason = "contracted"
        yield record
        if record.stop_reason:
            logger.debug("Orbit stopped at n=%d (%s)", n, record.stop_reason)
            return

        point = apply_psi(params, point)
        weight = sc_mul(weight, step_weight)
        n += 1


def orbit(params: Params, p: Point3, max_steps: int, stop_policy: StopPolicy = DEFAULT_STOP) -> List[OrbitRecord]:
    """Records for n = 0..max_steps, fewer if the stop policy fires."""
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    records = []
    for record in iterate_orbit(params, p, stop_policy):
        records.append(record)
        if record.step >= max_steps:
            break
    return records


def orbit_exact(p0, p1, p2, alpha, q: int, d: int, n: int) -> List:
    """
    First components P(0..n) in exact arithmetic (ints, Fractions or any field type).
    """
    values = [p0]
    prev, cur = p1, p0
    base = p2
    for _ in range(n):
        prev, cur = cur, cur + prev + cur ** q * base ** d
        base = base * alpha
        values.append(cur)
    return values


def orbit_mp(params: Params, p: Sequence[complex], n: int, prec: int = 256) -> List[mpmath.mpc]:
    """Points Psi^k(p) for k = 0..n in mpmath with ``prec`` bits; used as an oracle."""
    with mpmath.workprec(prec):
        alpha = mpmath.mpc(params.alpha)
        z0, z1, z2 = (x if isinstance(x, mpmath.mpc) else mpmath.mpc(x) for x in p)
        points = [(z0, z1, z2)]
        for _ in range(n):
            z0, z1, z2 = z0 + z1 + z0 ** params.q * z2 ** params.d, z0, alpha * z2
            points.append((z0, z1, z2))
    return points


def fib(n: int) -> int:
    """F(n) by fast doubling; F(0) = 0, F(1) = 1."""
    if n < 0:
        raise ValueError(f"fib needs n >= 0, got {n}")

    def _pair(k: int) -> Tuple[int, int]:
        if k == 0:
            return 0, 1
        a, b = _pair(k >> 1)
        c = a * (2 * b - a)
        e = a * a + b * b
        return (e, c + e) if k & 1 else (c, e)

    return _pair(n)[0]


def _fib_signed(n: int) -> int:
    # F(-1) = 1 keeps the closed forms valid at n = 0
    return 1 if n == -1 else fib(n)


def restricted_psi_n(n: int, z0, z1):
    """Psi^n on {z2 = 0}: (F(n+1) z0 + F(n) z1, F(n) z0 + F(n-1) z1)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return (fib(n + 1) * z0 + fib(n) * z1, fib(n) * z0 + _fib_signed(n - 1) * z1)


def restricted_psi_neg_n(n: int, z0, z1):
    """Psi^-n on {z2 = 0}: (-1)^n (F(n-1) z0 - F(n) z1, -F(n) z0 + F(n+1) z1)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    sign = -1 if n % 2 else 1
    return (sign * (_fib_signed(n - 1) * z0 - fib(n) * z1), sign * (-fib(n) * z0 + fib(n + 1) * z1))


def eval_cocycle(params: Params, p: Point3) -> CocycleMatrix:
    if p.z0.is_zero or p.z2.is_zero:
        corner = ONE
    else:
        corner = sc_add(ONE, sc_mul(sc_powi(p.z0, params.q - 1), sc_powi(p.z2, params.d)))
    return CocycleMatrix(corner, ONE, ONE, ZERO)


def cocycle_product(params: Params, p: Point3, n: int) -> CocycleMatrix:
    """A_n(p) = A(Psi^(n-1) p) ... A(p); identity for n = 0."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    product = IDENTITY
    point = p
    for _ in range(n):
        product = eval_cocycle(params, point) @ product
        point = apply_psi(params, point)
    return product


def apply_cocycle(m: CocycleMatrix, v: Tuple[ScaledComplex, ScaledComplex]) -> Tuple[ScaledComplex, ScaledComplex]:
    """Row vector v times m transposed, so (P(n+1), P(n)) = apply_cocycle(A(Psi^n p), (P(n), P(n-1)))."""
    v0, v1 = v
    return (sc_add(sc_mul(m.m00, v0), sc_mul(m.m01, v1)), sc_add(sc_mul(m.m10, v0), sc_mul(m.m11, v1)))


def cocycle_growth_rate(params: Params, p: Point3, n: int) -> float:
    """ln||A_n(p)|| / n; tends to ln(phi) along Fibonacci-speed orbits."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return cocycle_product(params, p, n).norm_log().to_float() / n


def _branch_factor(params: Params, left: complex, right: complex) -> complex:
    """Root of unity of order den(l) closest to left/right; 1 when l is integral."""
    order = params.l.denominator
    if order == 1 or right == 0 or left == 0:
        return 1.0 + 0j
    k = round(cmath.phase(left / right) * order / (2 * math.pi))
    return cmath.exp(2j * math.pi * k / order)


def check_conjugacy(params: Params, points: Sequence[Point3], tol: float = 1e-10) -> CheckReport:
    """
    theta o Psi against Phi o theta at each point, up to the branch of z2^l. Points on
    {z2 = 0} are skipped for fractional l.
    """
    worst = 0.0
    checked = 0
    for p in points:
        if p.z2.is_zero and not params.l_is_integral:
            continue
        left = list(theta(params, apply_psi(params, p)).to_complex())
        right = list(apply_phi(params, theta(params, p)).to_complex())
        omega = _branch_factor(params, left[0], right[0])
        scale = max(abs(left[0]), abs(left[1]), 1e-300)
        gap = max(abs(left[0] - omega * right[0]), abs(left[1] - omega * right[1])) / scale
        gap = max(gap, abs(left[2] - right[2]) / max(abs(left[2]), 1e-300))
        worst = max(worst, gap)
        checked += 1
    return CheckReport(
        name="conjugacy",
        passed=checked > 0 and worst <= tol,
        anchor="theta o Psi = Phi o theta",
        tolerance=tol,
        detail=f"points={checked} max_rel={worst:.3e}",
        extra={"points": checked, "max_rel": worst},
    )


def check_fibonacci_restriction(pairs: Sequence[Tuple[int, int]], n_max: int = 30,
                                float_tol: float = 1e-12) -> CheckReport:
    """
    Orbits on {z2 = 0} with integer starts against the Fibonacci matrix closed forms, in both
    time directions. The integer recurrence must match exactly; the extended-exponent orbit
    must agree to ``float_tol`` relative error.
    """
    mismatches = []
    worst = 0.0
    params = Params(2, 1, 1.0)
    for z0, z1 in pairs:
        exact = orbit_exact(z0, z1, 0, 1, 2, 1, n_max)
        records = orbit(params, Point3.from_complex(z0, z1, 0), n_max, StopPolicy(window=n_max + 2))
        back = (z0, z1)
        for n in range(1, n_max + 1):
            forward = restricted_psi_n(n, z0, z1)
            if (exact[n], exact[n - 1]) != forward:
                mismatches.append((z0, z1, n, "forward"))
            if n < len(records):
                got = records[n].point.to_complex()[:2]
                scale = max(abs(forward[0]), abs(forward[1]), 1)
                worst = max(worst, abs(got[0] - forward[0]) / scale, abs(got[1] - forward[1]) / scale)
            else:
                mismatches.append((z0, z1, n, "truncated"))
            back = (back[1], back[0] - back[1])
            if back != restricted_psi_neg_n(n, z0, z1):
                mismatches.append((z0, z1, n, "backward"))
    if worst > float_tol:
        mismatches.append(("float", worst))
    return CheckReport(
        name="fibonacci",
        passed=not mismatches,
        anchor="Psi^n = [[F(n+1), F(n)], [F(n), F(n-1)]] on z2 = 0",
        tolerance=float_tol,
        detail=f"pairs={len(pairs)} n<={n_max} mismatches={len(mismatches)} float_rel={worst:.3e}",
        extra={"mismatches": mismatches[:10], "float_rel": worst},
    )
