"""
Overflow-safe complex arithmetic.

A ScaledComplex stores ``mantissa * 2**exponent`` with ``1 <= |mantissa| < 2`` and an
unbounded Python integer exponent, so orbit values such as eta**(q**n) stay representable
long after a native double would overflow.
"""

import math
import cmath
import logging
from dataclasses import dataclass
from typing import Union

import mpmath

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

# Beyond this exponent gap the smaller addend is below one ulp of the larger.
ALIGN_CUTOFF = 64

Number = Union[int, float, complex]


def _ldexp_c(m: complex, k: int) -> complex:
    return complex(math.ldexp(m.real, k), math.ldexp(m.imag, k))


def _normalize(m: complex, e: int) -> "ScaledComplex":
    if m == 0:
        return ZERO
    mag = abs(m)
    if math.isinf(mag):
        # both components near the double ceiling
        m = _ldexp_c(m, -2)
        e += 2
        mag = abs(m)
    if not math.isfinite(mag):
        raise ValueError(f"Non-finite mantissa: {m!r}")
    _, k = math.frexp(mag)
    shift = k - 1
    if shift:
        m = _ldexp_c(m, -shift)
    return ScaledComplex(m, e + shift)


@dataclass(frozen=True, slots=True)
class ScaledComplex:
    mantissa: complex
    exponent: int

    @classmethod
    def from_complex(cls, c: Number) -> "ScaledComplex":
        return _normalize(complex(c), 0)

    @classmethod
    def from_log_polar(cls, log_modulus: float, argument: float) -> "ScaledComplex":
        """Build ``exp(log_modulus + i*argument)`` without overflowing."""
        k = math.floor(log_modulus / LN2)
        r = math.exp(log_modulus - k * LN2)
        return _normalize(cmath.rect(r, argument), k)

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0

    def to_complex(self) -> complex:
        """Convert to a native complex, saturating to inf and flushing to 0."""
        if self.is_zero:
            return 0j
        try:
            return _ldexp_c(self.mantissa, self.exponent)
        except OverflowError:
            logger.warning("ScaledComplex with exponent %d saturates to inf", self.exponent)
            re = math.copysign(math.inf, self.mantissa.real) if self.mantissa.real else 0.0
            im = math.copysign(math.inf, self.mantissa.imag) if self.mantissa.imag else 0.0
            return complex(re, im)

    def to_mpc(self) -> mpmath.mpc:
        """Exact conversion (the mantissa components are dyadic rationals)."""
        return mpmath.mpc(mpmath.ldexp(mpmath.mpf(self.mantissa.real), self.exponent),
                          mpmath.ldexp(mpmath.mpf(self.mantissa.imag), self.exponent))

    def arg(self) -> float:
        return cmath.phase(self.mantissa)

    def log_abs(self) -> "LogMagnitude":
        return sc_log_abs(self)

    def __add__(self, other):
        return sc_add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sc_sub(self, _coerce(other))

    def __rsub__(self, other):
        return sc_sub(_coerce(other), self)

    def __mul__(self, other):
        return sc_mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return sc_div(self, _coerce(other))

    def __rtruediv__(self, other):
        return sc_div(_coerce(other), self)

    def __neg__(self):
        return sc_neg(self)

    def __pow__(self, k: int):
        if k == 0:
            return ONE
        return sc_powi(self, k)


def _coerce(x) -> ScaledComplex:
    if isinstance(x, ScaledComplex):
        return x
    return ScaledComplex.from_complex(x)


ZERO = ScaledComplex(0j, 0)
ONE = ScaledComplex(1 + 0j, 0)


@dataclass(frozen=True, slots=True)
class LogMagnitude:
    """Natural log of a modulus; ``neg_inf`` marks the modulus 0."""
    value: float
    neg_inf: bool = False

    def to_float(self) -> float:
        return -math.inf if self.neg_inf else self.value

    def log_plus(self) -> float:
        return 0.0 if self.neg_inf else max(0.0, self.value)


NEG_INF = LogMagnitude(0.0, True)


def sc_add(x: ScaledComplex, y: ScaledComplex) -> ScaledComplex:
    if x.is_zero:
        return y
    if y.is_zero:
        return x
    if x.exponent < y.exponent:
        x, y = y, x
    diff = x.exponent - y.exponent
    if diff > ALIGN_CUTOFF:
        return x
    return _normalize(x.mantissa + _ldexp_c(y.mantissa, -diff), x.exponent)


def sc_neg(x: ScaledComplex) -> ScaledComplex:
    if x.is_zero:
        return x
    return ScaledComplex(-x.mantissa, x.exponent)


def sc_sub(x: ScaledComplex, y: ScaledComplex) -> ScaledComplex:
    return sc_add(x, sc_neg(y))


def sc_mul(x: ScaledComplex, y: ScaledComplex) -> ScaledComplex:
    if x.is_zero or y.is_zero:
        return ZERO
    return _normalize(x.mantissa * y.mantissa, x.exponent + y.exponent)


def sc_div(x: ScaledComplex, y: ScaledComplex) -> ScaledComplex:
    if y.is_zero:
        raise ZeroDivisionError("ScaledComplex division by zero")
    if x.is_zero:
        return ZERO
    return _normalize(x.mantissa / y.mantissa, x.exponent - y.exponent)


def sc_powi(x: ScaledComplex, k: int) -> ScaledComplex:
    """Binary exponentiation, renormalizing after every product."""
    if k < 1:
        raise ValueError(f"sc_powi needs k >= 1, got {k}")
    if x.is_zero:
        return ZERO
    result = ONE
    base = x
    while k:
        if k & 1:
            result = sc_mul(result, base)
        k >>= 1
        if k:
            base = sc_mul(base, base)
    return result


def sc_pow_real(x: ScaledComplex, r: float) -> ScaledComplex:
    """Principal branch of x**r. Raises ValueError for x = 0."""
    if x.is_zero:
        raise ValueError("Principal power of zero is undefined")
    log_mod = sc_log_abs(x).value
    return ScaledComplex.from_log_polar(r * log_mod, r * x.arg())


def sc_log_abs(x: ScaledComplex) -> LogMagnitude:
    if x.is_zero:
        return NEG_INF
    return LogMagnitude(math.log(abs(x.mantissa)) + x.exponent * LN2)


def max_log_abs(*values: ScaledComplex) -> LogMagnitude:
    """Log of the max-norm of a coordinate tuple."""
    best = NEG_INF
    for v in values:
        lm = sc_log_abs(v)
        if not lm.neg_inf and (best.neg_inf or lm.value > best.value):
            best = lm
    return best
