import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

PHI = (1.0 + math.sqrt(5.0)) / 2.0
PHI_CONJ = -1.0 / PHI
SQRT5 = math.sqrt(5.0)
LN_PHI = math.log(PHI)

# |alpha| = 1 is accepted within this slack
UNIT_TOL = 1e-12


class InvalidParamsError(ValueError):
    """Raised when (q, d, alpha) violate q >= 2, d >= 1, 0 < |alpha| <= 1."""


class ParameterDomainError(ValueError):
    """Raised when an operation is called outside the alpha range it is defined for."""


@dataclass(frozen=True)
class Params:
    """
    Parameters of the family Psi_alpha(z0, z1, z2) = (z0 + z1 + z0^q z2^d, z0, alpha z2).

    Args:
        q: Degree of the nonlinear term in z0, at least 2
        d: Degree in z2, at least 1
        alpha: Rotation/contraction factor of the base, 0 < |alpha| <= 1
    """
    q: int
    d: int
    alpha: complex

    def __post_init__(self):
        if not isinstance(self.q, int) or self.q < 2:
            raise InvalidParamsError(f"q must be an integer >= 2, got {self.q!r}")
        if not isinstance(self.d, int) or self.d < 1:
            raise InvalidParamsError(f"d must be an integer >= 1, got {self.d!r}")
        alpha = complex(self.alpha)
        if not (cmath.isfinite(alpha) and 0.0 < abs(alpha) <= 1.0 + UNIT_TOL):
            raise InvalidParamsError(f"alpha must satisfy 0 < |alpha| <= 1, got {alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def from_polar(cls, q: int, d: int, modulus: float, argument: float = 0.0) -> "Params":
        return cls(q, d, cmath.rect(modulus, argument))

    @property
    def l(self) -> Fraction:
        return Fraction(self.d, self.q - 1)

    @property
    def l_is_integral(self) -> bool:
        return self.l.denominator == 1

    @property
    def modulus(self) -> float:
        return abs(self.alpha)

    @property
    def is_unimodular(self) -> bool:
        return abs(self.modulus - 1.0) <= UNIT_TOL

    @property
    def critical_modulus(self) -> float:
        return PHI ** ((1 - self.q) / self.d)

    @property
    def is_subcritical(self) -> bool:
        return self.modulus < self.critical_modulus

    @property
    def gamma(self) -> float:
        """ln|alpha| / ln(phi)."""
        return math.log(self.modulus) / LN_PHI

    @property
    def alpha_l(self) -> complex:
        """alpha**l, exact integer power when (q-1) | d, principal branch otherwise."""
        if self.l_is_integral:
            return self.alpha ** int(self.l)
        return cmath.exp(float(self.l) * cmath.log(self.alpha))

    @property
    def alpha_d(self) -> complex:
        return self.alpha ** self.d

    @property
    def l_tilde(self) -> float:
        return 2.0 * max(float(self.l), 1.0)

    @property
    def henon_multiplier(self) -> float:
        """Modulus of the expanding eigenvalue of the Henon factor at 0."""
        return abs(self.alpha_l) * PHI

    @property
    def min_escape_exponent(self) -> int:
        """Smallest integer M >= 0 with M(q-1) + d*gamma > 0."""
        bound = -self.d * self.gamma / (self.q - 1)
        m = max(0, math.floor(bound) + 1)
        while m * (self.q - 1) + self.d * self.gamma <= 0:
            m += 1
        return m

    @property
    def default_epsilon(self) -> Optional[float]:
        """0.9 times the largest epsilon admissible for the Fibonacci region, None when none is."""
        base = (PHI / abs(self.alpha_d)) ** (1.0 / self.q) / PHI - 1.0
        if base <= 0:
            return None
        return 0.9 * base

    def with_modulus(self, modulus: float) -> "Params":
        """Same q, d and argument of alpha, different |alpha|."""
        return Params.from_polar(self.q, self.d, modulus, cmath.phase(self.alpha))

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "d": self.d,
            "alpha_re": self.alpha.real,
            "alpha_im": self.alpha.imag,
            "l": str(self.l),
            "critical_modulus": self.critical_modulus,
        }


def require_contracting(params: Params) -> None:
    if not params.modulus < 1.0 - UNIT_TOL:
        raise ParameterDomainError(f"Operation requires 0 < |alpha| < 1, got |alpha| = {params.modulus}")


def require_subcritical(params: Params) -> None:
    if not params.is_subcritical:
        raise ParameterDomainError(
            f"Operation requires |alpha| < {params.critical_modulus:.10f}, got {params.modulus}")


def require_unimodular(params: Params) -> None:
    if not params.is_unimodular:
        raise ParameterDomainError(f"Operation requires |alpha| = 1, got |alpha| = {params.modulus}")
