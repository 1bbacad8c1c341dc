"""
Exact sparse polynomial algebra for the algebraic side of the family.

A MultiPoly maps exponent vectors over the variables (z0, z1, z2, z3, a, b, eta, nu) to
Python integers. z3 homogenizes, a stands for alpha and b for alpha^l, so no fractional
power ever appears; eta and nu are the parameters of the centralizer family. Exponents of
the parameter symbols may be negative (Laurent in the parameters), which is how inverse
maps are written without clearing denominators.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple

logger = logging.getLogger(__name__)

VARIABLES = ("z0", "z1", "z2", "z3", "a", "b", "eta", "nu")
Z0, Z1, Z2, Z3, A, B, ETA, NU = range(len(VARIABLES))
NVARS = len(VARIABLES)
Z_VARS = (Z0, Z1, Z2, Z3)
DUMP_VARS = (Z0, Z1, Z2, Z3, A, B)

EXP_LIMIT = 2 ** 15 - 1
DEFAULT_CAP = 6

Exponents = Tuple[int, ...]


class CapExceededError(ValueError):
    """Raised when a symbolic iteration is asked beyond its degree cap."""


class UnsupportedFormError(ValueError):
    """Raised when a polynomial is not of the shape an operation can factor."""


class ExponentOverflowError(OverflowError):
    """Raised when an exponent leaves the 16-bit range."""


def _check_exponents(e: Exponents) -> Exponents:
    if len(e) != NVARS:
        raise ValueError(f"Exponent vector must have {NVARS} entries, got {len(e)}")
    for i, k in enumerate(e):
        if k < 0 and i in Z_VARS:
            raise ValueError(f"Negative exponent for {VARIABLES[i]}")
        if abs(k) > EXP_LIMIT:
            raise ExponentOverflowError(f"Exponent {k} of {VARIABLES[i]} exceeds 16-bit range")
    return e


class MultiPoly:
    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Mapping[Exponents, int]] = None):
        clean: Dict[Exponents, int] = {}
        for e, c in (terms or {}).items():
            if c:
                clean[_check_exponents(tuple(e))] = int(c)
        self._terms = clean

    @classmethod
    def _raw(cls, terms: Dict[Exponents, int]) -> "MultiPoly":
        obj = cls.__new__(cls)
        obj._terms = {e: c for e, c in terms.items() if c}
        return obj

    @classmethod
    def const(cls, c: int) -> "MultiPoly":
        return cls({(0,) * NVARS: c})

    @classmethod
    def var(cls, index: int, power: int = 1) -> "MultiPoly":
        e = [0] * NVARS
        e[index] = power
        return cls({tuple(e): 1})

    @classmethod
    def monomial(cls, coeff: int, **powers: int) -> "MultiPoly":
        e = [0] * NVARS
        for name, k in powers.items():
            e[VARIABLES.index(name)] = k
        return cls({tuple(e): coeff})

    @property
    def terms(self) -> Dict[Exponents, int]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = MultiPoly.const(other)
        return isinstance(other, MultiPoly) and self._terms == other._terms

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    def __add__(self, other):
        return poly_add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return poly_add(self, -_lift(other))

    def __rsub__(self, other):
        return poly_add(_lift(other), -self)

    def __neg__(self):
        return MultiPoly._raw({e: -c for e, c in self._terms.items()})

    def __mul__(self, other):
        return poly_mul(self, _lift(other))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return poly_pow(self, k)

    def z_degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(e[i] for i in Z_VARS) for e in self._terms)

    def degree_in(self, index: int) -> int:
        return max((e[index] for e in self._terms), default=-1)

    def variables(self) -> set:
        return {i for e in self._terms for i in range(NVARS) if e[i]}

    def is_homogeneous(self) -> bool:
        return len({sum(e[i] for i in Z_VARS) for e in self._terms}) <= 1

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def substitute(self, index: int, value: int) -> "MultiPoly":
        """Set one variable to an integer value (0 drops every monomial containing it)."""
        out: Dict[Exponents, int] = {}
        for e, c in self._terms.items():
            k = e[index]
            if k and value == 0:
                continue
            if k < 0:
                raise ValueError(f"Cannot substitute into a negative power of {VARIABLES[index]}")
            e2 = list(e)
            e2[index] = 0
            key = tuple(e2)
            out[key] = out.get(key, 0) + c * value ** k
        return MultiPoly._raw(out)

    def evaluate(self, values: Sequence):
        """Value at (z0, z1, z2, z3, a, b, eta, nu); missing trailing entries default to 1."""
        vals = list(values) + [1] * (NVARS - len(values))
        total = 0
        for e, c in self._terms.items():
            term = c
            for i, k in enumerate(e):
                if k > 0:
                    term = term * vals[i] ** k
                elif k < 0:
                    base = Fraction(vals[i]) if isinstance(vals[i], int) else vals[i]
                    term = term / base ** (-k)
            total = total + term
        return total

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for e, c in sorted(self._terms.items(), reverse=True):
            mono = "*".join(VARIABLES[i] + (f"^{k}" if k != 1 else "") for i, k in enumerate(e) if k)
            parts.append(f"{c}" if not mono else (mono if c == 1 else f"{c}*{mono}"))
        return " + ".join(parts)


def _lift(x) -> MultiPoly:
    if isinstance(x, MultiPoly):
        return x
    if isinstance(x, int):
        return MultiPoly.const(x)
    raise TypeError(f"Cannot combine MultiPoly with {type(x).__name__}")


def _add_exp(e: Exponents, f: Exponents) -> Exponents:
    s = tuple(x + y for x, y in zip(e, f))
    for k in s:
        if k > EXP_LIMIT or k < -EXP_LIMIT:
            raise ExponentOverflowError(f"Exponent vector {s} exceeds 16-bit range")
    return s


def poly_add(p: MultiPoly, q: MultiPoly) -> MultiPoly:
    out = dict(p._terms)
    for e, c in q._terms.items():
        out[e] = out.get(e, 0) + c
    return MultiPoly._raw(out)


def poly_mul(p: MultiPoly, q: MultiPoly) -> MultiPoly:
    if len(p) > len(q):
        p, q = q, p
    out: Dict[Exponents, int] = {}
    q_items = list(q._terms.items())
    for e, c in p._terms.items():
        for f, d in q_items:
            key = _add_exp(e, f)
            out[key] = out.get(key, 0) + c * d
    return MultiPoly._raw(out)


def poly_pow(p: MultiPoly, k: int) -> MultiPoly:
    if k < 0:
        raise ValueError(f"poly_pow needs k >= 0, got {k}")
    result = MultiPoly.const(1)
    base = p
    while k:
        if k & 1:
            result = poly_mul(result, base)
        k >>= 1
        if k:
            base = poly_mul(base, base)
    return result


@dataclass(frozen=True)
class PolyMap:
    components: Tuple[MultiPoly, ...]

    def __post_init__(self):
        if len(self.components) not in (3, 4):
            raise ValueError(f"PolyMap needs 3 or 4 components, got {len(self.components)}")
        if self.projective:
            nonzero = [c for c in self.components if not c.is_zero()]
            if not all(c.is_homogeneous() for c in nonzero) or len({c.z_degree() for c in nonzero}) > 1:
                raise ValueError("Projective PolyMap components must be homogeneous of equal degree")

    @property
    def projective(self) -> bool:
        return len(self.components) == 4

    @property
    def degree(self) -> int:
        return max(c.z_degree() for c in self.components)

    def __getitem__(self, i: int) -> MultiPoly:
        return self.components[i]

    def compose(self, inner: "PolyMap") -> "PolyMap":
        """self o inner."""
        return PolyMap(tuple(poly_compose(inner, c) for c in self.components))


def poly_compose(inner: PolyMap, into: MultiPoly) -> MultiPoly:
    """Substitute the components of ``inner`` for z0, z1, z2 (and z3 when projective)."""
    slots = Z_VARS if inner.projective else (Z0, Z1, Z2)
    cache: Dict[Tuple[int, int], MultiPoly] = {}

    def power(slot: int, k: int) -> MultiPoly:
        if (slot, k) not in cache:
            cache[(slot, k)] = poly_pow(inner.components[slot], k)
        return cache[(slot, k)]

    out = MultiPoly()
    for e, c in into._terms.items():
        rest = list(e)
        term = MultiPoly.const(c)
        for slot in slots:
            if e[slot]:
                term = poly_mul(term, power(slot, e[slot]))
                rest[slot] = 0
        term = poly_mul(term, MultiPoly._raw({tuple(rest): 1}))
        out = poly_add(out, term)
    return out


def identity_map() -> PolyMap:
    return PolyMap((MultiPoly.var(Z0), MultiPoly.var(Z1), MultiPoly.var(Z2)))


def psi_map(q: int, d: int) -> PolyMap:
    z0, z1, z2, a = (MultiPoly.var(i) for i in (Z0, Z1, Z2, A))
    return PolyMap((z0 + z1 + z0 ** q * z2 ** d, z0, a * z2))


def psi_inverse_map(q: int, d: int) -> PolyMap:
    z0, z1, z2 = (MultiPoly.var(i) for i in (Z0, Z1, Z2))
    return PolyMap((z1, z0 - z1 - MultiPoly.var(A, -d) * z1 ** q * z2 ** d, MultiPoly.var(A, -1) * z2))


def phi_map(q: int) -> PolyMap:
    z0, z1, z2, a, b = (MultiPoly.var(i) for i in (Z0, Z1, Z2, A, B))
    return PolyMap((b * (z0 + z1 + z0 ** q), b * z0, a * z2))


def phi_inverse_map(q: int) -> PolyMap:
    z0, z1, z2 = (MultiPoly.var(i) for i in (Z0, Z1, Z2))
    b_inv = MultiPoly.var(B, -1)
    return PolyMap((b_inv * z1, b_inv * (z0 - z1) - MultiPoly.var(B, -q) * z1 ** q, MultiPoly.var(A, -1) * z2))


def theta_map(q: int, d: int) -> PolyMap:
    if d % (q - 1):
        raise UnsupportedFormError(f"theta is not polynomial for fractional l = {d}/{q - 1}")
    l = d // (q - 1)
    z0, z1, z2 = (MultiPoly.var(i) for i in (Z0, Z1, Z2))
    return PolyMap((z0 * z2 ** l, z1 * z2 ** l, z2))


def iterate_psi_symbolic(q: int, d: int, n_max: int, cap: int = DEFAULT_CAP) -> List[MultiPoly]:
    """[P(-1), P(0), ..., P(n_max)] with a-powers tracking alpha^(nd)."""
    if n_max > cap:
        raise CapExceededError(f"n_max={n_max} exceeds cap {cap}")
    z2 = MultiPoly.var(Z2)
    seq = [MultiPoly.var(Z1), MultiPoly.var(Z0)]
    for n in range(n_max):
        prev, cur = seq[-2], seq[-1]
        seq.append(cur + prev + cur ** q * MultiPoly.var(A, n * d) * z2 ** d)
        logger.debug("P(%d): %d terms, degree %d", n + 1, len(seq[-1]), seq[-1].z_degree())
    return seq


def iterate_psi_inverse_symbolic(q: int, d: int, n_max: int, cap: int = DEFAULT_CAP) -> List[MultiPoly]:
    """[Q(-1), Q(0), ..., Q(n_max)] with Psi^-n = (Q(n-1), Q(n), a^-n z2)."""
    if n_max > cap:
        raise CapExceededError(f"n_max={n_max} exceeds cap {cap}")
    z2 = MultiPoly.var(Z2)
    seq = [MultiPoly.var(Z0), MultiPoly.var(Z1)]
    for n in range(n_max):
        prev, cur = seq[-2], seq[-1]
        seq.append(prev - cur - MultiPoly.var(A, -(n + 1) * d) * cur ** q * z2 ** d)
    return seq


def iterate_phi_symbolic(q: int, n_max: int, inverse: bool = False, cap: int = DEFAULT_CAP) -> List[PolyMap]:
    """[Phi^1, ..., Phi^n_max] (or the inverse iterates) built coordinate-wise."""
    if n_max > cap:
        raise CapExceededError(f"n_max={n_max} exceeds cap {cap}")
    x, y = MultiPoly.var(Z0), MultiPoly.var(Z1)
    z2 = MultiPoly.var(Z2)
    b, b_inv = MultiPoly.var(B), MultiPoly.var(B, -1)
    maps = []
    for n in range(1, n_max + 1):
        if inverse:
            x, y = b_inv * y, b_inv * (x - y) - MultiPoly.var(B, -q) * y ** q
            third = MultiPoly.var(A, -n) * z2
        else:
            x, y = b * (x + y + x ** q), b * x
            third = MultiPoly.var(A, n) * z2
        maps.append(PolyMap((x, y, third)))
    return maps


def psi_degree(q: int, d: int, n: int) -> int:
    return q ** n + d * (q ** n - 1) // (q - 1)


@dataclass
class DegreeReport:
    label: str
    rows: List[Tuple[int, int, int]]  # (n, computed, expected)

    @property
    def passed(self) -> bool:
        return all(c == e for _, c, e in self.rows)

    @property
    def degrees(self) -> List[int]:
        return [c for _, c, _ in self.rows]


def verify_degree_formula(q: int, d: int, n_max: int, cap: int = DEFAULT_CAP) -> List[DegreeReport]:
    """deg(Psi^n) and deg(Psi^-n) against q^n + d(q^n - 1)/(q - 1)."""
    forward = iterate_psi_symbolic(q, d, n_max, cap)
    backward = iterate_psi_inverse_symbolic(q, d, n_max, cap)
    fwd_rows, bwd_rows = [], []
    for n in range(1, n_max + 1):
        expected = psi_degree(q, d, n)
        # Psi^n = (P(n), P(n-1), a^n z2); P(n) dominates
        fwd = max(forward[n + 1].z_degree(), forward[n].z_degree(), 1)
        bwd = max(backward[n + 1].z_degree(), backward[n].z_degree(), 1)
        fwd_rows.append((n, fwd, expected))
        bwd_rows.append((n, bwd, expected))
    return [DegreeReport("deg(Psi^n)", fwd_rows), DegreeReport("deg(Psi^-n)", bwd_rows)]


def verify_phi_degrees(q: int, d: int, n_max: int, cap: int = DEFAULT_CAP) -> List[DegreeReport]:
    """deg(Phi^n) = deg(Phi^-n) = q^n; d does not enter Phi once alpha^l is the symbol b."""
    reports = []
    for inverse, label in ((False, "deg(Phi^n)"), (True, "deg(Phi^-n)")):
        maps = iterate_phi_symbolic(q, n_max, inverse, cap)
        reports.append(DegreeReport(label, [(n, m.degree, q ** n) for n, m in enumerate(maps, start=1)]))
    return reports


def homogenize(pmap: PolyMap, target_degree: Optional[int] = None) -> PolyMap:
    if pmap.projective:
        raise ValueError("Map is already projective")
    degree = pmap.degree if target_degree is None else target_degree
    if degree < pmap.degree:
        raise ValueError(f"target_degree {degree} below map degree {pmap.degree}")
    comps = []
    for comp in pmap.components:
        out = {}
        for e, c in comp._terms.items():
            e2 = list(e)
            e2[Z3] = degree - sum(e[i] for i in (Z0, Z1, Z2))
            out[tuple(e2)] = c
        comps.append(MultiPoly._raw(out))
    comps.append(MultiPoly.var(Z3, degree))
    return PolyMap(tuple(comps))


def dehomogenize(pmap: PolyMap) -> PolyMap:
    """Set z3 = 1 and drop the last component, which must be a power of z3."""
    if not pmap.projective:
        raise ValueError("Map is not projective")
    last = pmap.components[3]
    if not (last.is_monomial() and last.variables() <= {Z3} and list(last.terms.values()) == [1]):
        raise UnsupportedFormError("Last component is not a pure power of z3")
    return PolyMap(tuple(c.substitute(Z3, 1) for c in pmap.components[:3]))


def _is_unit_monomial(p: MultiPoly) -> bool:
    """c * monomial with c = +-1 and any powers of the parameter symbols."""
    if not p.is_monomial():
        return False
    (coeff,) = p.terms.values()
    return coeff in (1, -1)


def hyperplane_image(pmap: PolyMap) -> Tuple[PolyMap, Optional[Tuple[int, int, int, int]]]:
    """Restrict to z3 = 0; the collapse point when exactly one component survives."""
    if not pmap.projective:
        raise ValueError("hyperplane_image needs a projective map")
    restricted = PolyMap(tuple(c.substitute(Z3, 0) for c in pmap.components))
    alive = [i for i, c in enumerate(restricted.components) if not c.is_zero()]
    collapse = None
    if len(alive) == 1:
        collapse = tuple(1 if i == alive[0] else 0 for i in range(4))
    return restricted, collapse


def format_point(point: Sequence[int]) -> str:
    return "(" + ":".join(str(x) for x in point) + ")"


def indeterminacy_on_hyperplane(pmap: PolyMap) -> List[frozenset]:
    """
    Ind(f) within {z3 = 0} as a union of coordinate subspaces, each given as the set of
    vanishing coordinates.

    Raises:
        UnsupportedFormError: a surviving component is not a unit times a monomial
    """
    restricted, _ = hyperplane_image(pmap)
    choices = []
    for comp in restricted.components:
        if comp.is_zero():
            continue
        if not _is_unit_monomial(comp):
            raise UnsupportedFormError(f"Component {comp!r} is not a monomial times a unit")
        (e,) = comp.terms.keys()
        zs = [VARIABLES[i] for i in (Z0, Z1, Z2) if e[i] > 0]
        if not zs:
            # a nonvanishing component means no indeterminacy
            return []
        choices.append(zs)
    if not choices:
        return [frozenset(VARIABLES[i] for i in Z_VARS)]
    loci = {frozenset(combo) | {"z3"} for combo in product(*choices)}
    minimal = [s for s in loci if not any(t < s for t in loci)]
    return sorted(minimal, key=lambda s: sorted(s))


def format_loci(loci: Iterable[frozenset]) -> str:
    return " U ".join("{" + ",".join(f"{v}=0" for v in sorted(s)) + "}" for s in loci)


def check_algebraic_stability(pmap: PolyMap) -> bool:
    """False when {z3 = 0} collapses to a point that lies in Ind(f)."""
    _, collapse = hyperplane_image(pmap)
    if collapse is None:
        return True
    names = [VARIABLES[i] for i in Z_VARS]
    zero_coords = {names[i] for i, x in enumerate(collapse) if x == 0}
    return not any(locus <= zero_coords for locus in indeterminacy_on_hyperplane(pmap))


def reduce_root_of_unity(p: MultiPoly, index: int, order: int) -> MultiPoly:
    """Apply x^order = 1 to the variable at ``index``."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    out: Dict[Exponents, int] = {}
    for e, c in p._terms.items():
        e2 = list(e)
        e2[index] = e[index] % order
        key = tuple(e2)
        out[key] = out.get(key, 0) + c
    return MultiPoly._raw(out)


def reduce_b_relation(p: MultiPoly, q: int, d: int) -> MultiPoly:
    """Rewrite b^(q-1) -> a^d."""
    out: Dict[Exponents, int] = {}
    for e, c in p._terms.items():
        k, r = divmod(e[B], q - 1)
        e2 = list(e)
        e2[B] = r
        e2[A] = e[A] + k * d
        key = _check_exponents(tuple(e2))
        out[key] = out.get(key, 0) + c
    return MultiPoly._raw(out)


def substitute_b_integral(p: MultiPoly, q: int, d: int) -> MultiPoly:
    """b -> a^l for integral l."""
    if d % (q - 1):
        raise UnsupportedFormError(f"l = {d}/{q - 1} is not integral")
    l = d // (q - 1)
    out: Dict[Exponents, int] = {}
    for e, c in p._terms.items():
        e2 = list(e)
        e2[A] = e[A] + l * e[B]
        e2[B] = 0
        key = _check_exponents(tuple(e2))
        out[key] = out.get(key, 0) + c
    return MultiPoly._raw(out)


def check_centralizer_family(q: int, d: int, eta_exponent: int = 1, eta_value: Optional[int] = None) -> bool:
    """
    f = (eta z0, eta z1, nu z2) against Phi: f o Phi == Phi o f with eta = zeta^k, zeta a
    formal primitive (q-1)-th root of unity, or eta replaced by the integer ``eta_value``.
    nu stays a free symbol.
    """
    z0, z1, z2 = (MultiPoly.var(i) for i in (Z0, Z1, Z2))
    if eta_value is None:
        eta = MultiPoly.var(ETA, eta_exponent % (q - 1))
    else:
        eta = MultiPoly.const(eta_value)
    nu = MultiPoly.var(NU)
    f = PolyMap((eta * z0, eta * z1, nu * z2))
    phi = phi_map(q)
    left = phi.compose(f)
    right = f.compose(phi)
    # Phi o f versus f o Phi
    for lc, rc in zip(left.components, right.components):
        diff = lc - rc
        if eta_value is None:
            diff = reduce_root_of_unity(diff, ETA, q - 1)
        if not diff.is_zero():
            logger.debug("Centralizer mismatch: %r", diff)
            return False
    return True


def preserves_fibration(pmap: PolyMap, axis: int = Z2) -> bool:
    """Component ``axis`` depends on z_axis only and is linear in it."""
    comp = pmap.components[axis]
    if not comp.is_monomial():
        return False
    (e,) = comp.terms.keys()
    return all(e[i] == (1 if i == axis else 0) for i in (Z0, Z1, Z2, Z3))


def check_fibration_invariance(q: int, d: int) -> bool:
    return preserves_fibration(psi_map(q, d)) and preserves_fibration(phi_map(q))


def check_conjugacy_symbolic(q: int, d: int) -> bool:
    """theta o Psi == Phi o theta exactly, with b = a^l (integral l only)."""
    theta = theta_map(q, d)
    left = theta.compose(psi_map(q, d))
    right = phi_map(q).compose(theta)
    return all((substitute_b_integral(lc, q, d) - substitute_b_integral(rc, q, d)).is_zero()
               for lc, rc in zip(left.components, right.components))


def dump_poly(p: MultiPoly, stream: TextIO) -> None:
    """One monomial per line: ``coeff e0 e1 e2 e3 ea eb``."""
    for e, c in sorted(p._terms.items()):
        if e[ETA] or e[NU]:
            raise UnsupportedFormError("eta/nu monomials have no slot in the dump format")
        stream.write(" ".join(str(x) for x in (c,) + tuple(e[i] for i in DUMP_VARS)) + "\n")


def load_poly(stream: TextIO) -> MultiPoly:
    terms: Dict[Exponents, int] = {}
    for line in stream:
        line = line.strip()
        if not line:
            continue
        fields = [int(x) for x in line.split()]
        if len(fields) != 1 + len(DUMP_VARS):
            raise ValueError(f"Malformed monomial line: {line!r}")
        e = tuple(fields[1:]) + (0, 0)
        terms[e] = terms.get(e, 0) + fields[0]
    return MultiPoly(terms)
