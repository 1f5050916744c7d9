"""Differential-polynomial arithmetic over exact rationals.

The ring handled here is spanned by monomials in jet variables with
rational coefficients.  A jet variable is one of

* ``v{alpha}_{i}`` -- the i-th x-derivative of the field component alpha,
* ``phi_{i}``     -- the i-th x-derivative of the boundary scalar,
* ``f_{i}``       -- the i-th x-derivative of an auxiliary scalar used by
  the exponential-conjugation polynomials,

together with a formal parameter ``eps``.  Values are truncated in three
independent directions: total degree in jet-order-zero variables, maximal
jet order, and maximal eps power.  Coefficients are `fractions.Fraction`,
so canonical forms compare exactly; there is no floating-point mode.

Each polynomial also carries a *reliable degree* ``rel``: the jet-order-zero
degree up to which its coefficients agree with the untruncated object it
approximates.  ``rel=None`` means the value is exact.  Arithmetic propagates
``rel`` conservatively and drops stored terms beyond it, so a value never
holds coefficients it cannot vouch for.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

KIND_V = 0
KIND_PHI = 1
KIND_F = 2

KIND_NAMES = {KIND_V: "v", KIND_PHI: "phi", KIND_F: "f"}
KIND_CODES = {name: code for code, name in KIND_NAMES.items()}

# A jet variable is (kind, alpha, jet_order); alpha is 0 for phi and f.
JetVar = tuple[int, int, int]
# A monomial is a sorted tuple of (JetVar, positive exponent) pairs.
JetMonomial = tuple[tuple[JetVar, int], ...]
# Terms are keyed by (eps power, monomial).
TermKey = tuple[int, JetMonomial]

ONE = ()  # the empty monomial


class TruncationMismatchError(ValueError):
    """Raised when two operands carry different truncation metadata."""


class JetOverflowError(ValueError):
    """Raised when a derivation would exceed the declared jet bound."""


class PhiJetError(ValueError):
    """Raised when a positive phi jet is present where none is allowed."""


@dataclass(frozen=True)
class JetTruncation:
    """Truncation triple for differential polynomials.

    deg0_max bounds the total degree in jet-order-zero variables,
    jet_max the highest jet order, eps_max the highest eps power.
    """

    deg0_max: int
    jet_max: int
    eps_max: int


def frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def jet_var(kind: int, alpha: int, jet: int) -> JetVar:
    if kind not in KIND_NAMES:
        raise ValueError(f"unknown jet-variable kind {kind!r}")
    if kind == KIND_V and alpha < 1:
        raise ValueError("v-variables need alpha >= 1")
    if kind != KIND_V and alpha != 0:
        raise ValueError("phi/f-variables carry no alpha index")
    if jet < 0:
        raise ValueError("jet order must be >= 0")
    return (kind, alpha, jet)


def vvar(alpha: int, jet: int = 0) -> JetVar:
    return jet_var(KIND_V, alpha, jet)


def phivar(jet: int = 0) -> JetVar:
    return jet_var(KIND_PHI, 0, jet)


def fvar(jet: int) -> JetVar:
    return jet_var(KIND_F, 0, jet)


def var_name(var: JetVar) -> str:
    kind, alpha, jet = var
    if kind == KIND_V:
        return f"v{alpha}_{jet}"
    return f"{KIND_NAMES[kind]}_{jet}"


def mono_mul(m1: JetMonomial, m2: JetMonomial) -> JetMonomial:
    if not m1:
        return m2
    if not m2:
        return m1
    acc = dict(m1)
    for var, exp in m2:
        acc[var] = acc.get(var, 0) + exp
    return tuple(sorted(acc.items()))


def mono_from_factors(factors: Iterable[tuple[JetVar, int]]) -> JetMonomial:
    acc: dict[JetVar, int] = {}
    for var, exp in factors:
        if exp < 0:
            raise ValueError("negative exponent")
        if exp:
            acc[var] = acc.get(var, 0) + exp
    return tuple(sorted(acc.items()))


def mono_deg0(m: JetMonomial) -> int:
    return sum(exp for (kind, alpha, jet), exp in m if jet == 0)


def mono_max_jet(m: JetMonomial) -> int:
    return max((jet for (kind, alpha, jet), exp in m), default=0)


def mono_std_degree(m: JetMonomial) -> int:
    """Standard degree of a monomial: deg v{a}_i = deg phi_i = i, deg f_i = i-1."""
    total = 0
    for (kind, alpha, jet), exp in m:
        total += exp * (jet - 1 if kind == KIND_F else jet)
    return total


def _rel_min(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _rel_add(rel: int | None, val: int | None) -> int | None:
    if rel is None or val is None:
        return None
    return rel + val


class JetPoly:
    """A truncated differential polynomial with exact rational coefficients."""

    __slots__ = ("terms", "trunc", "rel")

    def __init__(self, terms: Mapping[TermKey, Fraction], trunc: JetTruncation,
                 rel: int | None = None, _checked: bool = False):
        if _checked:
            self.terms = dict(terms)
        else:
            kept: dict[TermKey, Fraction] = {}
            for (eps, mono), coef in terms.items():
                coef = frac(coef)
                if not coef:
                    continue
                if eps < 0:
                    raise ValueError("negative eps power")
                if eps > trunc.eps_max:
                    continue
                if mono_max_jet(mono) > trunc.jet_max:
                    raise JetOverflowError(
                        f"jet order exceeds bound {trunc.jet_max} in {mono}")
                d0 = mono_deg0(mono)
                if d0 > trunc.deg0_max:
                    continue
                if rel is not None and d0 > rel:
                    continue
                kept[(eps, mono)] = coef
            self.terms = kept
        self.trunc = trunc
        self.rel = rel

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, trunc: JetTruncation, rel: int | None = None) -> "JetPoly":
        return cls({}, trunc, rel, _checked=True)

    @classmethod
    def const(cls, value, trunc: JetTruncation, rel: int | None = None) -> "JetPoly":
        value = frac(value)
        if not value:
            return cls.zero(trunc, rel)
        return cls({(0, ONE): value}, trunc, rel)

    @classmethod
    def var(cls, var: JetVar, trunc: JetTruncation) -> "JetPoly":
        return cls({(0, ((var, 1),)): Fraction(1)}, trunc)

    @classmethod
    def eps(cls, trunc: JetTruncation, power: int = 1) -> "JetPoly":
        return cls({(power, ONE): Fraction(1)}, trunc)

    # -- inspection --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, mono: JetMonomial, eps: int = 0) -> Fraction:
        return self.terms.get((eps, mono), Fraction(0))

    def eps_slice(self, j: int) -> "JetPoly":
        terms = {(0, m): c for (e, m), c in self.terms.items() if e == j}
        return JetPoly(terms, self.trunc, self.rel, _checked=True)

    def max_eps(self) -> int:
        return max((e for e, _ in self.terms), default=0)

    def val0(self) -> int | None:
        """Effective jet-order-zero valuation for reliability bookkeeping."""
        v = min((mono_deg0(m) for _, m in self.terms), default=None)
        if self.rel is None:
            return v
        return self.rel + 1 if v is None else min(v, self.rel + 1)

    def sorted_terms(self) -> list[tuple[TermKey, Fraction]]:
        return sorted(self.terms.items())

    def jet_vars(self) -> set[JetVar]:
        out: set[JetVar] = set()
        for _, mono in self.terms:
            for var, _ in mono:
                out.add(var)
        return out

    # -- arithmetic --------------------------------------------------------

    def _check_compatible(self, other: "JetPoly") -> None:
        if self.trunc != other.trunc:
            raise TruncationMismatchError(
                f"incompatible truncations {self.trunc} vs {other.trunc}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = JetPoly.const(other, self.trunc)
        if not isinstance(other, JetPoly):
            return NotImplemented
        self._check_compatible(other)
        acc = dict(self.terms)
        for key, coef in other.terms.items():
            s = acc.get(key, Fraction(0)) + coef
            if s:
                acc[key] = s
            else:
                acc.pop(key, None)
        return JetPoly(acc, self.trunc, _rel_min(self.rel, other.rel))

    __radd__ = __add__

    def __neg__(self):
        return JetPoly({k: -c for k, c in self.terms.items()}, self.trunc,
                       self.rel, _checked=True)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = JetPoly.const(other, self.trunc)
        if not isinstance(other, JetPoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = frac(other)
            if not c:
                return JetPoly.zero(self.trunc, self.rel)
            return JetPoly({k: c * v for k, v in self.terms.items()},
                           self.trunc, self.rel, _checked=True)
        if not isinstance(other, JetPoly):
            return NotImplemented
        self._check_compatible(other)
        rel = _rel_min(_rel_add(self.rel, other.val0()),
                       _rel_add(other.rel, self.val0()))
        tr = self.trunc
        cap = tr.deg0_max if rel is None else min(tr.deg0_max, rel)
        acc: dict[TermKey, Fraction] = {}
        for (e1, m1), c1 in self.terms.items():
            d1 = mono_deg0(m1)
            for (e2, m2), c2 in other.terms.items():
                eps = e1 + e2
                if eps > tr.eps_max:
                    continue
                if d1 + mono_deg0(m2) > cap:
                    continue
                key = (eps, mono_mul(m1, m2))
                s = acc.get(key, Fraction(0)) + c1 * c2
                if s:
                    acc[key] = s
                else:
                    del acc[key]
        return JetPoly(acc, tr, rel, _checked=True)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, JetPoly):
            return NotImplemented
        return (self.terms == other.terms and self.trunc == other.trunc
                and self.rel == other.rel)

    def __hash__(self):
        return hash((frozenset(self.terms.items()), self.trunc, self.rel))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (eps, mono), coef in self.sorted_terms():
            factors = []
            if coef != 1 or (not mono and not eps):
                factors.append(str(coef))
            if eps:
                factors.append("eps" if eps == 1 else f"eps^{eps}")
            for var, exp in mono:
                name = var_name(var)
                factors.append(name if exp == 1 else f"{name}^{exp}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __repr__(self):
        return f"JetPoly({self})"


def poly_eq(p: JetPoly, q: JetPoly, *, up_to: int | None = None) -> bool:
    """Equality of stored terms up to the shared reliable degree."""
    if p.trunc != q.trunc:
        raise TruncationMismatchError("cannot compare across truncations")
    window = _rel_min(p.rel, q.rel)
    window = _rel_min(window, up_to)
    if window is None:
        return p.terms == q.terms
    for key, coef in p.terms.items():
        if mono_deg0(key[1]) <= window and q.terms.get(key) != coef:
            return False
    for key, coef in q.terms.items():
        if mono_deg0(key[1]) <= window and p.terms.get(key) != coef:
            return False
    return True


def add(p: JetPoly, q: JetPoly) -> JetPoly:
    return p + q


def mul(p: JetPoly, q: JetPoly) -> JetPoly:
    return p * q


def dx(p: JetPoly) -> JetPoly:
    """Total x-derivative: bumps one jet order per term by the Leibniz rule."""
    tr = p.trunc
    acc: dict[TermKey, Fraction] = {}
    has_deg0 = False
    for (eps, mono), coef in p.terms.items():
        for idx, (var, exp) in enumerate(mono):
            kind, alpha, jet = var
            if jet == 0:
                has_deg0 = True
            if jet + 1 > tr.jet_max:
                raise JetOverflowError(
                    f"dx would raise {var_name(var)} past jet bound {tr.jet_max}")
            factors = list(mono)
            if exp == 1:
                del factors[idx]
            else:
                factors[idx] = (var, exp - 1)
            bumped = mono_from_factors(factors + [((kind, alpha, jet + 1), 1)])
            key = (eps, bumped)
            s = acc.get(key, Fraction(0)) + coef * exp
            if s:
                acc[key] = s
            else:
                del acc[key]
    rel = p.rel if (p.rel is None or not has_deg0) else p.rel - 1
    return JetPoly(acc, tr, rel)


def jet_partial(p: JetPoly, var: JetVar) -> JetPoly:
    """Formal partial derivative with respect to a single jet variable."""
    acc: dict[TermKey, Fraction] = {}
    for (eps, mono), coef in p.terms.items():
        for idx, (v, exp) in enumerate(mono):
            if v != var:
                continue
            factors = list(mono)
            if exp == 1:
                del factors[idx]
            else:
                factors[idx] = (v, exp - 1)
            key = (eps, tuple(factors))
            s = acc.get(key, Fraction(0)) + coef * exp
            if s:
                acc[key] = s
            else:
                del acc[key]
            break
    rel = p.rel
    if rel is not None and var[2] == 0:
        rel -= 1
    return JetPoly(acc, p.trunc, rel, _checked=True)


def standard_degree(p: JetPoly) -> dict[int, JetPoly]:
    """Decompose into homogeneous slices of the standard gradation (deg eps = -1)."""
    buckets: dict[int, dict[TermKey, Fraction]] = {}
    for (eps, mono), coef in p.terms.items():
        d = mono_std_degree(mono) - eps
        buckets.setdefault(d, {})[(eps, mono)] = coef
    return {d: JetPoly(terms, p.trunc, p.rel, _checked=True)
            for d, terms in sorted(buckets.items())}


def coef_phi_power(p: JetPoly, i: int) -> JetPoly:
    """Coefficient of phi^i; requires that no positive phi jets are present."""
    if i < 0:
        raise ValueError("phi power must be >= 0")
    phi0 = phivar(0)
    for _, mono in p.terms:
        for (kind, alpha, jet), _ in mono:
            if kind == KIND_PHI and jet > 0:
                raise PhiJetError("positive phi jets present; eliminate them first")
    acc: dict[TermKey, Fraction] = {}
    for (eps, mono), coef in p.terms.items():
        entry = dict(mono)
        if entry.pop(phi0, 0) != i:
            continue
        acc[(eps, tuple(sorted(entry.items())))] = coef
    rel = None if p.rel is None else p.rel - i
    return JetPoly(acc, p.trunc, rel, _checked=True)


def phi_degree(p: JetPoly) -> int:
    """Highest power of phi (jet order zero) appearing in p."""
    phi0 = phivar(0)
    best = 0
    for _, mono in p.terms:
        for var, exp in mono:
            if var == phi0:
                best = max(best, exp)
    return best
