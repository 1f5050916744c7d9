"""Truncated formal power series on the big phase space.

Series live in the variables ``t{alpha}_{a}`` (1 <= alpha <= N, 0 <= a <=
level bound) and ``s_{a}``, with exact rational coefficients and an optional
eps power per term.  The module also houses the theory context (rank, metric,
unit direction, truncation bounds), the small-phase-space restriction onto
jet variables, the distinguished solutions built from genus-0 potentials, and
substitution of differential polynomials along those solutions.

The x-direction is never introduced as a variable: every x-dependence enters
through the shift ``t{gamma}_0 -> t{gamma}_0 + A^gamma x``, so d/dx acts on
evaluated quantities as the unit-direction derivative at level zero.

Like `ottr.algebra`, every series carries a reliable degree ``rel`` and all
operations propagate it, so equality checks never compare coefficients that
truncation has already corrupted.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .algebra import (
    KIND_PHI,
    KIND_V,
    JetPoly,
    JetTruncation,
    TruncationMismatchError,
    _rel_add,
    _rel_min,
    frac,
    mono_from_factors as jet_mono_from_factors,
    phivar,
    vvar,
)

KIND_T = 0
KIND_S = 1

BIG_KIND_NAMES = {KIND_T: "t", KIND_S: "s"}
BIG_KIND_CODES = {name: code for code, name in BIG_KIND_NAMES.items()}

# A big-phase variable is (kind, alpha, level); alpha is 0 for s-variables.
BigVar = tuple[int, int, int]
BigMonomial = tuple[tuple[BigVar, int], ...]
TermKey = tuple[int, BigMonomial]

ONE = ()


class LevelOverflowError(ValueError):
    """Raised when a variable exceeds the declared level bound."""


@dataclass(frozen=True)
class Truncation:
    """Shared truncation bounds: big-phase degree/levels and jet-side bounds."""

    deg_max: int
    level_max: int
    deg0_max: int
    jet_max: int
    eps_max: int

    @classmethod
    def of(cls, deg_max: int, level_max: int, deg0_max: int | None = None,
           jet_max: int = 3, eps_max: int = 2) -> "Truncation":
        if deg0_max is None:
            deg0_max = deg_max
        return cls(deg_max, level_max, deg0_max, jet_max, eps_max)

    def jet(self) -> JetTruncation:
        return JetTruncation(self.deg0_max, self.jet_max, self.eps_max)


def t_var(alpha: int, level: int) -> BigVar:
    if alpha < 1:
        raise ValueError("t-variables need alpha >= 1")
    if level < 0:
        raise ValueError("level must be >= 0")
    return (KIND_T, alpha, level)


def s_var(level: int) -> BigVar:
    if level < 0:
        raise ValueError("level must be >= 0")
    return (KIND_S, 0, level)


def big_var_name(var: BigVar) -> str:
    kind, alpha, level = var
    if kind == KIND_T:
        return f"t{alpha}_{level}"
    return f"s_{level}"


def mono_mul(m1: BigMonomial, m2: BigMonomial) -> BigMonomial:
    if not m1:
        return m2
    if not m2:
        return m1
    acc = dict(m1)
    for var, exp in m2:
        acc[var] = acc.get(var, 0) + exp
    return tuple(sorted(acc.items()))


def mono_from_factors(factors: Iterable[tuple[BigVar, int]]) -> BigMonomial:
    acc: dict[BigVar, int] = {}
    for var, exp in factors:
        if exp < 0:
            raise ValueError("negative exponent")
        if exp:
            acc[var] = acc.get(var, 0) + exp
    return tuple(sorted(acc.items()))


def mono_degree(m: BigMonomial) -> int:
    return sum(exp for _, exp in m)


def mono_weight(m: BigMonomial) -> int:
    """Total descendent weight: the level sum counted with exponents."""
    return sum(level * exp for (kind, alpha, level), exp in m)


def mono_max_level(m: BigMonomial) -> int:
    return max((level for (kind, alpha, level), exp in m), default=0)


def exponent_of(m: BigMonomial, var: BigVar) -> int:
    for v, e in m:
        if v == var:
            return e
    return 0


def mono_mul_var(m: BigMonomial, var: BigVar) -> BigMonomial:
    return mono_mul(m, ((var, 1),))


def mono_div_var(m: BigMonomial, var: BigVar) -> BigMonomial | None:
    """Remove one factor of var, or None if absent."""
    for idx, (v, e) in enumerate(m):
        if v == var:
            factors = list(m)
            if e == 1:
                del factors[idx]
            else:
                factors[idx] = (v, e - 1)
            return tuple(factors)
    return None


class BigSeries:
    """A degree-truncated formal power series with exact rational coefficients."""

    __slots__ = ("terms", "trunc", "rel")

    def __init__(self, terms: Mapping[TermKey, Fraction], trunc: Truncation,
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
                if mono_max_level(mono) > trunc.level_max:
                    raise LevelOverflowError(
                        f"level exceeds bound {trunc.level_max} in {mono}")
                d = mono_degree(mono)
                if d > trunc.deg_max:
                    continue
                if rel is not None and d > rel:
                    continue
                kept[(eps, mono)] = coef
            self.terms = kept
        self.trunc = trunc
        self.rel = rel

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, trunc: Truncation, rel: int | None = None) -> "BigSeries":
        return cls({}, trunc, rel, _checked=True)

    @classmethod
    def const(cls, value, trunc: Truncation, rel: int | None = None) -> "BigSeries":
        value = frac(value)
        if not value:
            return cls.zero(trunc, rel)
        return cls({(0, ONE): value}, trunc, rel)

    @classmethod
    def var(cls, var: BigVar, trunc: Truncation) -> "BigSeries":
        return cls({(0, ((var, 1),)): Fraction(1)}, trunc)

    @classmethod
    def from_coeffs(cls, coeffs: Mapping[BigMonomial, Fraction], trunc: Truncation,
                    rel: int | None = None) -> "BigSeries":
        return cls({(0, mono): c for mono, c in coeffs.items()}, trunc, rel)

    # -- inspection --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, mono: BigMonomial, eps: int = 0) -> Fraction:
        return self.terms.get((eps, mono), Fraction(0))

    def constant_term(self, eps: int = 0) -> Fraction:
        return self.terms.get((eps, ONE), Fraction(0))

    def eps_slice(self, j: int) -> "BigSeries":
        terms = {(0, m): c for (e, m), c in self.terms.items() if e == j}
        return BigSeries(terms, self.trunc, self.rel, _checked=True)

    def max_eps(self) -> int:
        return max((e for e, _ in self.terms), default=0)

    def valuation(self) -> int | None:
        """Effective degree valuation for reliability bookkeeping."""
        v = min((mono_degree(m) for _, m in self.terms), default=None)
        if self.rel is None:
            return v
        return self.rel + 1 if v is None else min(v, self.rel + 1)

    def sorted_terms(self) -> list[tuple[TermKey, Fraction]]:
        return sorted(self.terms.items())

    def degree_buckets(self) -> dict[int, dict[TermKey, Fraction]]:
        out: dict[int, dict[TermKey, Fraction]] = {}
        for key, coef in self.terms.items():
            out.setdefault(mono_degree(key[1]), {})[key] = coef
        return out

    # -- arithmetic --------------------------------------------------------

    def _check_compatible(self, other: "BigSeries") -> None:
        if self.trunc != other.trunc:
            raise TruncationMismatchError(
                f"incompatible truncations {self.trunc} vs {other.trunc}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = BigSeries.const(other, self.trunc)
        if not isinstance(other, BigSeries):
            return NotImplemented
        self._check_compatible(other)
        rel = _rel_min(self.rel, other.rel)
        acc = dict(self.terms)
        for key, coef in other.terms.items():
            s = acc.get(key, Fraction(0)) + coef
            if s:
                acc[key] = s
            else:
                acc.pop(key, None)
        if rel is not None:
            acc = {k: c for k, c in acc.items() if mono_degree(k[1]) <= rel}
        return BigSeries(acc, self.trunc, rel, _checked=True)

    __radd__ = __add__

    def __neg__(self):
        return BigSeries({k: -c for k, c in self.terms.items()}, self.trunc,
                         self.rel, _checked=True)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = BigSeries.const(other, self.trunc)
        if not isinstance(other, BigSeries):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = frac(other)
            if not c:
                return BigSeries.zero(self.trunc, self.rel)
            return BigSeries({k: c * v for k, v in self.terms.items()},
                             self.trunc, self.rel, _checked=True)
        if not isinstance(other, BigSeries):
            return NotImplemented
        self._check_compatible(other)
        rel = _rel_min(_rel_add(self.rel, other.valuation()),
                       _rel_add(other.rel, self.valuation()))
        tr = self.trunc
        cap = tr.deg_max if rel is None else min(tr.deg_max, rel)
        a = sorted(((mono_degree(m), e, m, c) for (e, m), c in self.terms.items()))
        b = sorted(((mono_degree(m), e, m, c) for (e, m), c in other.terms.items()))
        acc: dict[TermKey, Fraction] = {}
        for d1, e1, m1, c1 in a:
            if b and d1 + b[0][0] > cap:
                break
            for d2, e2, m2, c2 in b:
                if d1 + d2 > cap:
                    break
                eps = e1 + e2
                if eps > tr.eps_max:
                    continue
                key = (eps, mono_mul(m1, m2))
                s = acc.get(key, Fraction(0)) + c1 * c2
                if s:
                    acc[key] = s
                else:
                    del acc[key]
        return BigSeries(acc, tr, rel, _checked=True)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, BigSeries):
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
                name = big_var_name(var)
                factors.append(name if exp == 1 else f"{name}^{exp}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __repr__(self):
        return f"BigSeries({self})"


def series_eq(f: BigSeries, g: BigSeries, *, up_to: int | None = None) -> bool:
    """Equality of stored terms up to the shared reliable degree."""
    if f.trunc != g.trunc:
        raise TruncationMismatchError("cannot compare across truncations")
    window = _rel_min(_rel_min(f.rel, g.rel), up_to)
    if window is None:
        return f.terms == g.terms
    for key, coef in f.terms.items():
        if mono_degree(key[1]) <= window and g.terms.get(key) != coef:
            return False
    for key, coef in g.terms.items():
        if mono_degree(key[1]) <= window and f.terms.get(key) != coef:
            return False
    return True


def series_is_zero(f: BigSeries) -> bool:
    """True when every stored (hence reliable) coefficient vanishes."""
    return not f.terms


def invert_matrix(rows: Sequence[Sequence[Fraction]]) -> tuple[tuple[Fraction, ...], ...]:
    """Exact inverse of a small square rational matrix by Gauss-Jordan."""
    n = len(rows)
    aug = [[frac(rows[i][j]) for j in range(n)] +
           [Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            raise ValueError("matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return tuple(tuple(row[n:]) for row in aug)


@dataclass(frozen=True)
class TheoryData:
    """Rank, metric, unit direction and truncation bounds for one computation."""

    n: int
    eta: tuple[tuple[Fraction, ...], ...]
    eta_inv: tuple[tuple[Fraction, ...], ...]
    avec: tuple[Fraction, ...]
    trunc: Truncation

    @classmethod
    def build(cls, n: int, eta: Sequence[Sequence], avec: Sequence,
              trunc: Truncation) -> "TheoryData":
        if n < 1:
            raise ValueError("rank must be >= 1")
        eta_t = tuple(tuple(frac(x) for x in row) for row in eta)
        if len(eta_t) != n or any(len(row) != n for row in eta_t):
            raise ValueError("eta must be an N x N matrix")
        for i in range(n):
            for j in range(n):
                if eta_t[i][j] != eta_t[j][i]:
                    raise ValueError("eta must be symmetric")
        a_t = tuple(frac(x) for x in avec)
        if len(a_t) != n:
            raise ValueError("A must have N entries")
        if all(x == 0 for x in a_t):
            raise ValueError("A must not be the zero vector")
        return cls(n, eta_t, invert_matrix(eta_t), a_t, trunc)

    @classmethod
    def rank1(cls, trunc: Truncation, eta=1, a=1) -> "TheoryData":
        return cls.build(1, [[eta]], [a], trunc)

    def t_vars(self, max_level: int | None = None) -> list[BigVar]:
        top = self.trunc.level_max if max_level is None else max_level
        return [t_var(alpha, a) for alpha in range(1, self.n + 1)
                for a in range(top + 1)]

    def s_vars(self, max_level: int | None = None) -> list[BigVar]:
        top = self.trunc.level_max if max_level is None else max_level
        return [s_var(a) for a in range(top + 1)]

    def all_vars(self) -> list[BigVar]:
        return self.t_vars() + self.s_vars()


def partial(f: BigSeries, var: BigVar) -> BigSeries:
    """Formal partial derivative; the reliable degree drops by one."""
    acc: dict[TermKey, Fraction] = {}
    for (eps, mono), coef in f.terms.items():
        for idx, (v, exp) in enumerate(mono):
            if v != var:
                continue
            factors = list(mono)
            if exp == 1:
                del factors[idx]
            else:
                factors[idx] = (v, exp - 1)
            acc[(eps, tuple(factors))] = coef * exp
            break
    rel = None if f.rel is None else f.rel - 1
    return BigSeries(acc, f.trunc, rel, _checked=True)


def partial_many(f: BigSeries, variables: Sequence[BigVar]) -> BigSeries:
    for var in variables:
        f = partial(f, var)
    return f


def t11_partial(f: BigSeries, a: int, theory: TheoryData) -> BigSeries:
    """Unit-direction derivative at level a: the A-weighted t-partials."""
    out = BigSeries.zero(f.trunc, f.rel if f.rel is None else f.rel - 1)
    for alpha in range(1, theory.n + 1):
        coef = theory.avec[alpha - 1]
        if coef:
            out = out + partial(f, t_var(alpha, a)) * coef
    return out


def restrict_small(f: BigSeries, theory: TheoryData) -> JetPoly:
    """Restriction to the small phase space: t{g}_0 -> v{g}, s_0 -> phi."""
    jt = theory.trunc.jet()
    acc = {}
    for (eps, mono), coef in f.terms.items():
        if mono_max_level(mono) > 0:
            continue
        factors = []
        for (kind, alpha, level), exp in mono:
            if kind == KIND_T:
                factors.append((vvar(alpha, 0), exp))
            else:
                factors.append((phivar(0), exp))
        acc[(eps, jet_mono_from_factors(factors))] = coef
    return JetPoly(acc, jt, f.rel)


def vtop(f0: BigSeries, theory: TheoryData) -> list[BigSeries]:
    """The distinguished solution components built from a genus-0 potential."""
    base = t11_partial(f0, 0, theory)
    out = []
    for alpha in range(1, theory.n + 1):
        acc = BigSeries.zero(f0.trunc, base.rel if base.rel is None else base.rel - 1)
        for mu in range(1, theory.n + 1):
            coef = theory.eta_inv[alpha - 1][mu - 1]
            if coef:
                acc = acc + partial(base, t_var(mu, 0)) * coef
        out.append(acc)
    return out


def phitop(f0o: BigSeries, theory: TheoryData) -> BigSeries:
    """The distinguished boundary solution: the unit-direction derivative."""
    return t11_partial(f0o, 0, theory)


def series_log(f: BigSeries) -> BigSeries:
    """log f for a series with constant term exactly 1."""
    if f.constant_term() != 1 or any(f.terms.get((e, ONE)) for e in range(1, f.trunc.eps_max + 1)):
        raise ValueError("series_log needs constant term 1")
    x = f - 1
    out = BigSeries.zero(f.trunc, f.rel)
    power = BigSeries.const(1, f.trunc)
    top = f.trunc.deg_max if f.rel is None else min(f.trunc.deg_max, f.rel)
    for k in range(1, top + 1):
        power = power * x
        if power.is_zero():
            break
        out = out + power * Fraction((-1) ** (k + 1), k)
    return BigSeries(out.terms, f.trunc, f.rel, _checked=True)


def series_exp(f: BigSeries) -> BigSeries:
    """exp f for a series with zero constant term."""
    if f.constant_term() != 0:
        raise ValueError("series_exp needs zero constant term")
    val = f.valuation()
    if val is not None and val < 1:
        raise ValueError("series_exp needs zero constant term")
    out = BigSeries.const(1, f.trunc, f.rel)
    power = BigSeries.const(1, f.trunc)
    top = f.trunc.deg_max if f.rel is None else min(f.trunc.deg_max, f.rel)
    fact = Fraction(1)
    for k in range(1, top + 1):
        power = power * f
        if power.is_zero():
            break
        fact *= k
        out = out + power * (1 / fact)
    return BigSeries(out.terms, f.trunc, f.rel, _checked=True)


class _SolutionJets:
    """Cache of unit-direction derivative towers of solution series."""

    def __init__(self, sol_v: Sequence[BigSeries], sol_phi: BigSeries | None,
                 theory: TheoryData):
        self.theory = theory
        self._v: dict[tuple[int, int], BigSeries] = {}
        for alpha, s in enumerate(sol_v, start=1):
            self._v[(alpha, 0)] = s
        self._phi: dict[int, BigSeries] = {}
        if sol_phi is not None:
            self._phi[0] = sol_phi

    def v(self, alpha: int, jet: int) -> BigSeries:
        key = (alpha, jet)
        if key not in self._v:
            self._v[key] = t11_partial(self.v(alpha, jet - 1), 0, self.theory)
        return self._v[key]

    def phi(self, jet: int) -> BigSeries:
        if not self._phi:
            raise ValueError("phi jets requested but no phi solution supplied")
        if jet not in self._phi:
            self._phi[jet] = t11_partial(self.phi(jet - 1), 0, self.theory)
        return self._phi[jet]


def eval_jetpoly(p: JetPoly, sol_v: Sequence[BigSeries],
                 sol_phi: BigSeries | None, theory: TheoryData) -> BigSeries:
    """Substitute jet variables by unit-direction derivatives of solutions.

    v{alpha}_i maps to the i-th unit-direction derivative of sol_v[alpha-1],
    phi_i likewise for sol_phi; eps powers pass through unchanged.
    """
    jets = _SolutionJets(sol_v, sol_phi, theory)
    trunc = theory.trunc
    out = BigSeries.zero(trunc, None)
    sub_val_positive = True
    for (eps, mono), coef in p.terms.items():
        term = BigSeries({(eps, ONE): coef}, trunc, None, _checked=True)
        for (kind, alpha, jet), exp in mono:
            if kind == KIND_V:
                base = jets.v(alpha, jet)
            elif kind == KIND_PHI:
                base = jets.phi(jet)
            else:
                raise ValueError("cannot evaluate f-jets on the big phase space")
            if jet == 0 and base.constant_term() != 0:
                sub_val_positive = False
            for _ in range(exp):
                term = term * base
        out = out + term
    # Terms of p beyond its reliable degree contribute only past that degree
    # provided the order-zero substitutes have no constant term; otherwise
    # nothing beyond the term-product window can be trusted.
    if p.rel is None or sub_val_positive:
        rel = _rel_min(out.rel, p.rel)
    else:
        rel = -1
    terms = out.terms
    if rel is not None:
        terms = {k: c for k, c in terms.items() if mono_degree(k[1]) <= rel}
    return BigSeries(terms, trunc, rel, _checked=True)


def restrict_window(f: BigSeries, trunc: Truncation) -> BigSeries:
    """Project onto a smaller window (degree and level bounds only shrink)."""
    if (trunc.deg_max > f.trunc.deg_max or trunc.level_max > f.trunc.level_max
            or trunc.eps_max > f.trunc.eps_max):
        raise ValueError("windows may only shrink")
    acc = {}
    for (eps, mono), coef in f.terms.items():
        if eps > trunc.eps_max:
            continue
        if mono_max_level(mono) > trunc.level_max:
            continue
        if mono_degree(mono) > trunc.deg_max:
            continue
        acc[(eps, mono)] = coef
    rel = _rel_min(f.rel, trunc.deg_max)
    return BigSeries(acc, trunc, rel, _checked=True)


def restrict_window_up(f: BigSeries, trunc: Truncation) -> BigSeries:
    """Re-home a series into a wider window (bounds may only grow)."""
    if (trunc.deg_max < f.trunc.deg_max or trunc.level_max < f.trunc.level_max
            or trunc.eps_max < f.trunc.eps_max):
        raise ValueError("windows may only grow")
    return BigSeries(dict(f.terms), trunc, f.rel, _checked=True)


def relabel_component(f: BigSeries, alpha: int, trunc: Truncation) -> BigSeries:
    """Embed a rank-1 series as component alpha of a higher-rank theory."""
    acc = {}
    for (eps, mono), coef in f.terms.items():
        factors = []
        for (kind, a0, level), exp in mono:
            if kind != KIND_T:
                raise ValueError("only closed-sector series can be relabeled")
            factors.append((t_var(alpha, level), exp))
        acc[(eps, mono_from_factors(factors))] = coef
    return BigSeries(acc, trunc, f.rel)
