"""Polynomials and rational functions in one variable over a scalar ring.

Rational functions are kept in reduced form with a monic denominator in the
exact-rational realization, so serialized output is bit-reproducible.
Expansion of a rational function at a finite point or at infinity produces a
LaurentSeries; that is the bridge from global data to residue calculus.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import (
    DomainError,
    FactorizationIncompleteError,
    RingDivisionByNonUnit,
)
from .scalars import RATIONALS, RationalRing
from .series import LaurentSeries


class Polynomial:
    __slots__ = ("ring", "var", "coeffs")

    def __init__(self, ring, var: str, coeffs):
        self.ring = ring
        self.var = var
        cs = [ring.coerce(c) for c in coeffs]
        while cs and ring.is_zero(cs[-1]):
            cs.pop()
        self.coeffs = cs

    # -- basics -----------------------------------------------------------

    @classmethod
    def const(cls, ring, var, value):
        return cls(ring, var, [value])

    @classmethod
    def x(cls, ring, var):
        return cls(ring, var, [0, 1])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if self.coeffs else -1

    def is_zero(self) -> bool:
        return not self.coeffs

    def leading(self):
        if not self.coeffs:
            raise DomainError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def __getitem__(self, k):
        return self.coeffs[k] if 0 <= k <= self.degree else self.ring.zero

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        if self.degree != other.degree:
            return False
        return all(self.ring.is_zero(a - b) for a, b in zip(self.coeffs, other.coeffs))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(
            f"({c})*{self.var}^{k}" if k else f"({c})"
            for k, c in enumerate(self.coeffs)
            if not self.ring.is_zero(c)
        )

    # -- arithmetic ---------------------------------------------------------

    def _co(self, other):
        if isinstance(other, Polynomial):
            if other.var != self.var:
                raise DomainError("mixed polynomial variables")
            return other
        return Polynomial.const(self.ring, self.var, other)

    def __add__(self, other):
        o = self._co(other)
        n = max(len(self.coeffs), len(o.coeffs))
        return Polynomial(
            self.ring, self.var, [self[k] + o[k] for k in range(n)]
        )

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.ring, self.var, [-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-self._co(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._co(other)
        if self.is_zero() or o.is_zero():
            return Polynomial(self.ring, self.var, [])
        out = [self.ring.zero] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if self.ring.is_zero(a):
                continue
            for j, b in enumerate(o.coeffs):
                out[i + j] = out[i + j] + a * b
        return Polynomial(self.ring, self.var, out)

    __rmul__ = __mul__

    def scale(self, s):
        s = self.ring.coerce(s)
        return Polynomial(self.ring, self.var, [s * c for c in self.coeffs])

    def __pow__(self, n: int):
        result = Polynomial.const(self.ring, self.var, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def divmod(self, other):
        """Euclidean division; the divisor's leading coefficient must be a unit."""
        o = self._co(other)
        if o.is_zero():
            raise DomainError("division by zero polynomial")
        if not self.ring.is_unit(o.leading()):
            raise RingDivisionByNonUnit("divisor leading coefficient is not a unit")
        inv_lead = self.ring.inv(o.leading())
        rem = list(self.coeffs)
        q = [self.ring.zero] * max(0, len(rem) - len(o.coeffs) + 1)
        for k in range(len(rem) - len(o.coeffs), -1, -1):
            c = rem[k + o.degree] * inv_lead
            q[k] = c
            if not self.ring.is_zero(c):
                for j, b in enumerate(o.coeffs):
                    rem[k + j] = rem[k + j] - c * b
        return (
            Polynomial(self.ring, self.var, q),
            Polynomial(self.ring, self.var, rem[: max(0, o.degree)]),
        )

    def __floordiv__(self, other):
        return self.divmod(other)[0]

    def __mod__(self, other):
        return self.divmod(other)[1]

    def derivative(self):
        return Polynomial(
            self.ring,
            self.var,
            [self.ring.coerce(k) * c for k, c in enumerate(self.coeffs)][1:],
        )

    # -- evaluation -----------------------------------------------------------

    def __call__(self, x):
        acc = self.ring.zero
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def eval_series(self, s: LaurentSeries) -> LaurentSeries:
        """Horner evaluation on a LaurentSeries argument (nonnegative valuation)."""
        acc = LaurentSeries.constant(s.ring, s.coord, self.ring.zero, s.T)
        for c in reversed(self.coeffs):
            acc = acc * s + LaurentSeries.constant(s.ring, s.coord, c, acc.T)
        return acc

    def gcd(self, other):
        """Monic gcd; exact-rational scalars only."""
        if not isinstance(self.ring, RationalRing):
            raise DomainError("polynomial gcd only supported over exact rationals")
        a, b = self, self._co(other)
        while not b.is_zero():
            a, b = b, a % b
        if a.is_zero():
            return a
        return a.scale(self.ring.inv(a.leading()))

    def rational_roots(self):
        """All rational roots with multiplicity: list of (root, mult).

        Exact-rational scalars only; uses the rational-root theorem on the
        cleared-denominator polynomial, then peels roots off by division.
        """
        if not isinstance(self.ring, RationalRing):
            raise DomainError("exact root finding only over rationals")
        p = self
        roots = []
        found = True
        while p.degree > 0 and found:
            found = False
            for cand in _rational_root_candidates(p):
                if p(cand) == 0:
                    mult = 0
                    lin = Polynomial(self.ring, self.var, [-cand, 1])
                    while True:
                        q, r = p.divmod(lin)
                        if r.is_zero():
                            p = q
                            mult += 1
                        else:
                            break
                    roots.append((cand, mult))
                    found = True
                    break
        return roots, p  # p is the rootless cofactor


def _divisors(n: int):
    n = abs(n)
    out = set()
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.add(d)
            out.add(n // d)
        d += 1
    return sorted(out)


def _rational_root_candidates(p: Polynomial):
    from math import lcm

    den = lcm(*[c.denominator for c in p.coeffs]) if p.coeffs else 1
    ints = [int(c * den) for c in p.coeffs]
    while ints and ints[0] == 0:
        ints = ints[1:]
        yield Fraction(0)
    if not ints:
        return
    for pnum in _divisors(ints[0]):
        for qden in _divisors(ints[-1]):
            yield Fraction(pnum, qden)
            yield Fraction(-pnum, qden)


class PrincipalPart:
    """Sum_{k=1..K} a_k/(z - alpha)^k; a_K nonzero unless empty."""

    __slots__ = ("ring", "var", "alpha", "coeffs")

    def __init__(self, ring, var, alpha, coeffs):
        self.ring = ring
        self.var = var
        self.alpha = ring.coerce(alpha)
        cs = [ring.coerce(c) for c in coeffs]
        while cs and ring.is_zero(cs[-1]):
            cs.pop()
        self.coeffs = cs  # coeffs[k-1] = a_k

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def __repr__(self):
        return " + ".join(
            f"({c})/({self.var}-({self.alpha}))^{k + 1}" for k, c in enumerate(self.coeffs)
        ) or "0"

    def as_rational(self) -> "RationalFunction":
        var = self.var
        lin = Polynomial(self.ring, var, [-self.alpha, 1])
        num = Polynomial(self.ring, var, [])
        for k, a in enumerate(self.coeffs):
            num = num + Polynomial.const(self.ring, var, a) * lin ** (self.order - 1 - k)
        return RationalFunction(num, lin**self.order)


class RationalFunction:
    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial, den: Polynomial, reduce: bool = True):
        if den.is_zero():
            raise DomainError("zero denominator")
        if num.var != den.var:
            raise DomainError("mixed variables in rational function")
        if reduce and isinstance(num.ring, RationalRing) and not num.is_zero():
            g = num.gcd(den)
            if g.degree > 0:
                num = num // g
                den = den // g
        # normalize to a monic denominator when the leading coeff is a unit
        if den.coeffs and den.ring.is_unit(den.leading()):
            inv = den.ring.inv(den.leading())
            num = num.scale(inv)
            den = den.scale(inv)
        self.num = num
        self.den = den

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_poly(cls, p: Polynomial):
        return cls(p, Polynomial.const(p.ring, p.var, 1), reduce=False)

    @classmethod
    def const(cls, ring, var, value):
        return cls.from_poly(Polynomial.const(ring, var, value))

    @classmethod
    def x(cls, ring, var):
        return cls.from_poly(Polynomial.x(ring, var))

    @property
    def ring(self):
        return self.num.ring

    @property
    def var(self):
        return self.num.var

    def is_zero(self):
        return self.num.is_zero()

    def __eq__(self, other):
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return (self.num * other.den - other.num * self.den).is_zero()

    def __repr__(self):
        return f"({self.num}) / ({self.den})"

    # -- arithmetic -----------------------------------------------------------

    def _co(self, other):
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, Polynomial):
            return RationalFunction.from_poly(other)
        return RationalFunction.const(self.ring, self.var, other)

    def __add__(self, other):
        o = self._co(other)
        return RationalFunction(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den, reduce=False)

    def __sub__(self, other):
        return self + (-self._co(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._co(other)
        return RationalFunction(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._co(other)
        if o.num.is_zero():
            raise DomainError("division by zero rational function")
        return RationalFunction(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        return self._co(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return (RationalFunction.const(self.ring, self.var, 1) / self) ** (-n)
        return RationalFunction(self.num**n, self.den**n, reduce=False)

    def derivative(self):
        return RationalFunction(
            self.num.derivative() * self.den - self.num * self.den.derivative(),
            self.den * self.den,
        )

    # -- evaluation / expansion -------------------------------------------------

    def __call__(self, x):
        d = self.den(x)
        if not self.ring.is_unit(d):
            raise DomainError("evaluation at a pole")
        return self.num(x) * self.ring.inv(d)

    def eval_series(self, s: LaurentSeries) -> LaurentSeries:
        return self.num.eval_series(s) * self.den.eval_series(s).inverse()

    def expand_at(self, alpha, T: int, coord: str | None = None) -> LaurentSeries:
        """Laurent expansion in zeta at z = alpha + zeta, to order T."""
        ring = self.ring
        coord = coord or f"{self.var}@{alpha}"
        # generous working order: a denominator zero of order v at alpha costs 2v
        wT = max(T + 2 * max(0, self.den.degree), 1)
        local = LaurentSeries(ring, coord, 0, [ring.coerce(alpha), ring.one], wT)
        return self.eval_series(local).truncate(T)

    def expand_at_infinity(self, T: int, coord: str = "w") -> LaurentSeries:
        """Expansion in w = 1/z to order T (as a function, no form factor)."""
        ring = self.ring
        n, d = self.num, self.den
        pad = T + n.degree + d.degree + 2
        w = LaurentSeries.monomial(ring, coord, 1, pad, 1)
        num_s = _eval_poly_reversed(n, w)
        den_s = _eval_poly_reversed(d, w)
        # f(1/w) = w^(deg d - deg n) * rev(n)(w)/rev(d)(w)
        return (num_s * den_s.inverse()).shift(d.degree - n.degree).truncate(T)

    def residue_at(self, alpha):
        """Residue of f(z) dz at z = alpha."""
        # order of the pole
        k = 0
        den = self.den
        lin = Polynomial(self.ring, self.var, [-self.ring.coerce(alpha), 1])
        while True:
            q, r = den.divmod(lin)
            if r.is_zero():
                den = q
                k += 1
            else:
                break
        if k == 0:
            return self.ring.zero
        ser = self.expand_at(alpha, 0)
        return ser[-1]


def _eval_poly_reversed(p: Polynomial, w: LaurentSeries) -> LaurentSeries:
    """w^deg(p) * p(1/w) as a series in w."""
    acc = LaurentSeries.constant(w.ring, w.coord, p.ring.zero, w.T)
    for c in p.coeffs:
        acc = acc * w + LaurentSeries.constant(w.ring, w.coord, c, acc.T)
    return acc


def partial_fractions(r: RationalFunction, poles):
    """Decompose r into principal parts at the given poles plus a polynomial.

    The denominator must factor completely over `poles` (with multiplicity);
    otherwise FactorizationIncompleteError is raised. Exact over any ring in
    which the cofactor values at each pole are units.
    """
    ring = r.ring
    var = r.var
    polypart, rem = r.num.divmod(r.den)
    parts = []
    den = r.den
    total_mult = 0
    for alpha in poles:
        alpha = ring.coerce(alpha)
        lin = Polynomial(ring, var, [-alpha, 1])
        mult = 0
        cof = den
        while True:
            q, rr = cof.divmod(lin)
            if rr.is_zero():
                cof = q
                mult += 1
            else:
                break
        if mult == 0:
            continue
        total_mult += mult
        # rem/den = sum_j b_j zeta^(j-mult) + regular,  b_j from rem/cof at alpha
        taylor = RationalFunction(rem, cof, reduce=False).expand_at(alpha, mult - 1)
        coeffs = [taylor[mult - 1 - (k - 1)] for k in range(1, mult + 1)]
        parts.append(PrincipalPart(ring, var, alpha, coeffs))
    if total_mult < r.den.degree:
        raise FactorizationIncompleteError(
            f"denominator roots not covered by pole list (degree {r.den.degree}, "
            f"matched {total_mult})"
        )
    return parts, polypart


def resum(parts, polypart: Polynomial) -> RationalFunction:
    out = RationalFunction.from_poly(polypart)
    for p in parts:
        out = out + p.as_rational()
    return out
