"""Pluggable coefficient rings.

Three realizations, as interchangeable as the engine allows:

* exact rationals (``fractions.Fraction``),
* arbitrary-precision floats (mpmath, >= 64 significand bits),
* truncated polynomials over Q in a declared set of formal parameters
  (loop fugacities, formal face weights, adjoined log constants), with a
  global total-degree cutoff carried by every value.

A ring object knows how to build, test and serialize scalars; the scalars
themselves are plain values combined with the usual operators.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

import mpmath

from .errors import RingDivisionByNonUnit


class RationalRing:
    """Exact rational scalars."""

    name = "rational"
    exact = True

    zero = Fraction(0)
    one = Fraction(1)

    def from_rational(self, x) -> Fraction:
        return Fraction(x)

    coerce = from_rational

    def is_zero(self, x) -> bool:
        return x == 0

    def is_unit(self, x) -> bool:
        return x != 0

    def inv(self, x) -> Fraction:
        if x == 0:
            raise RingDivisionByNonUnit("division by zero rational")
        return Fraction(1) / x

    def serialize(self, x) -> str:
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)

    def parse(self, s: str) -> Fraction:
        return Fraction(s)

    def __repr__(self):
        return "RationalRing()"

    def __eq__(self, other):
        return isinstance(other, RationalRing)

    def __hash__(self):
        return hash("RationalRing")


class FloatRing:
    """mpmath floats (possibly complex) at a configured binary precision.

    Zero tests use an absolute threshold; the paper's analysis is exact, so
    the threshold only matters for pivoting and pole-order decisions.
    """

    name = "float"
    exact = False

    def __init__(self, prec_bits: int = 128, zero_tol=None):
        if prec_bits < 64:
            raise ValueError("float realization needs >= 64 significand bits")
        self.prec_bits = prec_bits
        mpmath.mp.prec = max(mpmath.mp.prec, prec_bits)
        self.zero_tol = mpmath.mpf(10) ** (-30) if zero_tol is None else mpmath.mpf(zero_tol)
        self.zero = mpmath.mpf(0)
        self.one = mpmath.mpf(1)

    def from_rational(self, x):
        x = Fraction(x)
        return mpmath.mpf(x.numerator) / mpmath.mpf(x.denominator)

    def coerce(self, x):
        if isinstance(x, (mpmath.mpf, mpmath.mpc)):
            return x
        if isinstance(x, (int, Fraction)):
            return self.from_rational(x)
        return mpmath.mpmathify(x)

    def is_zero(self, x) -> bool:
        return abs(x) < self.zero_tol

    def is_unit(self, x) -> bool:
        return not self.is_zero(x)

    def inv(self, x):
        if self.is_zero(x):
            raise RingDivisionByNonUnit("division by float below zero threshold")
        return 1 / x

    def serialize(self, x) -> str:
        return mpmath.nstr(x, int(self.prec_bits * 0.301) + 2)

    def parse(self, s: str):
        return mpmath.mpmathify(s)

    def __repr__(self):
        return f"FloatRing(prec_bits={self.prec_bits})"

    def __eq__(self, other):
        return isinstance(other, FloatRing) and other.prec_bits == self.prec_bits

    def __hash__(self):
        return hash(("FloatRing", self.prec_bits))


class TruncatedPoly:
    """Element of B[params] modulo total degree > D, over a base ring B.

    Immutable. ``terms`` maps exponent tuples to nonzero base scalars; the
    degree bound ``D`` travels with the value and every product re-truncates.
    """

    __slots__ = ("ring", "terms")

    def __init__(self, ring: "ParamRing", terms: dict):
        self.ring = ring
        base = ring.base
        self.terms = {
            e: c for e, c in terms.items() if not base.is_zero(c) and sum(e) <= ring.degree
        }

    # -- helpers -------------------------------------------------------

    def _lift(self, other):
        if isinstance(other, TruncatedPoly):
            if other.ring != self.ring:
                raise ValueError("mixed parameter rings")
            return other
        if isinstance(other, (int, Fraction)):
            return self.ring.from_rational(other)
        try:
            return self.ring.from_base(self.ring.base.coerce(other))
        except (TypeError, ValueError):
            return NotImplemented

    @property
    def constant_term(self):
        return self.terms.get(self.ring._zero_exp, self.ring.base.zero)

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    # -- ring operations ----------------------------------------------

    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return NotImplemented
        terms = dict(self.terms)
        for e, c in o.terms.items():
            terms[e] = terms[e] + c if e in terms else c
        return TruncatedPoly(self.ring, terms)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedPoly(self.ring, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return NotImplemented
        D = self.ring.degree
        terms: dict = {}
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            for e2, c2 in o.terms.items():
                if d1 + sum(e2) > D:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms[e] + c1 * c2 if e in terms else c1 * c2
        return TruncatedPoly(self.ring, terms)

    __rmul__ = __mul__

    def inv(self):
        base = self.ring.base
        c0 = self.constant_term
        if not base.is_unit(c0):
            raise RingDivisionByNonUnit("parameter-ring element with non-unit constant term")
        # (c0 + h)^-1 = c0^-1 sum (-h/c0)^k, finite because h is nilpotent mod degree.
        h = self - self.ring.from_base(c0)
        inv_c0 = base.inv(c0)
        result = self.ring.from_base(inv_c0)
        power = self.ring.one
        for _ in range(self.ring.degree):
            power = power * h * (-1 * inv_c0)
            if not power.terms:
                break
            result = result + power * inv_c0
        return result

    def __truediv__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inv()

    def __rtruediv__(self, other):
        return self.ring.from_rational(other) * self.inv()

    def __pow__(self, n: int):
        if n < 0:
            return self.inv() ** (-n)
        result = self.ring.one
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return NotImplemented
        return self.terms == o.terms

    def __hash__(self):
        return hash((self.ring, tuple(sorted(self.terms.items()))))

    def truncate(self, degree: int) -> "TruncatedPoly":
        return TruncatedPoly(self.ring, {e: c for e, c in self.terms.items() if sum(e) <= degree})

    def coefficient(self, exponents) -> Fraction:
        return self.terms.get(tuple(exponents), Fraction(0))

    def subs(self, values: dict):
        """Evaluate at numeric parameter values; returns a base scalar."""
        out = self.ring.base.zero
        vals = [self.ring.base.coerce(values[n]) for n in self.ring.params]
        for e, c in self.terms.items():
            term = c
            for v, k in zip(vals, e):
                term = term * v**k
            out = out + term
        return out

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for e, c in sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0])):
            mono = "*".join(
                f"{n}^{k}" if k > 1 else n for n, k in zip(self.ring.params, e) if k
            )
            bits.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


class ParamRing:
    """Truncated multivariate polynomial ring B[params]/(deg > D)."""

    name = "ring"

    def __init__(self, params: Iterable[str], degree: int, base=None):
        self.base = base if base is not None else RationalRing()
        self.exact = self.base.exact
        self.params = tuple(params)
        self.degree = int(degree)
        self._zero_exp = (0,) * len(self.params)
        self.zero = TruncatedPoly(self, {})
        self.one = TruncatedPoly(self, {self._zero_exp: self.base.one})

    def from_rational(self, x) -> TruncatedPoly:
        return TruncatedPoly(self, {self._zero_exp: self.base.from_rational(Fraction(x))})

    def from_base(self, x) -> TruncatedPoly:
        return TruncatedPoly(self, {self._zero_exp: x})

    def coerce(self, x) -> TruncatedPoly:
        if isinstance(x, TruncatedPoly):
            if x.ring != self:
                raise ValueError("mixed parameter rings")
            return x
        if isinstance(x, (int, Fraction)):
            return self.from_rational(x)
        return self.from_base(self.base.coerce(x))

    def gen(self, name: str) -> TruncatedPoly:
        e = [0] * len(self.params)
        e[self.params.index(name)] = 1
        return TruncatedPoly(self, {tuple(e): self.base.one})

    def is_zero(self, x) -> bool:
        return not self.coerce(x).terms

    def is_unit(self, x) -> bool:
        return self.base.is_unit(self.coerce(x).constant_term)

    def inv(self, x) -> TruncatedPoly:
        return self.coerce(x).inv()

    def serialize(self, x) -> str:
        x = self.coerce(x)
        items = sorted(x.terms.items(), key=lambda t: (sum(t[0]), t[0]))
        return (
            "["
            + ",".join(
                "{" + ",".join(map(str, e)) + ":" + self.base.serialize(c) + "}"
                for e, c in items
            )
            + "]"
        )

    def parse(self, s: str) -> TruncatedPoly:
        s = s.strip()
        if not (s.startswith("[") and s.endswith("]")):
            raise ValueError(f"bad ring scalar: {s!r}")
        terms = {}
        body = s[1:-1]
        if body:
            for chunk in body.split("},{"):
                chunk = chunk.strip("{}")
                epart, _, cpart = chunk.rpartition(":")
                e = tuple(int(t) for t in epart.split(","))
                terms[e] = self.base.parse(cpart)
        return TruncatedPoly(self, terms)

    def __repr__(self):
        return f"ParamRing(params={self.params}, degree={self.degree})"

    def __eq__(self, other):
        return (
            isinstance(other, ParamRing)
            and other.params == self.params
            and other.degree == self.degree
            and other.base == self.base
        )

    def __hash__(self):
        return hash(("ParamRing", self.params, self.degree, self.base))


RATIONALS = RationalRing()


def ring_of(realization: str):
    """Parse a realization spec: ``rational``, ``float:<bits>``, ``ring:<p1,p2>:<degree>``."""
    if realization == "rational":
        return RATIONALS
    if realization.startswith("float"):
        bits = int(realization.split(":")[1]) if ":" in realization else 128
        return FloatRing(bits)
    if realization.startswith("ring:"):
        _, params, degree = realization.split(":")
        return ParamRing([p for p in params.split(",") if p], int(degree))
    raise ValueError(f"unknown scalar realization {realization!r}")
