"""Truncated Laurent series in a named local coordinate.

A series stores exact coefficients for exponents ``m .. T`` (inclusive);
anything beyond ``T`` is unknown, and arithmetic propagates that horizon:
sums keep the smaller ``T``, a product of (f, g) is provable to
``min(T_f + m_g, T_g + m_f)``. Consumers that need coefficients past ``T``
get an InsufficientPrecisionError rather than a silent zero.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import DomainError, InsufficientPrecisionError
from .scalars import RATIONALS


class LaurentSeries:
    __slots__ = ("ring", "coord", "m", "coeffs", "T")

    def __init__(self, ring, coord: str, m: int, coeffs, T: int | None = None):
        self.ring = ring
        self.coord = coord
        coeffs = [ring.coerce(c) for c in coeffs]
        if T is None:
            T = m + len(coeffs) - 1
        if T - m + 1 > len(coeffs):
            coeffs = coeffs + [ring.zero] * (T - m + 1 - len(coeffs))
        elif T - m + 1 < len(coeffs):
            raise ValueError("coefficient list does not match exponent range")
        self.m = m
        self.coeffs = coeffs
        self.T = T

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, ring, coord: str, T: int) -> "LaurentSeries":
        return cls(ring, coord, T + 1, [], T)

    @classmethod
    def monomial(cls, ring, coord: str, k: int, T: int, coeff=1) -> "LaurentSeries":
        if k > T:
            return cls.zero(ring, coord, T)
        c = [ring.zero] * (T - k + 1)
        c[0] = ring.coerce(coeff)
        return cls(ring, coord, k, c, T)

    @classmethod
    def constant(cls, ring, coord: str, value, T: int) -> "LaurentSeries":
        return cls.monomial(ring, coord, 0, T, value)

    # -- queries ----------------------------------------------------------

    def __getitem__(self, k: int):
        """Exact coefficient of coord**k; raises past the truncation order."""
        if k > self.T:
            raise InsufficientPrecisionError(
                f"coefficient {k} of series in {self.coord} known only to order {self.T}",
                needed=k,
            )
        if k < self.m:
            return self.ring.zero
        return self.coeffs[k - self.m]

    def known(self, k: int) -> bool:
        return k <= self.T

    def is_zero(self) -> bool:
        return all(self.ring.is_zero(c) for c in self.coeffs)

    def valuation(self) -> int:
        """Exponent of the first nonzero stored coefficient."""
        for i, c in enumerate(self.coeffs):
            if not self.ring.is_zero(c):
                return self.m + i
        raise InsufficientPrecisionError(
            f"series in {self.coord} is zero to order {self.T}; valuation unknown"
        )

    def leading(self):
        return self[self.valuation()]

    def __eq__(self, other):
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        T = min(self.T, other.T)
        lo = min(self.m, other.m)
        return all(self._coeff_eq(other, k) for k in range(lo, T + 1))

    def _coeff_eq(self, other, k):
        return self.ring.is_zero(self[k] - other[k])

    def __repr__(self):
        bits = []
        for i, c in enumerate(self.coeffs):
            if not self.ring.is_zero(c):
                bits.append(f"({c})*{self.coord}^{self.m + i}")
            if len(bits) > 7:
                bits.append("...")
                break
        body = " + ".join(bits) if bits else "0"
        return f"<{body} + O({self.coord}^{self.T + 1})>"

    # -- arithmetic ------------------------------------------------------

    def _check(self, other):
        if self.coord != other.coord:
            raise DomainError(f"series coordinates differ: {self.coord} vs {other.coord}")

    def __add__(self, other):
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        self._check(other)
        T = min(self.T, other.T)
        m = min(self.m, other.m, T + 1)
        coeffs = [self[k] + other[k] for k in range(m, T + 1)]
        return LaurentSeries(self.ring, self.coord, m, coeffs, T)

    def __neg__(self):
        return LaurentSeries(self.ring, self.coord, self.m, [-c for c in self.coeffs], self.T)

    def __sub__(self, other):
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, LaurentSeries):
            return self.scale(other)
        self._check(other)
        T = min(self.T + other.m, other.T + self.m)
        m = self.m + other.m
        n = T - m + 1
        if n <= 0:
            return LaurentSeries.zero(self.ring, self.coord, T)
        out = [self.ring.zero] * n
        for i, a in enumerate(self.coeffs):
            if self.ring.is_zero(a):
                continue
            jmax = min(len(other.coeffs), n - i)
            for j in range(jmax):
                out[i + j] = out[i + j] + a * other.coeffs[j]
        return LaurentSeries(self.ring, self.coord, m, out, T)

    __rmul__ = __mul__

    def scale(self, scalar):
        s = self.ring.coerce(scalar)
        return LaurentSeries(self.ring, self.coord, self.m, [s * c for c in self.coeffs], self.T)

    def shift(self, k: int) -> "LaurentSeries":
        """Multiply by coord**k."""
        return LaurentSeries(self.ring, self.coord, self.m + k, list(self.coeffs), self.T + k)

    def truncate(self, T: int) -> "LaurentSeries":
        if T >= self.T:
            return self
        n = max(0, T - self.m + 1)
        return LaurentSeries(self.ring, self.coord, min(self.m, T + 1), self.coeffs[:n], T)

    def normalized(self) -> "LaurentSeries":
        """Drop leading stored zeros (raises nothing; keeps T)."""
        i = 0
        while i < len(self.coeffs) and self.ring.is_zero(self.coeffs[i]):
            i += 1
        return LaurentSeries(self.ring, self.coord, self.m + i, self.coeffs[i:], self.T)

    def inverse(self) -> "LaurentSeries":
        """1/f. Needs a unit leading coefficient, or (graded rings) a unit
        somewhere with only nilpotent coefficients below it."""
        ring = self.ring
        f = self.normalized()
        v = f.valuation()
        lead = f[v]
        if ring.is_unit(lead):
            n = f.T - v + 1  # relative orders known
            a = [f[v + i] for i in range(n)]
            inv_lead = ring.inv(lead)
            b = [ring.zero] * n
            b[0] = inv_lead
            for k in range(1, n):
                s = ring.zero
                for j in range(1, min(k, len(a) - 1) + 1):
                    s = s + a[j] * b[k - j]
                b[k] = -inv_lead * s
            return LaurentSeries(ring, self.coord, -v, b, -v + n - 1)
        # graded path: leading coefficients are nilpotent (e.g. positive degree
        # in a truncated parameter ring); factor off the unit part and expand
        # the finite geometric series in the nilpotent remainder.
        u_idx = None
        for k in range(v, f.T + 1):
            if ring.is_unit(f[k]):
                u_idx = k
                break
        if u_idx is None:
            raise DomainError("series inverse: no unit coefficient available")
        U = LaurentSeries(ring, f.coord, u_idx, [f[k] for k in range(u_idx, f.T + 1)], f.T)
        L = f - U
        Uinv = U.inverse()
        LU = (L * Uinv).scale(ring.coerce(-1))
        total = None
        term = LaurentSeries.monomial(ring, f.coord, 0, LU.T - min(LU.m, 0), 1)
        for _ in range(64):
            total = term if total is None else total + term
            term = term * LU
            if term.is_zero():
                break
        else:
            raise DomainError("graded series inverse did not terminate")
        return total * Uinv

    def __truediv__(self, other):
        if isinstance(other, LaurentSeries):
            return self * other.inverse()
        return self.scale(self.ring.inv(self.ring.coerce(other)))

    def pow_int(self, n: int) -> "LaurentSeries":
        if n < 0:
            return self.inverse().pow_int(-n)
        if n == 0:
            return LaurentSeries.monomial(self.ring, self.coord, 0, self.T, 1)
        acc = None
        base = self
        k = n
        while k:
            if k & 1:
                acc = base if acc is None else acc * base
            k >>= 1
            if k:
                base = base * base
        return acc

    # -- calculus ---------------------------------------------------------

    def derivative(self) -> "LaurentSeries":
        coeffs = []
        for i, c in enumerate(self.coeffs):
            k = self.m + i
            coeffs.append(self.ring.coerce(k) * c)
        return LaurentSeries(self.ring, self.coord, self.m - 1, coeffs, self.T - 1)

    def integrate(self) -> "LaurentSeries":
        """Term-wise primitive with zero constant; the coord**-1 term must vanish."""
        if self.m <= -1 <= self.T and not self.ring.is_zero(self[-1]):
            raise DomainError("series has a nonzero residue; primitive is not a Laurent series")
        coeffs = []
        for i, c in enumerate(self.coeffs):
            k = self.m + i
            if k == -1:
                coeffs.append(self.ring.zero)
            else:
                coeffs.append(c * self.ring.coerce(Fraction(1, k + 1)))
        out = LaurentSeries(self.ring, self.coord, self.m + 1, coeffs, self.T + 1)
        # re-impose a zero constant term
        if out.m <= 0 <= out.T:
            c2 = list(out.coeffs)
            c2[0 - out.m] = self.ring.zero
            out = LaurentSeries(self.ring, self.coord, out.m, c2, out.T)
        return out

    def residue(self):
        """Coefficient of coord**-1 (of the 1-form f dcoord)."""
        if self.T < -1:
            raise InsufficientPrecisionError(
                f"residue needs order >= -1, have {self.T}", needed=-1
            )
        return self[-1]


# -- composition, reversion, elementary functions -------------------------


def series_compose(f: LaurentSeries, g: LaurentSeries) -> LaurentSeries:
    """f(g(.)): f may be Laurent if g is invertible; g needs valuation >= 1.

    Result carries the coordinate of g and the provable truncation
    min(T_g + (v-1)*m_f-ish bound, v*(T_f+1) - 1) for the power-series part.
    """
    ring = f.ring
    try:
        v = g.valuation()
    except InsufficientPrecisionError:
        raise DomainError("composition needs g with known positive valuation")
    if v <= 0:
        raise DomainError("composition needs g with strictly positive minimal exponent")

    fpos = f if f.m >= 0 else LaurentSeries(ring, f.coord, 0, f.coeffs[-f.m :], f.T)
    T_out = min(g.T, v * (fpos.T + 1) - 1)
    # Horner evaluation of the power-series part of f at g.
    acc = LaurentSeries.constant(ring, g.coord, fpos[fpos.T] if fpos.T >= fpos.m else ring.zero, T_out)
    gt = g.truncate(T_out)
    for k in range(fpos.T - 1, -1, -1):
        acc = acc * gt
        acc = acc + LaurentSeries.constant(ring, g.coord, fpos[k], acc.T)
    acc = acc.truncate(T_out)
    if f.m < 0:
        ginv = gt.inverse()
        neg = LaurentSeries.zero(ring, g.coord, acc.T)
        p = ginv
        for k in range(1, -f.m + 1):
            c = f[-k]
            if not ring.is_zero(c):
                neg = neg + p.scale(c)
            if k < -f.m:
                p = p * ginv
        acc = acc + neg
    return acc


def series_reversion(f: LaurentSeries) -> LaurentSeries:
    """Compositional inverse of f = c1*x + c2*x^2 + ...; c1 must be a unit."""
    ring = f.ring
    f = f.normalized()
    if f.m < 0 or (f.m <= 0 <= f.T and not ring.is_zero(f[0])):
        raise DomainError("reversion needs a series vanishing at the origin")
    c1 = f[1]
    if not ring.is_unit(c1):
        raise DomainError("reversion needs a unit linear coefficient")
    T = f.T
    if T < 1:
        raise InsufficientPrecisionError("reversion needs order >= 1", needed=1)
    inv_c1 = ring.inv(c1)
    w = f.coord
    g = LaurentSeries.monomial(ring, w, 1, T, inv_c1)
    # Fixed-point refinement: each sweep fixes one further order.
    for _ in range(T - 1):
        fg = series_compose(f, g)
        err = fg - LaurentSeries.monomial(ring, w, 1, fg.T, 1)
        if err.is_zero():
            break
        g = g - err.scale(inv_c1)
        g = g.truncate(T)
    return g


def _ode_elem(kind, r, f: LaurentSeries) -> LaurentSeries:
    """Solve the defining first-order recurrence for exp/log1p/(1+f)^r."""
    ring = f.ring
    T = f.T
    if f.m < 1 and not (f.m <= 0 and all(ring.is_zero(f[k]) for k in range(f.m, min(0, f.T) + 1))):
        raise DomainError(f"{kind} needs a series with positive valuation")
    n = T + 1
    a = [f[k] for k in range(0, T + 1)]  # a[0] == 0
    out = [ring.zero] * n
    if kind == "exp":
        out[0] = ring.one
        # y' = y f'  =>  k*y_k = sum_{j=1..k} j*a_j*y_{k-j}
        for k in range(1, n):
            s = ring.zero
            for j in range(1, k + 1):
                s = s + ring.coerce(j) * a[j] * out[k - j]
            out[k] = s * ring.coerce(Fraction(1, k))
    elif kind == "log1p":
        # y = log(1+f): y' (1+f) = f'  =>  k*y_k = k*a_k - sum_{j=1..k-1} j*y_j*a_{k-j}
        for k in range(1, n):
            s = ring.coerce(k) * a[k]
            for j in range(1, k):
                s = s - ring.coerce(j) * out[j] * a[k - j]
            out[k] = s * ring.coerce(Fraction(1, k))
    elif kind == "pow":
        # y = (1+f)^r: y'(1+f) = r f' y
        out[0] = ring.one
        rr = ring.coerce(r)
        for k in range(1, n):
            s = ring.zero
            for j in range(1, k + 1):
                s = s + (rr * ring.coerce(j) - ring.coerce(k - j)) * a[j] * out[k - j]
            out[k] = s * ring.coerce(Fraction(1, k))
    else:  # pragma: no cover
        raise ValueError(kind)
    return LaurentSeries(ring, f.coord, 0, out, T)


def series_elem(kind: str, f: LaurentSeries, r=None) -> LaurentSeries:
    """Elementary formal series: exp(f), log(1+f), sqrt(1+f), (1+f)^r."""
    if kind == "exp":
        return _ode_elem("exp", None, f)
    if kind == "log1p":
        return _ode_elem("log1p", None, f)
    if kind == "sqrt1p":
        return _ode_elem("pow", Fraction(1, 2), f)
    if kind == "pow":
        if r is None:
            raise DomainError("pow needs a rational exponent")
        return _ode_elem("pow", Fraction(r), f)
    raise DomainError(f"unknown elementary series kind {kind!r}")


def residue(f: LaurentSeries, as_form: bool = True):
    """Residue of f(z) dz, i.e. the exact coefficient of z**-1."""
    return f.residue()
