"""Spectral curves: x-maps, disk data, Bergman kernel, ramification points.

A curve is genus 0 and uniformized by a global coordinate z per species.
Ramification data is held as lazy local-series providers: every series can
be regenerated to any requested order from the closed-form data, so
precision needs of deep recursion levels never require rebuilding the curve.
Curves loaded from fixed serialized series keep hard truncation horizons and
raise InsufficientPrecisionError beyond them.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .errors import (
    DomainError,
    InsufficientPrecisionError,
    NonSimpleBranchpointError,
    OffCriticalViolation,
)
from .polyrat import Polynomial, RationalFunction
from .scalars import RATIONALS, FloatRing, ring_of
from .series import LaurentSeries, series_compose, series_elem, series_reversion


# -- x maps ------------------------------------------------------------------


class XMapRational:
    """x(z) rational in the uniformizer."""

    kind = "rational"

    def __init__(self, rf: RationalFunction, ram_locations=None):
        self.rf = rf
        self._ram = ram_locations

    @property
    def ring(self):
        return self.rf.ring

    def x_at(self, alpha):
        return self.rf(alpha)

    def local_x(self, alpha, T: int, coord: str | None = None) -> LaurentSeries:
        """x(alpha+z) - x(alpha); double zero at a simple ramification point."""
        s = self.rf.expand_at(alpha, T, coord=coord)
        return s - LaurentSeries.constant(s.ring, s.coord, s[0], s.T)

    def ramification_locations(self):
        if self._ram is not None:
            return [self.ring.coerce(r) for r in self._ram]
        dx = self.rf.derivative()
        if isinstance(self.ring, FloatRing):
            import mpmath

            coeffs = list(reversed(dx.num.coeffs))
            roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=80)
            out = []
            for r in roots:
                if any(self.ring.is_zero(r - r2) for r2 in out):
                    raise NonSimpleBranchpointError(f"repeated dx zero near {r}")
                if self.ring.is_zero(dx.den(r)):
                    continue
                out.append(r)
            return out
        roots, cofactor = dx.num.rational_roots()
        if cofactor.degree > 0:
            raise DomainError(
                "dx has non-rational zeros; exact realization cannot place them: "
                f"residual factor {cofactor}"
            )
        out = []
        for r, mult in roots:
            if not self.ring.is_zero(dx.den(r)):
                if mult > 1:
                    raise NonSimpleBranchpointError(f"dx zero of order {mult} at {r}")
                out.append(self.ring.coerce(r))
        return out


class XMapLogParametric:
    """x given through a rational logarithmic derivative dx/x = h(z) dz.

    The local chart stored for ramification points is ln(x(a+z)/x(a)); it has
    the same double zero and the same deck involution as x - x(a), and avoids
    the (transcendental) value x(a).
    """

    kind = "parametric"

    def __init__(self, dlog: RationalFunction, ram_locations):
        self.dlog = dlog  # coefficient of dz in dx/x
        self._ram = list(ram_locations)

    @property
    def ring(self):
        return self.dlog.ring

    def x_at(self, alpha):
        raise DomainError("parametric x-map exposes only logarithmic data")

    def local_x(self, alpha, T: int, coord: str | None = None) -> LaurentSeries:
        return self.dlog.expand_at(alpha, T - 1, coord=coord).integrate()

    def ramification_locations(self):
        return list(self._ram)


# -- disk data (omega_1^0) -----------------------------------------------------


class Omega10Rational:
    """omega_1^0 = f(z) dz with f rational in the uniformizer."""

    def __init__(self, rf: RationalFunction):
        self.rf = rf

    def local_series(self, alpha, T: int, coord: str | None = None) -> LaurentSeries:
        return self.rf.expand_at(alpha, T, coord=coord)

    @property
    def rational(self):
        return self.rf


class Omega10Local:
    """omega_1^0 given by a per-point local-series callback (a, T) -> series."""

    def __init__(self, fn, rational=None):
        self._fn = fn
        self.rational = rational

    def local_series(self, alpha, T: int, coord: str | None = None) -> LaurentSeries:
        return self._fn(alpha, T, coord)


# -- Bergman kernel -------------------------------------------------------------


class BergmanKernel:
    """Genus-0 kernel dz1 dz2/(z1-z2)^2 on each species diagonal.

    ``corrections[(s1, s2)]`` holds truncated-parameter two-point data as a
    tensor {((rid1, k1), (rid2, k2)): coeff} over basis forms
    dz/(z - alpha_rid)^k; off-diagonal species pairs are zero unless a
    correction says otherwise.
    """

    def __init__(self, corrections=None):
        self.corrections = corrections or {}
        self.extra_diagonal = None       # optional hook: (a, iota, iota', T) -> series
        self.extra_kernel_legs = None    # optional hook: (a, T) -> [(basis, weight, AnnulusFun)]
        self.extra_spectator = None      # optional hook: (a, use_iota, iota, iota', T) -> {basis: series}

    def correction_terms(self, s1: int, s2: int):
        return self.corrections.get((s1, s2), {})

    def is_trivial(self):
        return not self.corrections


# -- ramification points ---------------------------------------------------------


class RamificationPoint:
    def __init__(self, rid: str, species: int, location, curve: "SpectralCurve"):
        self.id = rid
        self.species = species
        self.location = location
        self._curve = curve
        self._cache: dict = {}

    # every provider is (re)generated on demand and cached by order

    def _cached(self, key, T, builder):
        got = self._cache.get(key)
        if got is None or got.T < T:
            got = builder(T)
            self._cache[key] = got
        return got.truncate(T)

    @property
    def coord(self) -> str:
        return f"z@{self.id}"

    def local_x(self, T: int) -> LaurentSeries:
        xm = self._curve.x_maps[self.species]
        return self._cached("x", T, lambda TT: xm.local_x(self.location, TT, coord=self.coord))

    def involution(self, T: int) -> LaurentSeries:
        """iota(a+z) - a as a series, linear coefficient -1."""
        return self._cached("iota", T, self._build_involution)

    def _build_involution(self, T: int) -> LaurentSeries:
        ring = self._curve.ring
        xloc = self.local_x(T + 2)
        c2 = xloc[2]
        if ring.is_zero(xloc[0]) is False or ring.is_zero(xloc[1]) is False or not ring.is_unit(c2):
            raise NonSimpleBranchpointError(
                f"x - x(a) does not start at order 2 at {self.id}"
            )
        # xi_hat = z*sqrt1p(h), h = xloc/(c2 z^2) - 1 ; iota = xi_hat^{-1}(-xi_hat)
        h = xloc.shift(-2).scale(ring.inv(c2)) - LaurentSeries.monomial(
            ring, xloc.coord, 0, xloc.T - 2, 1
        )
        xi = series_elem("sqrt1p", h).shift(1)
        inv_xi = series_reversion(xi)
        iota = series_compose(inv_xi, -xi)
        return iota.truncate(T)

    def local_omega10(self, T: int) -> LaurentSeries:
        om = self._curve.omega10[self.species]
        return self._cached(
            "w10", T, lambda TT: om.local_series(self.location, TT, coord=self.coord)
        )

    def delta_series(self, T: int) -> LaurentSeries:
        """(omega_1^0 - iota^* omega_1^0)/dz as a local series."""
        return self._cached("delta", T, self._build_delta)

    def _build_delta(self, T: int) -> LaurentSeries:
        w = self.local_omega10(T + 2)
        iota = self.involution(T + 2)
        pulled = series_compose(w, iota) * iota.derivative()
        return (w - pulled).truncate(T)

    @property
    def delta_leading(self):
        d = self.delta_series(4)
        return d[2]

    def __repr__(self):
        return f"RamificationPoint({self.id}, species={self.species}, a={self.location})"


# -- the curve --------------------------------------------------------------------


class SpectralCurve:
    def __init__(self, ring, x_maps, omega10, bergman: BergmanKernel, name="curve",
                 base_truncation: int = 24, metadata=None):
        self.ring = ring
        self.x_maps = list(x_maps)
        self.omega10 = list(omega10)
        self.bergman = bergman
        self.name = name
        self.base_truncation = base_truncation
        self.metadata = metadata or {}
        self.ram_points: list[RamificationPoint] = []
        self._by_id: dict[str, RamificationPoint] = {}

    @property
    def species_count(self):
        return len(self.x_maps)

    def ram(self, rid: str) -> RamificationPoint:
        return self._by_id[rid]

    def _discover(self):
        self.ram_points = []
        self._by_id = {}
        for s, xm in enumerate(self.x_maps):
            for i, loc in enumerate(xm.ramification_locations()):
                rid = f"a{s}.{i}" if self.species_count > 1 else f"a{i}"
                rp = RamificationPoint(rid, s, loc, self)
                self.ram_points.append(rp)
                self._by_id[rid] = rp

    def validate(self, T: int | None = None):
        """Certify simple branchpoints, involution identities, off-criticality."""
        T = T or self.base_truncation
        ring = self.ring
        for rp in self.ram_points:
            xloc = rp.local_x(T)
            if not (ring.is_zero(xloc[0]) and ring.is_zero(xloc[1]) and ring.is_unit(xloc[2])):
                raise NonSimpleBranchpointError(f"{rp.id}: x - x(a) not a double zero")
            iota = rp.involution(T)
            if not ring.is_zero(iota[1] + ring.one):
                raise NonSimpleBranchpointError(f"{rp.id}: involution slope is not -1")
            # iota(iota) = id and x(iota) = x, both to order T
            ii = series_compose(iota, iota)
            ids = LaurentSeries.monomial(ring, iota.coord, 1, ii.T, 1)
            if not (ii - ids).is_zero():
                raise DomainError(f"{rp.id}: involution does not square to identity")
            xi = series_compose(xloc, iota)
            if not (xi - xloc.truncate(xi.T)).is_zero():
                raise DomainError(f"{rp.id}: x(iota) != x")
        self.offcritical_check(T)

    def offcritical_check(self, T: int | None = None):
        """Delta omega_1^0 must vanish to order exactly 2 at each ramification point.

        Over graded (truncated-parameter) rings the criterion applies to the
        first *unit* coefficient: nilpotent corrections may carry poles of
        positive grading order without spoiling off-criticality.
        """
        T = max(T or 0, 6)
        ring = self.ring
        certificate = {}
        for rp in self.ram_points:
            d = rp.delta_series(T)
            order = None
            for k in range(d.m, T + 1):
                if ring.is_unit(d[k]):
                    order = k
                    break
                if not ring.is_zero(d[k]) and k >= 2:
                    break
            if order != 2:
                raise OffCriticalViolation(
                    f"{rp.id}: Delta omega_1^0 first unit order is {order}, expected 2",
                    point=rp.id,
                    observed_order=order,
                )
            certificate[rp.id] = d[2]
        return certificate


def make_curve(ring, x_maps, omega10, bergman=None, name="curve",
               base_truncation: int = 24, metadata=None, validate_order=None) -> SpectralCurve:
    """Build and certify a spectral curve from providers."""
    curve = SpectralCurve(ring, x_maps, omega10, bergman or BergmanKernel(),
                          name=name, base_truncation=base_truncation, metadata=metadata)
    curve._discover()
    curve.validate(validate_order)
    return curve


# -- local expansion of global objects ---------------------------------------------


def basis_local_series(curve: SpectralCurve, rid_k, at: RamificationPoint, T: int) -> LaurentSeries:
    """Expansion at `at` of the basis 1-form dz/(z - alpha')^k, as dzeta coefficient."""
    rid, k = rid_k
    src = curve.ram(rid)
    ring = curve.ring
    coord = f"z@{at.id}"
    if src.id == at.id:
        return LaurentSeries.monomial(ring, coord, -k, T, 1)
    if src.species != at.species:
        raise DomainError("basis form and expansion point live on different species")
    gap = at.location - src.location
    base = LaurentSeries(ring, coord, 0, [gap, ring.one], T + 2 * k)
    return base.inverse().pow_int(k).truncate(T)


def local_expand(curve: SpectralCurve, form, alpha_or_rid, T: int) -> LaurentSeries:
    """Expand a global 1-form (RationalFunction coefficient of dz, or basis tuple).

    pole-on-expansion-point errors surface as DomainError from series division.
    """
    rp = alpha_or_rid if isinstance(alpha_or_rid, RamificationPoint) else curve.ram(alpha_or_rid)
    if isinstance(form, RationalFunction):
        return form.expand_at(rp.location, T, coord=f"z@{rp.id}")
    if isinstance(form, tuple) and len(form) == 2:
        return basis_local_series(curve, form, rp, T)
    raise DomainError(f"cannot expand object of type {type(form)!r}")


# -- curve-spec files ----------------------------------------------------------------


def _poly_to_json(p: Polynomial, ring):
    return [ring.serialize(c) for c in p.coeffs]


def _poly_from_json(ring, var, data):
    return Polynomial(ring, var, [ring.parse(s) for s in data])


def _rf_to_json(rf: RationalFunction, ring):
    return {"num": _poly_to_json(rf.num, ring), "den": _poly_to_json(rf.den, ring)}


def _rf_from_json(ring, var, data):
    return RationalFunction(
        _poly_from_json(ring, var, data["num"]), _poly_from_json(ring, var, data["den"])
    )


def curve_to_spec(curve: SpectralCurve) -> dict:
    ring = curve.ring
    if not all(isinstance(xm, XMapRational) for xm in curve.x_maps):
        raise DomainError("only rational curves serialize to CurveSpec files")
    return {
        "species": curve.species_count,
        "truncation": curve.base_truncation,
        "name": curve.name,
        "x": [{"type": "rational", "data": _rf_to_json(xm.rf, ring)} for xm in curve.x_maps],
        "omega10": [_rf_to_json(om.rational, ring) for om in curve.omega10],
        "bergman": "genus0" if curve.bergman.is_trivial() else "corrected",
    }


def curve_from_spec(spec: dict, realization: str = "rational") -> SpectralCurve:
    ring = ring_of(realization)
    var = "z"
    x_maps = [XMapRational(_rf_from_json(ring, var, e["data"])) for e in spec["x"]]
    omega10 = [Omega10Rational(_rf_from_json(ring, var, e)) for e in spec["omega10"]]
    return make_curve(
        ring, x_maps, omega10, BergmanKernel(), name=spec.get("name", "curve"),
        base_truncation=int(spec.get("truncation", 24)),
    )


def load_curve(path: str, realization: str = "rational") -> SpectralCurve:
    with open(path) as fh:
        return curve_from_spec(json.load(fh), realization)
