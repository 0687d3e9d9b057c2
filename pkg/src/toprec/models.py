"""The application spectral curves: map models and torus knots.

One-cut map curves are built in the Zhukovsky uniformizer
x = c + gamma (z + 1/z); the cut endpoint equations take the form
"the coefficient function of omega_1^0 vanishes at z = +/-1" and are solved
by an exact 2x2 Newton iteration (jet-valued, so it runs unchanged over
rationals, floats and truncated parameter rings).
"""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath

from .curve import (
    BergmanKernel,
    Omega10Local,
    Omega10Rational,
    SpectralCurve,
    XMapLogParametric,
    XMapRational,
    make_curve,
)
from .errors import (
    DomainError,
    EndpointSolveFailure,
    MultiCutDetected,
    NonCoprimeError,
)
from .polyrat import Polynomial, RationalFunction
from .scalars import RATIONALS, FloatRing, ParamRing
from .series import LaurentSeries, series_elem


# -- model description -------------------------------------------------------------


class MapModelSpec:
    """Vertex weight u*u_k, face weights t_{k,j}, expansion points Lambda_k,
    and (for loop models) two-point interactions R_{k,l} with fugacities rho_{k,l}."""

    def __init__(self, species=1, uu=None, t=None, Lambda=None, rho=None, R=None, D=0):
        self.species = species
        self.uu = uu if uu is not None else [Fraction(1)] * species
        self.t = t if t is not None else [dict() for _ in range(species)]
        self.Lambda = Lambda if Lambda is not None else [Fraction(0)] * species
        self.rho = rho or {}
        self.R = R or {}
        self.D = D

    def rho_at(self, k, l):
        return self.rho.get((k, l), self.rho.get((l, k), 0))


# -- jets: forward-mode derivatives for the endpoint Newton solve ----------------------


class _Jet:
    """value + eps1*d1 + eps2*d2 with eps_i*eps_j = 0."""

    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1, d2):
        self.v, self.d1, self.d2 = v, d1, d2

    def __add__(self, o):
        if isinstance(o, _Jet):
            return _Jet(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
        return _Jet(self.v + o, self.d1, self.d2)

    __radd__ = __add__

    def __neg__(self):
        return _Jet(-self.v, -self.d1, -self.d2)

    def __sub__(self, o):
        return self + (-o if isinstance(o, _Jet) else -o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, _Jet):
            return _Jet(self.v * o.v, self.v * o.d1 + self.d1 * o.v,
                        self.v * o.d2 + self.d2 * o.v)
        return _Jet(self.v * o, self.d1 * o, self.d2 * o)

    __rmul__ = __mul__


def _zhukovsky_disk_coeffs(ring, uu, Lambda, tcoeffs, c, gamma):
    """Laurent coefficients p_m of dV(x(z)) plus the endpoint residual pair.

    All scalar inputs must share the arithmetic of c and gamma (plain ring
    scalars, or jets). Returns (p, E1, E2): p maps m -> coefficient of
    z^m dz in dV(x(z)); E1, E2 are the values at z = +1 and z = -1 of the
    coefficient function of omega_1^0 = uu dz/z + sum_{m <= -2} p_m z^m dz.
    """
    inv_uu = tcoeffs.pop("_inv_uu")
    xs = {-1: gamma, 0: c - Lambda, 1: gamma}  # x - Lambda
    dx = {-2: -1 * gamma, 0: gamma}

    def lmul(a, b):
        out = {}
        for i, ai in a.items():
            for j, bj in b.items():
                out[i + j] = out[i + j] + ai * bj if i + j in out else ai * bj
        return out

    # V'(x) = (1/uu) [ (x-Lambda) - sum_j t_j (x-Lambda)^(j-1) ]
    vp = dict(xs)
    power = {0: uu * 0 + 1}  # one, in the working arithmetic
    jmax = max(tcoeffs, default=0)
    for j in range(1, jmax + 1):
        if j in tcoeffs:
            for m, pw in power.items():
                vp[m] = vp.get(m, uu * 0) - tcoeffs[j] * pw
        power = lmul(power, xs)
    p = {m: v * inv_uu for m, v in lmul(vp, dx).items()}
    E1 = uu * 1
    E2 = -1 * uu
    for m, pm in p.items():
        if m <= -2:
            E1 = E1 + pm
            E2 = E2 + (pm if m % 2 == 0 else -1 * pm)
    return p, E1, E2


def _disk_data(ring, uu, Lambda, tcoeffs, c, gamma, jets: bool):
    uuj = ring.coerce(uu)
    lamj = ring.coerce(Lambda)
    inv_uu = ring.inv(uuj)
    if jets:
        zero, one = ring.zero, ring.one
        args = dict(
            uu=_Jet(uuj, zero, zero), Lambda=_Jet(lamj, zero, zero),
            c=_Jet(c, one, zero), gamma=_Jet(gamma, zero, one),
        )
        t = {j: _Jet(ring.coerce(v), zero, zero) for j, v in tcoeffs.items()}
        t["_inv_uu"] = _Jet(inv_uu, zero, zero)
    else:
        args = dict(uu=uuj, Lambda=lamj, c=c, gamma=gamma)
        t = {j: ring.coerce(v) for j, v in tcoeffs.items()}
        t["_inv_uu"] = inv_uu
    return _zhukovsky_disk_coeffs(ring, args["uu"], args["Lambda"], t,
                                  args["c"], args["gamma"])


def solve_onecut_endpoints(ring, uu, Lambda, tcoeffs, max_iter=60):
    """(c, gamma) with the one-cut disk law regular at both endpoints."""
    if isinstance(ring, FloatRing):
        c = ring.coerce(Lambda)
        gamma = mpmath.sqrt(ring.coerce(uu))
    else:
        uu0 = ring.coerce(uu)
        uu0 = uu0.constant_term if hasattr(uu0, "constant_term") else Fraction(uu0)
        rn, rd = math.isqrt(uu0.numerator), math.isqrt(uu0.denominator)
        if Fraction(rn**2, rd**2) != uu0:
            raise EndpointSolveFailure(
                "exact one-cut solve needs u*u_k a perfect rational square"
            )
        c = ring.coerce(Lambda)
        gamma = ring.coerce(Fraction(rn, rd))
    for _ in range(max_iter):
        _, E1, E2 = _disk_data(ring, uu, Lambda, tcoeffs, c, gamma, jets=True)
        if ring.is_zero(E1.v) and ring.is_zero(E2.v):
            return c, gamma
        det = E1.d1 * E2.d2 - E1.d2 * E2.d1
        inv = ring.inv(det)
        dc = (E1.v * E2.d2 - E2.v * E1.d2) * inv
        dg = (E2.v * E1.d1 - E1.v * E2.d1) * inv
        c = c - dc
        gamma = gamma - dg
    raise EndpointSolveFailure("endpoint Newton iteration did not converge")


def onecut_map_curve(spec: MapModelSpec, ring=RATIONALS, name=None,
                     bergman: BergmanKernel | None = None) -> SpectralCurve:
    """One-cut curve(s) of a map model with rho == 0, in Zhukovsky variables."""
    x_maps = []
    omega10 = []
    endpoints = []
    for k in range(spec.species):
        c, gamma = solve_onecut_endpoints(ring, spec.uu[k], spec.Lambda[k], spec.t[k])
        if ring.is_zero(gamma):
            raise MultiCutDetected("degenerate cut: gamma = 0")
        p, _, _ = _disk_data(ring, spec.uu[k], spec.Lambda[k], spec.t[k], c, gamma, jets=False)
        # omega_1^0 = uu dz/z + sum_{m <= -2} p_m z^m dz
        terms = {m: pm for m, pm in p.items() if m <= -2}
        terms[-1] = ring.coerce(spec.uu[k])
        K = -min(terms)
        num = Polynomial(ring, "z", [terms.get(m - K, ring.zero) for m in range(0, K + 1)])
        den = Polynomial(ring, "z", [ring.zero] * K + [ring.one])
        omega10.append(Omega10Rational(RationalFunction(num, den, reduce=False)))
        xnum = Polynomial(ring, "z", [gamma, c, gamma])
        xden = Polynomial(ring, "z", [ring.zero, ring.one])
        x_maps.append(XMapRational(RationalFunction(xnum, xden, reduce=False)))
        endpoints.append((c, gamma))
    curve = make_curve(
        ring, x_maps, omega10, bergman or BergmanKernel(),
        name=name or "onecut",
        metadata={"Lambda": {k: ring.coerce(spec.Lambda[k]) for k in range(spec.species)},
                  "endpoints": endpoints, "uu": list(spec.uu)},
    )
    return curve


# -- shipped presets ------------------------------------------------------------------


def airy_curve(ring=RATIONALS) -> SpectralCurve:
    """x = z^2, omega_1^0 = 2 z^2 dz: the canonical regression curve."""
    z2 = RationalFunction.from_poly(Polynomial(ring, "z", [0, 0, 1]))
    w = RationalFunction.from_poly(Polynomial(ring, "z", [0, 0, 2]))
    return make_curve(ring, [XMapRational(z2)], [Omega10Rational(w)], BergmanKernel(),
                      name="airy")


def airy_scaled(lam, ring=RATIONALS) -> SpectralCurve:
    z2 = RationalFunction.from_poly(Polynomial(ring, "z", [0, 0, 1]))
    w = RationalFunction.from_poly(Polynomial(ring, "z", [0, 0, 2 * Fraction(lam)]))
    return make_curve(ring, [XMapRational(z2)], [Omega10Rational(w)], BergmanKernel(),
                      name="airy")


def gaussian_curve(ring=RATIONALS, scale=1) -> SpectralCurve:
    """Unit-weight Gaussian map model: semicircle cut [-2, 2]."""
    spec = MapModelSpec(species=1)
    curve = onecut_map_curve(spec, ring, name="gaussian")
    if scale != 1:
        rf = curve.omega10[0].rational * RationalFunction.const(ring, "z", scale)
        return make_curve(ring, curve.x_maps, [Omega10Rational(rf)], curve.bergman,
                          name="gaussian", metadata=curve.metadata)
    return curve


def quartic_curve(t4, ring=RATIONALS, name="quartic") -> SpectralCurve:
    """Map model with one quartic face weight; t4 may live in a parameter ring."""
    spec = MapModelSpec(species=1, t=[{4: t4}])
    return onecut_map_curve(spec, ring, name=name)


class QuarticFamily:
    """V(x) = x^2/2 - (t/4) x^4, the variation-check family."""

    tname = "t"

    def __init__(self, degree=5, t0=Fraction(0)):
        self.degree = degree
        self.t0 = Fraction(t0)

    def curve(self):
        ring = ParamRing((self.tname,), self.degree)
        t = ring.gen(self.tname) + ring.from_rational(self.t0)
        return quartic_curve(t, ring)

    def phi(self, ring=None):
        """dV/dt = -x^4/4 as a polynomial in x."""
        ring = ring or ParamRing((self.tname,), self.degree)
        return Polynomial(ring, "x", [0, 0, 0, 0, Fraction(-1, 4)])

    def curve_at(self, t):
        ring = FloatRing(128)
        return quartic_curve(ring.coerce(t), ring)

    def phi_at(self, t):
        ring = FloatRing(128)
        return Polynomial(ring, "x", [0, 0, 0, 0, Fraction(-1, 4)])


# -- torus knots -----------------------------------------------------------------------


def knot_branchpoint_quadratic(P: int, Q: int, ring, E):
    """P z^2 - [P(1+e^u) + Q(e^u-1)] z + P e^u, with E = e^u."""
    E = ring.coerce(E)
    B = ring.coerce(P) * (ring.one + E) + ring.coerce(Q) * (E - ring.one)
    return Polynomial(ring, "z", [ring.coerce(P) * E, -B, ring.coerce(P)])


def torus_knot_curve(P: int, Q: int, u, ring=None, with_log_symbols=True) -> SpectralCurve:
    """Averaged torus-knot curve on the z-uniformizer.

    Exact mode: ``u = ("log", E)`` adjoins q = e^u = E (rational); the engine
    computes the u-rescaled data u*omega_1^0, so exact correlators carry a
    stated prefactor u^(2g-2+n) (see metadata["u_power"]). Float mode takes u
    as a positive float and keeps the 1/u factor numerically.
    """
    if math.gcd(P, Q) != 1:
        raise NonCoprimeError(f"gcd({P},{Q}) != 1")
    float_mode = not (isinstance(u, tuple) and u[0] == "log")
    if float_mode:
        ring = ring or FloatRing(128)
        if not float(u) > 0:
            raise DomainError("u must be positive")
        uval = ring.coerce(u)
        E = mpmath.exp(uval)
    else:
        E = Fraction(u[1])
        if E <= 1:
            raise DomainError("e^u must exceed 1 (u > 0)")
        if ring is None:
            ring = ParamRing(("L0", "L1"), 2) if with_log_symbols else RATIONALS
        uval = None

    quad = knot_branchpoint_quadratic(P, Q, RATIONALS, E) if not float_mode else None
    if float_mode:
        B = P * (1 + E) + Q * (E - 1)
        disc = mpmath.sqrt(B * B - 4 * P * P * E)
        roots = [(B + disc) / (2 * P), (B - disc) / (2 * P)]
        roots = [ring.coerce(r) for r in roots]
    else:
        rr, cof = quad.rational_roots()
        if cof.degree > 0 or len(rr) != 2:
            raise DomainError(
                "exact torus-knot mode needs rational branchpoints; run float realization"
            )
        roots = [ring.coerce(r) for r, _ in sorted(rr, reverse=True)]

    # dx/x = -dz/(Qz) + (1/P)[1/(z-E) - 1/(z-1)] dz
    one = Polynomial(ring, "z", [1])
    z = RationalFunction.x(ring, "z")
    dlog = (
        RationalFunction.const(ring, "z", Fraction(-1, Q)) / z
        + RationalFunction.const(ring, "z", Fraction(1, P)) / (z - ring.coerce(E))
        - RationalFunction.const(ring, "z", Fraction(1, P)) / (z - ring.one)
    )
    xmap = XMapLogParametric(dlog, roots)

    # u * omega_check_1^0 = -P (dx/x) (ln z - u + i pi Q); per-point log constants
    # enter as ring symbols L0, L1 (exact) or numbers (float).
    def w10_local(alpha, T, coord=None):
        base = dlog.expand_at(alpha, T, coord=coord)
        i = [k for k, r in enumerate(roots) if ring.is_zero(r - alpha)][0]
        if float_mode:
            Lc = mpmath.log(alpha) - uval + 1j * mpmath.pi * Q
            scale = -P / uval
        else:
            Lc = ring.gen(f"L{i}") if with_log_symbols else ring.zero
            scale = ring.coerce(-P)
        ainv = ring.inv(ring.coerce(alpha))
        rel = LaurentSeries(ring, base.coord, 1, [ainv * (ring.one if j == 0 else ring.zero)
                                                  for j in range(T)], T)
        # ln(1 + zeta/alpha) + L
        lg = series_elem("log1p", rel) + LaurentSeries.constant(ring, base.coord, Lc, T)
        return (base * lg).scale(ring.coerce(scale)).truncate(T - 1)

    curve = make_curve(
        ring, [xmap], [Omega10Local(w10_local)], BergmanKernel(),
        name=f"torus-knot-{P}-{Q}",
        metadata={"P": P, "Q": Q, "E": E, "float": float_mode,
                  "u_power": None if float_mode else "u^(2g-2+n) prefactor on omega_n^g"},
    )
    return curve


def knot_discriminant_identity(P: int, Q: int) -> bool:
    """Discriminant of the branchpoint quadratic vs the factored form, in Q[q]."""
    ring = RATIONALS
    q = Polynomial(ring, "q", [0, 1])
    B = P * (1 + q) + Q * (q - 1)
    disc = B * B - Polynomial(ring, "q", [0, 4 * P * P])
    factored = (q - 1) * ((P + Q) ** 2 * q - Polynomial(ring, "q", [(P - Q) ** 2]))
    return disc == factored
