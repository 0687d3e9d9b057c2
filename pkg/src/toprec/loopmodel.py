"""Perturbative loop-model curves: rho-graded corrections to disks and cylinders.

The corrections are elliptic-type transcendentals (O(n)-model structure), so
this module works in the 128-bit float realization; "exact" means spectral
Laurent representations on the unit circles, where every manipulated object
is analytic (the singular loci of the shipped geometry sit at |zeta| well
inside/outside the circle).

Grading: a single formal parameter; numeric fugacities are folded into the
order-m data. The solver is the self-consistent variational system obtained
by inserting the two-body interaction (1/2) sum rho TrTr lnR and expanding
in connected correlators at leading N-order:

    d omega_1(z0)/dT = sum_{(k,l)} w_{kl} (1/2ipi)^2 oint oint lnR(x_k, x_l)
                        omega_2(xi1, z0) omega_1(xi2),
    d omega_2(z1,z2)/dT = ... [ omega_3(xi1,z1,z2) omega_1(xi2)
                               + omega_2(xi1,z1) omega_2(xi2,z2) + (z1 <-> z2) ].

Responses against the Bergman diagonal use the one-cut projection identity
resp = -P_(<=-2)[sigma'] (negative-index Laurent part of the derivative),
which provably solves the master loop equation order by order.
"""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath

from .curve import BergmanKernel, Omega10Local, SpectralCurve, XMapRational, make_curve
from .errors import DomainError, InteractionSingularityOnCut
from .models import MapModelSpec, onecut_map_curve
from .polyrat import Polynomial, RationalFunction
from .recursion import CorrelatorTable
from .scalars import FloatRing, ParamRing
from .series import LaurentSeries, series_elem


# -- annulus-analytic functions -----------------------------------------------------


class AnnulusFun:
    """f(zeta) = sum_{|j| <= N} c_j zeta^j, analytic near |zeta| = 1."""

    __slots__ = ("N", "c")

    def __init__(self, N: int, coeffs=None):
        self.N = N
        self.c = {j: v for j, v in (coeffs or {}).items() if v != 0}

    @classmethod
    def from_samples(cls, fn, N: int) -> "AnnulusFun":
        M = 2 * N + 8
        vals = [fn(mpmath.exp(2j * mpmath.pi * t / M)) for t in range(M)]
        roots = [mpmath.exp(-2j * mpmath.pi * t / M) for t in range(M)]
        c = {}
        for j in range(-N, N + 1):
            acc = mpmath.mpc(0)
            for t, v in enumerate(vals):
                acc += v * roots[(j * t) % M]
            c[j] = acc / M
        return cls(N, c)

    def coeff(self, j: int):
        return self.c.get(j, mpmath.mpf(0))

    def __add__(self, other):
        out = dict(self.c)
        for j, v in other.c.items():
            out[j] = out.get(j, mpmath.mpf(0)) + v
        return AnnulusFun(max(self.N, other.N), out)

    def scale(self, s):
        return AnnulusFun(self.N, {j: v * s for j, v in self.c.items()})

    def derivative(self) -> "AnnulusFun":
        return AnnulusFun(self.N, {j - 1: j * v for j, v in self.c.items() if j != 0})

    def project_leq(self, jmax: int) -> "AnnulusFun":
        return AnnulusFun(self.N, {j: v for j, v in self.c.items() if j <= jmax})

    def value(self, z):
        acc = mpmath.mpc(0)
        for j, v in self.c.items():
            acc += v * z**j
        return acc

    def taylor_at(self, alpha, T: int):
        """a_0..a_T of f(alpha + h); alpha regular (|alpha| = 1, f analytic there)."""
        out = []
        for t in range(T + 1):
            acc = mpmath.mpc(0)
            for j, v in self.c.items():
                acc += v * _binom(j, t) * alpha ** (j - t)
            out.append(acc)
        return out

    def is_small(self, tol=None) -> bool:
        tol = tol or mpmath.mpf(10) ** -25
        return all(abs(v) < tol for v in self.c.values())


def _binom(j: int, t: int):
    out = mpmath.mpf(1)
    for i in range(t):
        out *= j - i
    return out / mpmath.factorial(t)


# -- graded data containers -----------------------------------------------------------


class DiskCorrection:
    """One grading order of a disk: {(rid, k): coeff} pole parts + annulus rest."""

    def __init__(self, N: int):
        self.poles: dict = {}
        self.ann = AnnulusFun(N)

    def add_pole(self, b, c):
        self.poles[b] = self.poles.get(b, mpmath.mpf(0)) + c


class CylCorrection:
    """One grading order of a cylinder block (species1, species2).

    Decomposition by leg type per slot: ram-basis tensor, mixed
    (basis x annulus), and a rank-one list of annulus x annulus terms.
    """

    def __init__(self, N: int):
        self.N = N
        self.tensor: dict = {}   # (b1, b2) -> coeff
        self.mixed1: dict = {}   # b2 -> AnnulusFun (slot 1 annulus)
        self.mixed2: dict = {}   # b1 -> AnnulusFun (slot 2 annulus)
        self.ann2: list = []     # (AnnulusFun slot1, AnnulusFun slot2, coeff)

    def add_tensor(self, b1, b2, c):
        key = (b1, b2)
        self.tensor[key] = self.tensor.get(key, mpmath.mpf(0)) + c

    def add_mixed1(self, b2, ann: AnnulusFun):
        self.mixed1[b2] = self.mixed1.get(b2, AnnulusFun(self.N)) + ann

    def add_mixed2(self, b1, ann: AnnulusFun):
        self.mixed2[b1] = self.mixed2.get(b1, AnnulusFun(self.N)) + ann

    def slices(self):
        """Yield (xi-leg, z-leg) decompositions: legs are ("pole", b) or ("ann", A)."""
        for (b1, b2), c in self.tensor.items():
            yield ("pole", b1), ("pole", b2), c
        for b2, A in self.mixed1.items():
            yield ("ann", A), ("pole", b2), mpmath.mpf(1)
        for b1, A in self.mixed2.items():
            yield ("pole", b1), ("ann", A), mpmath.mpf(1)
        for A1, A2, c in self.ann2:
            yield ("ann", A1), ("ann", A2), c


# -- the solver -----------------------------------------------------------------------


class LoopCurveData:
    """Graded perturbative data of a loop model, plus its engine-facing curve."""

    def __init__(self, spec: MapModelSpec, D: int, N: int = 64, kpole: int = 8):
        self.spec = spec
        self.D = D
        self.N = N
        self.kpole = kpole
        self.fring = FloatRing(128)
        self.base = onecut_map_curve(spec, self.fring, name="loop-base")
        self._check_interaction_locus()
        self.disk = {k: {} for k in range(spec.species)}   # disk[k][m] m>=1
        self.cyl: dict = {}                                # cyl[(k1,k2)][m]
        self._ln_matrix_cache: dict = {}
        self._ln_taylor_cache: dict = {}
        self._solve()

    # -- base geometry ----------------------------------------------------------------

    def _cg(self, k):
        return self.base.metadata["endpoints"][k]

    def x(self, k, z):
        c, g = self._cg(k)
        return c + g * (z + 1 / z)

    def dx(self, k, z):
        c, g = self._cg(k)
        return g * (1 - z**-2)

    def _R(self, k, l, xx, yy):
        return xx + yy

    def phys_preimage(self, l, y):
        """Physical-sheet uniformizer point over x = y on species l."""
        c, g = self._cg(l)
        t = (y - c) / g
        r1 = (t + mpmath.sqrt(t * t - 4)) / 2
        r2 = (t - mpmath.sqrt(t * t - 4)) / 2
        return r1 if abs(r1) > 1 else r2

    def _check_interaction_locus(self):
        for (k, l) in self.spec.rho:
            for t1 in range(12):
                z1 = mpmath.exp(2j * mpmath.pi * t1 / 12)
                for t2 in range(12):
                    z2 = mpmath.exp(2j * mpmath.pi * t2 / 12)
                    if abs(self._R(k, l, self.x(k, z1), self.x(l, z2))) < mpmath.mpf("0.5"):
                        raise InteractionSingularityOnCut(
                            f"zeros of R_{k}{l} too close to the cuts"
                        )

    def _weights(self):
        """Ordered species pairs (s1, s2, w): both orientations of each rho entry."""
        out = []
        for (k, l), w in self.spec.rho.items():
            w = self.fring.coerce(w)
            out.append((k, l, w))
            if k != l:
                out.append((l, k, w))
        return out

    # -- lnR pairing data --------------------------------------------------------------

    def ln_matrix(self, s1, s2):
        """L[(i, j)]: double Laurent coefficients of lnR(x_{s1}(z1), x_{s2}(z2))."""
        key = (s1, s2)
        if key in self._ln_matrix_cache:
            return self._ln_matrix_cache[key]
        N, M = self.N, 2 * self.N + 8
        grid = []
        for t1 in range(M):
            z1 = mpmath.exp(2j * mpmath.pi * t1 / M)
            x1 = self.x(s1, z1)
            grid.append([mpmath.log(self._R(s1, s2, x1, self.x(s2, mpmath.exp(2j * mpmath.pi * t2 / M))))
                         for t2 in range(M)])
        roots = [mpmath.exp(-2j * mpmath.pi * t / M) for t in range(M)]
        inner = []
        for t1 in range(M):
            row = {}
            for j in range(-N, N + 1):
                acc = mpmath.mpc(0)
                for t2 in range(M):
                    acc += grid[t1][t2] * roots[(j * t2) % M]
                row[j] = acc / M
            inner.append(row)
        L = {}
        for i in range(-N, N + 1):
            for j in range(-N, N + 1):
                acc = mpmath.mpc(0)
                for t1 in range(M):
                    acc += inner[t1][j] * roots[(i * t1) % M]
                v = acc / M
                if abs(v) > mpmath.mpf(10) ** -40:
                    L[(i, j)] = v
        self._ln_matrix_cache[key] = L
        return L

    def ln_taylor_ann(self, s1, s2, rid, order: int) -> AnnulusFun:
        """AnnulusFun in z2 of (1/order!) d^order/dz1^order lnR |_(z1 = alpha_rid)."""
        key = (s1, s2, rid, order)
        if key in self._ln_taylor_cache:
            return self._ln_taylor_cache[key]
        alpha = self.base.ram(rid).location
        c1, g1 = self._cg(s1)

        def fn(z2):
            yy = self.x(s2, z2)
            T = order + 1
            z1 = LaurentSeries(self.fring, "h", 0, [alpha, 1], T)
            xs = z1.scale(g1) + z1.inverse().scale(g1) + LaurentSeries.constant(
                self.fring, "h", c1 + yy, T)
            return _series_log_coeff(xs, order)

        out = AnnulusFun.from_samples(fn, self.N)
        self._ln_taylor_cache[key] = out
        return out

    def ln_bitaylor(self, s1, s2, rid1, o1: int, rid2, o2: int):
        """Joint Taylor coefficient of lnR at (alpha_rid1, alpha_rid2)."""
        a1 = self.base.ram(rid1).location
        a2 = self.base.ram(rid2).location
        c1, g1 = self._cg(s1)
        c2, g2 = self._cg(s2)
        T1, T2 = o1 + 1, o2 + 1
        z1 = LaurentSeries(self.fring, "h", 0, [a1, 1], T1)
        xs1 = z1.scale(g1) + z1.inverse().scale(g1) + LaurentSeries.constant(
            self.fring, "h", c1, T1)
        z2 = LaurentSeries(self.fring, "w", 0, [a2, 1], T2)
        xs2 = z2.scale(g2) + z2.inverse().scale(g2) + LaurentSeries.constant(
            self.fring, "w", c2, T2)
        Mx = [[mpmath.mpc(0)] * (T2 + 1) for _ in range(T1 + 1)]
        for i in range(T1 + 1):
            Mx[i][0] += xs1[i]
        for j in range(T2 + 1):
            Mx[0][j] += xs2[j]
        return _bilog_coeff(Mx, o1, o2)

    # -- legs and pairings ---------------------------------------------------------------

    def disk_leg(self, k, m):
        """(poles, ann) boundary data of the order-m disk of species k, or None."""
        if m == 0:
            rf = self.base.omega10[k].rational
            return ({}, AnnulusFun.from_samples(lambda z: rf(z), self.N))
        d = self.disk[k].get(m)
        return None if d is None else (d.poles, d.ann)

    def pair_leg_leg(self, s1, s2, leg1, leg2):
        """(1/2ipi)^2 oint oint lnR(x_s1, x_s2) leg1(xi1) leg2(xi2): a scalar.

        Legs are ("pole", (rid,k)) or ("ann", AnnulusFun), or composite
        ("data", (poles, ann)).
        """
        items1 = self._leg_items(leg1)
        items2 = self._leg_items(leg2)
        L = self.ln_matrix(s1, s2)
        total = mpmath.mpc(0)
        for kind1, v1, c1 in items1:
            for kind2, v2, c2 in items2:
                if kind1 == "ann" and kind2 == "ann":
                    for (i, j), Lij in L.items():
                        a = v1.coeff(-1 - i)
                        if a == 0:
                            continue
                        b = v2.coeff(-1 - j)
                        if b != 0:
                            total += c1 * c2 * Lij * a * b
                elif kind1 == "pole" and kind2 == "ann":
                    rid, kk = v1
                    g = self.ln_taylor_ann(s1, s2, rid, kk - 1)
                    for j, bj in v2.c.items():
                        total += c1 * c2 * g.coeff(-1 - j) * bj
                elif kind1 == "ann" and kind2 == "pole":
                    rid, kk = v2
                    g = self.ln_taylor_ann(s2, s1, rid, kk - 1)
                    for j, aj in v1.c.items():
                        total += c1 * c2 * g.coeff(-1 - j) * aj
                else:
                    (r1, k1), (r2, k2) = v1, v2
                    total += c1 * c2 * self.ln_bitaylor(s1, s2, r1, k1 - 1, r2, k2 - 1)
        return total

    @staticmethod
    def _leg_items(leg):
        kind, v = leg[0], leg[1]
        if kind == "data":
            poles, ann = v
            items = [("pole", b, c) for b, c in poles.items()]
            if ann is not None:
                items.append(("ann", ann, mpmath.mpf(1)))
            return items
        return [(kind, v, mpmath.mpf(1))]

    def half_pair(self, s1, s2, leg2) -> AnnulusFun:
        """sigma(xi1) = (1/2ipi) oint lnR(x_s1(xi1), x_s2(xi2)) leg2(xi2) dxi2."""
        L = self.ln_matrix(s1, s2)
        out = {}
        for kind2, v2, c2 in self._leg_items(leg2):
            if kind2 == "ann":
                for (i, j), Lij in L.items():
                    b = v2.coeff(-1 - j)
                    if b != 0:
                        out[i] = out.get(i, mpmath.mpc(0)) + c2 * Lij * b
            else:
                rid, kk = v2
                g = self.ln_taylor_ann(s2, s1, rid, kk - 1)  # function of xi1
                for i, gi in g.c.items():
                    out[i] = out.get(i, mpmath.mpc(0)) + c2 * gi
        return AnnulusFun(self.N, out)

    # -- the variational solve -------------------------------------------------------------

    def _solve(self):
        for m in range(1, self.D + 1):
            self._solve_disk_order(m)
            self._solve_cyl_order(m)

    def _solve_disk_order(self, m: int):
        for k0 in range(self.spec.species):
            corr = DiskCorrection(self.N)
            for (s1, s2, w) in self._weights():
                for p in range(0, m):
                    q = m - 1 - p
                    legB = self.disk_leg(s2, q)
                    if legB is None:
                        continue
                    if p == 0:
                        if s1 != k0:
                            continue
                        sigma = self.half_pair(s1, s2, ("data", legB))
                        resp = sigma.derivative().project_leq(-2).scale(-w)
                        corr.ann = corr.ann + resp
                    else:
                        block = self.cyl.get((s1, k0), {}).get(p)
                        if block is None:
                            continue
                        for xi_leg, z_leg, c in block.slices():
                            v = self.pair_leg_leg(s1, s2, xi_leg, ("data", legB))
                            if z_leg[0] == "pole":
                                corr.add_pole(z_leg[1], w * c * v)
                            else:
                                corr.ann = corr.ann + z_leg[1].scale(w * c * v)
            self.disk[k0][m] = corr

    def _solve_cyl_order(self, m: int):
        blocks = {}
        for k1 in range(self.spec.species):
            for k2 in range(self.spec.species):
                blocks[(k1, k2)] = CylCorrection(self.N)

        # -- omega_3 omega_1 term: graded engine to order m-1
        w3 = self._graded_omega3(m - 1)
        for (s1, s2, w) in self._weights():
            for idx, cring in w3.iter_ordered():
                b_xi, b_z1, b_z2 = idx
                if self._species_of(b_xi) != s1:
                    continue
                for p in range(0, m):
                    cp = _ring_coeff(cring, p)
                    if cp == 0:
                        continue
                    q = m - 1 - p
                    legB = self.disk_leg(s2, q)
                    if legB is None:
                        continue
                    v = self.pair_leg_leg(s1, s2, ("pole", b_xi), ("data", legB))
                    blocks[(self._species_of(b_z1), self._species_of(b_z2))].add_tensor(
                        b_z1, b_z2, w * cp * v)

        # -- omega_2 omega_2 term: one slot assignment per ordered species pair
        # (the second cumulant pairing is the (s2, s1) orientation's first)
        for (s1, s2, w) in self._weights():
            for p in range(0, m):
                q = m - 1 - p
                self._cyl_pair_term(blocks, s1, s2, w, p, q, swap=False)

        _symmetrize(blocks)
        for key, block in blocks.items():
            self.cyl.setdefault(key, {})[m] = block

    def _cyl_pair_term(self, blocks, s1, s2, w, p, q, swap: bool):
        """omega_2^(p)(xi1, z_a) omega_2^(q)(xi2, z_b): (z_a, z_b) = (z1, z2) or swapped."""
        slices1 = self._cyl_slices(s1, p)
        slices2 = self._cyl_slices(s2, q)
        for sp1, (xi1_leg, z1_leg, c1) in slices1:
            for sp2, (xi2_leg, z2_leg, c2) in slices2:
                if xi1_leg is None and xi2_leg is None:
                    # both diagonal B0: rank-decomposed double projection
                    if p == 0 and q == 0:
                        self._double_diag(blocks, s1, s2, w, sp1, sp2, swap)
                    continue
                if xi1_leg is None:
                    # B0 slice in xi1: inner-pair xi2 first, then project
                    v_ann = self.half_pair(s1, s2, xi2_leg)
                    A = v_ann.derivative().project_leq(-2).scale(-w * c2)
                    self._acc(blocks, sp1, sp2, ("ann", A), z2_leg, mpmath.mpf(1), swap)
                elif xi2_leg is None:
                    v_ann = self.half_pair(s2, s1, xi1_leg)
                    A = v_ann.derivative().project_leq(-2).scale(-w * c1)
                    self._acc(blocks, sp1, sp2, z1_leg, ("ann", A), mpmath.mpf(1), swap)
                else:
                    v = self.pair_leg_leg(s1, s2, xi1_leg, xi2_leg)
                    self._acc(blocks, sp1, sp2, z1_leg, z2_leg, w * c1 * c2 * v, swap)

    def _cyl_slices(self, s_xi, p):
        """Slices of order-p omega_2 with first slot on species s_xi.

        Yields (z-species, (xi_leg, z_leg, coeff)); xi_leg None flags the
        B0 diagonal (z-species = s_xi, handled by projection).
        """
        out = []
        if p == 0:
            out.append((s_xi, (None, None, mpmath.mpf(1))))
            return out
        for (sa, sb), orders in self.cyl.items():
            if sa != s_xi:
                continue
            block = orders.get(p)
            if block is None:
                continue
            for xi_leg, z_leg, c in block.slices():
                out.append((sb, (xi_leg, z_leg, c)))
        return out

    def _double_diag(self, blocks, s1, s2, w, sp1, sp2, swap: bool):
        """oint oint lnR B0(xi1,z1) B0(xi2,z2): pure annulus x annulus data."""
        L = self.ln_matrix(s1, s2)
        # (1/2ipi) oint xi^i (xi - z)^-2 dxi = (-i) z^(i-1) for i <= -1 else 0
        A1: dict = {}
        for (i, j), Lij in L.items():
            if i <= -1 and j <= -1:
                A1.setdefault(i, {})[j] = Lij * i * j  # (-i)(-j) = i*j
        for i, row in A1.items():
            a1 = AnnulusFun(self.N, {i - 1: mpmath.mpf(1)})
            a2 = AnnulusFun(self.N, {j - 1: v for j, v in row.items()})
            self._acc(blocks, sp1, sp2, ("ann", a1), ("ann", a2), w, swap)

    def _acc(self, blocks, sp1, sp2, z1_leg, z2_leg, c, swap: bool):
        if c == 0:
            return
        if swap:
            sp1, sp2 = sp2, sp1
            z1_leg, z2_leg = z2_leg, z1_leg
        block = blocks[(sp1, sp2)]
        k1, v1 = z1_leg
        k2, v2 = z2_leg
        if k1 == "pole" and k2 == "pole":
            block.add_tensor(v1, v2, c)
        elif k1 == "ann" and k2 == "pole":
            block.add_mixed1(v2, v1.scale(c))
        elif k1 == "pole" and k2 == "ann":
            block.add_mixed2(v1, v2.scale(c))
        else:
            block.ann2.append((v1, v2, c))

    def _species_of(self, b):
        return self.base.ram(b[0]).species

    # -- graded engine views ------------------------------------------------------------------

    def _graded_omega3(self, upto: int):
        curve = self.engine_curve(max(upto, 0))
        return CorrelatorTable(curve).get(3, 0)

    def engine_curve(self, D: int | None = None) -> SpectralCurve:
        """The curve over ParamRing(("rho",), D, float) consumed by the engine."""
        D = self.D if D is None else D
        ring = ParamRing(("rho",), D, self.fring)
        gen = ring.gen("rho")
        var = "z"
        x_maps = []
        omega10 = []
        for k in range(self.spec.species):
            c, g = self._cg(k)
            num = Polynomial(ring, var, [ring.from_base(g), ring.from_base(c), ring.from_base(g)])
            den = Polynomial(ring, var, [ring.zero, ring.one])
            locs = [rp.location for rp in self.base.ram_points if rp.species == k]
            x_maps.append(XMapRational(RationalFunction(num, den, reduce=False),
                                       ram_locations=locs))
            omega10.append(Omega10Local(self._w10_provider(k, ring), rational=None))
        corrections = {}
        for (k1, k2), orders in self.cyl.items():
            tensor = {}
            for m, block in orders.items():
                if m > D:
                    continue
                for (b1, b2), c in block.tensor.items():
                    cur = tensor.get((b1, b2), ring.zero)
                    tensor[(b1, b2)] = cur + gen**m * ring.from_base(c)
            if tensor:
                corrections[(k1, k2)] = tensor
        bergman = BergmanKernel(corrections)
        bergman.extra_diagonal = self._extra_diagonal(ring)
        bergman.extra_kernel_legs = self._extra_kernel_legs(ring)
        bergman.extra_spectator = self._extra_spectator(ring)
        return make_curve(ring, x_maps, omega10, bergman,
                          name=f"{self.base.name}-rho{D}",
                          metadata=dict(self.base.metadata, grading="rho"))

    def _w10_provider(self, k, ring):
        gen = ring.gen("rho")

        def provider(alpha, T, coord=None):
            alpha = _to_float(alpha)
            rf = self.base.omega10[k].rational
            base = rf.expand_at(alpha, T, coord=coord)
            coord = base.coord
            coeffs = [ring.from_base(base[t]) for t in range(0, T + 1)]
            out = LaurentSeries(ring, coord, 0, coeffs, T)
            for m, corr in self.disk[k].items():
                if m > ring.degree:
                    continue
                loc = self._local_series_correction(corr, alpha, T, coord)
                out = out + _ring_lift_series(ring, loc).scale(gen**m)
            return out

        return provider

    def _local_series_correction(self, corr: DiskCorrection, alpha, T, coord) -> LaurentSeries:
        tay = corr.ann.taylor_at(alpha, T)
        # pole parts: exact Laurent at the same point, Taylor at the other point
        alpha = _to_float(alpha)
        m_min = 0
        for (rid, kk) in corr.poles:
            if abs(self.base.ram(rid).location - alpha) < mpmath.mpf(10) ** -20:
                m_min = min(m_min, -kk)
        out = {j: mpmath.mpc(0) for j in range(m_min, T + 1)}
        for t, v in enumerate(tay):
            out[t] += v
        for (rid, kk), c in corr.poles.items():
            a2 = self.base.ram(rid).location
            if abs(a2 - alpha) < mpmath.mpf(10) ** -20:
                out[-kk] += c
            else:
                gap = alpha - a2
                for t in range(T + 1):
                    out[t] += c * _binom(-kk, t) * gap ** (-kk - t)
        coeffs = [out[j] for j in range(m_min, T + 1)]
        return _lift_float_series(coord, m_min, coeffs, T)

    # engine hooks ---------------------------------------------------------------------

    def _extra_diagonal(self, ring):
        gen = ring.gen("rho")
        data = self

        def hook(a, iota, iota_prime, T):
            """Extra (non-tensor) parts of omega_2(z, iota z) at ram point a."""
            out = None
            k = a.species
            block_orders = data.cyl.get((k, k), {})
            for m, block in block_orders.items():
                if m > ring.degree:
                    continue
                parts = []
                for b2, A in block.mixed1.items():
                    s1 = _ann_local(A, a, T, iota.coord)           # slot1 at z
                    s2 = _basis_iota_local(data, b2, a, iota, iota_prime, T)
                    parts.append(s1 * s2)
                for b1, A in block.mixed2.items():
                    s1 = _basis_z_local(data, b1, a, T, iota.coord)
                    s2 = _ann_local_iota(A, a, iota, iota_prime, T)
                    parts.append(s1 * s2)
                for A1, A2, c in block.ann2:
                    s1 = _ann_local(A1, a, T, iota.coord)
                    s2 = _ann_local_iota(A2, a, iota, iota_prime, T)
                    parts.append((s1 * s2).scale(c))
                if not parts:
                    continue
                tot = parts[0]
                for piece in parts[1:]:
                    tot = tot + piece
                lifted = _ring_lift_series(ring, tot).scale(gen**m)
                out = lifted if out is None else out + lifted
            return out

        return hook

    def _extra_kernel_legs(self, ring):
        gen = ring.gen("rho")
        data = self

        def hook(a, T):
            """[(z0-basis, ring-weight, AnnulusFun on the integrated w slot)].

            omega_2(z0, w) = ... + b1(z0) A(w): slot-1 pole with slot-2 annulus
            is the mixed2 component (blocks are stored slot-symmetrically).
            """
            out = []
            k = a.species
            for m, block in data.cyl.get((k, k), {}).items():
                if m > ring.degree:
                    continue
                for b1, A in block.mixed2.items():
                    out.append((b1, gen**m, A))
            return out

        return hook

    def _extra_spectator(self, ring):
        gen = ring.gen("rho")
        data = self

        def hook(a, use_iota, iota, iota_prime, T):
            """{spectator basis: ring-graded series} from mixed annulus-z legs."""
            out = {}
            k = a.species
            for (sa, sb), orders in data.cyl.items():
                if sa != k:
                    continue
                for m, block in orders.items():
                    if m > ring.degree:
                        continue
                    for b2, A in block.mixed1.items():
                        if use_iota:
                            ser = _ann_local_iota(A, a, iota, iota_prime, T)
                        else:
                            ser = _ann_local(A, a, T, iota.coord)
                        lifted = _ring_lift_series(ring, ser).scale(gen**m)
                        out[b2] = out[b2] + lifted if b2 in out else lifted
            return out

        return hook


def _symmetrize(blocks: dict):
    """Enforce omega_2(z1, z2) = omega_2(z2, z1) across stored blocks.

    The variational assembly produces both orientations; averaging removes
    float asymmetry at roundoff level.
    """
    half = mpmath.mpf(1) / 2

    def avg_maps(ma, mb, N):
        out = {}
        for b, ann in ma.items():
            out[b] = out.get(b, AnnulusFun(N)) + ann.scale(half)
        for b, ann in mb.items():
            out[b] = out.get(b, AnnulusFun(N)) + ann.scale(half)
        return out

    for (k1, k2) in sorted(blocks):
        if (k2, k1) < (k1, k2):
            continue
        A = blocks[(k1, k2)]
        B = blocks[(k2, k1)]
        tensor = {}
        for (b1, b2), c in A.tensor.items():
            tensor[(b1, b2)] = tensor.get((b1, b2), mpmath.mpf(0)) + c * half
        for (b1, b2), c in B.tensor.items():
            tensor[(b2, b1)] = tensor.get((b2, b1), mpmath.mpf(0)) + c * half
        m1 = avg_maps(A.mixed1, B.mixed2, A.N)
        m2 = avg_maps(A.mixed2, B.mixed1, A.N)
        ann2 = [(a1, a2, c * half) for (a1, a2, c) in A.ann2]
        ann2 += [(a2, a1, c * half) for (a1, a2, c) in B.ann2]
        A.tensor = dict(tensor)
        A.mixed1 = dict(m1)
        A.mixed2 = dict(m2)
        A.ann2 = list(ann2)
        if B is not A:
            B.tensor = {(b2, b1): c for (b1, b2), c in tensor.items()}
            B.mixed1 = dict(m2)
            B.mixed2 = dict(m1)
            B.ann2 = [(a2, a1, c) for (a1, a2, c) in ann2]


# -- local-series helpers --------------------------------------------------------------


def _lift_float_series(coord, m, coeffs, T) -> LaurentSeries:
    return LaurentSeries(FloatRing(128), coord, m, coeffs, T)


_PROMOTE_RING = None


def _ring_lift_series(ring: ParamRing, s: LaurentSeries) -> LaurentSeries:
    return LaurentSeries(ring, s.coord, s.m, [ring.from_base(c) for c in s.coeffs], s.T)


def _ring_coeff(c, m: int):
    """Order-m float coefficient of a TruncatedPoly over FloatRing (or float)."""
    if hasattr(c, "terms"):
        return c.terms.get((m,), mpmath.mpf(0))
    return c if m == 0 else mpmath.mpf(0)


def _ann_local(A: AnnulusFun, a, T: int, coord: str) -> LaurentSeries:
    return _lift_float_series(coord, 0, A.taylor_at(_to_float(a.location), T), T)


def _ann_local_iota(A: AnnulusFun, a, iota: LaurentSeries, iota_prime, T: int) -> LaurentSeries:
    from .series import series_compose

    base = _ann_local(A, a, T, iota.coord)
    fl = FloatRing(128)
    iota_f = LaurentSeries(fl, iota.coord, iota.m,
                           [_to_float(c) for c in iota.coeffs], iota.T)
    return series_compose(base, iota_f) * iota_f.derivative()


def _basis_z_local(data, b, a, T: int, coord: str) -> LaurentSeries:
    rid, k = b
    fl = FloatRing(128)
    src = data.base.ram(rid)
    if src.id == a.id:
        return LaurentSeries.monomial(fl, coord, -k, T, 1)
    gap = _to_float(a.location) - src.location
    base = LaurentSeries(fl, coord, 0, [gap, 1], T + 2 * k)
    return base.inverse().pow_int(k).truncate(T)


def _basis_iota_local(data, b, a, iota, iota_prime, T: int) -> LaurentSeries:
    fl = FloatRing(128)
    iota_f = LaurentSeries(fl, iota.coord, iota.m, [_to_float(c) for c in iota.coeffs], iota.T)
    rid, k = b
    src = data.base.ram(rid)
    if src.id == a.id:
        return iota_f.inverse().pow_int(k) * iota_f.derivative()
    gap = _to_float(a.location) - src.location
    base = iota_f + LaurentSeries.constant(fl, iota.coord, gap, iota_f.T)
    return base.inverse().pow_int(k) * iota_f.derivative()


def _to_float(c):
    if hasattr(c, "constant_term"):
        return c.constant_term
    return c


def _series_log_coeff(s: LaurentSeries, order: int):
    ring = s.ring
    c0 = s[0]
    rest = (s - LaurentSeries.constant(ring, s.coord, c0, s.T)).scale(1 / c0)
    out = series_elem("log1p", rest)
    if order == 0:
        return out[0] + mpmath.log(c0)
    return out[order]


def _bilog_coeff(Mx, o1: int, o2: int):
    """Coefficient h^o1 w^o2 of log(sum Mx[i][j] h^i w^j); Mx[0][0] away from 0."""
    T1 = len(Mx) - 1
    T2 = len(Mx[0]) - 1
    c00 = Mx[0][0]
    N = [[Mx[i][j] / c00 for j in range(T2 + 1)] for i in range(T1 + 1)]
    N[0][0] = mpmath.mpc(0)

    def bimul(A, B):
        out = [[mpmath.mpc(0)] * (T2 + 1) for _ in range(T1 + 1)]
        for i1 in range(T1 + 1):
            for j1 in range(T2 + 1):
                a = A[i1][j1]
                if a == 0:
                    continue
                for i2 in range(T1 + 1 - i1):
                    for j2 in range(T2 + 1 - j1):
                        b = B[i2][j2]
                        if b != 0:
                            out[i1 + i2][j1 + j2] += a * b
        return out

    if o1 == 0 and o2 == 0:
        return mpmath.log(c00)
    total = [[mpmath.mpc(0)] * (T2 + 1) for _ in range(T1 + 1)]
    power = None
    sign = 1
    for k in range(1, o1 + o2 + 1):
        power = N if power is None else bimul(power, N)
        for i in range(T1 + 1):
            for j in range(T2 + 1):
                total[i][j] += sign * power[i][j] / k
        sign = -sign
    return total[o1][o2]


# -- presets ------------------------------------------------------------------------------


def on_model_data(rho=Fraction(1), D: int = 2, N: int = 64) -> LoopCurveData:
    """Single-species O(-rho)-type model: triangles weight t3 = 1/10, R = x+y."""
    spec = MapModelSpec(species=1, t=[{3: Fraction(1, 10)}], Lambda=[Fraction(3)],
                        rho={(0, 0): Fraction(rho)}, D=D)
    return LoopCurveData(spec, D, N)


def ade_a2_data(D: int = 2, N: int = 64) -> LoopCurveData:
    """A2 height model: two species, rho_12 = -A_12 = -1, R = x+y."""
    spec = MapModelSpec(species=2, t=[{}, {}], Lambda=[Fraction(3), Fraction(3)],
                        rho={(0, 1): Fraction(-1)}, D=D)
    return LoopCurveData(spec, D, N)
