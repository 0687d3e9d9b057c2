"""The topological-recursion engine.

Correlators are stored as symmetric tensors over the pole basis
b_(rid,k)(z) = dz/(z - alpha_rid)^k at ramification points: one coefficient
per sorted multi-index, one slot per marked variable. The residue formula is
evaluated entirely through local Laurent expansions at each ramification
point; the kernel is expanded as sum_k u_k(zeta) * b_(rid,k)(z0), so the
output lands directly in the same basis.
"""

from __future__ import annotations

import json
from fractions import Fraction
from itertools import permutations

from .curve import RamificationPoint, SpectralCurve, basis_local_series
from .errors import DomainError, InsufficientPrecisionError, UnstablePairError
from .polyrat import Polynomial, RationalFunction
from .series import LaurentSeries, series_compose, series_reversion


def is_stable(n: int, g: int) -> bool:
    return n >= 1 and g >= 0 and 2 * g - 2 + n > 0


def euler(n: int, g: int) -> int:
    return 2 * g - 2 + n


class CorrelatorForm:
    """omega_n^g as {sorted multi-index: coefficient}.

    The form equals sum over *ordered* index tuples of c_t * prod_i b_(t_i)(z_i)
    with c invariant under slot permutation; only the sorted representative is
    stored, without orbit multiplicity.
    """

    def __init__(self, n: int, g: int, terms=None):
        self.n = n
        self.g = g
        self.terms: dict = dict(terms or {})

    def max_pole_order(self) -> int:
        return max((k for idx in self.terms for (_, k) in idx), default=0)

    def slot_orders(self, slot: int = 0):
        return sorted({idx[slot][1] for idx in self.terms})

    def iter_ordered(self):
        """Yield (ordered index tuple, coefficient) over full orbits."""
        got = getattr(self, "_orbit", None)
        if got is None:
            got = self._orbit = [
                (perm, c) for idx, c in self.terms.items() for perm in set(permutations(idx))
            ]
        return got

    def coefficient(self, idx, ring):
        return self.terms.get(tuple(sorted(idx)), ring.zero)

    def scaled(self, s):
        return CorrelatorForm(self.n, self.g, {k: s * c for k, c in self.terms.items()})

    def to_json(self, ring) -> dict:
        items = sorted(self.terms.items(), key=lambda kv: kv[0])
        return {
            "n": self.n,
            "g": self.g,
            "terms": [
                {"index": [[rid, k] for rid, k in idx], "coeff": ring.serialize(c)}
                for idx, c in items
                if not ring.is_zero(c)
            ],
        }

    @classmethod
    def from_json(cls, data: dict, ring) -> "CorrelatorForm":
        terms = {}
        for t in data["terms"]:
            idx = tuple((rid, int(k)) for rid, k in t["index"])
            terms[idx] = ring.parse(t["coeff"])
        return cls(int(data["n"]), int(data["g"]), terms)

    def as_rational(self, curve: SpectralCurve, slot_values: dict):
        """Collapse all but one slot at scalar points; returns a RationalFunction
        in the remaining slot. slot_values: {slot index: scalar}, one slot absent."""
        ring = curve.ring
        free = [i for i in range(self.n) if i not in slot_values]
        if len(free) != 1:
            raise DomainError("exactly one free slot expected")
        free = free[0]
        var = "z"
        out = RationalFunction.const(ring, var, 0)
        x = RationalFunction.x(ring, var)
        for idx, c in self.iter_ordered():
            val = ring.coerce(c)
            for i, (rid, k) in enumerate(idx):
                if i == free:
                    continue
                a = curve.ram(rid).location
                val = val * ring.inv((slot_values[i] - a) ** k)
            rid, k = idx[free]
            a = curve.ram(rid).location
            out = out + RationalFunction.const(ring, var, val) / (x - a) ** k
        return out


class CorrelatorTable:
    """Memoized omega_n^g keyed by (n, g), filled bottom-up in Euler characteristic."""

    def __init__(self, curve: SpectralCurve, truncation: int | None = None):
        self.curve = curve
        self.truncation = truncation or curve.base_truncation
        self.forms: dict = {}

    def get(self, n: int, g: int) -> CorrelatorForm:
        if not is_stable(n, g):
            raise UnstablePairError(f"(n, g) = ({n}, {g}) is unstable")
        key = (n, g)
        if key not in self.forms:
            # dependencies recurse through _assemble_E; memoization bottoms out
            self.forms[key] = _compute_correlator(self, n, g)
        return self.forms[key]

    def context(self, a, T: int) -> "_PointContext":
        got = getattr(self, "_ctx_cache", None)
        if got is None:
            got = self._ctx_cache = {}
        ctx = got.get(a.id)
        if ctx is None or ctx.T < T:
            ctx = got[a.id] = _PointContext(self.curve, a, T)
        return ctx

    def to_json(self) -> dict:
        ring = self.curve.ring
        keys = sorted(self.forms, key=lambda k: (euler(*k), k))
        return {
            "curve": self.curve.name,
            "truncation": self.truncation,
            "forms": [self.forms[k].to_json(ring) for k in keys],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def pairs_with_euler(chi: int):
    """Stable (n, g) with 2g - 2 + n == chi, n >= 1."""
    out = []
    for g in range(0, (chi + 2) // 2 + 1):
        n = chi + 2 - 2 * g
        if n >= 1 and is_stable(n, g):
            out.append((n, g))
    return sorted(out)


# -- kernel ----------------------------------------------------------------------


def kernel_series(curve: SpectralCurve, a: RamificationPoint, T: int, k_max: int):
    """K(z0, a+zeta) = sum u_(rid,k)(zeta) * dz0/(z0 - alpha_rid)^k.

    u for the genus-0 part: (1/2)[iota_shift^(k-1) - zeta^(k-1)] / Delta;
    Bergman corrections contribute through the primitive of their first-slot
    basis form between iota(z) and z.
    """
    ring = curve.ring
    delta = a.delta_series(T + 2)
    delta_inv = delta.inverse()
    iota = a.involution(T + 2)
    coord = iota.coord
    out = {}
    half = ring.coerce(Fraction(1, 2))
    pow_i = LaurentSeries.monomial(ring, coord, 0, iota.T, 1)
    pow_z = LaurentSeries.monomial(ring, coord, 0, iota.T, 1)
    for k in range(2, k_max + 1):
        pow_i = pow_i * iota
        pow_z = pow_z.shift(1)
        u = (pow_i - pow_z).scale(half) * delta_inv
        out[(a.id, k)] = u
    # corrections from the same-species Bergman data (tensors are stored
    # slot-symmetrically, so either slot may play the integrated leg)
    s = a.species
    for (b1, b2), c in curve.bergman.correction_terms(s, s).items():
        prim = basis_local_series(curve, b1, a, T + 2).integrate()
        jump = prim - series_compose(prim, iota)
        u = jump.scale(-half * ring.coerce(c)) * delta_inv
        out[b2] = out.get(b2, LaurentSeries.zero(ring, coord, u.T)) + u
    hook = getattr(curve.bergman, "extra_kernel_legs", None)
    if hook is not None:
        for b0, weight, ann in hook(a, T):
            loc = a.location.constant_term if hasattr(a.location, "constant_term") else a.location
            tay = ann.taylor_at(loc, T + 2)
            fser = LaurentSeries(ring, coord, 0, [ring.coerce(t) for t in tay], T + 2)
            prim = fser.integrate()
            jump = prim - series_compose(prim, iota)
            u = (jump.scale(-half) * delta_inv).scale(ring.coerce(weight))
            out[b0] = out.get(b0, LaurentSeries.zero(ring, coord, u.T)) + u
    return out


# -- E_n^g assembly -----------------------------------------------------------------


class _PointContext:
    """Cached local data at one ramification point for one working order."""

    def __init__(self, curve: SpectralCurve, a: RamificationPoint, T: int):
        self.curve = curve
        self.a = a
        self.T = T
        self.iota = a.involution(T)
        self.iota_prime = self.iota.derivative()
        self._basis_z: dict = {}
        self._basis_i: dict = {}
        self._pairs: dict = {}
        self.factor_cache: dict = {}

    def ev(self, tag: str):
        return self.ev_iota if tag == "iota" else self.ev_z

    def pair(self, tag0: str, b0, tag1: str, b1):
        key = (tag0, b0, tag1, b1)
        got = self._pairs.get(key)
        if got is None:
            got = self._pairs[key] = self.ev(tag0)(b0) * self.ev(tag1)(b1)
        return got

    def ev_z(self, b):
        """Local series of basis form b in the z slot (dzeta coefficient)."""
        if b not in self._basis_z:
            self._basis_z[b] = basis_local_series(self.curve, b, self.a, self.T)
        return self._basis_z[b]

    def ev_iota(self, b):
        """Local series of basis form b pulled back through iota (with Jacobian)."""
        if b not in self._basis_i:
            rid, k = b
            src = self.curve.ram(rid)
            ring = self.curve.ring
            if src.id == self.a.id:
                ser = self.iota.inverse().pow_int(k) * self.iota_prime
            else:
                gap = self.a.location - src.location
                base = self.iota + LaurentSeries.constant(ring, self.iota.coord, gap, self.iota.T)
                ser = base.inverse().pow_int(k) * self.iota_prime
            self._basis_i[b] = ser
        return self._basis_i[b]

    def bergman_diagonal(self):
        """omega_2^0(z, iota(z)) as a zeta-series (both slots consumed)."""
        ring = self.curve.ring
        gap = self.iota - LaurentSeries.monomial(ring, self.iota.coord, 1, self.iota.T, 1)
        base = gap.inverse().pow_int(2) * self.iota_prime
        s = self.a.species
        for (b1, b2), c in self.curve.bergman.correction_terms(s, s).items():
            base = base + (self.ev_z(b1) * self.ev_iota(b2)).scale(ring.coerce(c))
        hook = getattr(self.curve.bergman, "extra_diagonal", None)
        if hook is not None:
            extra = hook(self.a, self.iota, self.iota_prime, self.T)
            if extra is not None:
                base = base + extra.truncate(base.T)
        return base

    def bergman_spectator(self, use_iota: bool, k_lim: int):
        """omega_2^0(z or iota(z), z_spect) as {spectator basis: zeta-series}."""
        ring = self.curve.ring
        coord = self.iota.coord
        out = {}
        w = self.iota if use_iota else LaurentSeries.monomial(ring, coord, 1, self.iota.T, 1)
        jac = self.iota_prime if use_iota else LaurentSeries.monomial(ring, coord, 0, self.iota.T, 1)
        powk = LaurentSeries.monomial(ring, coord, 0, w.T, 1)
        for k in range(2, k_lim + 1):
            powk = powk * w if k > 2 else powk
            out[(self.a.id, k)] = powk.scale(ring.coerce(k - 1)) * jac
        s = self.a.species
        for s2 in range(self.curve.species_count):
            for (b1, b2), c in self.curve.bergman.correction_terms(s, s2).items():
                ser = (self.ev_iota(b1) if use_iota else self.ev_z(b1)).scale(ring.coerce(c))
                out[b2] = out.get(b2, LaurentSeries.zero(ring, coord, ser.T)) + ser
        hook = getattr(self.curve.bergman, "extra_spectator", None)
        if hook is not None:
            for b2, ser in hook(self.a, use_iota, self.iota, self.iota_prime, self.T).items():
                ser = ser.truncate(self.T)
                out[b2] = out.get(b2, LaurentSeries.zero(ring, coord, ser.T)) + ser
        return out


def _eval_stored(ctx: _PointContext, form: CorrelatorForm, evaluators, ring) -> dict:
    """Evaluate a stored form with its first slots bound to local-series
    evaluators, the remaining slots left as spectators.

    Returns {spectator multiset: zeta-series}: the stored tensor is symmetric,
    so the coefficient of any ordered spectator assignment depends only on the
    multiset of basis indices, and the bound slots are summed over all
    distinct removals from each stored index.
    """
    acc: dict = {}
    if len(evaluators) == 1:
        ev = ctx.ev(evaluators[0])
        for S, c in form.terms.items():
            cc = ring.coerce(c)
            for b in set(S):
                _acc_add(acc, _remove_one(S, b), ev(b).scale(cc))
    else:
        tag0, tag1 = evaluators
        for S, c in form.terms.items():
            cc = ring.coerce(c)
            for b0 in set(S):
                S1 = _remove_one(S, b0)
                for b1 in set(S1):
                    ser = ctx.pair(tag0, b0, tag1, b1).scale(cc)
                    _acc_add(acc, _remove_one(S1, b1), ser)
    return acc


def _remove_one(ms: tuple, b) -> tuple:
    out = list(ms)
    out.remove(b)
    return tuple(out)


def _acc_add(acc: dict, key, ser: LaurentSeries):
    if key in acc:
        acc[key] = acc[key] + ser
    else:
        acc[key] = ser


def _split_weight(M, M1) -> int:
    """Number of position subsets realizing sub-multiset M1 inside M."""
    from collections import Counter
    from math import comb

    cm, c1 = Counter(M), Counter(M1)
    w = 1
    for b, m1 in c1.items():
        w *= comb(cm[b], m1)
    return w


def _merge_products(acc: dict, part1: dict, part2: dict, ring):
    for M1, s1 in part1.items():
        for M2, s2 in part2.items():
            M = tuple(sorted(M1 + M2))
            w = _split_weight(M, M1)
            ser = s1 * s2
            if w != 1:
                ser = ser.scale(ring.coerce(w))
            _acc_add(acc, M, ser)


def _assemble_E(table: CorrelatorTable, ctx: _PointContext, n: int, g: int, k_lim: int):
    """E_n^g(z, iota(z); z_I) as {spectator basis multiset: zeta-series}.

    The (J, h) subset sum collapses to a sum over sizes j = |J| with binomial
    split weights, since every evaluated factor is spectator-symmetric.
    """
    ring = table.curve.ring
    acc: dict = {}

    # omega_{n+1}^{g-1}(z, iota(z), z_I)
    if g >= 1:
        if n == 1 and g == 1:
            _acc_add(acc, (), ctx.bergman_diagonal())
        else:
            w = table.get(n + 1, g - 1)
            for M, s in _eval_stored(ctx, w, ["z", "iota"], ring).items():
                _acc_add(acc, M, s)

    for j in range(0, n):
        for h in range(0, g + 1):
            if (j == 0 and h == 0) or (j == n - 1 and h == g):
                continue
            f1 = _factor_eval(table, ctx, j + 1, h, use_iota=False, k_lim=k_lim)
            f2 = _factor_eval(table, ctx, n - j, g - h, use_iota=True, k_lim=k_lim)
            if f1 is None or f2 is None:
                continue
            _merge_products(acc, f1, f2, ring)
    return acc


def _factor_eval(table, ctx: _PointContext, n: int, g: int, use_iota: bool, k_lim: int):
    """omega_n^g(z or iota(z), z-spectators) as {multiset: series}; None if zero.

    Cached per (n, g, use_iota, k_lim) on the point context.
    """
    ring = table.curve.ring
    if n == 1 and g == 0:
        raise DomainError("omega_1^0 must not appear inside E")  # excluded terms
    if not is_stable(n, g) and (n, g) != (2, 0):
        return None
    key = (n, g, use_iota, k_lim)
    got = ctx.factor_cache.get(key)
    if got is None:
        if (n, g) == (2, 0):
            got = {(b,): s for b, s in ctx.bergman_spectator(use_iota, k_lim).items()}
        else:
            got = _eval_stored(ctx, table.get(n, g), ["iota" if use_iota else "z"], ring)
        ctx.factor_cache[key] = got
    return got


# -- the recursion step ------------------------------------------------------------


def _dependencies(n: int, g: int):
    deps = []
    if g >= 1 and is_stable(n + 1, g - 1):
        deps.append((n + 1, g - 1))
    for j in range(0, n):
        for h in range(0, g + 1):
            if (j == 0 and h == 0) or (j == n - 1 and h == g):
                continue
            for (m, gg) in ((j + 1, h), (n - j, g - h)):
                if is_stable(m, gg):
                    deps.append((m, gg))
    return sorted(set(deps))


def _compute_correlator(table: CorrelatorTable, n: int, g: int) -> CorrelatorForm:
    curve = table.curve
    ring = curve.ring
    kmax_out = 6 * g - 4 + 2 * n + 2
    dep_max = max([table.get(*d).max_pole_order() for d in _dependencies(n, g)], default=2)
    k_lim = max(dep_max, 2) + 4
    T = max(16, kmax_out + 4, k_lim + 6, table.truncation - 8)

    ordered: dict = {}
    for a in curve.ram_points:
        ctx = table.context(a, T)
        E = _assemble_E(table, ctx, n, g, k_lim)
        if not E:
            continue
        vmin = 0
        for ser in E.values():
            vmin = min(vmin, ser.m)
        K = kernel_series(curve, a, T, max(2, 2 - vmin))
        for b0, u in K.items():
            for M, e in E.items():
                res = (u * e).residue()
                key = (b0, M)
                ordered[key] = ordered.get(key, ring.zero) + res

    # fold (slot0 basis, spectator multiset) decompositions onto sorted keys;
    # all decompositions of one key are coefficients of permuted ordered tuples
    # and must agree exactly (the engine's built-in symmetry certificate).
    # Zero residues are kept in `ordered` so missing-vs-cancelling
    # decompositions cannot be confused.
    grouped: dict = {}
    for (b0, M), c in ordered.items():
        grouped.setdefault(tuple(sorted((b0,) + M)), []).append(c)
    terms: dict = {}
    for skey, vals in grouped.items():
        for v in vals[1:]:
            if not ring.is_zero(v - vals[0]):
                raise DomainError(f"asymmetric tensor at {skey}: {vals}")
        if not ring.is_zero(vals[0]):
            terms[skey] = vals[0]
    return CorrelatorForm(n, g, terms)


def correlator(table: CorrelatorTable, n: int, g: int) -> CorrelatorForm:
    """omega_n^g by the residue recursion (memoized through the table)."""
    return table.get(n, g)


# -- free energies -------------------------------------------------------------------


def free_energy(table: CorrelatorTable, g: int):
    """F^g = 1/(2-2g) sum_a Res_a omega_1^g * primitive(omega_1^0), g >= 2."""
    if g < 2:
        raise UnstablePairError("stable free energies need g >= 2")
    curve = table.curve
    ring = curve.ring
    w = table.get(1, g)
    kmax = w.max_pole_order()
    total = ring.zero
    for a in curve.ram_points:
        phi = a.local_omega10(kmax + 2).integrate()
        for (idx, c) in w.terms.items():
            rid, k = idx[0]
            if rid != a.id:
                continue
            total = total + c * phi[k - 1]
    return ring.coerce(Fraction(1, 2 - 2 * g)) * total


# -- large-x moment extraction ---------------------------------------------------------


def _inverse_uniformizer(curve: SpectralCurve, species: int, lam, T: int) -> LaurentSeries:
    """zeta as a Laurent series in w = 1/(x - Lambda) near x = infinity."""
    ring = curve.ring
    xm = curve.x_maps[species]
    if not hasattr(xm, "rf"):
        raise DomainError("large-x moments need a rational x-map")
    rf = xm.rf
    # w(v) with v = 1/zeta: w = 1/(x(1/v) - Lambda)
    v = LaurentSeries.monomial(ring, "v", 1, T + 4, 1)
    num = rf.num.eval_series(v.inverse())
    den = rf.den.eval_series(v.inverse())
    xser = num * den.inverse()
    w_of_v = (xser - LaurentSeries.constant(ring, "v", ring.coerce(lam), xser.T)).inverse()
    v_of_w = series_reversion(w_of_v.truncate(T + 2))
    return v_of_w.inverse()  # zeta = 1/v


def moments_from_rational_form(curve, species: int, omega_rf: RationalFunction, lam, lmax: int):
    """Coefficients m_l of W = sum_l m_l (x-Lambda)^(-l-1) from omega = f(z) dz."""
    ring = curve.ring
    T = lmax + 6
    zeta = _inverse_uniformizer(curve, species, lam, T)
    f = omega_rf.num.eval_series(zeta) * omega_rf.den.eval_series(zeta).inverse()
    omega_w = f * zeta.derivative()
    return {l: -omega_w[l - 1] for l in range(0, lmax + 1)}


def large_x_moments(table: CorrelatorTable, species: int, n: int, g: int, lengths):
    """Weighted map count: coefficient of prod (x_i - Lambda)^(-l_i - 1) in W_n^g."""
    curve = table.curve
    ring = curve.ring
    lam = curve.metadata.get("Lambda", {}).get(species, ring.zero) if isinstance(
        curve.metadata.get("Lambda", {}), dict) else ring.zero
    lengths = list(lengths)
    if n != len(lengths):
        raise DomainError("need one length per marked face")
    if (n, g) == (1, 0):
        om = curve.omega10[species]
        if om.rational is None:
            raise DomainError("disk moments need rational omega_1^0")
        return moments_from_rational_form(curve, species, om.rational, lam, lengths[0])[lengths[0]]
    if not is_stable(n, g):
        raise UnstablePairError(f"({n},{g}) moments not supported")
    # engine tables sit in the golden-value convention, a (-1)^(2g-2+n) twist
    # of the map-model normalization; strip it so counts come out raw
    twist = ring.coerce(Fraction((-1) ** euler(n, g)))
    form = table.get(n, g)
    T = max(lengths) + 6
    zeta = _inverse_uniformizer(curve, species, lam, T)
    dzeta = zeta.derivative()
    # per-basis w-expansions, then tensor-contract the stored form
    cache = {}

    def bexp(b):
        if b not in cache:
            rid, k = b
            a = curve.ram(rid).location
            base = zeta - LaurentSeries.constant(ring, zeta.coord, a, zeta.T)
            cache[b] = base.inverse().pow_int(k) * dzeta
        return cache[b]

    total = ring.zero
    for idx, c in form.iter_ordered():
        contrib = ring.coerce(c)
        ok = True
        for (b, l) in zip(idx, lengths):
            coeff = bexp(b)[l - 1]
            contrib = contrib * (-coeff)
            if ring.is_zero(contrib):
                ok = False
                break
        if ok:
            total = total + contrib
    return twist * total
