"""Executable loop-equation properties for computed correlator tables.

All checks report rather than raise: a CheckReport carries pass/fail, the
worst residual per ramification point (exactly zero on pass in exact rings)
and the addresses of failing coefficients.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .curve import SpectralCurve
from .errors import DomainError, FamilyNotDifferentiable
from .recursion import (
    CorrelatorForm,
    CorrelatorTable,
    _PointContext,
    _assemble_E,
    _compute_correlator,
    _eval_stored,
    euler,
    free_energy,
    is_stable,
)
from .series import LaurentSeries, series_compose


class CheckReport:
    def __init__(self, name: str, curve_id: str, pairs):
        self.name = name
        self.curve_id = curve_id
        self.pairs = list(pairs)
        self.passed = True
        self.worst: dict = {}
        self.failures: list = []

    def record(self, ring, point_id, address, residual):
        mag = residual if ring.exact else abs(residual)
        old = self.worst.get(point_id)
        if old is None or (not ring.exact and abs(residual) > abs(old)) or (
            ring.exact and not ring.is_zero(residual) and ring.is_zero(old)
        ):
            self.worst[point_id] = mag
        if not ring.is_zero(residual):
            self.passed = False
            self.failures.append({"point": point_id, "address": address,
                                  "residual": ring.serialize(residual)})

    def to_json(self) -> dict:
        return {
            "check": self.name,
            "curve": self.curve_id,
            "pairs": [list(p) for p in self.pairs],
            "status": "pass" if self.passed else "fail",
            "failures": self.failures,
        }

    def __repr__(self):
        return json.dumps(self.to_json())


def _check_depth(form: CorrelatorForm) -> int:
    return form.max_pole_order() + 4


def linear_loop_check(table: CorrelatorTable, n: int, g: int) -> CheckReport:
    """S omega_n^g must be holomorphic and iota-invariant at every branchpoint."""
    curve = table.curve
    ring = curve.ring
    report = CheckReport("linear", curve.name, [(n, g)])
    form = table.get(n, g)
    depth = _check_depth(form)
    for a in curve.ram_points:
        T = depth + 6
        ctx = _PointContext(curve, a, T)
        acc = _eval_stored(ctx, form, ["z"], ring)
        acc_i = _eval_stored(ctx, form, ["iota"], ring)
        for assignment in sorted(set(acc) | set(acc_i)):
            s = None
            if assignment in acc:
                s = acc[assignment]
            if assignment in acc_i:
                s = acc_i[assignment] if s is None else s + acc_i[assignment]
            # holomorphic: no singular part
            for k in range(s.m, 0):
                report.record(ring, a.id, {"assignment": list(assignment), "power": k}, s[k])
            # iota-invariant: s == iota^* s to the checked depth
            pulled = series_compose(s.truncate(depth), ctx.iota) * ctx.iota_prime
            diff = s.truncate(pulled.T) - pulled
            for k in range(0, min(diff.T, depth) + 1):
                report.record(
                    ring, a.id, {"assignment": list(assignment), "power": k, "part": "inv"},
                    diff[k],
                )
    return report


def quadratic_loop_check(table: CorrelatorTable, n: int, g: int) -> CheckReport:
    """Q_n^g must be a quadratic differential with a double zero at each branchpoint.

    Q is assembled with the unstable omega_1^0 pairings entering opposite in
    sign to the stable products: this is the combination with double zeros in
    the kernel convention fixed by the Airy golden values (see ledger).
    """
    curve = table.curve
    ring = curve.ring
    report = CheckReport("quadratic", curve.name, [(n, g)])
    form = table.get(n, g)
    depth = _check_depth(form)
    for a in curve.ram_points:
        T = 2 * form.max_pole_order() + 10
        ctx = _PointContext(curve, a, T)
        acc = _assemble_E(table, ctx, n, g, k_lim=form.max_pole_order() + 4)
        w10_z = a.local_omega10(T)
        w10_i = series_compose(w10_z, ctx.iota) * ctx.iota_prime
        for assignment, s in _eval_stored(ctx, form, ["iota"], ring).items():
            extra = (w10_z * s).scale(ring.coerce(-1))
            acc[assignment] = acc.get(assignment, _zero_like(extra)) + extra
        for assignment, s in _eval_stored(ctx, form, ["z"], ring).items():
            extra = (w10_i * s).scale(ring.coerce(-1))
            acc[assignment] = acc.get(assignment, _zero_like(extra)) + extra
        for assignment in sorted(acc):
            q = acc[assignment]
            top = min(1, q.T)
            for k in range(q.m, top + 1):
                report.record(
                    ring, a.id, {"assignment": list(assignment), "power": k}, q[k]
                )
    return report


def _zero_like(s: LaurentSeries) -> LaurentSeries:
    return LaurentSeries.zero(s.ring, s.coord, s.T)


def symmetry_check(table: CorrelatorTable, n: int, g: int) -> CheckReport:
    """Slot-permutation invariance, via an independent recomputation from the
    certified lower levels compared entry-by-entry with the stored tensor."""
    curve = table.curve
    ring = curve.ring
    report = CheckReport("symmetry", curve.name, [(n, g)])
    stored = table.get(n, g)
    try:
        fresh = _compute_correlator(table, n, g)
    except DomainError as err:  # asymmetric raw tensor
        report.passed = False
        report.failures.append({"point": "*", "address": str(err), "residual": "asymmetric"})
        return report
    keys = set(stored.terms) | set(fresh.terms)
    for key in sorted(keys):
        diff = stored.terms.get(key, ring.zero) - fresh.terms.get(key, ring.zero)
        report.record(ring, key[0][0], {"index": [list(b) for b in key]}, diff)
    return report


def homogeneity_check(make_scaled, lam, chi_max: int, fg_from: int = 2) -> CheckReport:
    """Tables for omega_1^0 and lam*omega_1^0 must differ by lam^(2-2g-n).

    ``make_scaled(scale)`` builds the curve with omega_1^0 multiplied by scale.
    """
    base = make_scaled(1)
    scaled = make_scaled(lam)
    ring = base.ring
    lam = ring.coerce(lam)
    report = CheckReport("homogeneity", base.name, [])
    t0 = CorrelatorTable(base)
    t1 = CorrelatorTable(scaled)
    for chi in range(1, chi_max + 1):
        from .recursion import pairs_with_euler

        for (n, g) in pairs_with_euler(chi):
            report.pairs.append((n, g))
            f0 = t0.get(n, g)
            f1 = t1.get(n, g)
            power = 2 - 2 * g - n
            factor = lam**power if power >= 0 else ring.inv(lam) ** (-power)
            keys = set(f0.terms) | set(f1.terms)
            for key in sorted(keys):
                diff = f1.terms.get(key, ring.zero) - factor * f0.terms.get(key, ring.zero)
                report.record(ring, key[0][0], {"pair": [n, g], "index": [list(b) for b in key]},
                              diff)
    for g in range(fg_from, chi_max // 2 + 2):
        if 2 * g - 2 <= chi_max:
            power = 2 - 2 * g
            factor = ring.inv(lam) ** (-power)
            diff = free_energy(t1, g) - factor * free_energy(t0, g)
            report.record(ring, "*", {"free_energy": g}, diff)
    return report


def variation_residue(table: CorrelatorTable, phi_x, g: int):
    """-sum_a Res_a phi(x(z)) omega_1^g(z): the residue side of dF^g/dt.

    phi_x: polynomial in x (the t-derivative of the potential); evaluated
    through the local x-chart x(a) + local_x.
    """
    curve = table.curve
    ring = curve.ring
    w = table.get(1, g)
    kmax = w.max_pole_order()
    total = ring.zero
    for a in curve.ram_points:
        xa = curve.x_maps[a.species].x_at(a.location)
        xloc = a.local_x(kmax + 2) + LaurentSeries.constant(ring, a.coord, xa, kmax + 2)
        phi_ser = phi_x.eval_series(xloc)
        for idx, c in w.terms.items():
            rid, k = idx[0]
            if rid != a.id:
                continue
            total = total + c * phi_ser[k - 1]
    return -total


def variation_check_symbolic(family, g: int) -> CheckReport:
    """Exact dF^g/dt == residue formula for a family over a t-parameter ring.

    ``family.curve(ring)`` builds the curve over the ring carrying the formal
    parameter t; ``family.phi(ring)`` gives dV/dt as a Polynomial in x.
    """
    curve = family.curve()
    ring = curve.ring
    report = CheckReport("variation", curve.name, [(0, g)])
    table = CorrelatorTable(curve)
    fg = free_energy(table, g)
    lhs = _dt(ring, fg, family.tname)
    rhs = variation_residue(table, family.phi(), g)
    diff = lhs - rhs
    report.record(ring, "*", {"free_energy": g, "mode": "symbolic"}, diff)
    return report


def _dt(ring, value, tname: str):
    """Formal d/dt on a TruncatedPoly scalar."""
    i = ring.params.index(tname)
    terms = {}
    for e, c in value.terms.items():
        if e[i] == 0:
            continue
        e2 = list(e)
        e2[i] -= 1
        terms[tuple(e2)] = c * e[i]
    from .scalars import TruncatedPoly

    return TruncatedPoly(ring, terms)


def variation_check_float(family, g: int, dts) -> CheckReport:
    """Central finite differences of F^g vs the residue formula, float mode.

    Passes when the residuals scale like dt^2 (second order): the ratio for
    dts = (d1, d2) must be near (d1/d2)^2, within 20 percent.
    """
    report = CheckReport("variation", "family", [(0, g)])
    try:
        curves = {dt: (family.curve_at(family.t0 + dt), family.curve_at(family.t0 - dt))
                  for dt in dts}
    except Exception as err:
        raise FamilyNotDifferentiable(f"curve construction failed near t0: {err}")
    base = family.curve_at(family.t0)
    ring = base.ring
    table = CorrelatorTable(base)
    rhs = variation_residue(table, family.phi_at(family.t0), g)
    residuals = []
    for dt in dts:
        cp, cm = curves[dt]
        fp = free_energy(CorrelatorTable(cp), g)
        fm = free_energy(CorrelatorTable(cm), g)
        lhs = (fp - fm) / (2 * ring.coerce(dt))
        residuals.append(abs(lhs - rhs))
    report.worst["*"] = residuals
    d1, d2 = dts
    expected = (d1 / d2) ** 2
    ratio = residuals[0] / residuals[1]
    if not (0.8 * expected <= float(ratio) <= 1.2 * expected):
        report.passed = False
        report.failures.append({"point": "*", "address": {"ratio": float(ratio)},
                                "residual": str(ratio)})
    return report


def corrupt(table: CorrelatorTable, n: int, g: int, bump=1, index=None) -> CorrelatorTable:
    """Fault injection: return a table with one coefficient of omega_n^g perturbed.

    By default the perturbation enters at pole order max+1 in the first slot,
    which flips parity so that even a zeta -> -zeta involution sees it.
    """
    ring = table.curve.ring
    src = table.get(n, g)
    bad = CorrelatorTable(table.curve, table.truncation)
    bad.forms = dict(table.forms)
    terms = dict(src.terms)
    if index is None:
        base = sorted(terms)[0]
        index = tuple(sorted(((base[0][0], src.max_pole_order() + 1),) + base[1:]))
    terms[index] = terms.get(index, ring.zero) + ring.coerce(bump)
    bad.forms[(n, g)] = CorrelatorForm(n, g, terms)
    return bad
