"""Brute-force oracles: polygon gluings and Gaussian matrix moments.

These are the provenance side of every DERIVED expected value: exhaustive
enumeration with genus read off Euler characteristics, and Gaussian moments
from literal Wick pairing. A memoized exact Schwinger-Dyson recursion for
mixed trace moments is provided for sizes beyond literal enumeration; it is
cross-validated against the literal oracle in the test suite.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .errors import SizeLimitExceeded


# -- pairings ------------------------------------------------------------------


def all_pairings(items):
    """All perfect matchings of the given list."""
    items = list(items)
    if len(items) % 2:
        return
    if not items:
        yield []
        return
    first = items[0]
    rest = items[1:]
    for i, other in enumerate(rest):
        head = (first, other)
        for tail in all_pairings(rest[:i] + rest[i + 1 :]):
            yield [head] + tail


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[ra] = rb

    def classes(self):
        return len({self.find(i) for i in range(len(self.p))})


def glue_stats(poly_sizes, pairing):
    """(V, E, F, components) of the surface glued from the polygons.

    Darts are numbered 0..L-1 polygon by polygon; corner i sits at the start
    of dart i. Gluing darts a and b identifies start(a)~next(b), next(a)~start(b).
    """
    offsets = []
    off = 0
    for s in poly_sizes:
        offsets.append(off)
        off += s
    L = off

    def nxt(d):
        for o, s in zip(offsets, poly_sizes):
            if o <= d < o + s:
                return o + (d - o + 1) % s
        raise IndexError(d)

    corners = _UnionFind(L)
    comps = _UnionFind(len(poly_sizes))

    def poly_of(d):
        for i, (o, s) in enumerate(zip(offsets, poly_sizes)):
            if o <= d < o + s:
                return i
        raise IndexError(d)

    for a, b in pairing:
        corners.union(a, nxt(b))
        corners.union(nxt(a), b)
        comps.union(poly_of(a), poly_of(b))
    V = corners.classes()
    E = L // 2
    F = len(poly_sizes)
    return V, E, F, comps.classes()


def gluing_oracle(l: int):
    """Exhaustive genus census of the pairings of a 2n-gon; l = 2n <= 12.

    Returns {genus: count}; the counts sum to (l-1)!!.
    """
    if l % 2 or l > 12:
        raise SizeLimitExceeded("gluing oracle handles even l <= 12")
    counts: dict = {}
    if l == 0:
        return {0: 1}
    for pairing in all_pairings(range(l)):
        V, E, F, comp = glue_stats((l,), pairing)
        chi = V - E + F
        g = (2 - chi) // 2
        counts[g] = counts.get(g, 0) + 1
    return counts


def polygon_gluing_counts(marked: int, extra_sizes, genus: int):
    """Connected gluings of one marked polygon plus extra polygons, by genus.

    Returns the raw number of pairings of all darts whose glued surface is
    connected and has the requested genus.
    """
    sizes = (marked,) + tuple(extra_sizes)
    total = sum(sizes)
    if total % 2:
        return 0
    if total > 18:
        raise SizeLimitExceeded(f"{total} darts is past the oracle's desk scale")
    count = 0
    for pairing in all_pairings(range(total)):
        V, E, F, comp = glue_stats(sizes, pairing)
        if comp != 1:
            continue
        if (2 - (V - E + F)) // 2 == genus:
            count += 1
    return count


# -- Gaussian matrix moments ---------------------------------------------------


def wick_trace_moment_literal(ks, size: int, weight=None):
    """< prod_i Tr M^{k_i} > for the Gaussian weight exp(-w N Tr M^2/2)...

    Literal Wick enumeration: sum over pairings of all dart slots, each
    pairing contributing size^V * weight^-E with V index loops. weight
    defaults to size (the standard exp(-size * Tr M^2 / 2) normalization
    with <M_ab M_cd> = delta_ad delta_bc / size).
    """
    ks = tuple(k for k in ks if k > 0)
    total = sum(ks)
    if total % 2:
        return Fraction(0)
    if total > 16:
        raise SizeLimitExceeded("literal Wick oracle handles total degree <= 16")
    weight = Fraction(size if weight is None else weight)
    out = Fraction(0)
    for pairing in all_pairings(range(total)):
        V, E, F, comp = glue_stats(ks or (0,), pairing) if ks else (0, 0, 0, 0)
        out += Fraction(size) ** V / weight**E
    if not ks:
        return Fraction(1)
    return out


def trace_moments(ks, size, weight):
    """Exact mixed Gaussian trace moments by the Schwinger-Dyson recursion.

    T(k, rest) = (1/w) [ sum_{l=0}^{k-2} T(l, k-2-l, rest)
                         + sum_i rest_i T(k + rest_i - 2, rest without i) ],
    T(0, rest) = size * T(rest), T() = 1. Exact in `size` and `weight`.
    """
    size = Fraction(size)
    weight = Fraction(weight)

    @lru_cache(maxsize=None)
    def T(key):
        if not key:
            return Fraction(1)
        if key[0] == 0:
            return size * T(key[1:])
        if sum(key) % 2:
            return Fraction(0)
        k = key[0]
        rest = key[1:]
        acc = Fraction(0)
        for l in range(0, k - 1):
            acc += T(tuple(sorted((l, k - 2 - l) + rest)))
        for i, ki in enumerate(rest):
            acc += ki * T(tuple(sorted((k + ki - 2,) + rest[:i] + rest[i + 1 :])))
        return acc / weight

    return T(tuple(sorted(ks)))


def wick_oracle(ks, size: int, weight=None, literal_limit: int = 12):
    """Gaussian moment of prod Tr M^{k_i}: literal pairing enumeration at desk
    scale, the (cross-validated) exact recursion beyond it."""
    ks = tuple(sorted(k for k in ks if k > 0))
    weight = size if weight is None else weight
    if sum(ks) <= literal_limit:
        return wick_trace_moment_literal(ks, size, weight)
    return trace_moments(ks, size, weight)


def catalan(n: int) -> Fraction:
    out = Fraction(1)
    for i in range(n):
        out = out * 2 * (2 * i + 1) / (i + 2)
    return out
