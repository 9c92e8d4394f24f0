"""Symbolic overlap observables.

An OverlapMonomial is a product of overlap entries q_{k,l} over labeled
replicas (pairs unordered, k != l, positive integer exponents).  An
OverlapPolynomial is a real linear combination of monomials.  The module
also provides the textual grammar used by the CLI and the map G -> DeltaG
whose quenched mean is the lambda-derivative of <G>_lambda.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ObservableSyntaxError, UsageError

Pair = tuple[int, int]

# Negative-control hook: selftest's mutation mode adds this offset to the
# q_{R+1,R+2} coefficient so a corrupted build is guaranteed to fail.
_MUTATION_OFFSET = 0.0


@dataclass(frozen=True)
class OverlapMonomial:
    """Multiset of unordered replica pairs with exponents, e.g. q12^2 * q23."""

    factors: tuple[tuple[Pair, int], ...]  # sorted by pair

    @classmethod
    def of(cls, factors: Iterable[tuple[Pair, int]]) -> "OverlapMonomial":
        merged: dict[Pair, int] = {}
        for (k, l), exp in factors:
            if k == l:
                raise UsageError(f"self-overlap q{k},{l} is the constant 1; fold it")
            if k < 1 or l < 1:
                raise UsageError("replica labels must be positive integers")
            if exp < 0:
                raise UsageError("overlap exponents must be positive")
            pair = (min(k, l), max(k, l))
            merged[pair] = merged.get(pair, 0) + exp
        items = tuple(sorted((p, e) for p, e in merged.items() if e != 0))
        return cls(factors=items)

    @classmethod
    def one(cls) -> "OverlapMonomial":
        return cls(factors=())

    @property
    def is_constant(self) -> bool:
        return not self.factors

    def labels(self) -> set[int]:
        return {k for pair, _ in self.factors for k in pair}

    def degree(self) -> int:
        return sum(e for _, e in self.factors)

    def times_q(self, k: int, l: int) -> "OverlapMonomial":
        return OverlapMonomial.of(self.factors + (((k, l), 1),))

    def relabeled(self, mapping: Mapping[int, int]) -> "OverlapMonomial":
        return OverlapMonomial.of(
            (((mapping.get(k, k), mapping.get(l, l)), e) for (k, l), e in self.factors))

    def __str__(self):
        if self.is_constant:
            return "1"
        return "*".join(f"q{k},{l}" + (f"^{e}" if e > 1 else "")
                        for (k, l), e in self.factors)


def canonicalize(m: OverlapMonomial) -> OverlapMonomial:
    """Rename labels to 1..k by first appearance in the sorted pair list.

    Exploits replica exchangeability: the quenched mean is unchanged.
    Iterates to a fixed point, so the result is idempotent.
    """
    current = m
    for _ in range(len(m.labels()) + 2):
        order: dict[int, int] = {}
        for (k, l), _e in sorted(current.factors):
            for lab in (k, l):
                if lab not in order:
                    order[lab] = len(order) + 1
        renamed = current.relabeled(order)
        if renamed == current:
            return current
        current = renamed
    return current


class OverlapPolynomial:
    """Finite map monomial -> coefficient; zero coefficients are dropped."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[OverlapMonomial, float] | None = None):
        self.terms: dict[OverlapMonomial, float] = {
            m: float(c) for m, c in (terms or {}).items() if c != 0.0}

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant(cls, value: float) -> "OverlapPolynomial":
        return cls({OverlapMonomial.one(): value})

    @classmethod
    def q(cls, k: int, l: int) -> "OverlapPolynomial":
        return cls({OverlapMonomial.of((((k, l), 1),)): 1.0})

    @classmethod
    def from_monomial(cls, m: OverlapMonomial, coeff: float = 1.0) -> "OverlapPolynomial":
        return cls({m: coeff})

    # -- ring operations ---------------------------------------------------
    def __add__(self, other: "OverlapPolynomial") -> "OverlapPolynomial":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return OverlapPolynomial(out)

    def __sub__(self, other: "OverlapPolynomial") -> "OverlapPolynomial":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "OverlapPolynomial":
        return OverlapPolynomial({m: c * factor for m, c in self.terms.items()})

    def times_q(self, k: int, l: int) -> "OverlapPolynomial":
        return OverlapPolynomial({m.times_q(k, l): c for m, c in self.terms.items()})

    # -- queries -----------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self.terms

    def labels(self) -> set[int]:
        out: set[int] = set()
        for m in self.terms:
            out |= m.labels()
        return out

    def coefficient_sum(self) -> float:
        return sum(self.terms.values())

    def __eq__(self, other):
        return isinstance(other, OverlapPolynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __str__(self):
        return format_polynomial(self)

    __repr__ = __str__


def replica_count(poly: OverlapPolynomial) -> int:
    """Smallest R with all labels in 1..R; constants count as one replica."""
    labels = poly.labels()
    return max(labels) if labels else 1


def delta_g(G: OverlapPolynomial) -> OverlapPolynomial:
    """The overlap polynomial over R+2 replicas whose quenched mean is
    d/dlambda <G>_lambda:

        2 DeltaG = sum_{k != l <= R} G q_{l,k}
                   - 2R sum_{l <= R} G q_{l,R+1}
                   + R(R+1) G q_{R+1,R+2}

    with R the replica count of G.  Linear in G; the coefficients of
    2 DeltaG sum to zero for any monomial G.
    """
    if G.is_zero:
        raise UsageError("delta_g of the zero polynomial is undefined")
    R = replica_count(G)
    out = OverlapPolynomial()
    for l in range(1, R + 1):
        for k in range(1, R + 1):
            if k != l:
                out = out + G.times_q(l, k)
        out = out + G.times_q(l, R + 1).scaled(-2.0 * R)
    out = out + G.times_q(R + 1, R + 2).scaled(R * (R + 1) + _MUTATION_OFFSET)
    return out.scaled(0.5)


# ---------------------------------------------------------------------------
# textual grammar:  signed terms of optional coefficient times '*'-joined
# factors "q<k>,<l>[^e]"; whitespace-insensitive; bare numbers are constants.

_NUMBER = re.compile(r"[0-9]+(\.[0-9]*)?([eE][+-]?[0-9]+)?|\.[0-9]+([eE][+-]?[0-9]+)?")
_FACTOR = re.compile(r"q\s*([0-9]+)\s*,\s*([0-9]+)\s*(\^\s*([0-9]+))?")


def parse_polynomial(text: str) -> OverlapPolynomial:
    """Parse observable text like "2 q1,2*q2,3 - q1,2^2"."""
    out = OverlapPolynomial()
    pos = 0
    n = len(text)

    def skip_ws(p):
        while p < n and text[p].isspace():
            p += 1
        return p

    first = True
    pos = skip_ws(pos)
    if pos == n:
        raise ObservableSyntaxError("empty observable", pos)
    while pos < n:
        sign = 1.0
        pos = skip_ws(pos)
        if text[pos] in "+-":
            sign = -1.0 if text[pos] == "-" else 1.0
            pos = skip_ws(pos + 1)
        elif not first:
            raise ObservableSyntaxError("expected '+' or '-' between terms", pos)
        first = False

        coeff = 1.0
        have_coeff = False
        m = _NUMBER.match(text, pos)
        if m:
            coeff = float(m.group(0))
            pos = skip_ws(m.end())
            have_coeff = True
            if pos < n and text[pos] == "*":
                pos = skip_ws(pos + 1)

        factors: list[tuple[Pair, int]] = []
        while pos < n:
            fm = _FACTOR.match(text, pos)
            if not fm:
                break
            k, l = int(fm.group(1)), int(fm.group(2))
            if k == l:
                raise ObservableSyntaxError(
                    f"self-overlap q{k},{l} is constant; fold it into the coefficient", pos)
            exp = int(fm.group(4)) if fm.group(4) else 1
            factors.append(((k, l), exp))
            pos = skip_ws(fm.end())
            if pos < n and text[pos] == "*":
                pos = skip_ws(pos + 1)
                if pos >= n or not _FACTOR.match(text, pos):
                    raise ObservableSyntaxError("expected overlap factor after '*'", pos)
            else:
                break
        if not factors and not have_coeff:
            raise ObservableSyntaxError("expected a coefficient or overlap factor", pos)
        try:
            mono = OverlapMonomial.of(factors)
        except UsageError as exc:
            raise ObservableSyntaxError(str(exc), pos) from exc
        out = out + OverlapPolynomial.from_monomial(mono, sign * coeff)
        pos = skip_ws(pos)
    return out


def _format_coeff(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


def format_polynomial(poly: OverlapPolynomial) -> str:
    """Render a polynomial in the grammar accepted by parse_polynomial.

    Round-trips: parse_polynomial(format_polynomial(p)) == p.
    """
    if poly.is_zero:
        return "0"
    items = sorted(poly.terms.items(), key=lambda mc: (len(mc[0].factors), mc[0].factors))
    chunks: list[str] = []
    for i, (mono, coeff) in enumerate(items):
        sign = "-" if coeff < 0 else "+"
        mag = abs(coeff)
        if mono.is_constant:
            body = _format_coeff(mag)
        elif mag == 1.0:
            body = str(mono)
        else:
            body = f"{_format_coeff(mag)} {mono}"
        if i == 0:
            chunks.append(body if sign == "+" else f"-{body}")
        else:
            chunks.append(f" {sign} {body}")
    return "".join(chunks)
