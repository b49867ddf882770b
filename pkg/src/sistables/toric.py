"""Binomial ideals: term orders, Buchberger, saturation and quotients, toric ideals.

Every polynomial handled here is a binomial ``x^a - x^b`` with unit
coefficients; S-polynomials and reductions of such binomials stay
binomials, so a binomial is stored as its two exponent vectors (lead term
first).  A monomial reduces to a monomial, so the normal form of
``x^a - x^b`` is ``NF(x^a) - NF(x^b)``.

The checkers at the bottom certify the algebraic sufficient conditions for
sequential intervals and for LP bounds matching IP bounds.
"""
from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bounds import BudgetExceeded, SystemPlan, enumerate_fiber
from .exact import Tableau, integer_kernel_basis
from .exact.lattice import IntegerSolver
from .model import ConstraintSystem

Monomial = tuple[int, ...]

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"


# ---------------------------------------------------------------------------
# Term orders


@dataclass(frozen=True)
class TermOrder:
    """A monomial order on ``n`` variables.

    ``variable_order`` lists variable indices from largest to smallest.
    ``kind`` is ``lex`` or ``grevlex``; ``weights`` turns grevlex into a
    weighted degree order (degree first, then reverse lex).  ``eliminate``
    names variables that are compared first by their total exponent, which
    makes the order an elimination order for them.
    """

    kind: str
    variable_order: tuple[int, ...]
    weights: tuple[int, ...] | None = None
    eliminate: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("lex", "grevlex"):
            raise ValueError(f"unknown term order {self.kind!r}")
        vo = tuple(int(v) for v in self.variable_order)
        if sorted(vo) != list(range(len(vo))):
            raise ValueError("variable order must be a permutation")
        object.__setattr__(self, "variable_order", vo)
        if self.weights is not None:
            w = tuple(int(v) for v in self.weights)
            if len(w) != len(vo) or any(v <= 0 for v in w):
                raise ValueError("weights must be positive, one per variable")
            object.__setattr__(self, "weights", w)
        object.__setattr__(self, "eliminate", tuple(int(v) for v in self.eliminate))

    @property
    def nvars(self) -> int:
        return len(self.variable_order)

    @classmethod
    def lex(cls, n: int, variable_order: Sequence[int] | None = None) -> "TermOrder":
        return cls("lex", tuple(range(n)) if variable_order is None else tuple(variable_order))

    @classmethod
    def grevlex(cls, n: int, variable_order: Sequence[int] | None = None, weights=None) -> "TermOrder":
        return cls("grevlex", tuple(range(n)) if variable_order is None else tuple(variable_order), weights)

    @classmethod
    def reversed_grevlex(cls, n: int) -> "TermOrder":
        """grevlex with ``x_d > x_{d-1} > ... > x_1``."""
        return cls("grevlex", tuple(reversed(range(n))))

    def key_function(self):
        vo = self.variable_order
        rev = tuple(reversed(vo))
        elim = self.eliminate
        w = self.weights
        if self.kind == "lex":
            base = lambda m: tuple(m[v] for v in vo)
        elif w is None:
            base = lambda m: (sum(m), tuple(-m[v] for v in rev))
        else:
            base = lambda m: (sum(a * b for a, b in zip(w, m)), tuple(-m[v] for v in rev))
        if not elim:
            return base
        return lambda m: (sum(m[v] for v in elim), base(m))

    def key(self, m: Monomial):
        return self.key_function()(m)

    def greater(self, a: Monomial, b: Monomial) -> bool:
        k = self.key_function()
        return k(a) > k(b)


# ---------------------------------------------------------------------------
# Binomials


def _mask(m: Monomial) -> int:
    out = 0
    for i, e in enumerate(m):
        if e:
            out |= 1 << i
    return out


def _divides(a: Monomial, b: Monomial) -> bool:
    return all(x <= y for x, y in zip(a, b))


def _lcm(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x if x > y else y for x, y in zip(a, b))


def _coprime(a: Monomial, b: Monomial) -> bool:
    return not any(x and y for x, y in zip(a, b))


@dataclass(frozen=True)
class Binomial:
    """``x^lead - x^trail``; as a move, ``lead - trail`` (``m+`` and ``m-`` when supports are disjoint)."""

    lead: Monomial
    trail: Monomial

    def __post_init__(self):
        object.__setattr__(self, "lead", tuple(int(v) for v in self.lead))
        object.__setattr__(self, "trail", tuple(int(v) for v in self.trail))
        if len(self.lead) != len(self.trail):
            raise ValueError("terms have different numbers of variables")
        if any(v < 0 for v in self.lead + self.trail):
            raise ValueError("negative exponent")

    @classmethod
    def from_move(cls, move: Sequence[int], order: TermOrder | None = None) -> "Binomial":
        plus = tuple(max(int(v), 0) for v in move)
        minus = tuple(max(-int(v), 0) for v in move)
        b = cls(plus, minus)
        return b.oriented(order) if order is not None else b

    @property
    def nvars(self) -> int:
        return len(self.lead)

    @property
    def is_zero(self) -> bool:
        return self.lead == self.trail

    def move(self) -> tuple[int, ...]:
        return tuple(a - b for a, b in zip(self.lead, self.trail))

    def oriented(self, order: TermOrder) -> "Binomial":
        if order.greater(self.trail, self.lead):
            return Binomial(self.trail, self.lead)
        return self

    def support(self) -> set[int]:
        return {i for i, (a, b) in enumerate(zip(self.lead, self.trail)) if a or b}

    def degree_in(self, i: int) -> int:
        return max(self.lead[i], self.trail[i])

    def multiply(self, m: Monomial) -> "Binomial":
        return Binomial(tuple(a + c for a, c in zip(self.lead, m)), tuple(b + c for b, c in zip(self.trail, m)))

    def format(self, labels: Sequence[str] | None = None) -> str:
        def mono(m):
            parts = []
            for i, e in enumerate(m):
                if e:
                    name = f"x{i + 1}" if labels is None else f"x_{labels[i]}"
                    parts.append(name if e == 1 else f"{name}^{e}")
            return "*".join(parts) or "1"

        return f"{mono(self.lead)} - {mono(self.trail)}"


# ---------------------------------------------------------------------------
# Reduction and Gröbner bases


class _Reducer:
    """Monomial reduction modulo a list of binomials (leads w.r.t. one order)."""

    def __init__(self, polys: Sequence[Binomial] = ()):
        self.leads: list[Monomial] = []
        self.trails: list[Monomial] = []
        self.masks: list[int] = []
        for g in polys:
            self.add(g)

    def add(self, g: Binomial) -> None:
        self.leads.append(g.lead)
        self.trails.append(g.trail)
        self.masks.append(_mask(g.lead))

    def divisor(self, m: Monomial, mm: int | None = None, skip: int = -1) -> int | None:
        mm = _mask(m) if mm is None else mm
        for k, (lm, lead) in enumerate(zip(self.masks, self.leads)):
            if k != skip and lm & ~mm == 0 and _divides(lead, m):
                return k
        return None

    def reduce(self, m: Monomial, skip: int = -1, limit: int = 1_000_000) -> Monomial:
        steps = 0
        while True:
            k = self.divisor(m, skip=skip)
            if k is None:
                return m
            lead, trail = self.leads[k], self.trails[k]
            m = tuple(a - b + c for a, b, c in zip(m, lead, trail))
            steps += 1
            if steps > limit:
                raise BudgetExceeded("monomial reduction did not terminate within budget")


def _reduce_binomial(g: Binomial, red: _Reducer, key, skip: int = -1) -> Binomial | None:
    a = red.reduce(g.lead, skip)
    b = red.reduce(g.trail, skip)
    if a == b:
        return None
    return Binomial(a, b) if key(a) > key(b) else Binomial(b, a)


@dataclass
class GroebnerBasis:
    elements: list[Binomial]
    order: TermOrder
    reduced: bool = False
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self._red = _Reducer(self.elements)
        self._key = self.order.key_function()

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def leads(self) -> list[Monomial]:
        return [g.lead for g in self.elements]

    def reduce_monomial(self, m: Monomial) -> Monomial:
        return self._red.reduce(tuple(int(v) for v in m))

    def normal_form(self, target: Binomial | Sequence[int]) -> Binomial | Monomial | None:
        """Normal form of a binomial (``None`` when it reduces to zero) or of a monomial."""
        if isinstance(target, Binomial):
            return _reduce_binomial(target, self._red, self._key)
        return self.reduce_monomial(target)

    def contains(self, g: Binomial) -> bool:
        return self.normal_form(g) is None

    def same_ideal(self, other: "GroebnerBasis") -> bool:
        return all(other.contains(g) for g in self.elements) and all(self.contains(g) for g in other.elements)

    def canonical(self) -> tuple:
        return tuple(sorted((g.lead, g.trail) for g in self.elements))


def normal_form(target, basis: GroebnerBasis):
    return basis.normal_form(target)


@dataclass(frozen=True)
class Limits:
    """Budgets for Buchberger; exceeding any raises :class:`BudgetExceeded`."""

    max_pairs: int = 2_000_000
    max_elements: int = 20_000
    max_degree: int | None = None


def _sugar_weights(order: TermOrder, weights) -> tuple[int, ...]:
    if weights is not None:
        return tuple(int(v) for v in weights)
    if order.weights is not None:
        return order.weights
    return (1,) * order.nvars


def buchberger(
    generators: Iterable[Binomial],
    order: TermOrder,
    limits: Limits | None = None,
    weights: Sequence[int] | None = None,
) -> GroebnerBasis:
    """Reduced Gröbner basis of the ideal generated by binomials.

    Pairs are processed by increasing weighted degree of their lcm
    (``weights`` default to the order's weights, else all ones) and pruned
    with the Gebauer-Möller criteria.
    """
    limits = limits or Limits()
    key = order.key_function()
    w = _sugar_weights(order, weights)
    wdeg = lambda m: sum(a * b for a, b in zip(w, m))

    polys: list[Binomial] = []
    active: list[int] = []
    red = _Reducer()
    red_index: list[int] = []  # red slot -> poly id
    red_masks: list[int] = []  # poly id -> support mask of its lead
    pairs: list = []
    counter = itertools.count()
    pairs_done = 0

    def rebuild_reducer():
        nonlocal red, red_index
        red = _Reducer([polys[k] for k in active])
        red_index = list(active)

    def update(h_id: int):
        nonlocal active
        h = polys[h_id]
        hl = h.lead
        hm = _mask(hl)
        C = deque()
        for g_id in active:
            l = _lcm(polys[g_id].lead, hl)
            C.append((g_id, l, _mask(l)))
        D = []
        while C:
            g_id, l1, m1 = C.popleft()
            cop = not (red_masks[g_id] & hm)
            if cop or not any(
                m2 & ~m1 == 0 and _divides(l2, l1) for _, l2, m2 in itertools.chain(C, ((e[0], e[1], e[3]) for e in D))
            ):
                D.append((g_id, l1, cop, m1))
        new_pairs = [(g_id, l) for g_id, l, cop, _ in D if not cop]
        # prune old pairs by the chain criterion
        kept = []
        for entry in pairs:
            _, _, a, b, lab = entry
            if _divides(hl, lab):
                la = _lcm(polys[a].lead, hl)
                lb = _lcm(polys[b].lead, hl)
                if la != lab and lb != lab:
                    continue
            kept.append(entry)
        if len(kept) != len(pairs):
            pairs[:] = kept
            heapq.heapify(pairs)
        for g_id, l in new_pairs:
            d = wdeg(l)
            if limits.max_degree is not None and d > limits.max_degree:
                raise BudgetExceeded(f"S-pair degree {d} exceeds the cap {limits.max_degree}")
            heapq.heappush(pairs, (d, next(counter), g_id, h_id, l))
        active = [g for g in active if not _divides(hl, polys[g].lead)] + [h_id]
        rebuild_reducer()

    for g in generators:
        if g.nvars != order.nvars:
            raise ValueError("generator has the wrong number of variables")
        r = _reduce_binomial(g, red, key)
        if r is None:
            continue
        polys.append(r)
        red_masks.append(_mask(r.lead))
        update(len(polys) - 1)

    while pairs:
        _, _, a, b, l = heapq.heappop(pairs)
        pairs_done += 1
        if pairs_done > limits.max_pairs:
            raise BudgetExceeded(f"Buchberger exceeded {limits.max_pairs} S-pairs")
        ga, gb = polys[a], polys[b]
        ma = tuple(x - y for x, y in zip(l, ga.lead))
        mb = tuple(x - y for x, y in zip(l, gb.lead))
        s1 = tuple(x + y for x, y in zip(ma, ga.trail))
        s2 = tuple(x + y for x, y in zip(mb, gb.trail))
        if s1 == s2:
            continue
        h = _reduce_binomial(Binomial(s1, s2), red, key)
        if h is None:
            continue
        polys.append(h)
        red_masks.append(_mask(h.lead))
        if len(active) + 1 > limits.max_elements:
            raise BudgetExceeded(f"Gröbner basis exceeded {limits.max_elements} elements")
        update(len(polys) - 1)

    basis = interreduce([polys[k] for k in active], order)
    basis.stats.update({"pairs": pairs_done, "generated": len(polys)})
    return basis


def interreduce(polys: Sequence[Binomial], order: TermOrder) -> GroebnerBasis:
    """Minimal, fully reduced basis (assumes the input is a Gröbner basis)."""
    key = order.key_function()
    items = sorted({(g.lead, g.trail) for g in polys}, key=lambda p: key(p[0]))
    minimal = []
    for k, (lead, trail) in enumerate(items):
        if any(_divides(l2, lead) for l2, _ in minimal):
            continue
        minimal.append((lead, trail))
    red = _Reducer([Binomial(l, t) for l, t in minimal])
    out = []
    for k, (lead, trail) in enumerate(minimal):
        t = red.reduce(trail)
        if t != lead:
            out.append(Binomial(lead, t))
    out.sort(key=lambda g: key(g.lead), reverse=True)
    return GroebnerBasis(out, order, reduced=True)


def s_pairs_reduce_to_zero(basis: Sequence[Binomial], order: TermOrder) -> tuple[bool, Binomial | None]:
    """Buchberger's criterion: every S-polynomial reduces to zero modulo ``basis``.

    Returns the first nonzero remainder as a witness.
    """
    key = order.key_function()
    polys = [g.oriented(order) for g in basis]
    red = _Reducer(polys)
    for a, b in itertools.combinations(range(len(polys)), 2):
        ga, gb = polys[a], polys[b]
        if _coprime(ga.lead, gb.lead):
            continue
        l = _lcm(ga.lead, gb.lead)
        s1 = tuple(x - y + z for x, y, z in zip(l, ga.lead, ga.trail))
        s2 = tuple(x - y + z for x, y, z in zip(l, gb.lead, gb.trail))
        if s1 == s2:
            continue
        r = _reduce_binomial(Binomial(s1, s2), red, key)
        if r is not None:
            return False, r
    return True, None


# ---------------------------------------------------------------------------
# Saturation and quotients


def _strip_power(g: Binomial, v: int) -> Binomial:
    k = min(g.lead[v], g.trail[v])
    if not k:
        return g
    lead = list(g.lead)
    trail = list(g.trail)
    lead[v] -= k
    trail[v] -= k
    return Binomial(tuple(lead), tuple(trail))


def _is_homogeneous(gens: Sequence[Binomial], weights: Sequence[int]) -> bool:
    return all(
        sum(w * a for w, a in zip(weights, g.lead)) == sum(w * b for w, b in zip(weights, g.trail)) for g in gens
    )


def saturate_variable(gens: Sequence[Binomial], v: int, weights: Sequence[int], limits: Limits | None = None) -> list[Binomial]:
    """``I : x_v^inf`` for an ideal homogeneous under positive ``weights``.

    Weighted reverse lex with ``x_v`` smallest: ``x_v`` divides a homogeneous
    element iff it divides its lead term, so dividing out ``x_v`` from a
    Gröbner basis gives a Gröbner basis of the saturation.
    """
    n = len(weights)
    vo = [u for u in range(n) if u != v] + [v]
    order = TermOrder("grevlex", tuple(vo), tuple(weights))
    gb = buchberger(gens, order, limits)
    return [_strip_power(g, v) for g in gb.elements]


def quotient_variable(gens: Sequence[Binomial], v: int, weights: Sequence[int], limits: Limits | None = None) -> list[Binomial]:
    """``I : x_v`` for an ideal homogeneous under positive ``weights`` (one division by ``x_v``)."""
    n = len(weights)
    vo = [u for u in range(n) if u != v] + [v]
    order = TermOrder("grevlex", tuple(vo), tuple(weights))
    gb = buchberger(gens, order, limits)
    out = []
    for g in gb.elements:
        if g.lead[v] and g.trail[v]:
            lead = list(g.lead)
            trail = list(g.trail)
            lead[v] -= 1
            trail[v] -= 1
            out.append(Binomial(tuple(lead), tuple(trail)))
        else:
            out.append(g)
    return out


def _with_extra_variable(gens: Sequence[Binomial]) -> list[Binomial]:
    return [Binomial(g.lead + (0,), g.trail + (0,)) for g in gens]


def _drop_last(g: Binomial) -> Binomial:
    return Binomial(g.lead[:-1], g.trail[:-1])


def saturate(
    gens: Sequence[Binomial],
    f: Sequence[int],
    order: TermOrder | None = None,
    limits: Limits | None = None,
    verify: bool = True,
    max_power: int = 64,
) -> GroebnerBasis:
    """``I : f^inf`` for a monomial ``f`` (exponent vector) by eliminating an auxiliary ``y``.

    Adjoins ``1 - f y`` and computes a Gröbner basis in an order that
    eliminates ``y``; the elements free of ``y`` form a Gröbner basis of the
    saturation under ``order`` (default grevlex).  With ``verify`` every
    output element ``g`` is checked to satisfy ``f^k g in I`` for some ``k``.
    """
    gens = list(gens)
    if not gens:
        raise ValueError("empty generator list")
    n = gens[0].nvars
    f = tuple(int(v) for v in f)
    if len(f) != n:
        raise ValueError("monomial has the wrong number of variables")
    order = order or TermOrder.grevlex(n)
    ext = TermOrder(order.kind, order.variable_order + (n,), None if order.weights is None else order.weights + (1,), (n,))
    aux = Binomial(f + (1,), (0,) * (n + 1))  # f y - 1
    gb = buchberger(_with_extra_variable(gens) + [aux], ext, limits)
    kept = [_drop_last(g) for g in gb.elements if g.lead[n] == 0 and g.trail[n] == 0]
    result = interreduce(kept, order)
    if verify:
        base = buchberger(gens, order, limits)
        for g in result.elements:
            if not any(base.contains(g.multiply(tuple(k * e for e in f))) for k in range(max_power + 1)):
                raise ArithmeticError("saturation element not certified by f^k g in I")
    return result


def ideal_quotient(
    gens: Sequence[Binomial],
    f: Sequence[int],
    order: TermOrder | None = None,
    limits: Limits | None = None,
    weights: Sequence[int] | None = None,
    verify: bool = True,
) -> GroebnerBasis:
    """``I : f = {g : f g in I}`` for a monomial ``f``.

    If ``weights`` (positive) make the generators homogeneous, ``f`` is
    divided out one variable at a time (``I : x^a x^b = (I : x^a) : x^b``);
    otherwise ``I cap <f>`` is computed by eliminating ``t`` from
    ``t I + (1 - t) <f>`` and divided by ``f``.
    """
    gens = list(gens)
    if not gens:
        raise ValueError("empty generator list")
    n = gens[0].nvars
    f = tuple(int(v) for v in f)
    order = order or TermOrder.grevlex(n)
    if weights is not None and _is_homogeneous(gens, weights):
        cur = gens
        for v, e in enumerate(f):
            for _ in range(e):
                cur = quotient_variable(cur, v, weights, limits)
        result = buchberger(cur, order, limits)
    else:
        ext = TermOrder(order.kind, order.variable_order + (n,), None if order.weights is None else order.weights + (1,), (n,))
        t_gens = [Binomial(g.lead + (1,), g.trail + (1,)) for g in gens]
        t_gens.append(Binomial(f + (0,), f + (1,)))  # f - t f
        gb = buchberger(t_gens, ext, limits)
        inter = [_drop_last(g) for g in gb.elements if g.lead[n] == 0 and g.trail[n] == 0]
        divided = []
        for g in inter:
            if not (_divides(f, g.lead) and _divides(f, g.trail)):
                raise ArithmeticError("element of I cap <f> is not divisible by f")
            divided.append(Binomial(tuple(a - c for a, c in zip(g.lead, f)), tuple(b - c for b, c in zip(g.trail, f))))
        result = interreduce(divided, order) if divided else GroebnerBasis([], order, reduced=True)
        result = buchberger(result.elements, order, limits) if divided else result
    if verify:
        base = buchberger(gens, order, limits)
        for g in result.elements:
            if not base.contains(g.multiply(f)):
                raise ArithmeticError("quotient element g fails f g in I")
    return result


# ---------------------------------------------------------------------------
# Toric ideals


def column_weights(system: ConstraintSystem) -> tuple[int, ...]:
    """Column sums of ``A``: a positive grading making every toric binomial homogeneous."""
    return tuple(int(v) for v in system.matrix.sum(axis=0))


def _matrix_of(system_or_matrix) -> np.ndarray:
    if isinstance(system_or_matrix, ConstraintSystem):
        return system_or_matrix.matrix
    return np.asarray(system_or_matrix, dtype=np.int64)


def lattice_generators(A) -> list[Binomial]:
    A = np.asarray(A, dtype=np.int64)
    basis = integer_kernel_basis(A.tolist(), A.shape[1])
    return [Binomial.from_move(m) for m in basis]


def _positive_grading(P: list[list[int]]) -> tuple[int, ...] | None:
    """Integer ``w >= 1`` with ``P w = 0``, or ``None`` if the row space of ``P`` meets the open orthant."""
    width = len(P[0])
    rows = [r for r in P if any(r)]
    if not rows:
        return (1,) * width
    # w = 1 + s with s >= 0
    tab = Tableau(rows, [-sum(r) for r in rows])
    if not tab.phase_one():
        return None
    w = [Fraction(1) + x for x in tab.witness()]
    den = math.lcm(*(x.denominator for x in w))
    return tuple(int(x * den) for x in w)


def _lift_order(A: np.ndarray) -> list[int]:
    """Coordinates grouped by rows of ``A``, smallest new support first."""
    d = A.shape[1]
    supports = [set(np.flatnonzero(row).tolist()) for row in A]
    seen: set[int] = set()
    order: list[int] = []
    while len(order) < d:
        best = min(
            (s for s in supports if s - seen),
            key=lambda s: (len(s - seen), min(s - seen)),
            default=None,
        )
        new = sorted(best - seen) if best is not None else sorted(set(range(d)) - seen)
        order.extend(new)
        seen.update(new)
    return order


def markov_basis(A, limits: Limits | None = None) -> list[tuple[int, ...]]:
    """Moves generating the toric ideal of ``A``, by lifting one coordinate at a time.

    A set of moves is ``tau``-connecting if every fiber pair ``u+, u-`` is
    joined by a walk that stays nonnegative on the coordinates ``tau``
    (others are free).  A lattice basis is ``{}``-connecting.  Given a
    ``tau``-connecting set, saturating its projected ideal on
    ``tau + {i}`` by ``x_i`` yields the lattice ideal of the projection,
    whose generators lifted back (plus moves vanishing on ``tau + {i}``) are
    ``(tau + {i})``-connecting.  Every intermediate ideal is a lattice ideal.
    """
    A = np.asarray(A, dtype=np.int64)
    d = A.shape[1]
    B = integer_kernel_basis(A.tolist(), d)
    if not B:
        return []
    k = len(B)
    moves = [tuple(b) for b in B]
    tau: list[int] = []
    for i in _lift_order(A):
        tau.append(i)
        P = [[B[r][j] for r in range(k)] for j in tau]  # projection of the basis, |tau| x k
        proj = {}
        for m in moves:
            v = tuple(m[j] for j in tau)
            if any(v):
                neg = tuple(-x for x in v)
                if neg not in proj:
                    proj[v] = m
        if not proj:
            continue
        gens = [Binomial.from_move(v) for v in proj]
        pos = len(tau) - 1
        w = _positive_grading([[B[r][j] for j in tau] for r in range(k)])
        if w is not None:
            sat = saturate_variable(gens, pos, w, limits)
        else:
            sat = saturate(gens, tuple(int(j == pos) for j in range(len(tau))), limits=limits, verify=False).elements
        solver = IntegerSolver(P)
        lifted = []
        for g in sat:
            c = solver.solve(g.move())
            if c is None:
                raise ArithmeticError("saturation element outside the projected lattice")
            lifted.append(tuple(sum(c[r] * B[r][j] for r in range(k)) for j in range(d)))
        free = integer_kernel_basis(P, k) if solver.rank < k else []
        for c in free:
            lifted.append(tuple(sum(c[r] * B[r][j] for r in range(k)) for j in range(d)))
        moves = lifted
    for m in moves:
        if (A @ np.asarray(m, dtype=np.int64)).any():
            raise ArithmeticError("lifted element is not a move")
    return moves


def toric_ideal_of_matrix(A, order: TermOrder, limits: Limits | None = None) -> GroebnerBasis:
    """Reduced Gröbner basis of ``I_A`` for a nonnegative matrix with positive column sums."""
    A = np.asarray(A, dtype=np.int64)
    d = A.shape[1]
    if order.nvars != d:
        raise ValueError("term order has the wrong number of variables")
    if d == 0:
        return GroebnerBasis([], order, reduced=True)
    weights = tuple(int(v) for v in A.sum(axis=0))
    if any(v <= 0 for v in weights):
        raise ValueError("every column needs a positive entry")
    moves = markov_basis(A, limits)
    if not moves:
        return GroebnerBasis([], order, reduced=True)
    gb = buchberger([Binomial.from_move(m) for m in moves], order, limits, weights=weights)
    for g in gb.elements:
        if (A @ np.asarray(g.move(), dtype=np.int64)).any():
            raise ArithmeticError("toric basis element is not a move")
    gb.stats["markov_size"] = len(moves)
    return gb


def toric_ideal(system: ConstraintSystem, order: TermOrder | None = None, limits: Limits | None = None) -> GroebnerBasis:
    """Reduced Gröbner basis of the toric ideal of the system (default: lex, column order)."""
    order = order or TermOrder.lex(system.num_cells)
    return toric_ideal_of_matrix(system.matrix, order, limits)


def certify_toric_membership(gb: GroebnerBasis, A, rng: np.random.Generator, trials: int = 20, scale: int = 3) -> bool:
    """Random fiber pairs ``u, v`` (``A u = A v``) must give ``x^u - x^v`` reducing to zero."""
    A = np.asarray(A, dtype=np.int64)
    basis = integer_kernel_basis(A.tolist(), A.shape[1])
    if not basis:
        return True
    B = np.asarray(basis, dtype=np.int64)
    for _ in range(trials):
        c = rng.integers(-scale, scale + 1, size=B.shape[0])
        m = c @ B
        base = rng.integers(0, scale + 1, size=A.shape[1])
        u = base + np.maximum(m, 0)
        v = base + np.maximum(-m, 0)
        if not gb.contains(Binomial(tuple(u), tuple(v)).oriented(gb.order)):
            return False
    return True


# ---------------------------------------------------------------------------
# Move sets


@dataclass(frozen=True)
class MoveSet:
    moves: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "moves", tuple(tuple(int(v) for v in m) for m in self.moves))
        if len({len(m) for m in self.moves}) > 1:
            raise ValueError("moves have different lengths")

    def __len__(self):
        return len(self.moves)

    @classmethod
    def from_binomials(cls, binomials: Iterable[Binomial]) -> "MoveSet":
        return cls(tuple(g.move() for g in binomials))

    def binomials(self, order: TermOrder | None = None) -> list[Binomial]:
        return [Binomial.from_move(m, order) for m in self.moves]

    def check(self, system: ConstraintSystem) -> None:
        A = system.matrix
        for m in self.moves:
            if len(m) != A.shape[1]:
                raise ValueError("move length does not match the number of cells")
            if (A @ np.asarray(m, dtype=np.int64)).any():
                raise ValueError(f"not a move: A m != 0 for {m}")


def write_moves(path, moves: MoveSet) -> None:
    """One move per line, entries separated by spaces."""
    Path(path).write_text("".join(" ".join(str(v) for v in m) + "\n" for m in moves.moves))


def read_moves(path) -> MoveSet:
    """Read moves; ``#`` comments and a leading ``rows cols`` header line are accepted."""
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append([int(tok) for tok in line.split()])
    if lines and len(lines[0]) == 2:
        rows, cols = lines[0]
        rest = lines[1:]
        if len(rest) == rows and all(len(r) == cols for r in rest) and cols != 2:
            lines = rest
    return MoveSet(tuple(tuple(r) for r in lines))


# ---------------------------------------------------------------------------
# Checkers


@dataclass
class CheckReport:
    name: str
    verdict: str
    details: dict = field(default_factory=dict)
    witness: dict | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def as_dict(self) -> dict:
        return {"name": self.name, "verdict": self.verdict, "details": self.details, "witness": self.witness}


def _square_free_tail_violation(elements: Sequence[Binomial], d: int):
    """First ``(i, g)`` with ``g`` supported on ``x_i..x_d`` and degree > 1 in ``x_i``."""
    for i in range(d):
        for g in elements:
            sup = g.support()
            if sup and min(sup) == i and g.degree_in(i) > 1:
                return i, g
    return None


def check_prop_3_1(system: ConstraintSystem, limits: Limits | None = None, basis: GroebnerBasis | None = None) -> CheckReport:
    """Lex basis (``x_1 > ... > x_d``) square-free in ``x_i`` on each tail ``x_i..x_d``."""
    d = system.num_cells
    try:
        gb = basis or toric_ideal(system, TermOrder.lex(d), limits)
    except BudgetExceeded as exc:
        return CheckReport("prop31", INCONCLUSIVE, {"reason": str(exc)})
    bad = _square_free_tail_violation(gb.elements, d)
    details = {"basis_size": len(gb)}
    if bad is None:
        return CheckReport("prop31", PASS, details)
    i, g = bad
    return CheckReport(
        "prop31",
        FAIL,
        details,
        {
            "cell": i,
            "cell_label": system.cell_labels[i],
            "exponent": g.degree_in(i),
            "element_index": gb.elements.index(g),
            "binomial": g.format(system.cell_labels),
            "move": list(g.move()),
        },
    )


def check_prop_4_1(moves: MoveSet, system: ConstraintSystem, limits: Limits | None = None) -> CheckReport:
    """The three hypotheses for a move set: lex Gröbner basis of itself,
    square-free tails, and ``(I : x_i^inf) cap Q[x_{i+1}..x_d]`` inside ``I``."""
    moves.check(system)
    d = system.num_cells
    lex = TermOrder.lex(d)
    G = [g for g in moves.binomials(lex) if not g.is_zero]
    sub: dict = {}
    # (1)
    ok1, rem = s_pairs_reduce_to_zero(G, lex)
    sub["groebner"] = PASS if ok1 else FAIL
    witness = None
    if not ok1:
        witness = {"condition": 1, "remainder": rem.format(system.cell_labels)}
    # (2)
    bad = _square_free_tail_violation(G, d)
    sub["square_free"] = PASS if bad is None else FAIL
    if bad is not None and witness is None:
        witness = {"condition": 2, "cell": bad[0], "binomial": bad[1].format(system.cell_labels)}
    # (3)
    weights = column_weights(system)
    sub["saturation"] = PASS
    if not G:
        pass
    elif not ok1:
        sub["saturation"] = INCONCLUSIVE
    else:
        base = GroebnerBasis(interreduce(G, lex).elements, lex)
        try:
            for i in range(d - 1):
                if not any(g.lead[i] or g.trail[i] for g in G):
                    continue
                sat = saturate_variable(G, i, weights, limits)
                tail_gb = buchberger(sat, lex, limits, weights=weights)
                for g in tail_gb.elements:
                    sup = g.support()
                    if sup and min(sup) > i and not base.contains(g):
                        sub["saturation"] = FAIL
                        if witness is None:
                            witness = {"condition": 3, "cell": i, "binomial": g.format(system.cell_labels)}
                        break
                if sub["saturation"] == FAIL:
                    break
        except BudgetExceeded as exc:
            sub["saturation"] = INCONCLUSIVE
            sub["reason"] = str(exc)
    verdicts = [sub["groebner"], sub["square_free"], sub["saturation"]]
    verdict = FAIL if FAIL in verdicts else INCONCLUSIVE if INCONCLUSIVE in verdicts else PASS
    return CheckReport("prop41", verdict, {"moves": len(G), **sub}, witness)


@dataclass(frozen=True)
class PositivitySupport:
    """Cells whose LP minimum over the rational fiber is strictly positive."""

    indices: tuple[int, ...]
    margin: tuple[int, ...] | None = None

    def monomial(self, d: int) -> tuple[int, ...]:
        s = set(self.indices)
        return tuple(int(j in s) for j in range(d))


def positive_support(system: ConstraintSystem, t: Sequence[int]) -> PositivitySupport:
    plan = SystemPlan.of(system)
    t = tuple(int(v) for v in t)
    out = []
    for j in range(system.num_cells):
        rng = plan.rational_range(t, 0, j, points=False)
        if rng is None:
            raise ValueError("the margin has no nonnegative rational solution")
        if rng[0] > 0:
            out.append(j)
    return PositivitySupport(tuple(out), t)


def check_lemma_4_2(
    moves: MoveSet, system: ConstraintSystem, support: PositivitySupport, limits: Limits | None = None,
    toric: GroebnerBasis | None = None,
) -> bool:
    """``(I_M : prod_{s in S} x_s) == I_A``; positivity of ``S`` on the fiber is re-verified by LP."""
    moves.check(system)
    d = system.num_cells
    if support.margin is not None:
        plan = SystemPlan.of(system)
        for s in support.indices:
            rng = plan.rational_range(support.margin, 0, s, points=False)
            if rng is None or rng[0] <= 0:
                raise ValueError(f"cell {s} is not positive on every fiber element")
    weights = column_weights(system)
    order = TermOrder.grevlex(d, weights=weights)
    target = toric if toric is not None and toric.order == order else toric_ideal(system, order, limits)
    gens = [g for g in moves.binomials(order) if not g.is_zero]
    if not gens:
        return len(target) == 0
    quotient = ideal_quotient(gens, support.monomial(d), order, limits, weights=weights, verify=False)
    return quotient.canonical() == target.canonical()


def _subbasis_lower(moves: MoveSet, system: ConstraintSystem, support: PositivitySupport, limits: Limits | None) -> tuple[str, dict]:
    """Lower bounds through a move subset: a lex basis of itself with 0/1 leads,
    the saturation property, and one quotient by the positive cells giving ``I_A``."""
    d = system.num_cells
    lex = TermOrder.lex(d)
    G = [g for g in moves.binomials(lex) if not g.is_zero]
    info: dict = {"moves": len(G)}
    if any(max(g.lead) > 1 for g in G):
        info["reason"] = "a subbasis lead term is not square-free"
        return FAIL, info
    report = check_prop_4_1(moves, system, limits)
    info["groebner"] = report.details["groebner"]
    info["saturation"] = report.details["saturation"]
    if FAIL in (info["groebner"], info["saturation"]):
        return FAIL, info
    if INCONCLUSIVE in (info["groebner"], info["saturation"]):
        return INCONCLUSIVE, info
    try:
        ok = check_lemma_4_2(moves, system, support, limits)
    except BudgetExceeded as exc:
        info["reason"] = str(exc)
        return INCONCLUSIVE, info
    info["quotient"] = PASS if ok else FAIL
    return (PASS if ok else FAIL), info


def check_corollary_5_1(
    system: ConstraintSystem,
    limits: Limits | None = None,
    lex_basis: GroebnerBasis | None = None,
    subbasis: MoveSet | None = None,
    support: PositivitySupport | None = None,
) -> CheckReport:
    """Lower: square-free lex leads.  Upper: square-free leads of the grevlex
    (``x_d > ... > x_j``) basis of every suffix ideal ``I_{A_j}``.

    If the lex leads of ``I_A`` are not square-free, a move ``subbasis``
    together with the positive ``support`` of a margin can still certify the
    lower direction for that margin.
    """
    d = system.num_cells
    details: dict = {}
    witness: dict = {}
    try:
        lex = lex_basis or toric_ideal(system, TermOrder.lex(d), limits)
    except BudgetExceeded as exc:
        return CheckReport("cor51", INCONCLUSIVE, {"lower": INCONCLUSIVE, "upper": INCONCLUSIVE, "reason": str(exc)})
    bad = [g for g in lex.elements if max(g.lead) > 1]
    details["lower"] = PASS if not bad else FAIL
    details["lex_size"] = len(lex)
    if bad:
        witness["lower"] = bad[0].format(system.cell_labels)
        if subbasis is not None and support is not None:
            verdict, info = _subbasis_lower(subbasis, system, support, limits)
            details["lower"] = verdict
            details["lower_subbasis"] = info
            if verdict != FAIL:
                witness.pop("lower")
    upper = PASS
    first_fail = None
    sizes = []
    try:
        for j in range(d):
            # Elimination: lex elements on x_j..x_d generate the suffix toric ideal.
            gens = [g for g in lex.elements if all(i >= j for i in g.support())]
            n = d - j
            order = TermOrder.reversed_grevlex(n)
            local = [Binomial(g.lead[j:], g.trail[j:]).oriented(order) for g in gens]
            gb = buchberger(local, order, limits) if local else GroebnerBasis([], order, reduced=True)
            sizes.append(len(gb))
            offending = [g for g in gb.elements if max(g.lead) > 1]
            if offending:
                upper = FAIL
                if first_fail is None:
                    first_fail = j
                    witness["upper"] = {
                        "cell": j,
                        "cell_label": system.cell_labels[j],
                        "binomial": offending[0].format(system.cell_labels[j:]),
                    }
    except BudgetExceeded as exc:
        upper = INCONCLUSIVE
        details["reason"] = str(exc)
    details["upper"] = upper
    details["grevlex_sizes"] = sizes
    if first_fail is not None:
        details["first_upper_failure"] = first_fail
    verdicts = (details["lower"], upper)
    verdict = PASS if verdicts == (PASS, PASS) else FAIL if FAIL in verdicts else INCONCLUSIVE
    return CheckReport("cor51", verdict, details, witness or None)


def connectivity_check(moves: MoveSet, system: ConstraintSystem, t: Sequence[int], budget: int = 1_000_000) -> bool:
    """Breadth-first search over the enumerated fiber using ``n -> n +- m``."""
    moves.check(system)
    tables = [tb.counts for tb in enumerate_fiber(system, t, budget)]
    if len(tables) <= 1:
        return True
    fiber = set(tables)
    steps = [np.asarray(m, dtype=np.int64) for m in moves.moves]
    steps += [-m for m in steps]
    seen = {tables[0]}
    queue = deque([tables[0]])
    while queue:
        cur = np.asarray(queue.popleft(), dtype=np.int64)
        for m in steps:
            nxt = cur + m
            if (nxt < 0).any():
                continue
            key = tuple(int(v) for v in nxt)
            if key in fiber and key not in seen:
                seen.add(key)
                queue.append(key)
    return len(seen) == len(fiber)
