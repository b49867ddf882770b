"""Feasible intervals for the next cell given a fixed prefix.

Three engines share one interface:

* ``lp``: exact rational LP relaxation, rounded inward,
* ``ip``: LP-based branch and bound giving the exact integer range (an oracle),
* ``shuttle``: iterative bound propagation through the constraint rows.

Also here: brute-force fiber enumeration and a sequential-interval verifier
that serve as oracles for the algebraic checks in :mod:`sistables.toric`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .exact import (
    INFEASIBLE,
    OPTIMAL,
    LinearProgram,
    coordinate_range,
    echelon_pivots,
    integer_kernel_basis,
    integer_inverse,
    simplex_solve,
)
from .model import ConstraintSystem, ModelError, TableVector


class BudgetExceeded(RuntimeError):
    """A search or enumeration hit its configured budget."""


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def _floor(q: Fraction) -> int:
    return q.numerator // q.denominator


@dataclass(frozen=True, eq=False)
class PrefixState:
    """Cells ``0..i-1`` fixed; ``residual`` is what the remaining cells must produce."""

    system: ConstraintSystem
    target_margin: tuple[int, ...]
    fixed: tuple[int, ...] = ()
    residual: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        t = tuple(int(v) for v in self.target_margin)
        fixed = tuple(int(v) for v in self.fixed)
        if len(t) != self.system.num_rows:
            raise ModelError("margin length does not match the constraint matrix")
        if len(fixed) > self.system.num_cells:
            raise ModelError("more fixed cells than cells")
        if any(v < 0 for v in fixed):
            raise ModelError("fixed counts must be nonnegative")
        res = list(t)
        A = self.system.matrix
        for j, v in enumerate(fixed):
            if v:
                for r in np.flatnonzero(A[:, j]):
                    res[r] -= int(A[r, j]) * v
        res = tuple(res)
        if self.residual is not None and tuple(int(v) for v in self.residual) != res:
            raise ModelError("stated residual margin is inconsistent with the prefix")
        object.__setattr__(self, "target_margin", t)
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "residual", res)

    @property
    def next_cell(self) -> int:
        return len(self.fixed)

    def extend(self, value: int) -> "PrefixState":
        return PrefixState(self.system, self.target_margin, self.fixed + (int(value),))


@dataclass(frozen=True)
class BoundInterval:
    """Rational bounds ``[L, U]`` and the integers ``[l', u']`` inside them.

    ``feasible`` is False when the residual system has no (rational) solution.
    For ``ip`` and ``shuttle`` the rational fields repeat the integer bounds.
    """

    lp_lower: Fraction | None
    lp_upper: Fraction | None
    int_lower: int | None
    int_upper: int | None
    method: str
    feasible: bool = True

    @property
    def empty(self) -> bool:
        return not self.feasible or self.int_lower > self.int_upper

    @property
    def width(self) -> int:
        return 0 if self.empty else self.int_upper - self.int_lower + 1

    def as_tuple(self) -> tuple[int, int] | None:
        return None if self.empty else (self.int_lower, self.int_upper)

    def contains(self, other: "BoundInterval") -> bool:
        """Interval containment; an empty interval is contained in anything."""
        if other.empty:
            return True
        if self.empty:
            return False
        return self.int_lower <= other.int_lower and other.int_upper <= self.int_upper


def _infeasible(method: str) -> BoundInterval:
    return BoundInterval(None, None, None, None, method, feasible=False)


def _from_rational(lo: Fraction, hi: Fraction, method: str) -> BoundInterval:
    return BoundInterval(lo, hi, _ceil(lo), _floor(hi), method)


# ---------------------------------------------------------------------------
# Per-suffix precomputation


_I64_SAFE = 1 << 62


def _int_matvec(M: np.ndarray, v: Sequence[int], bound_m: int) -> np.ndarray:
    """Exact ``M @ v``: int64 when the products provably fit, Python ints otherwise."""
    vv = np.asarray(v, dtype=object)
    big = max((abs(int(x)) for x in v), default=0)
    if bound_m * big * max(M.shape[-1], 1) < _I64_SAFE:
        return M @ vv.astype(np.int64)
    return M.astype(object) @ vv


class _Suffix:
    """Linear-algebra data for the columns ``i..d-1``.

    When the solution set of the suffix is at most one-dimensional the
    range of a coordinate is computed directly: a particular solution
    ``y = adj b / det`` over a row basis, plus the primitive kernel vector.
    """

    def __init__(self, A: np.ndarray, i: int, candidate_rows: Sequence[int] | None = None):
        sub = A[:, i:]
        self.i = i
        self.ncols = sub.shape[1]
        self.full = sub
        self.full_max = int(np.abs(sub).max()) if sub.size else 0
        cand = list(range(sub.shape[0])) if candidate_rows is None else list(candidate_rows)
        picked, _ = echelon_pivots(sub[cand].tolist()) if cand and self.ncols else ([], [])
        self.rows = [cand[k] for k in picked]
        self.basis_rows = [[int(v) for v in sub[r]] for r in self.rows]
        self.kdim = self.ncols - len(self.rows)
        self.kernel = None
        self.pivot_cols = None
        self.adj = None
        self.det = 1
        if self.kdim == 0 and self.ncols:
            self.pivot_cols = list(range(self.ncols))
        elif self.kdim == 1:
            k = integer_kernel_basis(self.basis_rows, self.ncols, reduce=False)[0]
            g = 0
            for x in k:
                g = math.gcd(g, x)
            self.kernel = [x // g for x in k]
            free = next(j for j, x in enumerate(self.kernel) if x)
            self.pivot_cols = [j for j in range(self.ncols) if j != free]
        if self.pivot_cols is not None:
            M = [[row[c] for c in self.pivot_cols] for row in self.basis_rows]
            inv = integer_inverse(M)
            if inv is None:
                raise ArithmeticError("row basis does not give an invertible block")
            self.adj, self.det = inv
            self.adj_max = int(max((abs(int(v)) for v in self.adj.flat), default=0))

    def scaled_particular(self, residual: Sequence[int]) -> list[int]:
        """``det * y`` for the particular solution ``y`` (free column set to zero)."""
        rhs = [int(residual[r]) for r in self.rows]
        vals = _int_matvec(self.adj, rhs, self.adj_max)
        y = [0] * self.ncols
        for c, v in zip(self.pivot_cols, vals):
            y[c] = int(v)
        return y

    def scaled_consistent(self, y: Sequence[int], scale: int, residual: Sequence[int]) -> bool:
        """Exact check of every row (dependent rows included) at ``y / scale``."""
        lhs = _int_matvec(self.full, y, self.full_max)
        return all(int(a) == scale * int(b) for a, b in zip(lhs, residual))

    def consistent(self, point: Sequence[Fraction], residual: Sequence[int]) -> bool:
        den = 1
        for v in point:
            den = den * v.denominator // math.gcd(den, v.denominator)
        return self.scaled_consistent([int(v * den) for v in point], den, residual)

    def particular(self, residual: Sequence[int]) -> list[Fraction]:
        return [Fraction(v, self.det) for v in self.scaled_particular(residual)]

    def unique_point(self, residual: Sequence[int]) -> tuple[list[int], int] | None:
        """For ``kdim == 0``: ``(det * y, det)`` if the unique solution is nonnegative, else None."""
        y = self.scaled_particular(residual)
        if any(v < 0 for v in y) or not self.scaled_consistent(y, self.det, residual):
            return None
        return y, self.det

    def direct_range(self, residual: Sequence[int], j: int, points: bool = True):
        """Exact ``(min, max)`` of coordinate ``j`` when the solution set is a point or segment."""
        if self.kdim == 0:
            got = self.unique_point(residual)
            if got is None:
                return None
            y, det = got
            if not points:
                v = Fraction(y[j], det)
                return v, v, None, None
            point = [Fraction(v, det) for v in y]
            return point[j], point[j], point, point
        y = self.scaled_particular(residual)
        k = self.kernel
        # Columns of a positive system are covered by a positive row
        # combination, so the kernel vector has entries of both signs.
        if any(yj < 0 for yj, kj in zip(y, k) if kj == 0):
            return None
        # points are (y + z k) / det with z rational
        zlo = max(Fraction(-yj, kj) for yj, kj in zip(y, k) if kj > 0)
        zhi = min(Fraction(-yj, kj) for yj, kj in zip(y, k) if kj < 0)
        if zlo > zhi or not self.scaled_consistent(y, self.det, residual):
            return None
        if not points:
            a, b = (zlo, zhi) if k[j] >= 0 else (zhi, zlo)
            return (y[j] + a * k[j]) / self.det, (y[j] + b * k[j]) / self.det, None, None
        p_lo = [(a + zlo * b) / self.det for a, b in zip(y, k)]
        p_hi = [(a + zhi * b) / self.det for a, b in zip(y, k)]
        if k[j] >= 0:
            return p_lo[j], p_hi[j], p_lo, p_hi
        return p_hi[j], p_lo[j], p_hi, p_lo

    def lp_range(self, residual: Sequence[int], j: int):
        rhs = [residual[r] for r in self.rows]
        if not self.rows:
            if any(residual):
                return None
            return Fraction(0), Fraction(0), None, None
        lo, hi = coordinate_range(self.basis_rows, rhs, j)
        if lo.status == INFEASIBLE or not self.consistent(lo.witness, residual):
            return None
        return lo.value, hi.value, lo.witness, hi.witness


class SystemPlan:
    """Cached per-suffix data for one constraint system."""

    _cache: dict = {}

    def __init__(self, system: ConstraintSystem):
        self.system = system
        self.A = system.matrix
        self.d = system.num_cells
        self._suffixes: dict[int, _Suffix] = {}
        self.columns = [np.flatnonzero(self.A[:, j]) for j in range(self.d)]

    @classmethod
    def of(cls, system: ConstraintSystem) -> "SystemPlan":
        key = hash(system)
        plan = cls._cache.get(key)
        if plan is None or plan.system != system:
            plan = cls(system)
            if len(cls._cache) > 64:
                cls._cache.clear()
            cls._cache[key] = plan
        return plan

    def suffix(self, i: int) -> _Suffix:
        s = self._suffixes.get(i)
        if s is None:
            # a row basis of columns i.. can be chosen inside one of columns i-1..
            prev = self._suffixes.get(i - 1)
            s = self._suffixes[i] = _Suffix(self.A, i, prev.rows if prev is not None else None)
        return s

    def advance(self, residual: Sequence[int], i: int, value: int) -> tuple[int, ...]:
        if not value:
            return tuple(residual)
        res = list(residual)
        col = self.A[:, i]
        for r in self.columns[i]:
            res[r] -= int(col[r]) * value
        return tuple(res)

    def rational_range(self, residual: Sequence[int], i: int, j: int | None = None, points: bool = True):
        """``(L, U, argmin, argmax)`` of cell ``j`` (default ``i``) over the suffix from ``i``, or None.

        With ``points=False`` the witnesses may be ``None``.
        """
        if i >= self.d:
            raise ModelError("no cells left to bound")
        j = i if j is None else j
        if not i <= j < self.d:
            raise ModelError("cell is not in the unfixed suffix")
        s = self.suffix(i)
        if s.pivot_cols is not None:
            return s.direct_range(residual, j - i, points)
        return s.lp_range(residual, j - i)


# ---------------------------------------------------------------------------
# Engines


class BoundEngine:
    """Interval oracle over ``(step, residual)`` with a result cache."""

    method = "abstract"

    def __init__(self, system: ConstraintSystem, cache_size: int = 200_000):
        self.system = system
        self.plan = SystemPlan.of(system)
        self._cache: dict = {}
        self.cache_size = cache_size
        self.calls = 0
        self.cache_hits = 0

    def interval(self, i: int, residual: Sequence[int]) -> BoundInterval:
        self.calls += 1
        key = (i, tuple(residual))
        hit = self._cache.get(key)
        if hit is not None:
            self.cache_hits += 1
            return hit
        result = self.compute(i, tuple(residual))
        if len(self._cache) >= self.cache_size:
            self._cache.clear()
        self._cache[key] = result
        return result

    def compute(self, i: int, residual: tuple[int, ...]) -> BoundInterval:
        raise NotImplementedError

    def stats(self) -> dict:
        return {"engine": self.method, "calls": self.calls, "cache_hits": self.cache_hits}


class LPEngine(BoundEngine):
    method = "lp"

    def compute(self, i, residual):
        rng = self.plan.rational_range(residual, i, points=False)
        if rng is None:
            return _infeasible("lp")
        return _from_rational(rng[0], rng[1], "lp")


class IPEngine(BoundEngine):
    method = "ip"

    def __init__(self, system, node_budget: int = 10_000, **kw):
        super().__init__(system, **kw)
        self.node_budget = node_budget

    def compute(self, i, residual):
        return _ip_interval(self.plan, i, residual, i, self.node_budget)


class ShuttleEngine(BoundEngine):
    method = "shuttle"

    def __init__(self, system, iterations: int = 1, **kw):
        super().__init__(system, **kw)
        if iterations < 1:
            raise ValueError("iterations must be at least 1")
        self.iterations = iterations
        self._rows: dict = {}

    def compute(self, i, residual):
        rows = self._rows.get(i)
        if rows is None:
            rows = self._rows[i] = _sparse_rows(self.plan.A[:, i:])
        return _shuttle(self.plan.A[:, i:], residual, 0, self.iterations, rows)


def make_engine(system: ConstraintSystem, name: str, **kw) -> BoundEngine:
    engines = {"lp": LPEngine, "ip": IPEngine, "shuttle": ShuttleEngine}
    try:
        return engines[name](system, **kw)
    except KeyError:
        raise ValueError(f"unknown bound engine {name!r}") from None


def _resolve_cell(state: PrefixState, cell: int | None) -> int:
    cell = state.next_cell if cell is None else int(cell)
    if not state.next_cell <= cell < state.system.num_cells:
        raise ModelError("cell must be an unfixed cell")
    return cell


def lp_bounds(state: PrefixState, cell: int | None = None) -> BoundInterval:
    plan = SystemPlan.of(state.system)
    rng = plan.rational_range(state.residual, state.next_cell, _resolve_cell(state, cell), points=False)
    if rng is None:
        return _infeasible("lp")
    return _from_rational(rng[0], rng[1], "lp")


def ip_bounds(state: PrefixState, cell: int | None = None, node_budget: int = 10_000) -> BoundInterval:
    plan = SystemPlan.of(state.system)
    return _ip_interval(plan, state.next_cell, state.residual, _resolve_cell(state, cell), node_budget)


def shuttle_bounds(state: PrefixState, cell: int | None = None, iterations: int = 1) -> BoundInterval:
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    i = state.next_cell
    j = _resolve_cell(state, cell)
    return _shuttle(state.system.matrix[:, i:], state.residual, j - i, iterations)


# ---------------------------------------------------------------------------
# Branch and bound


def _is_integral(x: Sequence[Fraction]) -> bool:
    return all(v.denominator == 1 for v in x)


def _most_fractional(x: Sequence[Fraction]) -> int:
    best, best_gap = None, None
    for k, v in enumerate(x):
        if v.denominator != 1:
            frac = v - _floor(v)
            gap = abs(frac - Fraction(1, 2))
            if best is None or gap < best_gap:
                best, best_gap = k, gap
    return best


def _node_lp(rows, rhs, ncols, bounds, j, sense):
    """LP over the suffix rows plus branching rows ``x_k <= v`` / ``x_k >= v`` (slack columns)."""
    extra = len(bounds)
    A = [list(r) + [0] * extra for r in rows]
    b = list(rhs)
    for s, (k, kind, v) in enumerate(bounds):
        row = [0] * (ncols + extra)
        row[k] = 1
        row[ncols + s] = 1 if kind == "le" else -1
        A.append(row)
        b.append(v)
    if not A:
        return None
    rep = simplex_solve(LinearProgram(A, b, j, sense))
    if rep.status != OPTIMAL:
        return None
    return rep.value, rep.witness[:ncols]


def _ip_optimum(suffix: _Suffix, residual, j, sense, budget) -> int | None:
    rows = suffix.basis_rows
    rhs = [residual[r] for r in suffix.rows]
    n = suffix.ncols
    root = _node_lp(rows, rhs, n, [], j, sense)
    if root is None or not suffix.consistent(list(root[1]), residual):
        return None
    best = None
    limit = _floor(root[0]) if sense == "max" else _ceil(root[0])
    stack = [([], root)]
    nodes = 1
    while stack:
        bounds, (value, x) = stack.pop()
        cap = _floor(value) if sense == "max" else _ceil(value)
        if best is not None and (cap <= best if sense == "max" else cap >= best):
            continue
        if _is_integral(x):
            best = int(x[j])
            if best == limit:
                break
            continue
        k = _most_fractional(x)
        children = []
        for kind, v in (("le", _floor(x[k])), ("ge", _ceil(x[k]))):
            nodes += 1
            if nodes > budget:
                raise BudgetExceeded(f"branch and bound exceeded {budget} nodes")
            sol = _node_lp(rows, rhs, n, bounds + [(k, kind, v)], j, sense)
            if sol is not None:
                children.append((bounds + [(k, kind, v)], sol))
        # depth first; the child with the better bound is explored first
        children.sort(key=lambda c: c[1][0], reverse=(sense == "min"))
        stack.extend(children)
    return best


def _ip_interval(plan: SystemPlan, i: int, residual, j: int, budget: int) -> BoundInterval:
    s = plan.suffix(i)
    lo = _ip_optimum(s, residual, j - i, "min", budget)
    if lo is None:
        return _infeasible("ip")
    hi = _ip_optimum(s, residual, j - i, "max", budget)
    return BoundInterval(Fraction(lo), Fraction(hi), lo, hi, "ip")


# ---------------------------------------------------------------------------
# Shuttle


def _sparse_rows(A: np.ndarray) -> list[tuple[list[int], list[int]]]:
    return [
        ([int(c) for c in np.flatnonzero(row)], [int(v) for v in row[row > 0]])
        for row in np.asarray(A, dtype=np.int64)
    ]


def _shuttle(A: np.ndarray, residual, j: int, iterations: int, rows=None) -> BoundInterval:
    """Propagate ``[lo, hi]`` through the constraint rows, ``iterations`` sweeps.

    Starts from ``lo = 0`` and ``hi = min_r floor(t_r / a_rj)`` over the rows
    covering the cell.  A sweep visits the rows in order; at each row the
    upper bounds of its cells are cut using the other cells' lower bounds,
    then the lower bounds are raised using the (new) upper bounds.  Updates
    take effect immediately for the rows that follow.
    """
    if rows is None:
        rows = _sparse_rows(A)
    t = [int(v) for v in residual]
    d = np.asarray(A).shape[1]
    if d == 0 or any(v < 0 for v in t):
        return _infeasible("shuttle")
    hi = [None] * d
    for (cols, coef), tr in zip(rows, t):
        if not cols:
            if tr:
                return _infeasible("shuttle")
            continue
        for c, a in zip(cols, coef):
            cap = tr // a
            if hi[c] is None or cap < hi[c]:
                hi[c] = cap
    lo = [0] * d
    for _ in range(iterations):
        changed = False
        for (cols, coef), tr in zip(rows, t):
            if not cols:
                continue
            s_lo = sum(a * lo[c] for c, a in zip(cols, coef))
            for c, a in zip(cols, coef):
                cap = (tr - s_lo + a * lo[c]) // a
                if cap < hi[c]:
                    hi[c] = cap
                    changed = True
            s_hi = sum(a * hi[c] for c, a in zip(cols, coef))
            for c, a in zip(cols, coef):
                need = tr - s_hi + a * hi[c]
                floor_ = -((-need) // a)
                if floor_ > lo[c]:
                    lo[c] = floor_
                    changed = True
                if lo[c] > hi[c]:
                    return _infeasible("shuttle")
        if not changed:
            break
    l, u = lo[j], hi[j]
    return BoundInterval(Fraction(l), Fraction(u), l, u, "shuttle")


# ---------------------------------------------------------------------------
# Enumeration


def _determined_tail(plan: SystemPlan, i: int, residual):
    """When the remaining cells are determined: the tail, ``()`` if it is not a
    nonnegative integer point, or ``None`` if the cells are not determined."""
    s = plan.suffix(i)
    if s.kdim != 0:
        return None
    got = s.unique_point(residual)
    if got is None:
        return ()
    y, det = got
    if any(v % det for v in y):
        return ()
    return tuple(v // det for v in y)


def _fiber_tails(plan: SystemPlan, engine: BoundEngine, t, budget: int, on_node=None):
    d = plan.d
    memo: dict = {}

    def rec(i, residual):
        if i == d:
            return [()] if not any(residual) else []
        key = (i, residual)
        got = memo.get(key)
        if got is not None:
            return got
        tail = _determined_tail(plan, i, residual)
        if tail is not None:
            memo[key] = out = [tail] if tail else []
            return out
        iv = engine.interval(i, residual)
        out = []
        values = []
        if not iv.empty:
            for v in range(iv.int_lower, iv.int_upper + 1):
                tails = rec(i + 1, plan.advance(residual, i, v))
                if tails:
                    values.append(v)
                    out.extend((v,) + tail for tail in tails)
                    if len(out) > budget:
                        raise BudgetExceeded(f"fiber has more than {budget} tables")
        if on_node is not None:
            on_node(i, residual, values)
        memo[key] = out
        return out

    return rec(0, tuple(int(v) for v in t))


def enumerate_fiber(
    system: ConstraintSystem, t: Sequence[int], budget: int = 1_000_000, engine: BoundEngine | None = None
) -> list[TableVector]:
    """All nonnegative integer tables with ``A n = t``, in lexicographic order."""
    plan = SystemPlan.of(system)
    engine = engine or LPEngine(system)
    tails = _fiber_tails(plan, engine, t, budget)
    A = system.matrix
    target = np.asarray(t, dtype=object)
    out = []
    for n in tails:
        if not np.array_equal(A.astype(object) @ np.asarray(n, dtype=object), target):
            raise AssertionError("enumerated table violates A n = t")
        out.append(TableVector(n, tuple(int(v) for v in t)))
    return out


def count_fiber(system: ConstraintSystem, t: Sequence[int], engine: BoundEngine | None = None) -> int:
    """Exact fiber size by dynamic programming over ``(step, residual)``."""
    plan = SystemPlan.of(system)
    engine = engine or LPEngine(system)
    d = plan.d
    memo: dict = {}

    def rec(i, residual):
        if i == d:
            return 0 if any(residual) else 1
        key = (i, residual)
        if key in memo:
            return memo[key]
        tail = _determined_tail(plan, i, residual)
        if tail is not None:
            memo[key] = int(bool(tail))
            return memo[key]
        iv = engine.interval(i, residual)
        total = 0
        if not iv.empty:
            for v in range(iv.int_lower, iv.int_upper + 1):
                total += rec(i + 1, plan.advance(residual, i, v))
        memo[key] = total
        return total

    return rec(0, tuple(int(v) for v in t))


@dataclass
class SequentialIntervalReport:
    holds: bool
    fiber_size: int
    prefixes_checked: int
    violation: dict | None = None


def verify_sequential_interval(system: ConstraintSystem, t: Sequence[int], budget: int = 1_000_000) -> SequentialIntervalReport:
    """Check that every reachable prefix admits a gap-free set of next values."""
    plan = SystemPlan.of(system)
    engine = LPEngine(system)
    found: list = []
    checked = [0]

    def on_node(i, residual, values):
        if values:
            checked[0] += 1
            if values[-1] - values[0] + 1 != len(values) and not found:
                found.append({"cell": i, "residual": list(residual), "values": values})

    tails = _fiber_tails(plan, engine, t, budget, on_node)
    if found:
        v = found[0]
        # recover one prefix reaching the violating node
        prefix = _prefix_to(plan, tails, v["cell"], tuple(v["residual"]), t)
        v["prefix"] = list(prefix) if prefix is not None else None
        v["cell_label"] = system.cell_labels[v["cell"]]
    return SequentialIntervalReport(not found, len(tails), checked[0], found[0] if found else None)


def _prefix_to(plan, tables, i, residual, t):
    for n in tables:
        res = tuple(int(v) for v in t)
        for k in range(i):
            res = plan.advance(res, k, n[k])
        if res == residual:
            return n[:i]
    return None


def iter_prefix_states(table: Sequence[int], system: ConstraintSystem, t) -> Iterator[PrefixState]:
    """States along the path that fixes ``table`` cell by cell."""
    state = PrefixState(system, t)
    for v in table:
        yield state
        state = state.extend(v)
