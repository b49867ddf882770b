"""Exact simplex over the rationals.

The tableau is kept fraction-free: integer entries ``T`` over a common
positive denominator ``D`` (the basis determinant), updated with the
integer-preserving pivot ``T' = (T*a - col*row) / D``.  Divisions are
exact, so there is no rounding anywhere.  Entering and leaving variables
follow Bland's rule, which guarantees termination.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_SAFE = 1 << 30


@dataclass(frozen=True)
class LinearProgram:
    """Optimize one coordinate over ``{x >= 0 : A x = b}``."""

    equality_matrix: tuple[tuple[Fraction, ...], ...]
    rhs: tuple[Fraction, ...]
    objective_index: int
    sense: str = "max"

    def __post_init__(self):
        A = tuple(tuple(Fraction(v) for v in row) for row in self.equality_matrix)
        b = tuple(Fraction(v) for v in self.rhs)
        if len(A) != len(b):
            raise ValueError(f"{len(A)} rows but {len(b)} right-hand sides")
        widths = {len(row) for row in A}
        if len(widths) > 1:
            raise ValueError("ragged constraint matrix")
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {self.sense!r}")
        n = widths.pop() if widths else 0
        if not 0 <= self.objective_index < max(n, 1) or n == 0:
            raise ValueError("objective index out of range")
        object.__setattr__(self, "equality_matrix", A)
        object.__setattr__(self, "rhs", b)

    @property
    def num_vars(self) -> int:
        return len(self.equality_matrix[0])


@dataclass(frozen=True)
class OptimumReport:
    status: str
    value: Fraction | None = None
    witness: tuple[Fraction, ...] | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def integer_rows(A: Sequence[Sequence], b: Sequence) -> tuple[list[list[int]], list[int]]:
    """Scale each equation by the lcm of its denominators."""
    rows, rhs = [], []
    for row, beta in zip(A, b):
        vals = [Fraction(v) for v in row] + [Fraction(beta)]
        m = 1
        for v in vals:
            m = m * v.denominator // math.gcd(m, v.denominator)
        ints = [int(v * m) for v in vals]
        rows.append(ints[:-1])
        rhs.append(ints[-1])
    return rows, rhs


class Tableau:
    """Fraction-free simplex tableau for ``{x >= 0 : A x = b}`` with integer data.

    Rows ``0..m-1`` are constraints, the last row is the objective (reduced
    costs, scaled by ``D``); the last column is the right-hand side.
    """

    def __init__(self, A: Sequence[Sequence[int]], b: Sequence[int]):
        m = len(b)
        n = len(A[0]) if m else 0
        self.n = n
        T = np.zeros((m + 1, n + m + 1), dtype=np.int64)
        big = max([abs(int(v)) for row in A for v in row] + [abs(int(v)) for v in b] + [0])
        if big >= _SAFE:
            T = T.astype(object)
        for i in range(m):
            sign = -1 if b[i] < 0 else 1
            T[i, :n] = [sign * int(v) for v in A[i]]
            T[i, n + i] = 1
            T[i, -1] = sign * int(b[i])
        T[m, :n] = -T[:m, :n].sum(axis=0)
        T[m, -1] = -T[:m, -1].sum()
        self.T = T
        self.D = 1
        self.basis = [n + i for i in range(m)]
        self.n_active = n + m
        self.feasible: bool | None = None

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def pivot(self, p: int, q: int) -> None:
        T = self.T
        if T.dtype != object:
            M = int(np.abs(T).max())
            if M >= _SAFE:
                T = T.astype(object)
        a = T[p, q]
        col = T[:, q].copy()
        new = (T * a - np.outer(col, T[p])) // self.D
        new[p] = T[p]
        if a < 0:
            new = -new
            a = -a
        self.T = new
        self.D = int(a)
        self.basis[p] = q

    def _entering(self) -> int | None:
        neg = np.flatnonzero(self.T[-1, : self.n_active] < 0)
        return int(neg[0]) if neg.size else None

    def _leaving(self, q: int) -> int | None:
        T = self.T
        best = None
        for p in np.flatnonzero(T[:-1, q] > 0):
            p = int(p)
            if best is None:
                best = p
                continue
            # compare rhs_p / T[p,q] with rhs_best / T[best,q] exactly
            lhs = T[p, -1] * T[best, q]
            rhs = T[best, -1] * T[p, q]
            if lhs < rhs or (lhs == rhs and self.basis[p] < self.basis[best]):
                best = p
        return best

    def run(self, max_pivots: int | None = None) -> str:
        count = 0
        while True:
            q = self._entering()
            if q is None:
                return OPTIMAL
            p = self._leaving(q)
            if p is None:
                return UNBOUNDED
            self.pivot(p, q)
            count += 1
            if max_pivots is not None and count > max_pivots:
                raise RuntimeError("pivot limit exceeded")

    def phase_one(self) -> bool:
        """Find a feasible basis; drop artificial columns and redundant rows."""
        self.run()
        if self.T[-1, -1] != 0:
            self.feasible = False
            return False
        n = self.n
        keep = []
        for p in range(self.m):
            if self.basis[p] >= n:
                nz = np.flatnonzero(self.T[p, :n] != 0)
                if nz.size == 0:
                    continue
                self.pivot(p, int(nz[0]))
            keep.append(p)
        cols = list(range(n)) + [self.T.shape[1] - 1]
        self.T = self.T[np.ix_(keep + [self.m], cols)]
        self.basis = [self.basis[p] for p in keep]
        self.n_active = n
        self.feasible = True
        return True

    def set_objective(self, cost: dict[int, int]) -> None:
        """Install ``min sum cost[j] x_j`` in terms of the current basis."""
        row = np.zeros(self.T.shape[1], dtype=self.T.dtype)
        for j, c in cost.items():
            row[j] += c * self.D
        for p, j in enumerate(self.basis):
            c = cost.get(j)
            if c:
                row -= c * self.T[p]
        self.T[-1] = row

    def optimize(self, cost: dict[int, int]) -> str:
        self.set_objective(cost)
        return self.run()

    def objective_value(self) -> Fraction:
        return Fraction(-int(self.T[-1, -1]), self.D)

    def value_of(self, j: int) -> Fraction:
        for p, b in enumerate(self.basis):
            if b == j:
                return Fraction(int(self.T[p, -1]), self.D)
        return Fraction(0)

    def witness(self) -> tuple[Fraction, ...]:
        x = [Fraction(0)] * self.n
        for p, j in enumerate(self.basis):
            if j < self.n:
                x[j] = Fraction(int(self.T[p, -1]), self.D)
        return tuple(x)


def simplex_solve(lp: LinearProgram) -> OptimumReport:
    """Exact optimum of one coordinate; infeasible/unbounded are statuses, not errors."""
    A, b = integer_rows(lp.equality_matrix, lp.rhs)
    if not A:
        # no equalities: x >= 0 only
        if lp.sense == "min":
            return OptimumReport(OPTIMAL, Fraction(0), tuple(Fraction(0) for _ in range(lp.num_vars)))
        return OptimumReport(UNBOUNDED)
    tab = Tableau(A, b)
    if not tab.phase_one():
        return OptimumReport(INFEASIBLE)
    j = lp.objective_index
    status = tab.optimize({j: 1 if lp.sense == "min" else -1})
    if status != OPTIMAL:
        return OptimumReport(status)
    return OptimumReport(OPTIMAL, tab.value_of(j), tab.witness())


def coordinate_range(A: Sequence[Sequence[int]], b: Sequence[int], j: int):
    """Exact ``(min, max)`` reports of ``x_j`` over ``{x >= 0 : A x = b}`` sharing one phase one."""
    tab = Tableau(A, b)
    if not tab.phase_one():
        return OptimumReport(INFEASIBLE), OptimumReport(INFEASIBLE)
    lo_status = tab.optimize({j: 1})
    lo = OptimumReport(lo_status, tab.value_of(j), tab.witness())
    hi_status = tab.optimize({j: -1})
    if hi_status != OPTIMAL:
        return lo, OptimumReport(hi_status)
    return lo, OptimumReport(OPTIMAL, tab.value_of(j), tab.witness())
