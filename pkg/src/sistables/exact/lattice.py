"""Integer linear algebra: rank, row bases, lattice kernels."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np


def _as_int_rows(A) -> list[list[int]]:
    return [[int(v) for v in row] for row in A]


def echelon_pivots(A: Sequence[Sequence[int]]) -> tuple[list[int], list[int]]:
    """Return ``(pivot_rows, pivot_cols)`` of a fraction-free (Bareiss) echelon form.

    ``pivot_rows`` are original row indices forming a row basis; at each
    column the lowest-indexed remaining row with a nonzero entry is used.
    """
    M = np.array([[int(v) for v in row] for row in A], dtype=object)
    if M.size == 0:
        return [], []
    nrows, ncols = M.shape
    remaining = list(range(nrows))
    prev = 1
    pivot_rows, pivot_cols = [], []
    for c in range(ncols):
        if not remaining:
            break
        sub = M[remaining, c]
        nz = np.flatnonzero(sub != 0)
        if nz.size == 0:
            continue
        p = remaining[int(nz[0])]
        remaining.remove(p)
        pivot_rows.append(p)
        pivot_cols.append(c)
        if remaining:
            a = M[p, c]
            rest = M[remaining]
            M[remaining] = (rest * a - np.outer(rest[:, c], M[p])) // prev
            prev = a
    order = sorted(range(len(pivot_rows)), key=lambda k: pivot_rows[k])
    return [pivot_rows[k] for k in order], [pivot_cols[k] for k in order]


def integer_inverse(M: Sequence[Sequence[int]]) -> tuple[np.ndarray, int] | None:
    """``(adj, det)`` with ``M^{-1} = adj / det`` and ``det > 0``, or ``None`` if singular.

    Integer-preserving Gauss-Jordan elimination on ``[M | I]``.
    """
    n = len(M)
    T = np.zeros((n, 2 * n), dtype=object)
    T[:, :n] = np.array([[int(v) for v in row] for row in M], dtype=object).reshape(n, n)
    T[:, n:] = np.eye(n, dtype=np.int64).astype(object)
    D = 1
    used = [False] * n
    where = [0] * n
    for c in range(n):
        p = next((r for r in range(n) if not used[r] and T[r, c] != 0), None)
        if p is None:
            return None
        a = T[p, c]
        col = T[:, c].copy()
        new = (T * a - np.outer(col, T[p])) // D
        new[p] = T[p]
        if a < 0:
            new, a = -new, -a
        T, D = new, a
        used[p] = True
        where[c] = p
    adj = T[where, n:]
    big = max((abs(int(v)) for v in adj.flat), default=0)
    if big < (1 << 40):
        adj = adj.astype(np.int64)
    return adj, int(D)


def _gcd(a: int, b: int) -> int:
    a, b = abs(a), abs(b)
    while b:
        a, b = b, a % b
    return a


def integer_rank(A: Sequence[Sequence[int]]) -> int:
    return len(echelon_pivots(A)[0])


def row_basis(A: Sequence[Sequence[int]]) -> list[int]:
    return echelon_pivots(A)[0]


def hermite_kernel(A: Sequence[Sequence[int]], ncols: int | None = None) -> list[list[int]]:
    """Lattice basis of ``{m in Z^d : A m = 0}`` from a unimodular reduction of ``[A^T | I]``."""
    rows = _as_int_rows(A)
    d = len(rows[0]) if rows else (ncols or 0)
    r = len(rows)
    M = [[rows[i][j] for i in range(r)] + [int(j == k) for k in range(d)] for j in range(d)]
    top = 0
    for c in range(r):
        while True:
            nz = [i for i in range(top, d) if M[i][c]]
            if not nz:
                break
            piv = min(nz, key=lambda i: abs(M[i][c]))
            done = True
            for i in nz:
                if i != piv:
                    q = M[i][c] // M[piv][c]
                    if q:
                        M[i] = [x - q * y for x, y in zip(M[i], M[piv])]
                    if M[i][c]:
                        done = False
            if done:
                M[top], M[piv] = M[piv], M[top]
                top += 1
                break
    return [row[r:] for row in M[top:]]


def lll_reduce(basis: Sequence[Sequence[int]], delta: Fraction = Fraction(3, 4)) -> list[list[int]]:
    """Exact LLL reduction (rational Gram-Schmidt); returns an equivalent lattice basis."""
    b = [list(map(int, v)) for v in basis]
    n = len(b)
    if n <= 1:
        return b

    def gram_schmidt():
        bstar, mu, norms = [], [[Fraction(0)] * n for _ in range(n)], []
        for i in range(n):
            v = [Fraction(x) for x in b[i]]
            for j in range(i):
                mu[i][j] = sum(x * y for x, y in zip(b[i], bstar[j])) / norms[j]
                if mu[i][j]:
                    v = [x - mu[i][j] * y for x, y in zip(v, bstar[j])]
            bstar.append(v)
            norms.append(sum(x * x for x in v))
        return bstar, mu, norms

    bstar, mu, norms = gram_schmidt()
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                b[k] = [x - q * y for x, y in zip(b[k], b[j])]
                for l in range(j + 1):
                    mu[k][l] -= q * (mu[j][l] if l < j else 1)
        if norms[k] >= (delta - mu[k][k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            bstar, mu, norms = gram_schmidt()
            k = max(k - 1, 1)
    return b


def integer_kernel_basis(A: Sequence[Sequence[int]], ncols: int | None = None, reduce: bool = True) -> list[list[int]]:
    """Lattice basis of the integer kernel of ``A``; LLL-reduced unless ``reduce=False``.

    Each vector has a positive first nonzero entry.
    """
    basis = hermite_kernel(A, ncols)
    if reduce and len(basis) > 1:
        basis = lll_reduce(basis)
    out = []
    for v in basis:
        lead = next((x for x in v if x), 0)
        out.append([-x for x in v] if lead < 0 else v)
    rows = _as_int_rows(A)
    for v in out:
        if any(sum(a * x for a, x in zip(row, v)) for row in rows):
            raise ArithmeticError("kernel vector fails A m = 0")
    return out


def solve_square(M: Sequence[Sequence[int]], rhs: Sequence[int]) -> list[Fraction] | None:
    """Exact solution of a square system, or ``None`` if singular."""
    n = len(M)
    aug = [[Fraction(v) for v in row] + [Fraction(r)] for row, r in zip(M, rhs)]
    for c in range(n):
        p = next((i for i in range(c, n) if aug[i][c]), None)
        if p is None:
            return None
        aug[c], aug[p] = aug[p], aug[c]
        piv = aug[c][c]
        aug[c] = [x / piv for x in aug[c]]
        for i in range(n):
            if i != c and aug[i][c]:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[c])]
    return [aug[i][n] for i in range(n)]


class IntegerSolver:
    """Integer solutions of ``M c = v`` via a unimodular column reduction ``M U = H``."""

    def __init__(self, M: Sequence[Sequence[int]]):
        rows = _as_int_rows(M)
        self.m = len(rows)
        self.k = len(rows[0]) if rows else 0
        k = self.k
        # columns as lists: W[c] = column c of [M ; I]
        W = [[rows[r][c] for r in range(self.m)] + [int(c == j) for j in range(k)] for c in range(k)]
        piv = 0
        self.pivots: list[tuple[int, int]] = []  # (row, column)
        for r in range(self.m):
            if piv >= k:
                break
            while True:
                nz = [c for c in range(piv, k) if W[c][r]]
                if not nz:
                    break
                c0 = min(nz, key=lambda c: abs(W[c][r]))
                done = True
                for c in nz:
                    if c != c0:
                        q = W[c][r] // W[c0][r]
                        W[c] = [x - q * y for x, y in zip(W[c], W[c0])]
                        if W[c][r]:
                            done = False
                if done:
                    W[piv], W[c0] = W[c0], W[piv]
                    if W[piv][r] < 0:
                        W[piv] = [-x for x in W[piv]]
                    self.pivots.append((r, piv))
                    piv += 1
                    break
        self.W = W
        self.rank = piv

    def solve(self, v: Sequence[int]) -> list[int] | None:
        """An integer ``c`` with ``M c = v``, or ``None`` if there is none."""
        v = [int(x) for x in v]
        y = [0] * self.k
        for r, p in self.pivots:
            acc = v[r] - sum(self.W[q][r] * y[q] for q in range(p))
            h = self.W[p][r]
            if acc % h:
                return None
            y[p] = acc // h
        for r in range(self.m):
            if sum(self.W[q][r] * y[q] for q in range(self.rank)) != v[r]:
                return None
        m = self.m
        return [sum(self.W[q][m + j] * y[q] for q in range(self.rank)) for j in range(self.k)]
