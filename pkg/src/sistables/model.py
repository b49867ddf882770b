"""Tables, log-linear model specifications and constraint matrices.

Cells are stacked into a flat vector in row-major order of the declared
factors (last factor varies fastest).  A :class:`ConstraintSystem` carries
the nonnegative integer matrix ``A`` whose product with a table gives the
fixed margins ``t``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ModelError(ValueError):
    """Raised for malformed model specifications or tables."""


@dataclass(frozen=True)
class CellIndex:
    coordinates: tuple[int, ...]
    flat_index: int


@dataclass(frozen=True)
class LoglinearModelSpec:
    """Factors, the margins to hold fixed, and an optional explicit matrix.

    ``weight_matrix`` overrides the indicator construction; it is used for
    cell sets that are not a product of factors (genotype triangles, route
    lists), in which case ``cell_labels`` names the columns.
    """

    factors: tuple[tuple[str, int], ...] = ()
    margin_sets: tuple[tuple[str, ...], ...] = ()
    weight_matrix: tuple[tuple[int, ...], ...] | None = None
    cell_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple((str(n), int(k)) for n, k in self.factors))
        object.__setattr__(self, "margin_sets", tuple(tuple(m) for m in self.margin_sets))
        if self.weight_matrix is not None:
            object.__setattr__(
                self, "weight_matrix", tuple(tuple(int(v) for v in row) for row in self.weight_matrix)
            )
        if self.cell_labels is not None:
            object.__setattr__(self, "cell_labels", tuple(str(c) for c in self.cell_labels))

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(k for _, k in self.factors)

    def num_cells(self) -> int:
        if self.weight_matrix is not None:
            return len(self.weight_matrix[0]) if self.weight_matrix else 0
        if self.cell_labels is not None and not self.factors:
            return len(self.cell_labels)
        return int(np.prod(self.shape, dtype=np.int64)) if self.factors else 0

    def cells(self) -> list[CellIndex]:
        return [
            CellIndex(tuple(c), i)
            for i, c in enumerate(itertools.product(*(range(k) for k in self.shape)))
        ]

    def labels(self) -> tuple[str, ...]:
        if self.cell_labels is not None:
            return self.cell_labels
        if self.factors:
            return tuple("".join(str(c + 1) for c in cell.coordinates) for cell in self.cells())
        return tuple(str(j + 1) for j in range(self.num_cells()))


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """Nonnegative integer constraint matrix with labelled, ordered columns.

    ``order[k]`` is the original (construction-time) index of column ``k``.
    """

    matrix: np.ndarray
    cell_labels: tuple[str, ...]
    order: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        A = np.array(self.matrix, dtype=np.int64, copy=True)
        if A.ndim != 2:
            raise ModelError("constraint matrix must be two-dimensional")
        if (A < 0).any():
            raise ModelError("constraint matrix has negative entries")
        if A.shape[1] and not (A.sum(axis=0) > 0).all():
            # Nonnegative rows: some subset sums to a positive vector iff all of them do.
            raise ModelError("no subset of rows sums to a strictly positive vector")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        labels = tuple(self.cell_labels)
        if len(labels) != A.shape[1]:
            raise ModelError(f"{len(labels)} labels for {A.shape[1]} columns")
        object.__setattr__(self, "cell_labels", labels)
        order = tuple(range(A.shape[1])) if self.order is None else tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", order)

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_cells(self) -> int:
        return self.matrix.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.matrix[:, j]

    def suffix(self, i: int) -> np.ndarray:
        """Columns ``i..d-1`` (0-based), i.e. the matrix that remains after fixing ``i`` cells."""
        return self.matrix[:, i:]

    def rows(self) -> list[list[int]]:
        return self.matrix.tolist()

    def __eq__(self, other):
        if not isinstance(other, ConstraintSystem):
            return NotImplemented
        return (
            np.array_equal(self.matrix, other.matrix)
            and self.cell_labels == other.cell_labels
            and self.order == other.order
        )

    def __hash__(self):
        return hash((self.matrix.tobytes(), self.matrix.shape, self.cell_labels, self.order))


@dataclass(frozen=True, eq=False)
class TableVector:
    counts: tuple[int, ...]
    margin: tuple[int, ...] | None = None

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ModelError("table counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        if self.margin is not None:
            object.__setattr__(self, "margin", tuple(int(v) for v in self.margin))

    def __eq__(self, other):
        return isinstance(other, TableVector) and self.counts == other.counts

    def __hash__(self):
        return hash(self.counts)

    def __len__(self):
        return len(self.counts)

    def checked(self, system: ConstraintSystem) -> "TableVector":
        """Return a copy with the margin filled in, verifying any stored margin."""
        t = compute_margin(system, self)
        if self.margin is not None and tuple(self.margin) != t:
            raise ModelError("stored margin disagrees with A·n")
        return TableVector(self.counts, t)


def build_constraint_system(spec: LoglinearModelSpec) -> ConstraintSystem:
    """Indicator rows for every cell of every fixed margin, or the override verbatim."""
    labels = spec.labels()
    if spec.weight_matrix is not None:
        A = np.array(spec.weight_matrix, dtype=np.int64)
        if A.ndim != 2 or A.shape[1] != spec.num_cells():
            raise ModelError("weight matrix has the wrong number of columns")
        if (A < 0).any():
            raise ModelError("weight matrix has negative entries")
        return ConstraintSystem(A, labels)
    if not spec.margin_sets:
        raise ModelError("no margins to fix and no explicit matrix given")
    names = spec.factor_names
    if len(set(names)) != len(names):
        raise ModelError("duplicate factor names")
    position = {name: i for i, name in enumerate(names)}
    shape = spec.shape
    cells = list(itertools.product(*(range(k) for k in shape)))
    rows = []
    for mset in spec.margin_sets:
        unknown = [f for f in mset if f not in position]
        if unknown:
            raise ModelError(f"margin refers to undeclared factors {unknown}")
        axes = sorted({position[f] for f in mset})
        for mcell in itertools.product(*(range(shape[a]) for a in axes)):
            rows.append([int(all(c[a] == v for a, v in zip(axes, mcell))) for c in cells])
    return ConstraintSystem(np.array(rows, dtype=np.int64).reshape(len(rows), len(cells)), labels)


def compute_margin(system: ConstraintSystem, table: TableVector | Sequence[int]) -> tuple[int, ...]:
    counts = table.counts if isinstance(table, TableVector) else tuple(int(c) for c in table)
    if len(counts) != system.num_cells:
        raise ModelError(f"table has {len(counts)} cells, system has {system.num_cells}")
    # Python ints: margins of large tables must not overflow.
    return tuple(int(sum(a * n for a, n in zip(row, counts) if a)) for row in system.rows())


def _check_permutation(permutation, d: int) -> tuple[int, ...]:
    perm = tuple(int(p) for p in permutation)
    if sorted(perm) != list(range(d)):
        raise ModelError("not a permutation of the cells")
    return perm


def reorder_cells(system: ConstraintSystem, permutation: Sequence[int]) -> ConstraintSystem:
    """New column ``k`` is old column ``permutation[k]``."""
    perm = _check_permutation(permutation, system.num_cells)
    return ConstraintSystem(
        system.matrix[:, list(perm)] if perm else system.matrix,
        tuple(system.cell_labels[p] for p in perm),
        tuple(system.order[p] for p in perm),
    )


def permute_table(counts: Sequence[int], permutation: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(counts[p]) for p in permutation)


def matrix_rank(A) -> int:
    """Exact rank by fraction-free elimination."""
    from .exact import integer_rank

    return integer_rank(np.asarray(A, dtype=object).tolist())


# ---------------------------------------------------------------------------
# Non-product cell sets


def genotype_cells(num_alleles: int) -> list[tuple[int, int]]:
    """Lower-triangular genotype cells ``(i, j)``, ``i >= j``, in row-major order (1-based)."""
    return [(i, j) for i in range(1, num_alleles + 1) for j in range(1, i + 1)]


def genotype_spec(num_alleles: int) -> LoglinearModelSpec:
    """Allele-count constraints: homozygote cells count twice."""
    cells = genotype_cells(num_alleles)
    rows = [[(i == a) + (j == a) for i, j in cells] for a in range(1, num_alleles + 1)]
    return LoglinearModelSpec(
        weight_matrix=tuple(map(tuple, rows)),
        cell_labels=tuple(f"{i},{j}" for i, j in cells),
    )


def genotype_diagonal_first_order(num_alleles: int) -> list[int]:
    """Homozygotes first, then the sub-diagonal cells column by column.

    Returned as positions in the row-major triangle of :func:`genotype_cells`.
    """
    if num_alleles < 1:
        raise ModelError("need at least one allele")
    position = {cell: k for k, cell in enumerate(genotype_cells(num_alleles))}
    order = [position[(i, i)] for i in range(1, num_alleles + 1)]
    for j in range(1, num_alleles + 1):
        order.extend(position[(i, j)] for i in range(j + 1, num_alleles + 1))
    return order


def routing_spec(routes) -> LoglinearModelSpec:
    """``A = (A0 | I)``: route columns followed by one slack column per link."""
    A0 = np.asarray(routes, dtype=np.int64)
    e, f = A0.shape
    A = np.hstack([A0, np.eye(e, dtype=np.int64)])
    labels = tuple(f"w{i + 1}" for i in range(f)) + tuple(f"z{i + 1}" for i in range(e))
    return LoglinearModelSpec(weight_matrix=tuple(map(tuple, A.tolist())), cell_labels=labels)


def is_homozygote_label(label: str) -> bool:
    parts = label.split(",")
    return len(parts) == 2 and parts[0] == parts[1]
