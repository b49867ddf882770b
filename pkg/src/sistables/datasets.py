"""Dataset files and the embedded fixtures.

A dataset is a JSON object tagged ``"format": "sistables-dataset/1"``.
Product layouts give ``factors`` and ``margins``; other layouts give an
explicit ``matrix`` with ``cell_labels``.  Counts are listed in the
declared cell order.  ``order`` (optional) is a permutation: sampling
position ``k`` holds declared cell ``order[k]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .model import (
    ConstraintSystem,
    LoglinearModelSpec,
    ModelError,
    build_constraint_system,
    compute_margin,
    permute_table,
    reorder_cells,
)

FORMAT_TAG = "sistables-dataset/1"
_KEYS = {
    "format", "name", "description", "factors", "margins", "matrix", "cell_labels",
    "counts", "order", "margin", "target", "proposal", "synthetic",
}


@dataclass(frozen=True)
class Dataset:
    name: str
    spec: LoglinearModelSpec
    counts: tuple[int, ...]
    order: tuple[int, ...] | None = None
    description: str = ""
    target: str | None = None
    proposal: str | None = None
    synthetic: bool = False

    def base_system(self) -> ConstraintSystem:
        return build_constraint_system(self.spec)

    def system(self) -> ConstraintSystem:
        """Constraint system with columns in sampling order."""
        base = self.base_system()
        return reorder_cells(base, self.order) if self.order is not None else base

    def table(self) -> tuple[int, ...]:
        """Observed counts in sampling order."""
        return permute_table(self.counts, self.order) if self.order is not None else self.counts

    def margin(self) -> tuple[int, ...]:
        return compute_margin(self.base_system(), self.counts)

    def with_order(self, order: Sequence[int] | None) -> "Dataset":
        return Dataset(self.name, self.spec, self.counts, None if order is None else tuple(order),
                       self.description, self.target, self.proposal, self.synthetic)

    def to_dict(self) -> dict:
        out: dict = {"format": FORMAT_TAG, "name": self.name}
        if self.description:
            out["description"] = self.description
        if self.synthetic:
            out["synthetic"] = True
        if self.spec.weight_matrix is not None:
            out["matrix"] = [list(r) for r in self.spec.weight_matrix]
            out["cell_labels"] = list(self.spec.labels())
        else:
            out["factors"] = [[n, k] for n, k in self.spec.factors]
            out["margins"] = [list(m) for m in self.spec.margin_sets]
            if self.spec.cell_labels is not None:
                out["cell_labels"] = list(self.spec.cell_labels)
        out["counts"] = list(self.counts)
        out["margin"] = list(self.margin())
        if self.order is not None:
            out["order"] = list(self.order)
        if self.target:
            out["target"] = self.target
        if self.proposal:
            out["proposal"] = self.proposal
        return out

    def dumps(self) -> str:
        """One key per line; lists stay on one line (matrices: one row per line)."""
        lines = []
        for key, value in self.to_dict().items():
            if key == "matrix":
                rows = ",\n  ".join(json.dumps(r) for r in value)
                text = f"[\n  {rows}\n ]"
            else:
                text = json.dumps(value)
            lines.append(f" {json.dumps(key)}: {text}")
        return "{\n" + ",\n".join(lines) + "\n}\n"


def _int_list(value, what: str) -> list[int]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ModelError(f"{what} must be a list of integers")
    return value


def dataset_from_dict(data: dict) -> Dataset:
    if not isinstance(data, dict):
        raise ModelError("dataset must be a JSON object")
    if data.get("format") != FORMAT_TAG:
        raise ModelError(f"missing or unknown format tag (expected {FORMAT_TAG!r})")
    unknown = set(data) - _KEYS
    if unknown:
        raise ModelError(f"unknown dataset keys {sorted(unknown)}")
    labels = data.get("cell_labels")
    if "matrix" in data:
        matrix = [_int_list(r, "matrix row") for r in data["matrix"]]
        spec = LoglinearModelSpec(weight_matrix=tuple(map(tuple, matrix)), cell_labels=labels)
    elif "factors" in data and "margins" in data:
        spec = LoglinearModelSpec(
            factors=tuple(tuple(f) for f in data["factors"]),
            margin_sets=tuple(tuple(m) for m in data["margins"]),
            cell_labels=labels,
        )
    else:
        raise ModelError("dataset needs either factors and margins or an explicit matrix")
    counts = tuple(_int_list(data.get("counts"), "counts"))
    system = build_constraint_system(spec)
    if len(counts) != system.num_cells:
        raise ModelError(f"{len(counts)} counts for {system.num_cells} cells")
    if any(c < 0 for c in counts):
        raise ModelError("counts must be nonnegative")
    order = data.get("order")
    if order is not None:
        order = tuple(_int_list(order, "order"))
        if sorted(order) != list(range(len(counts))):
            raise ModelError("order is not a permutation of the cells")
    ds = Dataset(
        name=str(data.get("name", "")),
        spec=spec,
        counts=counts,
        order=order,
        description=str(data.get("description", "")),
        target=data.get("target"),
        proposal=data.get("proposal"),
        synthetic=bool(data.get("synthetic", False)),
    )
    stored = data.get("margin")
    if stored is not None and tuple(_int_list(stored, "margin")) != ds.margin():
        raise ModelError("stored margin disagrees with the counts")
    return ds


def loads(text: str) -> Dataset:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"not valid JSON: {exc}") from None
    return dataset_from_dict(data)


def fixture_names() -> list[str]:
    root = resources.files("sistables") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_fixture(name: str) -> Dataset:
    path = resources.files("sistables") / "fixtures" / f"{name}.json"
    if not path.is_file():
        raise ModelError(f"unknown fixture {name!r}; available: {', '.join(fixture_names())}")
    return loads(path.read_text())


def load_dataset(source: str) -> Dataset:
    """A file path, or the name of an embedded fixture."""
    p = Path(source)
    if p.is_file():
        return loads(p.read_text())
    return load_fixture(source)


def read_order(path, system: ConstraintSystem) -> list[int]:
    """Cell labels, whitespace separated, in the desired sampling order."""
    tokens = Path(path).read_text().split()
    position = {label: k for k, label in enumerate(system.cell_labels)}
    missing = [t for t in tokens if t not in position]
    if missing:
        raise ModelError(f"unknown cell labels in order file: {missing[:5]}")
    order = [position[t] for t in tokens]
    if sorted(order) != list(range(system.num_cells)):
        raise ModelError("order file must list every cell exactly once")
    return order
