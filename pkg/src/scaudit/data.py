"""CSV ingestion, recipe-driven preprocessing, and seeded train/test splits.

Datasets are held as a float feature matrix plus two row-aligned binary
vectors: a protected-group indicator and an observed label. The group and
label columns are never part of the feature matrix.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, PlanError, RecipeError, SchemaError
from .seeding import rng_for

#: Cell values treated as missing when a recipe sets ``drop_missing``.
MISSING_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "NULL", "null", "?"})

DROP = "drop"

_FEATURE_DIRECTIVES = ("numeric", "onehot", DROP)


@dataclass(frozen=True)
class TabularDataset:
    """Row-aligned feature matrix, group indicator, and observed labels."""

    features: np.ndarray
    group: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        group = np.asarray(self.group, dtype=np.int8)
        labels = np.asarray(self.labels, dtype=np.int8)
        if features.ndim != 2:
            raise SchemaError("features must be a 2-D matrix")
        n = features.shape[0]
        if group.shape != (n,) or labels.shape != (n,):
            raise SchemaError("features, group, and labels must have the same row count")
        if n < 1:
            raise SchemaError("dataset has no rows")
        for name, vec in (("group", group), ("labels", labels)):
            if not np.isin(vec, (0, 1)).all():
                raise SchemaError(f"{name} may contain only 0 or 1")
        if len(self.feature_names) != features.shape[1]:
            raise SchemaError("feature_names must match the feature column count")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "TabularDataset":
        """Row subset (or multiset, when indices repeat) of this dataset."""
        idx = np.asarray(indices, dtype=np.intp)
        return TabularDataset(
            features=self.features[idx],
            group=self.group[idx],
            labels=self.labels[idx],
            feature_names=self.feature_names,
        )


@dataclass(frozen=True)
class ColumnSchema:
    """Names the target and group columns; remaining columns are features
    unless an explicit feature list is given."""

    target: str
    group: str
    features: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.target or not self.group:
            raise SchemaError("schema must name both a target and a group column")
        if self.target == self.group:
            raise SchemaError("target and group must be distinct columns")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "group": self.group,
            "features": list(self.features) if self.features is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnSchema":
        feats = d.get("features")
        return cls(
            target=d["target"],
            group=d["group"],
            features=tuple(feats) if feats is not None else None,
        )


@dataclass(frozen=True)
class PrepRecipe:
    """Value-level binarization and per-column feature directives.

    ``target_rule`` and ``group_rule`` map raw cell strings to 0, 1, or
    ``"drop"`` (row removed). ``feature_rules`` maps a column name to
    ``"numeric"`` (parse as float, the default), ``"onehot"`` (expand to
    one indicator column per observed level), or ``"drop"`` (discard the
    column). Rows containing an unmapped target/group value are a hard
    error so that data drift surfaces instead of silently shrinking n.
    """

    target_rule: dict
    group_rule: dict
    feature_rules: dict = field(default_factory=dict)
    drop_missing: bool = False

    def __post_init__(self):
        for name, rule in (("target_rule", self.target_rule), ("group_rule", self.group_rule)):
            mapped = set()
            for raw, out in rule.items():
                if out not in (0, 1, DROP):
                    raise RecipeError(f"{name}[{raw!r}] must map to 0, 1, or {DROP!r}")
                mapped.add(out)
            if 0 not in mapped or 1 not in mapped:
                raise RecipeError(f"{name} must map at least one value to 0 and one to 1")
        for col, directive in self.feature_rules.items():
            if directive not in _FEATURE_DIRECTIVES:
                raise RecipeError(
                    f"feature_rules[{col!r}] must be one of {_FEATURE_DIRECTIVES}, got {directive!r}"
                )

    @classmethod
    def from_json(cls, path) -> "PrepRecipe":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "PrepRecipe":
        def norm(rule):
            return {str(k): (v if v == DROP else int(v)) for k, v in rule.items()}

        return cls(
            target_rule=norm(doc.get("target", {})),
            group_rule=norm(doc.get("group", {})),
            feature_rules={str(k): str(v) for k, v in doc.get("features", {}).items()},
            drop_missing=bool(doc.get("drop_missing", False)),
        )

    def to_dict(self) -> dict:
        return {
            "target": dict(self.target_rule),
            "group": dict(self.group_rule),
            "features": dict(self.feature_rules),
            "drop_missing": self.drop_missing,
        }


@dataclass(frozen=True)
class SplitPlan:
    """Seeded plan for a family of train/test partitions."""

    seed: int
    test_fraction: float
    split_count: int = 1

    def __post_init__(self):
        if self.seed < 0:
            raise PlanError("seed must be non-negative")
        if not 0.0 < self.test_fraction < 1.0:
            raise PlanError("test_fraction must lie strictly between 0 and 1")
        if self.split_count < 1:
            raise PlanError("split_count must be at least 1")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "count": self.split_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(
            seed=int(d.get("seed", 0)),
            test_fraction=float(d.get("test_fraction", 0.2)),
            split_count=int(d.get("count", 1)),
        )


@dataclass(frozen=True)
class RawTable:
    """String-valued table as read from CSV, before any typing."""

    header: tuple[str, ...]
    rows: tuple

    @property
    def n(self) -> int:
        return len(self.rows)

    def column_index(self, name: str) -> int:
        try:
            return self.header.index(name)
        except ValueError:
            raise SchemaError(f"column {name!r} not found in header {list(self.header)}") from None


def read_table(path) -> RawTable:
    """Read an RFC-4180-style CSV with a header row into string cells."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, expected a header row") from None
        header = tuple(h.strip() for h in header)
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate column names in header")
        rows = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {i} has {len(row)} fields, header has {len(header)}"
                )
            rows.append(tuple(cell.strip() for cell in row))
    return RawTable(header=header, rows=tuple(rows))


def _resolve_feature_columns(table: RawTable, schema: ColumnSchema) -> list[str]:
    table.column_index(schema.target)
    table.column_index(schema.group)
    if schema.features is not None:
        for name in schema.features:
            table.column_index(name)
        if schema.target in schema.features or schema.group in schema.features:
            raise SchemaError("feature list must not include the target or group column")
        return list(schema.features)
    return [c for c in table.header if c not in (schema.target, schema.group)]


def _parse_binary(value: str, column: str, row: int) -> int:
    if value == "0":
        return 0
    if value == "1":
        return 1
    raise ParseError(f"row {row}, column {column!r}: expected 0 or 1, got {value!r}")


def _parse_float(value: str, column: str, row: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: expected a numeric value, got {value!r}"
        ) from None


def load_csv(path, schema: ColumnSchema) -> TabularDataset:
    """Load an already-binarized CSV into a dataset.

    The target and group columns must hold literal 0/1; feature columns must
    parse as floats. Anything else is a parse error naming the offending
    row and column; use :func:`apply_recipe` for raw survey-style tables.
    """
    table = read_table(path)
    return table_to_dataset(table, schema)


def table_to_dataset(table: RawTable, schema: ColumnSchema) -> TabularDataset:
    """Strictly-typed conversion of a raw table (no recipe)."""
    feature_cols = _resolve_feature_columns(table, schema)
    ti = table.column_index(schema.target)
    gi = table.column_index(schema.group)
    fis = [table.column_index(c) for c in feature_cols]

    if table.n < 2:
        raise SchemaError(f"dataset must have at least 2 rows, got {table.n}")
    labels = np.empty(table.n, dtype=np.int8)
    group = np.empty(table.n, dtype=np.int8)
    features = np.empty((table.n, len(fis)), dtype=np.float64)
    for r, row in enumerate(table.rows):
        labels[r] = _parse_binary(row[ti], schema.target, r + 1)
        group[r] = _parse_binary(row[gi], schema.group, r + 1)
        for j, fi in enumerate(fis):
            features[r, j] = _parse_float(row[fi], feature_cols[j], r + 1)
    return TabularDataset(features, group, labels, tuple(feature_cols))


def apply_recipe(table: RawTable, recipe: PrepRecipe, schema: ColumnSchema) -> TabularDataset:
    """Binarize target/group, filter rows, and expand features per recipe."""
    feature_cols = _resolve_feature_columns(table, schema)
    for col in recipe.feature_rules:
        if col not in feature_cols:
            raise RecipeError(f"feature_rules references unknown feature column {col!r}")
    kept_cols = [c for c in feature_cols if recipe.feature_rules.get(c, "numeric") != DROP]

    ti = table.column_index(schema.target)
    gi = table.column_index(schema.group)
    kept_idx = [table.column_index(c) for c in kept_cols]

    def map_value(rule: dict, value: str, column: str, row: int):
        if value not in rule:
            raise RecipeError(
                f"row {row}, column {column!r}: value {value!r} not covered by recipe"
            )
        return rule[value]

    # Row filtering happens before any feature typing so that dropped rows
    # can carry arbitrary junk in their feature cells.
    kept_rows = []
    targets = []
    groups = []
    for r, row in enumerate(table.rows):
        if recipe.drop_missing:
            used = [row[ti], row[gi]] + [row[i] for i in kept_idx]
            if any(cell in MISSING_TOKENS for cell in used):
                continue
        t = map_value(recipe.target_rule, row[ti], schema.target, r + 1)
        if t == DROP:
            continue
        g = map_value(recipe.group_rule, row[gi], schema.group, r + 1)
        if g == DROP:
            continue
        kept_rows.append(row)
        targets.append(t)
        groups.append(g)

    if len(kept_rows) < 2:
        raise RecipeError(
            f"recipe left {len(kept_rows)} usable rows (need at least 2); "
            "check the drop rules against the data"
        )

    columns = []
    names = []
    for col, idx in zip(kept_cols, kept_idx):
        directive = recipe.feature_rules.get(col, "numeric")
        raw = [row[idx] for row in kept_rows]
        if directive == "onehot":
            levels = sorted(set(raw))
            for level in levels:
                names.append(f"{col}={level}")
                columns.append(np.array([1.0 if v == level else 0.0 for v in raw]))
        else:
            names.append(col)
            columns.append(
                np.array([_parse_float(v, col, r + 1) for r, v in enumerate(raw)])
            )

    features = (
        np.column_stack(columns) if columns else np.empty((len(kept_rows), 0), dtype=np.float64)
    )
    return TabularDataset(
        features=features,
        group=np.array(groups, dtype=np.int8),
        labels=np.array(targets, dtype=np.int8),
        feature_names=tuple(names),
    )


def load_dataset(path, schema: ColumnSchema, recipe: PrepRecipe | None = None) -> TabularDataset:
    """Load a CSV, routing through the recipe when one is given."""
    if recipe is None:
        return load_csv(path, schema)
    return apply_recipe(read_table(path), recipe, schema)


def split_indices(n: int, plan: SplitPlan, split_index: int):
    """Deterministic (train, test) index arrays for one split of the plan.

    The shuffle for split k is seeded by hash(seed, k), so individual splits
    can be regenerated in any order.
    """
    if not 0 <= split_index < plan.split_count:
        raise PlanError(
            f"split_index {split_index} out of range for split_count {plan.split_count}"
        )
    n_test = int(plan.test_fraction * n + 0.5)
    if n_test < 1 or n - n_test < 1:
        raise PlanError(
            f"test_fraction {plan.test_fraction} gives an empty train or test set for n={n}"
        )
    perm = rng_for(plan.seed, split_index).permutation(n)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    return train, test


def train_test_split(data: TabularDataset, plan: SplitPlan, split_index: int):
    """Partition the dataset into disjoint train and test subsets."""
    train_idx, test_idx = split_indices(data.n, plan, split_index)
    return data.subset(train_idx), data.subset(test_idx)


def write_dataset_csv(data: TabularDataset, path, target_name: str = "target",
                      group_name: str = "group") -> None:
    """Write a dataset back out as a binarized CSV (features, group, target)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(data.feature_names) + [group_name, target_name])
        for r in range(data.n):
            row = [repr(float(v)) for v in data.features[r]]
            row.append(str(int(data.group[r])))
            row.append(str(int(data.labels[r])))
            writer.writerow(row)
