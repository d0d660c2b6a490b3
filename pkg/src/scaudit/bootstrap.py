"""Bootstrap replicates of a training set and the replicate-by-instance
prediction grid they induce on a shared test set.

The grid (one row per trained replicate, one column per test instance) is
the empirical stand-in for the distribution over models that a learning
process could produce, and everything downstream — variance,
self-consistency, ensembling — is computed from it.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import TabularDataset
from .errors import AuditError, InputError, PlanError
from .models import CostModel, ModelSpec, fit
from .seeding import derive_seed

DEFAULT_REPLICATES = 101


@dataclass(frozen=True)
class ReplicatePlan:
    """How many resamples to draw and from which seed stream.

    The default of 101 replicates keeps the replicate count odd (no majority
    ties) and sits inside the 50-200 range that is standard practice for
    bootstrap estimates.
    """

    replicate_count: int = DEFAULT_REPLICATES
    base_seed: int = 0
    resample_size: int | None = None

    def __post_init__(self):
        if self.replicate_count < 2:
            raise PlanError("need at least 2 replicates; agreement is undefined for fewer")
        if self.base_seed < 0:
            raise PlanError("base_seed must be non-negative")
        if self.resample_size is not None and self.resample_size < 1:
            raise PlanError("resample_size must be positive")

    def replicate_seed(self, b: int) -> int:
        """Seed for replicate b, independent of evaluation order."""
        return derive_seed(self.base_seed, b)


def make_replicates(train: TabularDataset, plan: ReplicatePlan) -> list[np.ndarray]:
    """Index multisets for each bootstrap resample of the training rows."""
    size = plan.resample_size if plan.resample_size is not None else train.n
    return [
        np.random.default_rng(plan.replicate_seed(b)).integers(0, train.n, size=size)
        for b in range(plan.replicate_count)
    ]


@dataclass(frozen=True)
class PredictionMatrix:
    """Replicate-by-instance labels and probabilities on a fixed test set."""

    labels: np.ndarray          # (B, T) in {0, 1}
    probabilities: np.ndarray   # (B, T) in [0, 1]
    test_groups: np.ndarray     # (T,) in {0, 1}
    test_labels: np.ndarray     # (T,) in {0, 1}
    costs: CostModel

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        probas = np.asarray(self.probabilities, dtype=np.float64)
        groups = np.asarray(self.test_groups, dtype=np.int8)
        observed = np.asarray(self.test_labels, dtype=np.int8)
        if labels.ndim != 2 or probas.shape != labels.shape:
            raise InputError("labels and probabilities must be matching 2-D matrices")
        B, T = labels.shape
        if B < 2:
            raise InputError("prediction matrix needs at least 2 replicate rows")
        if groups.shape != (T,) or observed.shape != (T,):
            raise InputError("test_groups and test_labels must have one entry per instance")
        expected = (probas >= self.costs.tau).astype(np.int8)
        if not np.array_equal(labels, expected):
            raise InputError("labels are not the thresholded probabilities for these costs")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probabilities", probas)
        object.__setattr__(self, "test_groups", groups)
        object.__setattr__(self, "test_labels", observed)

    @property
    def B(self) -> int:
        return self.labels.shape[0]

    @property
    def T(self) -> int:
        return self.labels.shape[1]

    def save(self, csv_path, header_path, plan: ReplicatePlan | None = None) -> None:
        """Columnar CSV (replicate, instance, probability, label) plus a JSON
        header carrying shape, threshold, and test-set columns."""
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["replicate", "instance", "probability", "label"])
            for b in range(self.B):
                for t in range(self.T):
                    writer.writerow(
                        [b, t, repr(float(self.probabilities[b, t])), int(self.labels[b, t])]
                    )
        header = {
            "B": self.B,
            "T": self.T,
            "tau": self.costs.tau,
            "costs": self.costs.to_dict(),
            "test_groups": self.test_groups.tolist(),
            "test_labels": self.test_labels.tolist(),
        }
        if plan is not None:
            header["seeds"] = {
                "base_seed": plan.base_seed,
                "replicate_seeds": [plan.replicate_seed(b) for b in range(self.B)],
            }
        with open(header_path, "w", encoding="utf-8") as fh:
            json.dump(header, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, csv_path, header_path) -> "PredictionMatrix":
        with open(header_path, "r", encoding="utf-8") as fh:
            header = json.load(fh)
        B, T = int(header["B"]), int(header["T"])
        probas = np.zeros((B, T))
        labels = np.zeros((B, T), dtype=np.int8)
        with open(csv_path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                b, t = int(row[0]), int(row[1])
                probas[b, t] = float(row[2])
                labels[b, t] = int(row[3])
        return cls(
            labels=labels,
            probabilities=probas,
            test_groups=np.array(header["test_groups"], dtype=np.int8),
            test_labels=np.array(header["test_labels"], dtype=np.int8),
            costs=CostModel.from_dict(header["costs"]),
        )


def build_prediction_matrix(
    train: TabularDataset,
    test: TabularDataset,
    spec: ModelSpec,
    costs: CostModel,
    plan: ReplicatePlan,
    workers: int = 1,
) -> PredictionMatrix:
    """Train one model per replicate and evaluate all of them on the test set.

    Row b is fully determined by (spec, train, plan, b): replicates may be
    trained serially or across any number of workers with identical results.
    A failing replicate aborts the build — skipping it would bias the grid.
    """
    if train.m != test.m:
        raise InputError(f"train has {train.m} features but test has {test.m}")
    replicates = make_replicates(train, plan)

    def one_row(b: int) -> np.ndarray:
        try:
            model = fit(spec, train.subset(replicates[b]), seed=plan.replicate_seed(b))
            return model.predict_proba(test.features)
        except AuditError as exc:
            raise type(exc)(f"replicate {b}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one_row, range(plan.replicate_count)))
    else:
        rows = [one_row(b) for b in range(plan.replicate_count)]

    probabilities = np.vstack(rows)
    labels = (probabilities >= costs.tau).astype(np.int8)
    return PredictionMatrix(
        labels=labels,
        probabilities=probabilities,
        test_groups=test.group,
        test_labels=test.labels,
        costs=costs,
    )


@dataclass(frozen=True)
class ErrorReport:
    """Expected per-instance loss against observed labels, plus aggregates."""

    per_instance: np.ndarray
    overall: float
    by_group: dict

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "group0": self.by_group.get(0),
            "group1": self.by_group.get(1),
        }


def expected_error(
    matrix_or_votes,
    costs: CostModel | None = None,
    test_labels: np.ndarray | None = None,
    test_groups: np.ndarray | None = None,
) -> ErrorReport:
    """Mean loss of the replicate predictions against the observed labels.

    Accepts either a PredictionMatrix (costs and test columns default to the
    stored ones) or a bare (B, T) vote matrix with the columns given
    explicitly. Per-instance values average over replicates; aggregates
    average those over instances, overall and per group.
    """
    if isinstance(matrix_or_votes, PredictionMatrix):
        votes = matrix_or_votes.labels
        costs = costs if costs is not None else matrix_or_votes.costs
        test_labels = matrix_or_votes.test_labels
        test_groups = matrix_or_votes.test_groups
    else:
        votes = np.asarray(matrix_or_votes)
        if costs is None or test_labels is None or test_groups is None:
            raise InputError("bare vote matrices need costs, test_labels, and test_groups")
    table = costs.loss_matrix()
    losses = table[np.asarray(test_labels, dtype=np.intp)[None, :], votes.astype(np.intp)]
    per_instance = losses.mean(axis=0)
    by_group = {}
    for g in (0, 1):
        mask = np.asarray(test_groups) == g
        by_group[g] = float(per_instance[mask].mean()) if mask.any() else None
    return ErrorReport(
        per_instance=per_instance,
        overall=float(per_instance.mean()),
        by_group=by_group,
    )
