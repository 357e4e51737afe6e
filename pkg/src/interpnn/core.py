"""Datasets, validation, seeded randomness and train/test splitting."""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSplitError, InvalidDatasetError

_U64 = 2**64


class Task(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class Violation:
    kind: str  # DimensionMismatch | NonFiniteValue | NonBinaryLabel | EmptyDataset | LengthMismatch
    index: int | None
    message: str

    def __str__(self):
        at = "" if self.index is None else f" at index {self.index}"
        return f"{self.kind}{at}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "ok"
        return "; ".join(str(v) for v in self.violations)


def validate_dataset(points, labels, task=Task.REGRESSION) -> ValidationReport:
    """Check raw points/labels against the dataset invariants.

    ``points`` may be a ragged sequence; every offending entry is reported
    with its index instead of stopping at the first problem.
    """
    task = Task(task)
    problems: list[Violation] = []
    points = list(points) if not isinstance(points, np.ndarray) else points
    labels = np.asarray(labels, dtype=float).ravel() if len(labels) else np.zeros(0)

    if len(points) == 0:
        problems.append(Violation("EmptyDataset", None, "dataset has no points"))
        return ValidationReport(tuple(problems))
    if len(points) != len(labels):
        problems.append(Violation(
            "LengthMismatch", None,
            f"{len(points)} points but {len(labels)} labels"))

    dim = None
    for i, p in enumerate(points):
        row = np.atleast_1d(np.asarray(p, dtype=float))
        if row.ndim != 1 or row.size == 0:
            problems.append(Violation("DimensionMismatch", i, "point must be a non-empty vector"))
            continue
        if dim is None:
            dim = row.size
        elif row.size != dim:
            problems.append(Violation(
                "DimensionMismatch", i, f"expected dimension {dim}, got {row.size}"))
            continue
        if not np.all(np.isfinite(row)):
            problems.append(Violation("NonFiniteValue", i, "point has NaN or infinite coordinate"))

    for i, y in enumerate(labels):
        if not math.isfinite(y):
            problems.append(Violation("NonFiniteValue", i, "label is NaN or infinite"))
        elif task is Task.CLASSIFICATION and y not in (0.0, 1.0):
            problems.append(Violation("NonBinaryLabel", i, f"label {y!r} is not 0 or 1"))
    return ValidationReport(tuple(problems))


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Points in R^d with real labels.

    Classification labels are stored as the reals 0.0 and 1.0 so that one
    weighted-average code path serves both tasks.
    """

    points: np.ndarray
    labels: np.ndarray
    task: Task = Task.REGRESSION

    def __post_init__(self):
        task = Task(self.task)
        report = validate_dataset(self.points, self.labels, task)
        if not report.ok:
            raise InvalidDatasetError(report)
        pts = _frozen(np.asarray(self.points, dtype=float).reshape(len(self.labels), -1))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=float).ravel()))
        object.__setattr__(self, "task", task)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(self.points[idx], self.labels[idx], self.task)

    def content_hash(self) -> str:
        """Hash of the dataset that ignores row order."""
        rows = np.column_stack([self.points, self.labels])
        order = np.lexsort(rows.T[::-1])
        h = hashlib.sha256()
        h.update(self.task.value.encode())
        h.update(np.ascontiguousarray(rows[order]).tobytes())
        return h.hexdigest()

    def canonical(self) -> "LabeledDataset":
        """The same multiset of rows, sorted lexicographically."""
        rows = np.column_stack([self.points, self.labels])
        return self.subset(np.lexsort(rows.T[::-1]))


@dataclass(frozen=True)
class RngSeed:
    """Reproducible source of independent random streams.

    A ``(seed, stream)`` pair always yields the same Philox counter-based
    generator, and :meth:`child` derives further independent streams from
    integer keys, so work split across threads draws identical numbers no
    matter how it is scheduled.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for v in (self.seed, self.stream, *self.path):
            if not 0 <= int(v) < _U64:
                raise ValueError(f"seed components must be 64-bit unsigned, got {v}")

    def child(self, *keys) -> "RngSeed":
        return RngSeed(self.seed, self.stream, self.path + tuple(_key(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, *self.path))
        return np.random.Generator(np.random.Philox(ss))


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k)
    digest = hashlib.sha256(str(k).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def split_indices(n: int, train_fraction: float, seed: RngSeed):
    """Index sets of a uniform random train/test partition of ``range(n)``.

    The train size is ``n * train_fraction`` rounded to the nearest integer
    with halves going to the training side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n_train = int(math.floor(n * train_fraction + 0.5))
    if n_train <= 0 or n_train >= n:
        raise DegenerateSplitError(
            f"train fraction {train_fraction} of {n} rows leaves an empty side")
    perm = seed.generator().permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_train_test(ds: LabeledDataset, train_fraction: float, seed: RngSeed):
    train, test = split_indices(ds.n, train_fraction, seed)
    return ds.subset(train), ds.subset(test)
