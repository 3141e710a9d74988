"""Datasets, the feature-label metric, file parsers and perturbations.

A :class:`Dataset` is a dense, read-only ``(n, m)`` feature matrix plus a
label vector. Sample ``i`` carries the Dirac mass ``1/n`` of the empirical
distribution, so row order is never changed by any operation here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParseError, TaskError

CLASSIFICATION = "classification"
REGRESSION = "regression"
_TASKS = (CLASSIFICATION, REGRESSION)

NORMS = ("l1", "l2", "linf")
_DUAL = {"l1": "linf", "l2": "l2", "linf": "l1"}


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class LabeledSample(NamedTuple):
    x: np.ndarray
    y: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable labelled dataset.

    ``X`` has shape ``(n, m)``; ``y`` has shape ``(n,)``. For classification
    every label is exactly -1 or +1.
    """

    X: np.ndarray
    y: np.ndarray
    task: str = CLASSIFICATION

    def __post_init__(self):
        X = _readonly(self.X)
        y = _readonly(self.y)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if X.shape[0] < 1:
            raise ValueError("a dataset needs at least one sample")
        if self.task not in _TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == CLASSIFICATION and not np.all(np.abs(y) == 1.0):
            raise TaskError("classification labels must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i) -> LabeledSample:
        return LabeledSample(self.X[i], float(self.y[i]))

    def __iter__(self):
        for i in range(self.n):
            yield self[i]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self.X[indices], self.y[indices], self.task)

    def equals(self, other: "Dataset") -> bool:
        """Bit-exact comparison (``-0.0`` and ``0.0`` are distinguished)."""
        return (
            self.task == other.task
            and self.X.shape == other.X.shape
            and self.X.tobytes() == other.X.tobytes()
            and self.y.tobytes() == other.y.tobytes()
        )


def vector_norm(V, norm: str, axis=-1):
    """``l1``, ``l2`` or ``linf`` norm along ``axis``."""
    V = np.asarray(V, dtype=np.float64)
    if norm == "l2":
        return np.sqrt(np.sum(V * V, axis=axis))
    if norm == "l1":
        return np.sum(np.abs(V), axis=axis)
    if norm == "linf":
        return np.max(np.abs(V), axis=axis, initial=0.0)
    raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")


def dual_norm_name(norm: str) -> str:
    return _DUAL[norm]


def dual_norm_subgradient(v, norm: str):
    """A subgradient of the dual of ``norm`` at ``v`` (zero vector at ``v = 0``)."""
    v = np.asarray(v, dtype=np.float64)
    dual = _DUAL[norm]
    g = np.zeros_like(v)
    if not np.any(v):
        return g
    if dual == "l2":
        return v / np.sqrt(v @ v)
    if dual == "l1":
        return np.sign(v)
    k = int(np.argmax(np.abs(v)))
    g[k] = np.sign(v[k])
    return g


@dataclass(frozen=True)
class MetricSpec:
    """Feature-label metric ``d = ||x - x'|| + (gamma/2) |y - y'|``.

    ``p`` is the Wasserstein order; the loss oracles only support ``p = 1``.
    """

    norm: str = "l2"
    gamma: float = 7.0
    p: int = 1

    def __post_init__(self):
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}; expected one of {NORMS}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError("p must be an integer >= 1")

    @property
    def dual_norm(self) -> str:
        return _DUAL[self.norm]

    def feature_norm(self, V, axis=-1):
        return vector_norm(V, self.norm, axis=axis)

    def dual(self, V, axis=-1):
        return vector_norm(V, _DUAL[self.norm], axis=axis)

    def distance(self, a: LabeledSample, b: LabeledSample) -> float:
        dx = np.asarray(a[0], dtype=np.float64) - np.asarray(b[0], dtype=np.float64)
        return float(self.feature_norm(dx)) + 0.5 * self.gamma * abs(a[1] - b[1])

    def distances_to(self, X, y, x0, y0):
        """Vector of ``d((X[i], y[i]), (x0, y0))``."""
        X = np.asarray(X, dtype=np.float64)
        return self.feature_norm(X - np.asarray(x0, dtype=np.float64)) + 0.5 * self.gamma * np.abs(
            np.asarray(y, dtype=np.float64) - y0
        )


# --------------------------------------------------------------------------
# parsing

def _as_text(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return data.decode("utf-8")
    if hasattr(data, "read"):
        return _as_text(data.read())
    return str(data)


def _map_labels(raw, task):
    raw = np.asarray(raw, dtype=np.float64)
    if task == REGRESSION:
        return raw
    distinct = np.unique(raw)
    if distinct.size > 2:
        raise TaskError(
            f"classification needs at most two distinct labels, found {distinct.size}: "
            f"{distinct[:5].tolist()}{'...' if distinct.size > 5 else ''}"
        )
    if distinct.size == 1:
        if abs(distinct[0]) != 1.0:
            raise TaskError(f"single label {distinct[0]!r} cannot be mapped to -1/+1")
        return raw
    return np.where(raw == distinct[0], -1.0, 1.0)


def parse_libsvm(data, task: str = CLASSIFICATION, dim: int | None = None) -> Dataset:
    """Parse LIBSVM text (``<label> <index>:<value> ...``, 1-based indices).

    Absent indices are zero. ``dim`` defaults to the largest index seen.
    In classification mode the two distinct raw labels, sorted ascending,
    become -1 and +1.
    """
    text = _as_text(data)
    labels = []
    rows = []
    max_index = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", line=lineno) from None
        entries = {}
        for tok in tokens[1:]:
            idx, sep, val = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                k = int(idx)
                v = float(val)
            except ValueError:
                raise ParseError(f"bad feature token {tok!r}", line=lineno) from None
            if k < 1:
                raise ParseError(f"feature index {k} is not 1-based", line=lineno)
            entries[k] = v
            max_index = max(max_index, k)
        rows.append(entries)
    if not rows:
        raise ParseError("no samples")
    m = max_index if dim is None else int(dim)
    if m < max_index:
        raise ParseError(f"feature index {max_index} exceeds dim={m}")
    X = np.zeros((len(rows), m))
    for i, entries in enumerate(rows):
        for k, v in entries.items():
            X[i, k - 1] = v
    return Dataset(X, _map_labels(labels, task), task)


def write_libsvm(ds: Dataset) -> str:
    """Inverse of :func:`parse_libsvm` (bit-exact values, explicit trailing zero if needed)."""
    lines = []
    X, y = ds.X, ds.y
    nonzero = (X != 0) | np.signbit(X)
    last_used = int(np.max(np.nonzero(nonzero.any(axis=0))[0], initial=-1)) + 1
    for i in range(ds.n):
        if ds.task == CLASSIFICATION:
            parts = ["+1" if y[i] > 0 else "-1"]
        else:
            parts = [repr(float(y[i]))]
        for k in np.nonzero(nonzero[i])[0]:
            parts.append(f"{k + 1}:{float(X[i, k])!r}")
        if i == 0 and last_used < ds.dim:
            parts.append(f"{ds.dim}:0.0")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_csv(data, label_column: int = -1, header: bool = False,
              task: str = CLASSIFICATION) -> Dataset:
    """Parse a numeric CSV; ``label_column`` may be negative (from the end)."""
    text = _as_text(data)
    reader = csv.reader(io.StringIO(text))
    width = None
    feats = []
    labels = []
    for rowno, row in enumerate(reader, start=1):
        if header and rowno == 1:
            continue
        if not row or all(not c.strip() for c in row):
            continue
        if width is None:
            width = len(row)
            if width < 2:
                raise ParseError("need at least one feature column and a label", line=rowno)
            col = label_column if label_column >= 0 else width + label_column
            if not 0 <= col < width:
                raise ParseError(f"label column {label_column} out of range", line=rowno)
        elif len(row) != width:
            raise ParseError(f"ragged row: {len(row)} fields, expected {width}", line=rowno)
        values = []
        for colno, cell in enumerate(row, start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", line=rowno, column=colno) from None
        labels.append(values.pop(col))
        feats.append(values)
    if not feats:
        raise ParseError("no samples")
    return Dataset(np.array(feats), _map_labels(labels, task), task)


def load_dataset(path, task: str = CLASSIFICATION, label_column: int = -1,
                 header: bool = False) -> Dataset:
    """Load ``.csv`` files with :func:`parse_csv`, everything else as LIBSVM."""
    with open(path, "rb") as fh:
        data = fh.read()
    if str(path).lower().endswith(".csv"):
        return parse_csv(data, label_column=label_column, header=header, task=task)
    return parse_libsvm(data, task=task)


# --------------------------------------------------------------------------
# normalization

@dataclass(frozen=True, eq=False)
class ScalingRecord:
    """Per-coordinate ``(min, range)`` of a min-max normalization."""

    minimum: np.ndarray
    range: np.ndarray

    def apply(self, ds: Dataset) -> Dataset:
        if ds.dim != self.minimum.size:
            raise ValueError(f"record has {self.minimum.size} coordinates, dataset has {ds.dim}")
        shifted = ds.X - self.minimum
        safe = np.where(self.range > 0, self.range, 1.0)
        X = np.where(self.range > 0, shifted / safe, 0.0)
        return Dataset(X, ds.y, ds.task)

    def to_text(self) -> str:
        return "".join(f"{lo!r} {r!r}\n" for lo, r in zip(self.minimum.tolist(), self.range.tolist()))

    @classmethod
    def from_text(cls, text) -> "ScalingRecord":
        lo, r = [], []
        for lineno, line in enumerate(_as_text(text).splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("expected 'min range'", line=lineno)
            try:
                lo.append(float(parts[0]))
                r.append(float(parts[1]))
            except ValueError:
                raise ParseError("non-numeric scaling entry", line=lineno) from None
        return cls(np.array(lo), np.array(r))


def normalize(ds: Dataset) -> tuple[Dataset, ScalingRecord]:
    """Min-max map every feature coordinate to [0, 1]; constant coordinates go to 0."""
    lo = ds.X.min(axis=0)
    rng = ds.X.max(axis=0) - lo
    record = ScalingRecord(lo, rng)
    return record.apply(ds), record


# --------------------------------------------------------------------------
# perturbations and synthetic data

def perturb_gaussian(ds: Dataset, std: float, seed) -> Dataset:
    """Add i.i.d. ``N(0, std^2)`` noise to every feature coordinate."""
    if std < 0:
        raise ValueError("std must be nonnegative")
    if std == 0:
        return ds
    rng = np.random.default_rng(seed)
    return Dataset(ds.X + rng.normal(0.0, std, size=ds.X.shape), ds.y, ds.task)


def flip_labels(ds: Dataset, rate: float, seed) -> Dataset:
    """Negate exactly ``floor(rate * n)`` labels chosen without replacement."""
    if ds.task != CLASSIFICATION:
        raise TaskError("label flipping needs a classification dataset")
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    k = min(ds.n, math.floor(rate * ds.n + 1e-9))
    if k == 0:
        return ds
    rng = np.random.default_rng(seed)
    idx = rng.choice(ds.n, size=k, replace=False)
    y = ds.y.copy()
    y[idx] = -y[idx]
    return Dataset(ds.X, y, ds.task)


def synth_blobs(n: int, m: int, separation: float = 4.0, label_noise: float = 0.0,
                seed=0) -> Dataset:
    """Two unit-variance Gaussian blobs at ``+-(separation/2) e_1`` labelled +1/-1."""
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    rng = np.random.default_rng(seed)
    n_pos = (n + 1) // 2
    y = np.concatenate([np.ones(n_pos), -np.ones(n - n_pos)])
    y = y[rng.permutation(n)]
    X = rng.normal(size=(n, m))
    X[:, 0] += 0.5 * separation * y
    ds = Dataset(X, y, CLASSIFICATION)
    if label_noise > 0:
        ds = flip_labels(ds, label_noise, rng.integers(2**63))
    return ds
