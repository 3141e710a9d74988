"""Dual coreset construction by grid sampling.

The data are stratified twice at a fixed anchor ``(theta_anc, lam_anc)``:
once by the lower bounds ``a_i`` and once by the upper bounds ``b_i`` of the
dual terms ``h_i``. Layer ``0`` holds values up to the mean, layer ``j >= 1``
the values in ``(2^(j-1) mean, 2^j mean]``. Intersecting both layerings gives
the cells ``C_ij``; each nonempty cell is sampled uniformly and every sampled
index receives mass ``|C_ij| / (n |Q_ij|)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import CLASSIFICATION, Dataset, LabeledSample, MetricSpec
from .errors import BudgetError, DomainError
from .losses import LossModel, growth_C, kappa, lipschitz_estimate, lower_bounds, r_bound, upper_bounds

LAMBDA_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class Anchors:
    """Centre and radius of the parameter ball and of the dual interval.

    ``l_d`` always equals ``lambda_anc``.
    """

    theta_anc: np.ndarray
    l_p: float
    lambda_anc: float
    l_d: float
    xi0: LabeledSample
    rho: float

    def digest(self) -> str:
        h = hashlib.sha256()
        for part in (self.theta_anc, [self.l_p, self.lambda_anc, self.l_d], self.xi0.x,
                     [self.xi0.y, self.rho]):
            h.update(np.asarray(part, dtype=np.float64).tobytes())
        return h.hexdigest()[:16]


def compute_xi0_rho(ds: Dataset, metric: MetricSpec) -> tuple[LabeledSample, float]:
    """Reference point (feature centroid, majority or median label) and max distance to it."""
    x0 = ds.X.mean(axis=0)
    if ds.task == CLASSIFICATION:
        y0 = 1.0 if np.sum(ds.y > 0) >= np.sum(ds.y < 0) else -1.0
    else:
        y0 = float(np.median(ds.y))
    if ds.n == 1:
        x0 = ds.X[0].copy()
    rho = float(np.max(metric.distances_to(ds.X, ds.y, x0, y0)))
    return LabeledSample(x0, y0), rho


def tau_value(C: float, sigma: float, rho: float, p: int = 1) -> float:
    """``C (2^(p-1) + (1 + 2^(p-1) rho^p) / sigma^p)``."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    k = 2.0 ** (p - 1)
    return C * (k + (1.0 + k * rho**p) / sigma**p)


def tau(model: LossModel, theta, sigma: float, rho: float) -> float:
    """Upper end of the dual query interval at ``theta``."""
    return tau_value(growth_C(model, theta), sigma, rho, model.metric.p)


def _ball_to_dual_constant(model: LossModel, dim: int) -> float:
    # max ||v||_* over the Euclidean unit ball
    return math.sqrt(dim) if model.metric.dual_norm == "l1" else 1.0


def compute_anchors(ds: Dataset, model: LossModel, sigma: float, theta_anc=None,
                    l_p: float = 10.0) -> Anchors:
    """Anchor the dual interval so that ``[kappa, tau]`` fits for every theta in the ball."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if l_p < 0:
        raise ValueError("l_p must be nonnegative")
    theta_anc = np.zeros(ds.dim) if theta_anc is None else np.asarray(theta_anc, dtype=np.float64)
    if theta_anc.shape != (ds.dim,):
        raise ValueError(f"theta_anc has shape {theta_anc.shape}, expected ({ds.dim},)")
    xi0, rho = compute_xi0_rho(ds, model.metric)
    c_max = growth_C(model, theta_anc) + _ball_to_dual_constant(model, ds.dim) * l_p * (
        model.delta if model.kind == "huber" else 1.0
    )
    lam = max(kappa(model, theta_anc), 0.5 * tau_value(c_max, sigma, rho, model.metric.p))
    if lam <= 0:
        lam = LAMBDA_FLOOR
    return Anchors(theta_anc, float(l_p), float(lam), float(lam), xi0, rho)


# --------------------------------------------------------------------------
# grid

@dataclass(frozen=True, eq=False)
class GridPartition:
    A: float
    B: float
    N: int
    cells: dict
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def degenerate(self) -> bool:
        return self.A <= 0 and self.B <= 0

    def layer_sums(self) -> tuple[int, int]:
        """``(sum |C_ij| 2^i, sum |C_ij| 2^j)``."""
        si = sum(len(idx) * 2**i for (i, _), idx in self.cells.items())
        sj = sum(len(idx) * 2**j for (_, j), idx in self.cells.items())
        return si, sj


def layer_index(values, mean: float, N: int):
    """Layer of each value: 0 if ``v <= mean``, else the ``j`` with ``2^(j-1) mean < v <= 2^j mean``."""
    values = np.asarray(values, dtype=np.float64)
    if not mean > 0:
        return np.zeros(values.shape, dtype=np.intp)
    thresholds = mean * 2.0 ** np.arange(N + 1)
    return np.minimum(np.searchsorted(thresholds, values, side="left"), N)


def grid_from_bounds(a, b) -> GridPartition:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.size
    N = int(math.ceil(math.log2(n))) if n > 1 else 0
    A = float(a.mean())
    B = float(b.mean())
    li = layer_index(a, A, N)
    lj = layer_index(b, B, N)
    key = li * (N + 1) + lj
    order = np.argsort(key, kind="stable")
    cells = {}
    for k in np.unique(key):
        idx = order[key[order] == k]
        cells[(int(k // (N + 1)), int(k % (N + 1)))] = idx
    return GridPartition(A, B, N, cells, a, b)


def build_grid(ds: Dataset, model: LossModel, anchors: Anchors) -> GridPartition:
    """Evaluate ``a_i, b_i`` at the anchor and partition ``[n]`` into cells."""
    a = lower_bounds(model, anchors.theta_anc, anchors.lambda_anc, ds.X, ds.y)
    b = upper_bounds(model, anchors.theta_anc, anchors.lambda_anc, ds.X, ds.y)
    return grid_from_bounds(a, b)


def _spans(grid: GridPartition, lipschitz: float, r: float, l_p: float, l_d: float) -> dict:
    """Per-cell ``(range + drift) / (2^(j-1) + 2^(i-1))``, the weight before the ``A`` floor."""
    drift = 2.0 * lipschitz * l_p + 2.0 * r * l_d
    out = {}
    for (i, j) in grid.cells:
        mu = 0.0 if i == 0 else 1.0
        span = 2.0**j * grid.B - mu * 2.0 ** (i - 1) * grid.A + drift
        out[(i, j)] = span / (2.0 ** (j - 1) + 2.0 ** (i - 1))
    return out


def cell_weights(grid: GridPartition, lipschitz: float, r: float, l_p: float, l_d: float) -> dict:
    """Relative sample-size weights: squared (cell range + drift) / (per-cell deviation).

    May overflow to ``inf`` on degenerate grids; :func:`allocate_budget`
    works with the floor-free ratios instead, since the ``A`` floor is a
    factor common to every cell.
    """
    eps_a = max(1e-12 * grid.B, 1e-300)
    a_floor = np.float64(max(grid.A, eps_a))
    with np.errstate(over="ignore"):
        return {c: float((v / a_floor) ** 2)
                for c, v in _spans(grid, lipschitz, r, l_p, l_d).items()}


def allocate_budget(grid: GridPartition, s: int, lipschitz: float, r: float, l_p: float,
                    l_d: float) -> dict:
    """Per-cell sample counts summing to ``min(s, n)``.

    Starts from ``max(1, round(s w_ij / sum w))`` capped at ``|C_ij|``; any
    deficit is refilled in proportion to the weights among cells with spare
    capacity, any surplus is removed from the lowest-weight cells first.
    """
    cells = sorted(grid.cells)
    if s < len(cells):
        raise BudgetError(
            f"budget {s} is smaller than the {len(cells)} nonempty cells; need s >= {len(cells)}",
            minimum=len(cells),
        )
    spans = _spans(grid, lipschitz, r, l_p, l_d)
    top = max(spans.values())
    w = {c: (v / top) ** 2 if top > 0 else 1.0 for c, v in spans.items()}
    size = {c: len(grid.cells[c]) for c in cells}
    total_w = sum(w.values())
    q = {c: min(size[c], max(1, int(round(s * w[c] / total_w)))) for c in cells}
    target = min(s, grid.n)
    by_weight = sorted(cells, key=lambda c: (-w[c], c))

    remaining = target - sum(q.values())
    while remaining > 0:
        free = [c for c in by_weight if q[c] < size[c]]
        wf = sum(w[c] for c in free)
        add = {c: min(size[c] - q[c], int(remaining * w[c] / wf)) for c in free}
        if sum(add.values()) == 0:
            for c in free[:remaining]:
                add[c] = 1
        for c, k in add.items():
            q[c] += k
        remaining -= sum(add.values())

    surplus = sum(q.values()) - target
    while surplus > 0:
        for c in reversed(by_weight):
            if surplus == 0:
                break
            if q[c] > 1:
                q[c] -= 1
                surplus -= 1
    return q


# --------------------------------------------------------------------------
# coresets

@dataclass(frozen=True, eq=False)
class Coreset:
    """Sparse mass vector: ``weights[k]`` sits on sample ``indices[k]``."""

    indices: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        w = np.asarray(self.weights, dtype=np.float64)
        if idx.shape != w.shape or idx.ndim != 1:
            raise ValueError("indices and weights must be 1-D arrays of equal length")
        if np.any(w < 0):
            raise ValueError("coreset weights must be nonnegative")
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate coreset index")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.indices.size

    def dense(self, n: int):
        out = np.zeros(n)
        out[self.indices] = self.weights
        return out

    def to_json(self) -> str:
        idx = ", ".join(str(int(i)) for i in self.indices)
        w = ", ".join(f"{x:.17g}" for x in self.weights)
        meta = json.dumps(self.meta, sort_keys=True)
        return f'{{\n  "indices": [{idx}],\n  "weights": [{w}],\n  "meta": {meta}\n}}\n'

    @classmethod
    def from_json(cls, text) -> "Coreset":
        doc = json.loads(text)
        return cls(np.array(doc["indices"], dtype=np.intp), np.array(doc["weights"], dtype=np.float64),
                   doc.get("meta", {}))


def _cell_rng(seed, cell):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(c) for c in cell)))


def sample_from_grid(grid: GridPartition, allocation: dict, seed) -> tuple[np.ndarray, np.ndarray]:
    """Uniform without-replacement sample per cell; returns sorted indices and masses."""
    n = grid.n
    idx_parts, w_parts = [], []
    for cell in sorted(allocation):
        members = grid.cells[cell]
        q = allocation[cell]
        pick = _cell_rng(seed, cell).choice(members, size=q, replace=False)
        idx_parts.append(pick)
        w_parts.append(np.full(q, len(members) / (n * q)))
    idx = np.concatenate(idx_parts)
    w = np.concatenate(w_parts)
    order = np.argsort(idx)
    return idx[order], w[order]


def sample_coreset(ds: Dataset, model: LossModel, sigma: float, anchors: Anchors, s: int,
                   seed, lipschitz: float | None = None) -> Coreset:
    """Grid-sampling dual coreset with support size ``min(s, n)``."""
    if not 1 <= s <= ds.n:
        raise BudgetError(f"budget must lie in [1, {ds.n}], got {s}")
    grid = build_grid(ds, model, anchors)
    if lipschitz is None:
        lipschitz = lipschitz_estimate(model, ds)
    alloc = allocate_budget(grid, s, lipschitz, r_bound(model, ds.dim), anchors.l_p, anchors.l_d)
    idx, w = sample_from_grid(grid, alloc, seed)
    meta = {
        "method": "dualcore",
        "sigma": float(sigma),
        "p": model.metric.p,
        "gamma": float(model.metric.gamma),
        "norm": model.metric.norm,
        "loss": str(model),
        "seed": int(seed),
        "budget": int(s),
        "n": ds.n,
        "anchors": anchors.digest(),
    }
    return Coreset(idx, w, meta)


def uniform_coreset(ds: Dataset, s: int, seed) -> Coreset:
    """``s`` indices drawn uniformly without replacement, each with mass ``1/s``."""
    if not 1 <= s <= ds.n:
        raise BudgetError(f"budget must lie in [1, {ds.n}], got {s}")
    rng = np.random.default_rng(int(seed))
    idx = np.sort(rng.choice(ds.n, size=s, replace=False))
    meta = {"method": "unisamp", "seed": int(seed), "budget": int(s), "n": ds.n}
    return Coreset(idx, np.full(s, 1.0 / s), meta)
