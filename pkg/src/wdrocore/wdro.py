"""Worst-case risk through the strong dual, training, and a brute-force check.

For ``p = 1`` the worst-case risk at ``theta`` is

    R(theta) = min_{lam in [kappa(theta), tau(theta)]}  lam * sigma + H(theta, lam)

with ``H`` the (weighted) mean of the per-sample dual terms. ``g(lam)`` is
convex, so a golden-section search over the interval is enough.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coreset import Anchors, Coreset, compute_anchors, tau
from .dataio import CLASSIFICATION, Dataset
from .errors import DomainError, UnsupportedError
from .losses import (
    LossModel,
    dual_terms,
    h_subgradients,
    h_values,
    kappa,
    kappa_subgradient,
    lipschitz_estimate,
    losses,
)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
LAMBDA_RTOL = 1e-8
BOUNDARY_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class WdroProblem:
    """WDRO instance over ``ds``; ``coreset`` replaces the uniform ``1/n`` masses."""

    ds: Dataset
    model: LossModel
    sigma: float
    anchors: Anchors
    coreset: Coreset | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.model.metric.p != 1:
            raise UnsupportedError("risk evaluation needs Wasserstein order p = 1")
        if self.coreset is None:
            X, y, w = self.ds.X, self.ds.y, np.full(self.ds.n, 1.0 / self.ds.n)
        else:
            idx = self.coreset.indices
            if idx.size and (idx.min() < 0 or idx.max() >= self.ds.n):
                raise ValueError("coreset index outside the dataset")
            X, y, w = self.ds.X[idx], self.ds.y[idx], self.coreset.weights
        object.__setattr__(self, "_X", X)
        object.__setattr__(self, "_y", y)
        object.__setattr__(self, "_w", w)

    @classmethod
    def build(cls, ds: Dataset, model: LossModel, sigma: float, theta_anc=None, l_p: float = 10.0,
              coreset: Coreset | None = None) -> "WdroProblem":
        return cls(ds, model, sigma, compute_anchors(ds, model, sigma, theta_anc, l_p), coreset)

    def with_coreset(self, coreset: Coreset | None) -> "WdroProblem":
        return WdroProblem(self.ds, self.model, self.sigma, self.anchors, coreset)

    def with_sigma(self, sigma: float) -> "WdroProblem":
        return WdroProblem(self.ds, self.model, sigma, self.anchors, self.coreset)

    @property
    def support(self):
        """``(X, y, w)`` restricted to the samples carrying mass."""
        return self._X, self._y, self._w

    def interval(self, theta) -> tuple[float, float]:
        """The dual query interval ``[kappa(theta), tau(theta)]``."""
        k = kappa(self.model, theta)
        return k, max(k, tau(self.model, theta, self.sigma, self.anchors.rho))


@dataclass(frozen=True)
class RiskResult:
    risk: float
    lambda_star: float
    at_boundary: bool

    def to_json(self) -> str:
        return (f'{{"risk": {self.risk:.17g}, "lambda_star": {self.lambda_star:.17g}, '
                f'"at_boundary": {json.dumps(self.at_boundary)}}}\n')


@dataclass(frozen=True, eq=False)
class TrainResult:
    theta: np.ndarray
    risk: float
    iterations: int
    trajectory: list | None = field(default=None, repr=False)

    def to_json(self) -> str:
        theta = ", ".join(f"{v:.17g}" for v in self.theta)
        return (f'{{"theta": [{theta}], "risk": {self.risk:.17g}, '
                f'"iterations": {self.iterations}}}\n')

    @staticmethod
    def theta_from_json(text) -> np.ndarray:
        return np.array(json.loads(text)["theta"], dtype=np.float64)


def eval_H(problem: WdroProblem, theta, lam: float) -> float:
    """Weighted mean of the dual terms ``sum_i w_i h(theta, lam, xi_i)``."""
    X, y, w = problem.support
    return float(w @ h_values(problem.model, theta, lam, X, y))


def golden_section(f, lo: float, hi: float, tol: float):
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))`` of the best probe.

    The endpoints are probed too, so a minimum sitting on the boundary is
    returned exactly.
    """
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    mid = 0.5 * (a + b)
    best = (lo, f(lo))
    for x in (mid, hi):
        fx = f(x)
        if fx < best[1]:
            best = (x, fx)
    return best


def _risk_from_terms(problem, theta, base, flip, w):
    sigma = problem.sigma
    k, t = problem.interval(theta)
    if flip is None:
        # H does not depend on lam, so g is increasing
        return k, k * sigma + float(w @ base), k
    gamma = problem.model.metric.gamma

    def g(lam):
        return lam * sigma + float(w @ np.maximum(base, flip - lam * gamma))

    if t <= k:
        return k, g(k), k
    lam, val = golden_section(g, k, t, LAMBDA_RTOL * max(1.0, t))
    return lam, val, k


def worst_case_risk(problem: WdroProblem, theta) -> RiskResult:
    """Worst-case expected loss over the Wasserstein ball, via the 1-D dual."""
    theta = np.asarray(theta, dtype=np.float64)
    X, y, w = problem.support
    base, flip = dual_terms(problem.model, theta, X, y)
    lam, val, k = _risk_from_terms(problem, theta, base, flip, w)
    return RiskResult(float(val), float(lam), bool(lam - k <= BOUNDARY_RTOL * max(1.0, k)))


def risk_subgradient(problem: WdroProblem, theta, result: RiskResult | None = None):
    """A subgradient of ``theta -> R(theta)``.

    Sum of the per-sample theta-subgradients at ``lambda_star``; when the
    constraint ``lam >= kappa(theta)`` is active its multiplier (the left
    slope of ``g`` at ``kappa``) times a subgradient of ``kappa`` is added.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if result is None:
        result = worst_case_risk(problem, theta)
    X, y, w = problem.support
    model = problem.model
    lam = result.lambda_star
    _, coef, _ = h_subgradients(model, theta, lam, X, y, check=False)
    grad = (w * coef) @ X
    if result.at_boundary:
        base, flip = dual_terms(model, theta, X, y)
        slope = problem.sigma
        if flip is not None:
            slope -= model.metric.gamma * float(w @ (flip - lam * model.metric.gamma >= base))
        if slope > 0:
            grad = grad + slope * kappa_subgradient(model, theta)
    return grad


def _project(theta, center, radius):
    v = theta - center
    r = math.sqrt(float(v @ v))
    if r <= radius:
        return theta
    return center + v * (radius / r)


def train(problem: WdroProblem, theta0=None, steps: int = 200, eta0: float | None = None,
          seed=0, record: bool = False) -> TrainResult:
    """Projected subgradient descent on the worst-case risk; returns the best iterate.

    Steps are ``eta0 / sqrt(t)``; iterates stay in the Euclidean ball
    ``B(theta_anc, l_p)``. ``seed`` is accepted for interface symmetry and
    unused: the method is deterministic.
    """
    if not problem.model.has_exact_oracle:
        raise UnsupportedError("training needs a closed-form dual oracle")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    center = problem.anchors.theta_anc
    radius = problem.anchors.l_p
    theta = center.copy() if theta0 is None else np.asarray(theta0, dtype=np.float64).copy()
    if np.linalg.norm(theta - center) > radius * (1 + 1e-12):
        raise DomainError("theta0 lies outside the parameter ball")
    if eta0 is None:
        X, _, _ = problem.support
        lip = lipschitz_estimate(problem.model, Dataset(X, np.zeros(len(X)), "regression"))
        eta0 = radius / lip if lip > 0 else radius
    if eta0 <= 0:
        eta0 = 1.0

    best_theta, best_risk = theta, math.inf
    trajectory = [] if record else None
    for t in range(1, steps + 1):
        res = worst_case_risk(problem, theta)
        if record:
            trajectory.append((t - 1, res.risk))
        if res.risk < best_risk:
            best_theta, best_risk = theta, res.risk
        g = risk_subgradient(problem, theta, res)
        theta = _project(theta - (eta0 / math.sqrt(t)) * g, center, radius)
    res = worst_case_risk(problem, theta)
    if record:
        trajectory.append((steps, res.risk))
    if res.risk < best_risk:
        best_theta, best_risk = theta, res.risk
    return TrainResult(np.array(best_theta), float(best_risk), steps, trajectory)


# --------------------------------------------------------------------------
# brute-force oracle

def _upper_hull(d, v):
    """Vertices of the upper concave envelope of the points ``(d, v)``."""
    order = np.lexsort((-v, d))
    d, v = d[order], v[order]
    hull_d, hull_v = [], []
    for di, vi in zip(d.tolist(), v.tolist()):
        if hull_d and di == hull_d[-1]:
            continue
        while len(hull_d) >= 2:
            d1, v1 = hull_d[-2], hull_v[-2]
            d2, v2 = hull_d[-1], hull_v[-1]
            if (v2 - v1) * (di - d1) <= (vi - v1) * (d2 - d1):
                hull_d.pop()
                hull_v.pop()
            else:
                break
        hull_d.append(di)
        hull_v.append(vi)
    return np.array(hull_d), np.array(hull_v)


def _candidates(problem: WdroProblem, theta, x, y, t_grid):
    """Finite candidate set around one sample: ``(Z, yZ)``."""
    model = problem.model
    if problem.ds.task == CLASSIFICATION:
        nrm = math.sqrt(float(theta @ theta))
        Zs, ys = [], []
        for lab in (y, -y):
            if nrm > 0:
                u = -lab * theta / nrm
                Zs.append(x + t_grid[:, None] * u)
            else:
                Zs.append(x[None, :])
            ys.append(np.full(len(Zs[-1]), lab))
        return np.vstack(Zs), np.concatenate(ys)
    if model.kind != "huber":
        raise UnsupportedError("regression candidates are defined for the Huber loss")
    z = float(theta @ x - y)
    direction = np.append(theta, -1.0)
    direction *= (1.0 if z >= 0 else -1.0) / math.sqrt(float(direction @ direction))
    pts = np.append(x, y)[None, :] + t_grid[:, None] * direction
    return pts[:, :-1], pts[:, -1]


def restricted_dual_curve(problem: WdroProblem, theta, lambdas, t_max: float = 50.0,
                          t_step: float = 1e-3):
    """``lam * sigma + sum_i w_i max_{zeta in Z_i} (loss(zeta) - lam d(zeta, xi_i))`` on ``lambdas``.

    Losses and distances are evaluated directly on explicit candidate points,
    never through the closed-form dual terms.
    """
    theta = np.asarray(theta, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0:
        raise ValueError("empty lambda grid")
    t_grid = np.arange(0.0, t_max + 0.5 * t_step, t_step)
    if t_grid.size == 0:
        raise ValueError("empty candidate grid")
    X, y, w = problem.support
    metric = problem.model.metric
    total = lambdas * problem.sigma ** metric.p
    for xi, yi, wi in zip(X, y, w):
        Z, yZ = _candidates(problem, theta, xi, yi, t_grid)
        vals = losses(problem.model, theta, Z, yZ)
        dist = metric.distances_to(Z, yZ, xi, yi) ** metric.p
        hd, hv = _upper_hull(dist, vals)
        total = total + wi * np.max(hv[None, :] - lambdas[:, None] * hd[None, :], axis=1)
    return total


def brute_force_risk(problem: WdroProblem, theta, t_max: float = 50.0, t_step: float = 1e-3,
                     n_lambda: int = 2000) -> float:
    """Finite-support dual minimised over a uniform ``lam`` grid on ``[kappa, tau]``."""
    k, t = problem.interval(theta)
    lambdas = np.unique(np.append(np.linspace(k, t, n_lambda), k))
    return float(np.min(restricted_dual_curve(problem, theta, lambdas, t_max, t_step)))
