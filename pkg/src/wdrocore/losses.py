"""Loss models and their dual oracles for ``p = 1``.

For a sample ``xi = (x, y)`` the per-sample dual term is

    h(theta, lam, xi) = sup_zeta  loss(theta, zeta) - lam * d(zeta, xi)

For the hinge and log losses on ``X = R^m`` this is
``max(L(y theta.x), L(-y theta.x) - lam * gamma)`` once ``lam >= kappa(theta)``;
for the Huber loss it collapses to the loss itself. On the hypercube
``[0, l]^m`` the hinge case has no closed form and only the bracket
``a_i <= h_i <= b_i`` is available.

Vectorised helpers take ``X`` of shape ``(n, m)`` and ``y`` of shape ``(n,)``;
the per-sample functions named after the oracles wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import CLASSIFICATION, REGRESSION, Dataset, MetricSpec, dual_norm_subgradient, vector_norm
from .errors import DomainError, UnsupportedError

SVM = "svm"
LOGISTIC = "logistic"
HUBER = "huber"
HYPERCUBE_SVM = "hypercube-svm"
KINDS = (SVM, LOGISTIC, HUBER, HYPERCUBE_SVM)

BASE = "base"
FLIP = "flip"

KAPPA_RTOL = 1e-9


@dataclass(frozen=True)
class LossModel:
    """A loss together with the metric its dual oracles are taken under.

    ``delta`` is the Huber threshold, ``side`` the hypercube side length ``l``.
    """

    kind: str
    metric: MetricSpec = MetricSpec()
    delta: float = 1.0
    side: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {KINDS}")
        if self.kind == HUBER and not self.delta > 0:
            raise ValueError("Huber delta must be positive")
        if self.kind == HYPERCUBE_SVM and not self.side > 0:
            raise ValueError("hypercube side length must be positive")

    @classmethod
    def from_string(cls, spec: str, metric: MetricSpec | None = None) -> "LossModel":
        """Parse ``svm | logistic | huber:<delta> | hypercube-svm:<l>``."""
        metric = metric or MetricSpec()
        name, _, arg = spec.strip().partition(":")
        name = name.lower()
        if name == HUBER:
            return cls(HUBER, metric, delta=float(arg) if arg else 1.0)
        if name == HYPERCUBE_SVM:
            return cls(HYPERCUBE_SVM, metric, side=float(arg) if arg else 1.0)
        if name in (SVM, LOGISTIC) and not arg:
            return cls(name, metric)
        raise ValueError(f"cannot parse loss {spec!r}")

    def __str__(self):
        if self.kind == HUBER:
            return f"huber:{self.delta!r}"
        if self.kind == HYPERCUBE_SVM:
            return f"hypercube-svm:{self.side!r}"
        return self.kind

    @property
    def task(self) -> str:
        return REGRESSION if self.kind == HUBER else CLASSIFICATION

    @property
    def has_exact_oracle(self) -> bool:
        return self.kind != HYPERCUBE_SVM


@dataclass(frozen=True, eq=False)
class DualOracleOutput:
    value: float
    subgrad_theta: np.ndarray
    active_branch: str


# --------------------------------------------------------------------------
# scalar loss profiles L(z) and a subgradient L'(z)

def _profile(model: LossModel, z):
    if model.kind in (SVM, HYPERCUBE_SVM):
        return np.maximum(0.0, 1.0 - z)
    if model.kind == LOGISTIC:
        return np.log1p(np.exp(-np.abs(z))) + np.maximum(0.0, -z)
    d = model.delta
    az = np.abs(z)
    return np.where(az <= d, 0.5 * z * z, d * (az - 0.5 * d))


def _profile_slope(model: LossModel, z):
    if model.kind in (SVM, HYPERCUBE_SVM):
        return np.where(z < 1.0, -1.0, 0.0)
    if model.kind == LOGISTIC:
        # -1 / (1 + e^z) without overflow
        return -0.5 * (1.0 - np.tanh(0.5 * z))
    return np.clip(z, -model.delta, model.delta)


def _check_dims(theta, X):
    theta = np.asarray(theta, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if theta.ndim != 1 or X.shape[-1] != theta.shape[0]:
        raise ValueError(f"dimension mismatch: theta has shape {theta.shape}, x has {X.shape}")
    return theta, X


def _margins(model, theta, X, y):
    """``z_i``: ``y_i theta.x_i`` for classification, ``theta.x_i - y_i`` for regression."""
    theta, X = _check_dims(theta, X)
    s = X @ theta
    if model.kind == HUBER:
        return s - y
    return y * s


def losses(model: LossModel, theta, X, y):
    """Vector of ``loss(theta, xi_i)``."""
    return _profile(model, _margins(model, theta, X, y))


def loss_value(model: LossModel, theta, xi) -> float:
    x, y = xi
    return float(losses(model, theta, np.atleast_2d(x), np.atleast_1d(float(y)))[0])


# --------------------------------------------------------------------------
# growth constants

def _require_p1(model):
    if model.metric.p != 1:
        raise UnsupportedError(f"loss oracles need Wasserstein order p = 1, got p = {model.metric.p}")


def _augmented_dual(model, theta):
    theta = np.asarray(theta, dtype=np.float64)
    return vector_norm(np.append(theta, -1.0), model.metric.dual_norm)


def kappa(model: LossModel, theta) -> float:
    """Asymptotic growth rate; ``h`` is infinite for ``lam < kappa(theta)``."""
    _require_p1(model)
    if model.kind == HYPERCUBE_SVM:
        return 0.0
    if model.kind == HUBER:
        return float(model.delta * _augmented_dual(model, theta))
    return float(model.metric.dual(np.asarray(theta, dtype=np.float64)))


def kappa_subgradient(model: LossModel, theta):
    theta = np.asarray(theta, dtype=np.float64)
    if model.kind == HYPERCUBE_SVM:
        return np.zeros_like(theta)
    if model.kind == HUBER:
        g = dual_norm_subgradient(np.append(theta, -1.0), model.metric.norm)
        return model.delta * g[:-1]
    return dual_norm_subgradient(theta, model.metric.norm)


def growth_C(model: LossModel, theta) -> float:
    """Growth-rate function ``C(theta)`` bounding ``loss <= C (1 + d(xi, xi0))``.

    Equal to :func:`kappa` except on the hypercube, where it is ``||theta||_*``.
    The formula does not depend on the Wasserstein order.
    """
    if model.kind == HUBER:
        return float(model.delta * _augmented_dual(model, theta))
    return float(model.metric.dual(np.asarray(theta, dtype=np.float64)))


def r_bound(model: LossModel, dim: int) -> float:
    """Bound on the transport distance of the maximiser in ``h`` (the constant ``R``)."""
    if model.kind == HUBER:
        return 0.0
    if model.kind == HYPERCUBE_SVM:
        return model.metric.gamma + model.side * dim ** (1.0 / model.metric.p)
    return float(model.metric.gamma)


def lipschitz_estimate(model: LossModel, ds: Dataset) -> float:
    """Data-empirical Lipschitz constant of ``theta -> loss(theta, xi_i)``."""
    if model.kind == HUBER:
        aug = np.hstack([ds.X, -np.ones((ds.n, 1))])
        return float(model.delta * np.max(vector_norm(aug, "l2")))
    return float(np.max(vector_norm(ds.X, "l2")))


def sample_lipschitz(model: LossModel, x) -> float:
    """Per-sample version of :func:`lipschitz_estimate`."""
    x = np.asarray(x, dtype=np.float64)
    if model.kind == HUBER:
        return float(model.delta * np.sqrt(x @ x + 1.0))
    return float(np.sqrt(x @ x))


# --------------------------------------------------------------------------
# exact dual oracle

def dual_terms(model: LossModel, theta, X, y):
    """Return ``(base, flip)`` with ``h_i(lam) = max(base_i, flip_i - lam * gamma)``.

    ``flip`` is ``None`` for Huber, where ``h_i = base_i`` for every admissible ``lam``.
    """
    if not model.has_exact_oracle:
        raise UnsupportedError("no closed-form dual oracle on the hypercube; use h_lower/h_upper")
    _require_p1(model)
    z = _margins(model, theta, X, y)
    base = _profile(model, z)
    if model.kind == HUBER:
        return base, None
    return base, _profile(model, -z)


def _check_lambda(model, theta, lam):
    k = kappa(model, theta)
    if lam < k - KAPPA_RTOL * max(1.0, k):
        raise DomainError(f"lambda = {lam!r} is below kappa(theta) = {k!r}; the dual term is infinite")
    return k


def h_values(model: LossModel, theta, lam: float, X, y, check: bool = True):
    """Vector of ``h(theta, lam, xi_i)``."""
    if check:
        _check_lambda(model, theta, lam)
    base, flip = dual_terms(model, theta, X, y)
    if flip is None:
        return base
    return np.maximum(base, flip - lam * model.metric.gamma)


def h_subgradients(model: LossModel, theta, lam: float, X, y, check: bool = True):
    """Values, per-sample theta-subgradient coefficients and flip-branch mask.

    The theta-subgradient of ``h_i`` is ``coef[i] * X[i]``. Ties go to the
    base branch.
    """
    if check:
        _check_lambda(model, theta, lam)
    theta, X = _check_dims(theta, X)
    y = np.asarray(y, dtype=np.float64)
    z = _margins(model, theta, X, y)
    base = _profile(model, z)
    if model.kind == HUBER:
        return base, _profile_slope(model, z), np.zeros(z.shape, dtype=bool)
    flip = _profile(model, -z) - lam * model.metric.gamma
    use_flip = flip > base
    coef = np.where(use_flip, -_profile_slope(model, -z) * y, _profile_slope(model, z) * y)
    return np.where(use_flip, flip, base), coef, use_flip


def h_exact(model: LossModel, theta, lam: float, xi) -> DualOracleOutput:
    """Closed-form ``h(theta, lam, xi)`` with a theta-subgradient."""
    if not model.has_exact_oracle:
        raise UnsupportedError("no closed-form dual oracle on the hypercube; use h_lower/h_upper")
    x, y = xi
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    vals, coef, flip = h_subgradients(model, theta, lam, X, np.atleast_1d(float(y)))
    return DualOracleOutput(float(vals[0]), coef[0] * X[0], FLIP if flip[0] else BASE)


# --------------------------------------------------------------------------
# bracketing oracles a_i <= h_i <= b_i

def lower_bounds(model: LossModel, theta, lam: float, X, y):
    """Vector of ``a_i(theta, lam)``."""
    if model.kind == HYPERCUBE_SVM:
        return losses(model, theta, X, y)
    return h_values(model, theta, lam, X, y)


def upper_bounds(model: LossModel, theta, lam: float, X, y):
    """Vector of ``b_i(theta, lam)``.

    On the hypercube this evaluates the dual objective at a fixed feasible
    point, which upper-bounds ``h_i`` for features inside ``[0, l]^m``.
    """
    if model.kind != HYPERCUBE_SVM:
        return h_values(model, theta, lam, X, y)
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    theta, X = _check_dims(theta, X)
    y = np.asarray(y, dtype=np.float64)
    gamma, side = model.metric.gamma, model.side
    s = float(model.metric.dual(theta))
    score = y * (X @ theta)
    if s > lam:
        c = 1.0 - lam / s
        pos = np.sum(np.maximum(theta, 0.0))
        neg = np.sum(np.maximum(-theta, 0.0))
        # e.z+ = c * sum(max(-y theta, 0)), e.z- = c * sum(max(y theta, 0))
        ez_plus = c * np.where(y > 0, neg, pos)
        ez_minus = c * np.where(y > 0, pos, neg)
        t_plus = 1.0 + side * ez_plus - (lam / s) * score
        t_minus = 1.0 + side * ez_minus + (lam / s) * score - gamma * lam
    else:
        t_plus = 1.0 - score
        t_minus = 1.0 + score - gamma * lam
    return np.maximum(0.0, np.maximum(t_plus, t_minus))


def h_lower(model: LossModel, theta, lam: float, xi) -> float:
    x, y = xi
    return float(lower_bounds(model, theta, lam, np.atleast_2d(x), np.atleast_1d(float(y)))[0])


def h_upper(model: LossModel, theta, lam: float, xi) -> float:
    x, y = xi
    return float(upper_bounds(model, theta, lam, np.atleast_2d(x), np.atleast_1d(float(y)))[0])
