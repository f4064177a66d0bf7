"""Three from-scratch classifiers: hazard logistic MLE, kNN, linear SVM.

* Hazard: discrete-time logistic regression fitted by Newton's method on the
  Bernoulli log-likelihood.  The fitted value is read as the event
  probability and thresholded at 0.5 (the literal log-hazard > 0.5 rule is
  not a probability statement; this is the standard reading).
* kNN: Euclidean distance, majority vote over the k nearest, distance ties
  broken by training-set index order.
* SVM: soft-margin primal 0.5 ||w||^2 + C sum(xi) with an explicit
  unregularized bias, solved in the dual by maximal-violating-pair updates.
  The solver contract is the duality gap, not the algorithm: fitting stops
  once gap <= 1e-6 * (1 + |primal|).

Expected inputs are standardized design matrices; labels are {0, 1}
(SVM maps them to -1/+1 internally).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientData,
    NoConvergence,
    Separation,
)

# -- hazard model ----------------------------------------------------------------

_NEWTON_MAX_ITER = 100
_NEWTON_GRAD_TOL = 1e-8
# The gradient is a sum of O(n) unit-scale terms, so its float64 floor can
# sit above 1e-8; a stalled fit below this looser bound is converged to
# machine precision, not a failure.
_NEWTON_GRAD_FLOOR = 1e-6
_SEPARATION_NORM = 1e6


@dataclass(frozen=True)
class HazardModel:
    feature_names: tuple[str, ...]
    beta: np.ndarray  # intercept first, then one coefficient per feature
    log_lik_fit: float
    log_lik_null: float
    n: int
    n_iter: int

    def to_dict(self) -> dict:
        coef = {"intercept": float(self.beta[0])}
        coef.update({name: float(b) for name, b in zip(self.feature_names, self.beta[1:])})
        return {
            "model": "hazard_logistic",
            "coefficients": coef,
            "log_lik_fit": self.log_lik_fit,
            "log_lik_null": self.log_lik_null,
            "n": self.n,
            "solver": {"method": "newton", "iterations": self.n_iter, "grad_tol": _NEWTON_GRAD_TOL},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HazardModel":
        coef = data["coefficients"]
        names = tuple(k for k in coef if k != "intercept")
        beta = np.array([coef["intercept"]] + [coef[k] for k in names])
        return cls(
            feature_names=names,
            beta=beta,
            log_lik_fit=data["log_lik_fit"],
            log_lik_null=data["log_lik_null"],
            n=data["n"],
            n_iter=data["solver"]["iterations"],
        )


def _augment(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.hstack([np.ones((x.shape[0], 1)), x])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_likelihood(beta: np.ndarray, x_aug: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood with logistic link, numerically stable."""
    z = x_aug @ beta
    # y*log(pi) + (1-y)*log(1-pi) = -[y*log1pexp(-z) + (1-y)*log1pexp(z)]
    return float(-(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)).sum())


def log_likelihood_gradient(beta: np.ndarray, x_aug: np.ndarray, y: np.ndarray) -> np.ndarray:
    pi = _sigmoid(x_aug @ beta)
    return x_aug.T @ (y - pi)


def log_likelihood_hessian(beta: np.ndarray, x_aug: np.ndarray, y: np.ndarray) -> np.ndarray:
    pi = _sigmoid(x_aug @ beta)
    w = pi * (1.0 - pi)
    return -(x_aug * w[:, None]).T @ x_aug


def _check_separation(beta: np.ndarray, x_aug: np.ndarray, y: np.ndarray) -> None:
    # When every fitted probability has saturated onto its label the MLE
    # does not exist: the likelihood supremum is 1 and beta is off to
    # infinity (Newton merely stopped where the sigmoid rounds to 0/1).
    pi = _sigmoid(x_aug @ beta)
    if np.max(np.abs(pi - y)) < 1e-6:
        raise Separation("classes are perfectly separated; coefficients diverge")


def _fit_newton(x_aug: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, int]:
    beta = np.zeros(x_aug.shape[1])
    ll = log_likelihood(beta, x_aug, y)
    for iteration in range(1, _NEWTON_MAX_ITER + 1):
        grad = log_likelihood_gradient(beta, x_aug, y)
        if np.max(np.abs(grad)) < _NEWTON_GRAD_TOL:
            _check_separation(beta, x_aug, y)
            return beta, ll, iteration - 1
        hess = log_likelihood_hessian(beta, x_aug, y)
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            if np.linalg.norm(beta) > 50.0:
                raise Separation(f"betas diverging (|beta| = {np.linalg.norm(beta):.3g})")
            raise NoConvergence("singular Hessian; features may be collinear")
        # Backtrack if the full Newton step overshoots.
        scale = 1.0
        for _ in range(30):
            candidate = beta + scale * step
            ll_new = log_likelihood(candidate, x_aug, y)
            if ll_new >= ll:
                moved = not np.array_equal(candidate, beta)
                beta, ll = candidate, ll_new
                break
            scale *= 0.5
        else:
            moved = False
        if not moved:
            # A stalled line search with a predicted gain below the float64
            # resolution of the log-likelihood is the machine-precision
            # optimum, not a failure.
            predicted_gain = 0.5 * float(grad @ step)
            if (
                np.max(np.abs(grad)) < _NEWTON_GRAD_FLOOR
                or predicted_gain <= 64.0 * np.finfo(float).eps * (1.0 + abs(ll))
            ):
                _check_separation(beta, x_aug, y)
                return beta, ll, iteration
            raise NoConvergence("line search stalled before gradient tolerance")
        if np.linalg.norm(beta) > _SEPARATION_NORM:
            raise Separation(f"betas diverged past {_SEPARATION_NORM:g}")
    grad = log_likelihood_gradient(beta, x_aug, y)
    if np.max(np.abs(grad)) < _NEWTON_GRAD_FLOOR:
        _check_separation(beta, x_aug, y)
        return beta, ll, _NEWTON_MAX_ITER
    if np.linalg.norm(beta) > 100.0:
        raise Separation("no stationary point; classes appear separable")
    raise NoConvergence(f"gradient norm {np.max(np.abs(grad)):.3g} after {_NEWTON_MAX_ITER} iterations")


def hazard_fit(
    x: np.ndarray, y: np.ndarray, feature_names: tuple[str, ...] | None = None
) -> HazardModel:
    """Maximum-likelihood discrete-time logistic regression."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"x {x.shape} does not match y {y.shape}")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise InsufficientData("need at least one observation of each class")
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(x.shape[1]))

    x_aug = _augment(x)
    beta, ll_fit, n_iter = _fit_newton(x_aug, y)
    # Intercept-only MLE in closed form: the fitted rate is the sample mean.
    p = y.mean()
    ll_null = float(len(y) * (p * np.log(p) + (1.0 - p) * np.log(1.0 - p)))
    return HazardModel(
        feature_names=tuple(feature_names),
        beta=beta,
        log_lik_fit=ll_fit,
        log_lik_null=ll_null,
        n=int(x.shape[0]),
        n_iter=n_iter,
    )


def hazard_event_probability(model: HazardModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.beta.shape[0] - 1:
        raise DimensionMismatch(
            f"model has {model.beta.shape[0] - 1} features, input has {x.shape[1]}"
        )
    return _sigmoid(_augment(x) @ model.beta)


def hazard_predict(model: HazardModel, x: np.ndarray, threshold: float = 0.5) -> int:
    """1 iff the predicted event probability strictly exceeds the threshold."""
    return int(hazard_event_probability(model, x)[0] > threshold)


def hazard_predict_batch(
    model: HazardModel, x: np.ndarray, threshold: float = 0.5
) -> np.ndarray:
    return (hazard_event_probability(model, x) > threshold).astype(int)


# -- k-nearest neighbors -----------------------------------------------------------


@dataclass(frozen=True)
class KnnModel:
    x: np.ndarray
    y: np.ndarray
    k: int = 5

    def __post_init__(self) -> None:
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError("k must be an odd positive integer")
        if self.k > self.x.shape[0]:
            raise InsufficientData(f"k={self.k} exceeds training size {self.x.shape[0]}")

    def to_dict(self) -> dict:
        return {
            "model": "knn",
            "k": self.k,
            "train_x": self.x.tolist(),
            "train_y": self.y.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KnnModel":
        return cls(np.array(data["train_x"], dtype=float), np.array(data["train_y"], dtype=float), data["k"])


def knn_fit(x: np.ndarray, y: np.ndarray, k: int = 5) -> KnnModel:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"x {x.shape} does not match y {y.shape}")
    return KnnModel(x=x, y=y, k=k)


def knn_predict(model: KnnModel, query: np.ndarray) -> int:
    """Majority vote over the k nearest training points.

    Comparison is on squared Euclidean distance (order-equivalent); exact
    ties fall back to training-set index order via the stable sort.
    """
    query = np.asarray(query, dtype=float)
    if query.shape != (model.x.shape[1],):
        raise DimensionMismatch(
            f"query has shape {query.shape}, model features {model.x.shape[1]}"
        )
    d2 = ((model.x - query) ** 2).sum(axis=1)
    nearest = np.argsort(d2, kind="stable")[: model.k]
    votes = model.y[nearest]
    return int((votes == 1).sum() > (votes != 1).sum())


def knn_predict_batch(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != model.x.shape[1]:
        raise DimensionMismatch(
            f"queries have {queries.shape[1]} features, model {model.x.shape[1]}"
        )
    # (n_q, n_train) squared distances without materializing differences per pair.
    d2 = (
        (queries**2).sum(axis=1)[:, None]
        - 2.0 * queries @ model.x.T
        + (model.x**2).sum(axis=1)[None, :]
    )
    nearest = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
    votes = model.y[nearest]
    return ((votes == 1).sum(axis=1) > (votes != 1).sum(axis=1)).astype(int)


# -- linear soft-margin SVM ----------------------------------------------------------


@dataclass(frozen=True)
class SvmModel:
    w: np.ndarray
    b: float
    c: float
    alpha: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    objective: float = 0.0
    duality_gap: float = 0.0
    n_updates: int = 0

    def to_dict(self) -> dict:
        return {
            "model": "linear_svm",
            "w": self.w.tolist(),
            "b": self.b,
            "C": self.c,
            "solver": {
                "method": "maximal_violating_pair",
                "updates": self.n_updates,
                "objective": self.objective,
                "duality_gap": self.duality_gap,
            },
        }


def _optimal_bias(scores: np.ndarray, y: np.ndarray, c: float, w_norm2: float) -> tuple[float, float]:
    """Exact minimizer of the primal in b given w, plus the primal value.

    P(b) = 0.5 ||w||^2 + C sum_i max(0, 1 - y_i (w.x_i + b)) is convex
    piecewise-linear in b with breakpoints y_i - w.x_i; +1 points are on the
    hinge below their breakpoint, -1 points above it, so the subgradient is
    nondecreasing.  When the minimum is a flat interval the midpoint is
    returned (the maximum-margin bias).
    """
    breaks = y - scores
    order = np.argsort(breaks, kind="stable")
    pos_active = int((y == 1).sum())  # at b -> -inf every +1 point is active
    neg_active = 0
    # Derivative of P on the interval left of breaks[order[i]].
    best_b = None
    prev_break = -np.inf
    for idx in np.concatenate([order, [-1]]):
        derivative = -c * (pos_active - neg_active)
        this_break = breaks[idx] if idx >= 0 else np.inf
        if derivative > 0:
            # Minimum was at the previous breakpoint.
            best_b = prev_break
            break
        if derivative == 0:
            lo = prev_break if np.isfinite(prev_break) else this_break
            hi = this_break if np.isfinite(this_break) else prev_break
            best_b = (lo + hi) / 2.0
            break
        if idx >= 0:
            if y[idx] == 1:
                pos_active -= 1
            else:
                neg_active += 1
            prev_break = this_break
    if best_b is None or not np.isfinite(best_b):
        best_b = prev_break if np.isfinite(prev_break) else 0.0
    hinge = np.maximum(0.0, 1.0 - y * (scores + best_b))
    return float(best_b), float(0.5 * w_norm2 + c * hinge.sum())


def svm_fit(
    x: np.ndarray,
    y: np.ndarray,
    c: float = 1e-5,
    gap_tol_factor: float = 1e-6,
    max_epochs: int = 10000,
) -> SvmModel:
    """Fit the soft-margin linear SVM to duality-gap tolerance.

    Labels may be {0, 1} or {-1, +1}.  One epoch is n working-pair updates;
    NoConvergence is raised when the gap is still above
    gap_tol_factor * (1 + |primal|) after max_epochs of them.
    """
    x = np.asarray(x, dtype=float)
    y_in = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] != y_in.shape[0]:
        raise DimensionMismatch(f"x {x.shape} does not match y {y_in.shape}")
    y = np.where(y_in > 0, 1.0, -1.0)
    if not (np.any(y == 1) and np.any(y == -1)):
        raise InsufficientData("need both classes to fit an SVM")
    if c <= 0:
        raise ValueError("C must be positive")

    n = x.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(x.shape[1])
    sq_norms = (x**2).sum(axis=1)

    max_updates = max_epochs * n
    check_every = max(1, min(n, 256))
    updates = 0
    best: tuple[float, float, float] | None = None  # (gap, b, primal)

    while True:
        scores = x @ w
        grad_signed = -y * (y * scores - 1.0)  # -y_t * grad_t
        up = ((y == 1) & (alpha < c)) | ((y == -1) & (alpha > 0))
        low = ((y == -1) & (alpha < c)) | ((y == 1) & (alpha > 0))
        if not up.any() or not low.any():
            kkt_violation = 0.0
        else:
            i = int(np.flatnonzero(up)[np.argmax(grad_signed[up])])
            j = int(np.flatnonzero(low)[np.argmin(grad_signed[low])])
            kkt_violation = grad_signed[i] - grad_signed[j]

        if kkt_violation <= 1e-12 or updates % check_every == 0:
            w_norm2 = float(w @ w)
            dual = float(alpha.sum()) - 0.5 * w_norm2
            b, primal = _optimal_bias(scores, y, c, w_norm2)
            gap = primal - dual
            if best is None or gap < best[0]:
                best = (gap, b, primal)
            if gap <= gap_tol_factor * (1.0 + abs(primal)) or kkt_violation <= 1e-12:
                xi = np.maximum(0.0, 1.0 - y * (scores + b))
                return SvmModel(
                    w=w, b=b, c=c, alpha=alpha.copy(), xi=xi,
                    objective=primal, duality_gap=max(gap, 0.0), n_updates=updates,
                )

        if updates >= max_updates:
            raise NoConvergence(
                f"duality gap {best[0] if best else float('inf'):.3g} after {max_epochs} epochs"
            )

        # Two-variable update along the equality constraint.
        eta = sq_norms[i] + sq_norms[j] - 2.0 * float(x[i] @ x[j])
        if eta <= 1e-12:
            eta = 1e-12
        delta = kkt_violation / eta
        # Box constraints: alpha_i + y_i*delta and alpha_j - y_j*delta in [0, C].
        if y[i] == 1:
            delta = min(delta, c - alpha[i])
        else:
            delta = min(delta, alpha[i])
        if y[j] == 1:
            delta = min(delta, alpha[j])
        else:
            delta = min(delta, c - alpha[j])
        alpha[i] += y[i] * delta
        alpha[j] -= y[j] * delta
        w += delta * (x[i] - x[j])
        updates += 1


def svm_decision(model: SvmModel, query: np.ndarray) -> float:
    query = np.asarray(query, dtype=float)
    if query.shape != (model.w.shape[0],):
        raise DimensionMismatch(
            f"query has shape {query.shape}, model features {model.w.shape[0]}"
        )
    return float(model.w @ query + model.b)


def svm_predict(model: SvmModel, query: np.ndarray) -> int:
    """sign(w.x + b) mapped to {0, 1}; points on the hyperplane go to class 0."""
    return int(svm_decision(model, query) > 0)


def svm_predict_batch(model: SvmModel, queries: np.ndarray) -> np.ndarray:
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != model.w.shape[0]:
        raise DimensionMismatch(
            f"queries have {queries.shape[1]} features, model {model.w.shape[0]}"
        )
    return (queries @ model.w + model.b > 0).astype(int)


# -- serialization ---------------------------------------------------------------


def save_model(model: HazardModel | KnnModel | SvmModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> HazardModel | KnnModel | SvmModel:
    data = json.loads(Path(path).read_text("utf-8"))
    kind = data.get("model")
    if kind == "hazard_logistic":
        return HazardModel.from_dict(data)
    if kind == "knn":
        return KnnModel.from_dict(data)
    if kind == "linear_svm":
        return SvmModel(
            w=np.array(data["w"], dtype=float),
            b=float(data["b"]),
            c=float(data["C"]),
            alpha=np.array([]),
            xi=np.array([]),
            objective=data["solver"]["objective"],
            duality_gap=data["solver"]["duality_gap"],
            n_updates=data["solver"]["updates"],
        )
    raise ValueError(f"unknown model kind {kind!r}")
