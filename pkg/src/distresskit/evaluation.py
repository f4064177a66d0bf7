"""Accuracy metrics, pseudo-R-squared, t-tests, and the resampling protocol.

A1 is accuracy on non-bankrupt observations (1 - Type I error rate), A2 is
accuracy on bankrupt observations (1 - Type II error rate).  The headline
pseudo-R2 is the likelihood-ratio form R2 = 1 - exp(-2 (llf - lln) / n);
the rescaled variant (dividing by its maximum attainable value) is emitted
alongside, labeled.

The repeated time-based split holds the latest bankrupt observations fixed
as one half of a balanced test set and redraws the non-bankrupt half each
repetition, with per-repetition RNG streams derived from (seed, repetition)
so results do not depend on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EmptyClass,
    InsufficientData,
    InvalidLikelihoodOrder,
    WindowTooSparse,
)
from .features import Observation

# Two-sided normal critical values at 10% / 5% / 1%.
_STAR_LEVELS = ((2.5758293035489004, "***"), (1.959963984540054, "**"), (1.6448536269514722, "*"))

KNN_K_GRID = (3, 5, 7, 9, 11)
# 10 log-spaced points inside (1e-6, 1]; includes the default C = 1e-5.
SVM_C_GRID = tuple(float(c) for c in np.logspace(-5.0, 0.0, 10))


@dataclass(frozen=True)
class ConfusionCounts:
    nb: int  # non-bankrupt observations
    b: int  # bankrupt observations
    cnb: int  # correctly classified non-bankrupt
    cb: int  # correctly classified bankrupt

    def __post_init__(self) -> None:
        if not (0 <= self.cnb <= self.nb and 0 <= self.cb <= self.b):
            raise ValueError(f"inconsistent confusion counts {self}")


def confusion_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionCounts:
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    if y_true.shape != y_pred.shape:
        raise ValueError("prediction/label shape mismatch")
    return ConfusionCounts(
        nb=int((y_true == 0).sum()),
        b=int((y_true == 1).sum()),
        cnb=int(((y_true == 0) & (y_pred == 0)).sum()),
        cb=int(((y_true == 1) & (y_pred == 1)).sum()),
    )


def accuracy(counts: ConfusionCounts) -> tuple[float, float]:
    """(A1, A2) = (CNB/NB, CB/B)."""
    if counts.nb == 0 or counts.b == 0:
        raise EmptyClass(f"accuracy undefined with NB={counts.nb}, B={counts.b}")
    return counts.cnb / counts.nb, counts.cb / counts.b


def pseudo_r2(log_lik_fit: float, log_lik_null: float, n: int) -> float:
    """Likelihood-ratio pseudo-R2: 1 - exp(-2 (llf - lln) / n)."""
    if n <= 0:
        raise ValueError("n must be positive")
    if log_lik_fit < log_lik_null - 1e-9:
        raise InvalidLikelihoodOrder(
            f"fitted log-likelihood {log_lik_fit} below null {log_lik_null}"
        )
    delta = max(log_lik_fit - log_lik_null, 0.0)
    return 1.0 - math.exp(-2.0 * delta / n)


def rescaled_pseudo_r2(log_lik_fit: float, log_lik_null: float, n: int) -> float:
    """Pseudo-R2 divided by its maximum 1 - exp(2 lln / n); reaches 1."""
    base = pseudo_r2(log_lik_fit, log_lik_null, n)
    ceiling = 1.0 - math.exp(2.0 * log_lik_null / n)
    if ceiling <= 0:
        return 0.0
    return base / ceiling


@dataclass(frozen=True)
class TTestResult:
    mean1: float
    mean0: float
    diff: float
    t_stat: float
    stars: str


def univariate_ttest(
    values_class1: Sequence[float], values_class0: Sequence[float]
) -> TTestResult:
    """Welch two-sample t statistic for the mean difference, normal stars."""
    a = np.asarray(values_class1, dtype=float)
    b = np.asarray(values_class0, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InsufficientData("each group needs at least 2 values")
    mean1, mean0 = float(a.mean()), float(b.mean())
    diff = mean1 - mean0
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    if se == 0.0:
        t = 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    else:
        t = diff / se
    stars = ""
    for crit, mark in _STAR_LEVELS:
        if abs(t) >= crit:
            stars = mark
            break
    return TTestResult(mean1=mean1, mean0=mean0, diff=diff, t_stat=t, stars=stars)


# -- repeated time-based splits ------------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    window_start: date
    window_end: date
    n_bankrupt_test: int = 104
    repetitions: int = 100
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    rng_seed: int = 0

    def __post_init__(self) -> None:
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {total}, not 1")
        if self.window_start > self.window_end:
            raise ValueError("window_start after window_end")
        if self.n_bankrupt_test < 1 or self.repetitions < 1:
            raise ValueError("n_bankrupt_test and repetitions must be positive")


@dataclass(frozen=True)
class ResampleSplit:
    train: tuple[Observation, ...]
    val: tuple[Observation, ...]
    test: tuple[Observation, ...]


def _canonical_order(observations: Sequence[Observation]) -> list[Observation]:
    return sorted(observations, key=lambda o: (o.filing_date, o.firm_id, o.fiscal_year))


def time_based_resample(
    observations: Sequence[Observation], plan: SplitPlan
) -> list[ResampleSplit]:
    """Balanced latest-period test sets, redrawn non-bankrupt half per repetition.

    The bankrupt half is the plan's n_bankrupt_test latest bankrupt
    observations inside the window and is identical across repetitions.
    Remaining observations are shuffled into train/validation by the plan's
    fractions (renormalized, since the test portion is already taken).
    """
    in_window = [
        o for o in observations if plan.window_start <= o.filing_date <= plan.window_end
    ]
    bankrupt = _canonical_order([o for o in in_window if o.brupt == 1])
    healthy = _canonical_order([o for o in in_window if o.brupt == 0])
    if len(bankrupt) < plan.n_bankrupt_test:
        raise WindowTooSparse(
            f"window has {len(bankrupt)} bankrupt observations, plan needs {plan.n_bankrupt_test}"
        )
    if len(healthy) < plan.n_bankrupt_test:
        raise WindowTooSparse(
            f"window has {len(healthy)} non-bankrupt observations, plan needs {plan.n_bankrupt_test}"
        )
    test_bankrupt = tuple(bankrupt[-plan.n_bankrupt_test :])
    test_bankrupt_ids = {id(o) for o in test_bankrupt}

    val_share = plan.val_fraction / (plan.train_fraction + plan.val_fraction)

    splits = []
    for rep in range(plan.repetitions):
        rng = np.random.default_rng([plan.rng_seed, rep])
        drawn = rng.choice(len(healthy), size=plan.n_bankrupt_test, replace=False)
        test_healthy = tuple(healthy[int(i)] for i in sorted(drawn))
        test_ids = test_bankrupt_ids | {id(o) for o in test_healthy}

        remainder = [o for o in observations if id(o) not in test_ids]
        order = rng.permutation(len(remainder))
        n_val = int(round(val_share * len(remainder)))
        val = tuple(remainder[int(i)] for i in order[:n_val])
        train = tuple(remainder[int(i)] for i in order[n_val:])
        splits.append(
            ResampleSplit(train=train, val=val, test=test_bankrupt + test_healthy)
        )
    return splits


# -- hyperparameter sweep --------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    param: float
    a1: float | None
    a2: float | None
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    kind: str
    rows: tuple[SweepRow, ...]
    best_param: float | None


def hyperparameter_sweep(
    kind: str,
    grid: Sequence[float],
    train_xy: tuple[np.ndarray, np.ndarray],
    val_xy: tuple[np.ndarray, np.ndarray],
) -> SweepResult:
    """Fit per grid point on train, report A1/A2 on validation.

    The selected point maximizes A2, ties broken toward the smaller
    hyperparameter.  A failing fit marks its row and the sweep continues.
    """
    from . import classifiers

    if not grid:
        raise ValueError("empty hyperparameter grid")
    x_val, y_val = val_xy
    if len(y_val) == 0:
        raise InsufficientData("empty validation set")
    x_tr, y_tr = train_xy

    fitters: dict[str, Callable] = {
        "knn": lambda p: classifiers.knn_fit(x_tr, y_tr, k=int(p)),
        "svm": lambda p: classifiers.svm_fit(x_tr, y_tr, c=float(p)),
    }
    predictors: dict[str, Callable] = {
        "knn": classifiers.knn_predict_batch,
        "svm": classifiers.svm_predict_batch,
    }
    if kind not in fitters:
        raise ValueError(f"unknown sweep kind {kind!r}")

    rows = []
    for param in grid:
        try:
            model = fitters[kind](param)
            preds = predictors[kind](model, x_val)
            a1, a2 = accuracy(confusion_from_predictions(y_val, preds))
            rows.append(SweepRow(param=float(param), a1=a1, a2=a2))
        except Exception as exc:  # recorded, not fatal
            rows.append(SweepRow(param=float(param), a1=None, a2=None, error=f"{type(exc).__name__}: {exc}"))
    candidates = [r for r in rows if r.error is None]
    best = None
    if candidates:
        top = max(c.a2 for c in candidates)
        best = min(c.param for c in candidates if c.a2 == top)
    return SweepResult(kind=kind, rows=tuple(rows), best_param=best)


# -- per-cell metric report -------------------------------------------------------------


def population_sd(values: Sequence[float]) -> float:
    return float(np.asarray(values, dtype=float).std(ddof=0))


@dataclass(frozen=True)
class MetricReport:
    variable_set: str
    classifier: str
    a1: tuple[float, ...]
    a2: tuple[float, ...]
    r2: tuple[float, ...] = ()
    r2_rescaled: tuple[float, ...] = ()
    sweep: SweepResult | None = None

    @property
    def a1_mean(self) -> float:
        return float(np.mean(self.a1))

    @property
    def a1_sd(self) -> float:
        return population_sd(self.a1)

    @property
    def a2_mean(self) -> float:
        return float(np.mean(self.a2))

    @property
    def a2_sd(self) -> float:
        return population_sd(self.a2)

    @property
    def r2_mean(self) -> float | None:
        return float(np.mean(self.r2)) if self.r2 else None

    def to_dict(self) -> dict:
        data = {
            "variable_set": self.variable_set,
            "classifier": self.classifier,
            "a1_mean": self.a1_mean,
            "a1_sd": self.a1_sd,
            "a2_mean": self.a2_mean,
            "a2_sd": self.a2_sd,
            "r2_mean": self.r2_mean,
            "a1": list(self.a1),
            "a2": list(self.a2),
            "r2": list(self.r2),
            "r2_rescaled": list(self.r2_rescaled),
        }
        if self.sweep is not None:
            data["sweep"] = {
                "kind": self.sweep.kind,
                "best_param": self.sweep.best_param,
                "rows": [
                    {"param": r.param, "a1": r.a1, "a2": r.a2, "error": r.error}
                    for r in self.sweep.rows
                ],
            }
        return data
