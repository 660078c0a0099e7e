"""Accuracy metrics, paired bias test, train/test split and k-fold cross-validation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import betainc

from .errors import BadFraction, LengthMismatch, NonPositiveActual, TooFewSamples
from .forest import ForestParams, fit_forest
from .seeding import derive_seed


@dataclass(frozen=True)
class EvalReport:
    n: int
    mape_pct: float
    mae_s: float
    mse_s2: float
    delta_s: float
    p_value: float | None  # None when n == 1
    apr: float
    r2: float | None  # None when the actual times have zero variance

    def to_dict(self) -> dict:
        return asdict(self)


def t_test_p_value(diffs: np.ndarray) -> float | None:
    """Two-sided one-sample Student t-test of mean(diffs) == 0.

    Uses the exact Student CDF through the regularised incomplete beta
    function, P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2).
    """
    d = np.asarray(diffs, dtype=np.float64)
    n = len(d)
    if n < 2:
        return None
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0 or not np.isfinite(sd):
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t * t)))))


def evaluate(pred: Sequence[float], actual: Sequence[float]) -> EvalReport:
    p = np.asarray(pred, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1:
        raise LengthMismatch(f"{p.size} predictions vs {a.size} reference times")
    if len(a) == 0:
        raise LengthMismatch("need at least one prediction")
    if not (a > 0).all():
        bad = int(np.flatnonzero(~(a > 0))[0])
        raise NonPositiveActual(f"reference time at position {bad} is {a[bad]!r}; must be > 0")
    d = p - a
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    ss_res = float(np.sum(d**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else None
    return EvalReport(
        n=len(a),
        mape_pct=float(100.0 * np.mean(np.abs(d) / a)),
        mae_s=float(np.mean(np.abs(d))),
        mse_s2=float(np.mean(d**2)),
        delta_s=float(np.mean(d)),
        p_value=t_test_p_value(d),
        apr=float(np.mean(p / a)),
        r2=r2,
    )


def train_test_split(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle of ``range(n)``; the last round(n * test_fraction) indices form the test set.

    The test set is clamped to hold at least one and at most n - 1 indices.
    """
    if not 0.0 < test_fraction < 1.0:
        raise BadFraction(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = min(n - 1, max(1, math.floor(n * test_fraction + 0.5)))
    return perm[: n - n_test], perm[n - n_test :]


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise TooFewSamples(f"{n} samples cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def kfold_cv(X, y, params: ForestParams, k: int = 5, seed: int = 0, threads: int = 1) -> list[float]:
    """Per-fold validation MAE; fold ``i`` trains with forest seed ``derive_seed(seed, i)``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    folds = kfold_indices(len(y), k, seed)
    maes = []
    for i, val in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        model = fit_forest(X[train], y[train], replace(params, seed=derive_seed(seed, i)), threads=threads)
        maes.append(float(np.mean(np.abs(model.predict(X[val]) - y[val]))))
    return maes
