"""Figures written next to CLI reports. Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import EvalReport  # noqa: E402

# PNG metadata carries no timestamp with this set, so reruns are byte-identical.
_SAVE_KW = dict(dpi=120, metadata={"Software": None})

MODEL_COLOR = "#2b6a99"
BASELINE_COLOR = "#c0504d"


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def prediction_scatter(
    actual: np.ndarray,
    predicted: np.ndarray,
    path: str | Path,
    baseline: np.ndarray | None = None,
) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    if baseline is not None:
        ax.scatter(actual, baseline, s=6, alpha=0.4, color=BASELINE_COLOR, label="naive")
    ax.scatter(actual, predicted, s=6, alpha=0.5, color=MODEL_COLOR, label="model")
    hi = float(max(np.max(actual), np.max(predicted), 0 if baseline is None else np.max(baseline)))
    ax.plot([0, hi], [0, hi], color="0.3", lw=0.8, ls="--")
    ax.set_xlabel("reference travel time (s)")
    ax.set_ylabel("predicted travel time (s)")
    ax.set_xlim(0, hi * 1.02)
    ax.set_ylim(0, hi * 1.02)
    ax.legend(loc="upper left", frameon=False)
    return _save(fig, path)


def metric_comparison(model: EvalReport, path: str | Path, baseline: EvalReport | None = None) -> Path:
    """One panel per error metric, naive next to model when both are given."""
    metrics = [("MAPE (%)", "mape_pct"), ("MAE (s)", "mae_s"), ("MSE (s²)", "mse_s2"), ("|δ| (s)", "delta_s")]
    fig, axes = plt.subplots(1, len(metrics), figsize=(10, 2.8))
    for ax, (label, attr) in zip(axes, metrics):
        names, values, colors = [], [], []
        if baseline is not None:
            names.append("naive")
            values.append(abs(getattr(baseline, attr)))
            colors.append(BASELINE_COLOR)
        names.append("model")
        values.append(abs(getattr(model, attr)))
        colors.append(MODEL_COLOR)
        ax.bar(names, values, color=colors)
        ax.set_title(label, fontsize=10)
        ax.tick_params(labelsize=8)
    return _save(fig, path)


def importance_bars(names: Sequence[str], weights: Sequence[float], path: str | Path) -> Path:
    order = np.argsort(weights)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.barh([names[i] for i in order], [weights[i] for i in order], color=MODEL_COLOR)
    ax.set_xlabel("MDI share")
    return _save(fig, path)


def fold_errors(maes: Sequence[float], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 2.8))
    ax.bar([str(i + 1) for i in range(len(maes))], maes, color=MODEL_COLOR)
    ax.axhline(float(np.mean(maes)), color="0.3", lw=0.8, ls="--")
    ax.set_xlabel("fold")
    ax.set_ylabel("MAE (s)")
    return _save(fig, path)
