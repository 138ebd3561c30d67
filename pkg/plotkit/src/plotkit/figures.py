"""Turn experiment CSV logs into figure images.

Two figure kinds:
  convergence  y over x (episodes or generations), one line per group,
               optional moving-average smoothing, ±1 std band over
               replications when a replication column is present
  sweep-line   mean y per (group, x) with ±1 std over replications

Only the CSV schema written by the experiment harness is consumed here;
rendering never mutates its inputs.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

KINDS = ("convergence", "sweep-line")


@dataclass
class FigureSpec:
    name: str
    inputs: list[str]
    kind: str
    x: str
    y: str
    out: str
    group_by: str = "scheme"
    window: int = 1
    title: str | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind: {self.kind!r}")
        if self.window < 1:
            raise ValueError("smoothing window must be >= 1")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")

    @classmethod
    def from_json(cls, path: str) -> "FigureSpec":
        with open(path) as fh:
            d = json.load(fh)
        spec = cls(**d)
        spec.validate()
        return spec


def moving_average(values, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 points average what is
    available so the output has the same length as the input."""
    if window < 1:
        raise ValueError("smoothing window must be >= 1")
    v = np.asarray(values, dtype=float)
    cum = np.cumsum(v)
    out = np.empty_like(v)
    n = len(v)
    w = min(window, n) if n else window
    out[:w] = cum[:w] / np.arange(1, w + 1)
    if n > window:
        out[window:] = (cum[window:] - cum[:-window]) / window
    return out


def _load(spec: FigureSpec) -> pd.DataFrame:
    frames = []
    for path in spec.inputs:
        try:
            df = pd.read_csv(path)
        except pd.errors.EmptyDataError:
            raise ValueError(f"input CSV {path} is empty") from None
        if df.empty:
            raise ValueError(f"input CSV {path} has a header but no rows")
        for col in (spec.x, spec.y, spec.group_by):
            if col not in df.columns:
                raise ValueError(
                    f"column {col!r} missing from {path} "
                    f"(found: {', '.join(df.columns)})")
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def compute_series(spec: FigureSpec, df: pd.DataFrame):
    """Aggregate plotted values: {group: (x, mean, std)}; std is zero when no
    replication column distinguishes repeated measurements."""
    has_rep = "replication" in df.columns
    out = {}
    for group, g in df.groupby(spec.group_by, sort=True):
        if has_rep:
            per_rep = g.pivot_table(index=spec.x, columns="replication",
                                    values=spec.y, aggfunc="mean")
            x = per_rep.index.to_numpy(dtype=float)
            vals = per_rep.to_numpy()
            mean = np.nanmean(vals, axis=1)
            std = (np.nanstd(vals, axis=1, ddof=1)
                   if vals.shape[1] > 1 else np.zeros_like(mean))
            std = np.nan_to_num(std)
        else:
            agg = g.groupby(spec.x)[spec.y].mean().sort_index()
            x = agg.index.to_numpy(dtype=float)
            mean = agg.to_numpy()
            std = np.zeros_like(mean)
        if spec.kind == "convergence" and spec.window > 1:
            mean = moving_average(mean, spec.window)
            std = moving_average(std, spec.window)
        out[group] = (x, mean, std)
    return out


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the written image path."""
    spec.validate()
    series = compute_series(spec, _load(spec))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for group, (x, mean, std) in series.items():
        (line,) = ax.plot(x, mean, marker="o" if spec.kind == "sweep-line" else None,
                          markersize=4, label=str(group))
        if np.any(std > 0):
            ax.fill_between(x, mean - std, mean + std,
                            color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    os.makedirs(os.path.dirname(spec.out) or ".", exist_ok=True)
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)
    return spec.out


# harness run directories carry metrics.csv / ga_trace.csv with these schemas
_PRESETS = {
    "fig4": FigureSpec(
        name="fig4", inputs=["ga_trace.csv"], kind="convergence",
        x="generation", y="best_fitness", group_by="variant", out="fig4.png",
        title="Off-RA GA convergence"),
    "fig5": FigureSpec(
        name="fig5", inputs=["metrics.csv"], kind="sweep-line",
        x="sweep_value", y="u_small_mean", out="fig5.png",
        title="Utility vs cache capacity"),
    "fig6": FigureSpec(
        name="fig6", inputs=["metrics.csv"], kind="sweep-line",
        x="sweep_value", y="u_small_mean", out="fig6.png",
        title="Utility vs edge server count"),
    "fig7": FigureSpec(
        name="fig7", inputs=["metrics.csv"], kind="sweep-line",
        x="sweep_value", y="u_small_mean", out="fig7.png",
        title="Utility vs terminal device count"),
    "fig8": FigureSpec(
        name="fig8", inputs=["metrics.csv"], kind="sweep-line",
        x="sweep_value", y="u_small_mean", out="fig8.png",
        title="Utility vs uplink bandwidth"),
    "fig9": FigureSpec(
        name="fig9", inputs=["metrics.csv"], kind="sweep-line",
        x="sweep_value", y="u_small_mean", out="fig9.png",
        title="Utility vs edge compute capacity"),
    "fig_train": FigureSpec(
        name="fig_train", inputs=["metrics.csv"], kind="convergence",
        x="episode", y="u_large", window=10, out="fig_train.png",
        title="Training utility"),
}


def presets() -> dict[str, FigureSpec]:
    return {k: replace(v) for k, v in _PRESETS.items()}


def preset_spec(name: str, in_dir: str, out_dir: str) -> FigureSpec:
    if name not in _PRESETS:
        raise ValueError(f"unknown preset: {name!r} "
                         f"(choose from {', '.join(sorted(_PRESETS))})")
    spec = replace(_PRESETS[name])
    spec.inputs = [os.path.join(in_dir, p) for p in spec.inputs]
    spec.out = os.path.join(out_dir, os.path.basename(spec.out))
    return spec
