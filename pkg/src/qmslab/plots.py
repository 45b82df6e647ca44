"""Figure rendering for CLI runs. All output goes to PNG files."""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name + ".png")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_decay_curves(out_dir, name, times, curves, ylabel="relative entropy",
                      title=None):
    """Semilog decay plot; curves is {label: values}. Zero values are
    clipped to the float floor so the log axis stays usable."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    times = np.asarray(times, dtype=float)
    for label, vals in curves.items():
        vals = np.clip(np.asarray(vals, dtype=float), 1e-300, None)
        ax.semilogy(times, vals, marker=".", label=label)
    ax.set_xlabel("time")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, out_dir, name)


def save_histogram(out_dir, name, values, xlabel, vline=None, title=None):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    values = np.asarray(values, dtype=float)
    ax.hist(values, bins=min(40, max(8, values.size // 5)), alpha=0.8)
    if vline is not None:
        ax.axvline(vline, color="C3", linestyle="--", label=f"bound {vline:g}")
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _finish(fig, out_dir, name)


def save_curve(out_dir, name, x, y, xlabel, ylabel, extra=None, logy=False,
               title=None):
    """Single curve, optionally with a second one for comparison."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    plot = ax.semilogy if logy else ax.plot
    plot(np.asarray(x, float), np.asarray(y, float), marker="o", label=ylabel)
    if extra is not None:
        lab2, y2 = extra
        plot(np.asarray(x, float), np.asarray(y2, float), marker="s",
             linestyle="--", label=lab2)
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both" if logy else "major", alpha=0.3)
    return _finish(fig, out_dir, name)
