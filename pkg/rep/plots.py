"""SVG figures for a simulate run."""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed hash salt and no date stamp so identical runs give identical files
matplotlib.rcParams["svg.hashsalt"] = "rep"
_SVG_METADATA = {"Date": None}
N_PROFILES = 4


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    return path


def plot_h_vs_bound(times: np.ndarray, H: np.ndarray, bound: np.ndarray | None, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(times, H, marker=".", label="H(t)")
    if bound is not None:
        finite = np.isfinite(bound)
        ax.plot(times[finite], bound[finite], linestyle="--", label="Riccati lower bound")
    ax.set_xlabel("t")
    ax.set_ylabel("H")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_profiles(series, path: Path) -> Path:
    """rho, v and phi_r at up to N_PROFILES evenly spaced snapshots."""
    r = series.grid.centers
    picks = np.unique(np.linspace(0, len(series) - 1, N_PROFILES).astype(int))
    fig, axes = plt.subplots(3, 1, figsize=(6, 8), sharex=True)
    for k in picks:
        snap = series.snapshots[k]
        label = f"t = {snap.t:.4g}"
        axes[0].plot(r, snap.prim.rho, label=label)
        axes[1].plot(r, snap.prim.v, label=label)
        axes[2].plot(r, snap.field.phi_r, label=label)
    for ax, name in zip(axes, ("rho", "v", "phi_r")):
        ax.set_ylabel(name)
    axes[-1].set_xlabel("r")
    axes[0].legend()
    fig.tight_layout()
    return _save(fig, path)


def emit_plots(series, H: np.ndarray, bound: np.ndarray | None, out_dir: str | Path) -> list:
    """
    Write h_vs_bound.svg and profiles.svg into out_dir.

    Args:
        series: SimulationSeries of the run
        H: H(t) at each snapshot
        bound: Riccati lower bound per snapshot (NaN where undefined), or None
            when the criterion is false
        out_dir: Output directory (created if missing)

    Returns:
        Paths written (empty for an empty series)
    """
    if len(series) == 0:
        logger.warning("Empty series; no plots written")
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [
        plot_h_vs_bound(series.times, np.asarray(H), bound, out_dir / "h_vs_bound.svg"),
        plot_profiles(series, out_dir / "profiles.svg"),
    ]
