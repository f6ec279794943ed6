"""Figure rendering for simulation logs and analysis tables.

Import stays lazy and headless (Agg backend) so the library never pulls
in a GUI toolkit; the CLI calls these only when plotting is requested.
Each function writes PNG files next to the CSV they illustrate and
returns the written paths.
"""

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_log(cols, out_base):
    """Four-panel overview of one run log (dict of named columns)."""
    plt = _pyplot()
    out = Path(out_base).with_suffix(".png")
    t = cols["t"]
    fig, axes = plt.subplots(2, 2, figsize=(11, 8))

    ax = axes[0, 0]
    ax.plot(cols["y"], cols["x"], label="flown")
    ax.plot(cols["yr"], cols["xr"], "--", label="reference")
    ax.set_xlabel("y [m]")
    ax.set_ylabel("x [m]")
    ax.set_title("ground track")
    ax.axis("equal")
    ax.legend()

    ax = axes[0, 1]
    for axis in "xyz":
        ax.plot(t, cols[axis] - cols[axis + "r"], label=axis)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("position error [m]")
    ax.set_title("tracking error")
    ax.legend()

    ax = axes[1, 0]
    for i in range(1, 5):
        ax.plot(t, cols[f"z{i}"], label=f"motor {i}")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("throttle")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("throttle")
    ax.legend()

    ax = axes[1, 1]
    applied = np.sqrt(cols["fex"] ** 2 + cols["fey"] ** 2 + cols["fez"] ** 2)
    est = np.sqrt(cols["fhx"] ** 2 + cols["fhy"] ** 2 + cols["fhz"] ** 2)
    ax.plot(t, applied, label="applied")
    ax.plot(t, est, label="estimated")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("external force [N]")
    ax.set_title("disturbance force")
    ax.legend()

    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [out]


def plot_table(header, table, out_base, title=""):
    """Line plot of each column of a response table against column 0."""
    plt = _pyplot()
    out = Path(out_base).with_suffix(".png")
    fig, ax = plt.subplots(figsize=(8, 5))
    t = table[:, 0]
    for i in range(1, table.shape[1]):
        ax.plot(t, table[:, i], label=header[i])
    ax.set_xlabel(header[0])
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [out]
