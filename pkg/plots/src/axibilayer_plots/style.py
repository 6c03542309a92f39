"""Shared figure conventions: phase colors and deterministic saving."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

PHASE_COLORS = {1: "tab:red", 2: "gold"}
AXIS_COLOR = "0.6"
DPI = 130


def save(fig, path):
    """Write a figure byte-deterministically (fixed dpi, no metadata)."""
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
