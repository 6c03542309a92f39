"""Cross-section figure of a snapshot: both generating curves mirrored
across the rotation axis, junction marked."""

import argparse
import sys

import matplotlib.pyplot as plt

from .io import FormatError, read_snapshot
from .style import AXIS_COLOR, PHASE_COLORS, save


def render(snapshot_path, output_path):
    snap = read_snapshot(snapshot_path)
    fig, ax = plt.subplots(figsize=(4.2, 4.6))
    for phase, data in snap.phases.items():
        r, z = data["nodes"][:, 0], data["nodes"][:, 1]
        color = PHASE_COLORS[phase]
        ax.plot(r, z, "-", color=color, lw=2.0, label=f"phase {phase}")
        ax.plot(-r, z, "-", color=color, lw=2.0)
    jr, jz = snap.phases[1]["nodes"][-1]
    ax.plot([jr, -jr], [jz, jz], "o", color="k", ms=4, zorder=5)
    ax.axvline(0.0, color=AXIS_COLOR, lw=0.8, ls="--")
    ax.set_aspect("equal")
    ax.set_xlabel("r")
    ax.set_ylabel("z")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"t = {snap.t:g}")
    save(fig, output_path)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("snapshot")
    p.add_argument("output")
    args = p.parse_args(argv)
    try:
        render(args.snapshot, args.output)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
