"""3D render of an exported surface-of-revolution OBJ mesh."""

import argparse
import sys

import matplotlib.pyplot as plt

from .io import FormatError, read_obj
from .style import save


def render(obj_path, output_path, elev=18.0, azim=-60.0):
    verts, faces = read_obj(obj_path)
    fig = plt.figure(figsize=(4.8, 4.8))
    ax = fig.add_subplot(projection="3d")
    ax.plot_trisurf(
        verts[:, 0], verts[:, 2], verts[:, 1], triangles=faces,
        color="gold", edgecolor="0.4", linewidth=0.1, alpha=0.95,
    )
    span = verts.max(axis=0) - verts.min(axis=0)
    mid = 0.5 * (verts.max(axis=0) + verts.min(axis=0))
    half = max(span) / 2.0
    ax.set_xlim(mid[0] - half, mid[0] + half)
    ax.set_ylim(mid[2] - half, mid[2] + half)
    ax.set_zlim(mid[1] - half, mid[1] + half)
    ax.view_init(elev=elev, azim=azim)
    ax.set_axis_off()
    save(fig, output_path)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("obj")
    p.add_argument("output")
    args = p.parse_args(argv)
    try:
        render(args.obj, args.output)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
