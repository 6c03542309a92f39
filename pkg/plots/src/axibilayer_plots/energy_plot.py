"""Energy-versus-time figure from a solver time series."""

import argparse
import sys

import matplotlib.pyplot as plt
import numpy as np

from .io import FormatError, TIMESERIES_COLUMNS, read_timeseries
from .style import save


def render(timeseries_path, output_path):
    table = read_timeseries(timeseries_path)
    t = table[:, TIMESERIES_COLUMNS.index("t")]
    E = table[:, TIMESERIES_COLUMNS.index("E")]
    # the energy of the very first record reflects the initial-data
    # construction; monotonicity is a property of the scheme's own records
    steps = E[1:] if E.size > 1 else E
    monotone = bool((np.diff(steps) <= 1e-10 * np.abs(steps[:-1])).all()) if steps.size > 1 else True
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(t, E, "-", color="tab:blue", lw=1.5)
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.set_title("monotone decay" if monotone else "NOT monotone")
    fig.tight_layout()
    save(fig, output_path)
    return monotone


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("timeseries")
    p.add_argument("output")
    args = p.parse_args(argv)
    try:
        render(args.timeseries, args.output)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
