"""Markdown rendering of a convergence study.

The experimental orders are recomputed from the error columns and must
agree with the orders stored in the CSV to 1e-10.
"""

import argparse
import sys

import numpy as np

from .io import CONVERGENCE_COLUMNS, FormatError, read_convergence

EOC_TOL = 1e-10


def recompute_orders(h, values):
    out = [float("nan")]
    for k in range(1, len(values)):
        out.append(float(np.log(values[k - 1] / values[k]) / np.log(h[k - 1] / h[k])))
    return out


def render(csv_path):
    table = read_convergence(csv_path)
    col = {name: table[:, k] for k, name in enumerate(CONVERGENCE_COLUMNS)}
    eoc_err = recompute_orders(col["h"], col["err"])
    eoc_drift = recompute_orders(col["h"], col["drift"])
    for name, mine, stored in (("EOC_err", eoc_err, col["EOC_err"]),
                               ("EOC_drift", eoc_drift, col["EOC_drift"])):
        for k in range(1, len(mine)):
            if abs(mine[k] - stored[k]) > EOC_TOL:
                raise FormatError(
                    f"{csv_path}: recomputed {name} row {k} is {mine[k]!r}, "
                    f"stored {stored[k]!r} (line {k + 2})"
                )
    lines = [
        "| (J1, J2) | h | error | EOC | drift | EOC | rM1 | rM2 |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for k in range(table.shape[0]):
        eoc_e = "---" if k == 0 else f"{eoc_err[k]:.2f}"
        eoc_d = "---" if k == 0 else f"{eoc_drift[k]:.2f}"
        lines.append(
            f"| ({int(col['J1'][k])}, {int(col['J2'][k])}) "
            f"| {col['h'][k]:.4e} | {col['err'][k]:.4e} | {eoc_e} "
            f"| {col['drift'][k]:.4e} | {eoc_d} "
            f"| {col['rM1'][k]:.6f} | {col['rM2'][k]:.6f} |"
        )
    return "\n".join(lines) + "\n"


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("csv")
    p.add_argument("output", nargs="?", help="markdown path (default stdout)")
    args = p.parse_args(argv)
    try:
        md = render(args.csv)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.output:
        with open(args.output, "w") as f:
            f.write(md)
    else:
        print(md, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
