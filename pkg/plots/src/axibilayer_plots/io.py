"""Parsers for the solver's text output formats.

Implemented against the documented formats only; this package never
imports the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FormatError(ValueError):
    """Malformed input file; message carries the offending line number."""


TIMESERIES_COLUMNS = [
    "t", "E", "A1", "A2", "V", "vr", "rM1", "rM2",
    "lamA1", "lamA2", "lamV", "beta", "newton_iters",
    "junction_r", "junction_z",
]

CONVERGENCE_COLUMNS = ["J1", "J2", "h", "err", "EOC_err", "drift", "EOC_drift", "rM1", "rM2"]


def read_csv(path, expected_columns):
    lines = open(path).read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file (line 1)")
    header = lines[0].split(",")
    if header != list(expected_columns):
        raise FormatError(f"{path}: unexpected header {header} (line 1)")
    rows = []
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(expected_columns):
            raise FormatError(f"{path}: expected {len(expected_columns)} columns (line {k})")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as exc:
            raise FormatError(f"{path}: bad number (line {k}): {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows (line 2)")
    return np.array(rows)


def read_timeseries(path) -> np.ndarray:
    return read_csv(path, TIMESERIES_COLUMNS)


def read_convergence(path) -> np.ndarray:
    return read_csv(path, CONVERGENCE_COLUMNS)


@dataclass
class Snapshot:
    t: float
    phases: dict  # phase -> dict(nodes, kappa, Y)


def read_snapshot(path) -> Snapshot:
    lines = open(path).read().splitlines()
    if not lines or not lines[0].startswith("snapshot "):
        raise FormatError(f"{path}: missing snapshot header (line 1)")
    try:
        meta = dict(kv.split("=") for kv in lines[0].split()[1:])
        counts = {1: int(meta["J1"]), 2: int(meta["J2"])}
        t = float(meta["t"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: bad snapshot header (line 1): {exc}") from exc
    phases = {}
    idx = 1
    for phase in (1, 2):
        if idx >= len(lines) or lines[idx] != f"phase {phase}":
            raise FormatError(f"{path}: expected 'phase {phase}' (line {idx + 1})")
        idx += 1
        n = counts[phase] + 1
        nodes = np.empty((n, 2))
        kappa = np.empty(n)
        Y = np.empty((n, 2))
        for j in range(n):
            lineno = idx + 1
            if idx >= len(lines):
                raise FormatError(f"{path}: truncated node list (line {lineno})")
            parts = lines[idx].split()
            if len(parts) != 6:
                raise FormatError(
                    f"{path}: expected 'j r z kappa Y1 Y2' (line {lineno})"
                )
            if int(parts[0]) != j:
                raise FormatError(f"{path}: node index mismatch (line {lineno})")
            nodes[j] = (float(parts[1]), float(parts[2]))
            kappa[j] = float(parts[3])
            Y[j] = (float(parts[4]), float(parts[5]))
            idx += 1
        phases[phase] = {"nodes": nodes, "kappa": kappa, "Y": Y}
    return Snapshot(t=t, phases=phases)


def read_obj(path):
    verts, faces = [], []
    for k, line in enumerate(open(path).read().splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            if len(parts) != 4:
                raise FormatError(f"{path}: bad vertex (line {k})")
            verts.append([float(x) for x in parts[1:]])
        elif parts[0] == "f":
            if len(parts) != 4:
                raise FormatError(f"{path}: only triangles supported (line {k})")
            faces.append([int(i) - 1 for i in parts[1:]])
    if not verts or not faces:
        raise FormatError(f"{path}: no mesh data (line 1)")
    return np.array(verts), np.array(faces, dtype=int)
