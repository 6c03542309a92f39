"""Command line interface: config parsing, run orchestration and the
bit-specified text output formats.

All numeric output is printed with 17 significant digits in a fixed
column order, so identical configurations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .assembly import VARIANT_BETA, VARIANT_SIDEH, SchemeState
from .driver import FlowConfig, make_test_shapes, run
from .errors import (
    AssumptionViolated,
    AxibilayerError,
    ConfigError,
    DegenerateMesh,
    InvalidValue,
    MissingFile,
    NewtonDiverged,
    SingularJacobian,
    SingularMatrix,
    UnknownKey,
)
from .functionals import Diagnostics, PhysicalParams
from .mesh import PhaseCurve, TwoPhaseMesh
from .solver import MultiplierState
from .verification import (
    ConvergenceRow,
    JunctionDiagnostics,
    compare_junction_drift,
    convergence_ladder,
    junction_residuals,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DEGENERATED = 2
EXIT_ASSUMPTION = 3
EXIT_SOLVER = 4

ENV_OUT = "AXIBILAYER_OUT"


def fmt(x) -> str:
    """Full-precision decimal formatting (17 significant digits)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    junction: str = "c0"
    mode: str = "free"
    variant: str = VARIANT_BETA
    alpha1: float = 1.0
    alpha2: float = 1.0
    alphaG1: float = 0.0
    alphaG2: float = 0.0
    kbar1: float = 0.0
    kbar2: float = 0.0
    varsigma: float = 0.0
    J1: int = 32
    J2: int = 32
    dt: float = 1e-4
    t_end: float = 1.0
    shape: str = "sphere"
    radius: float = 1.0
    height: float = 1.0
    v_r: float = 0.9
    area_ratio: float = 0.5
    newton_tol: float = 1e-10
    stationarity_tol: float = 1e-6
    max_steps: int = 10_000_000
    snapshot_every: int = 0
    output_dir: str = "out"
    azimuthal: int = 64

    _SCHEMA = {
        "junction": ("c0", "c1"),
        "mode": ("free", "area", "volume", "area_volume"),
        "variant": (VARIANT_BETA, VARIANT_SIDEH),
        "shape": ("sphere", "perturbed_sphere", "spheroid", "quarter_pair", "cylinder"),
    }

    def params(self) -> PhysicalParams:
        return PhysicalParams(
            alpha=(self.alpha1, self.alpha2),
            alphaG=(self.alphaG1, self.alphaG2),
            kbar=(self.kbar1, self.kbar2),
            varsigma=self.varsigma,
            c1=1 if self.junction == "c1" else 0,
        )

    def mesh(self) -> TwoPhaseMesh:
        kwargs = {}
        if self.shape == "sphere":
            kwargs = {"radius": self.radius, "area_ratio": self.area_ratio}
        elif self.shape == "cylinder":
            kwargs = {"radius": self.radius, "height": self.height}
        elif self.shape == "spheroid":
            kwargs = {"v_r": self.v_r, "area_ratio": self.area_ratio}
        return make_test_shapes(self.shape, self.J1, self.J2, **kwargs)

    def flow(self) -> FlowConfig:
        return FlowConfig(
            dt=self.dt,
            t_end=self.t_end,
            mode=self.mode,
            variant=self.variant if self.junction == "c1" else VARIANT_BETA,
            stationarity_tol=self.stationarity_tol,
            max_steps=self.max_steps,
            newton_tol=self.newton_tol,
            snapshot_every=self.snapshot_every,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig) if not f.name.startswith("_")}


def _coerce(key: str, raw: str):
    typ = _FIELD_TYPES[key]
    try:
        if typ in ("int", int):
            return int(raw)
        if typ in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise InvalidValue(key, f"cannot parse '{raw}'") from exc
    return raw


def apply_setting(cfg: RunConfig, key: str, raw: str, line: int = 0) -> None:
    if key not in _FIELD_TYPES:
        raise UnknownKey(key, line)
    value = _coerce(key, raw)
    choices = RunConfig._SCHEMA.get(key)
    if choices and value not in choices:
        raise InvalidValue(key, f"must be one of {', '.join(choices)}")
    setattr(cfg, key, value)


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.alpha1 <= 0 or cfg.alpha2 <= 0:
        raise InvalidValue("alpha1" if cfg.alpha1 <= 0 else "alpha2",
                           "bending rigidity must be positive")
    if cfg.varsigma < 0:
        raise InvalidValue("varsigma", "line tension must be nonnegative")
    if cfg.J1 < 3 or cfg.J2 < 3:
        raise InvalidValue("J1" if cfg.J1 < 3 else "J2", "need at least 3 elements")
    if cfg.dt <= 0:
        raise InvalidValue("dt", "must be positive")
    if cfg.t_end <= 0:
        raise InvalidValue("t_end", "must be positive")
    if not 0 < cfg.area_ratio < 1:
        raise InvalidValue("area_ratio", "must lie in (0, 1)")
    if cfg.shape == "spheroid" and not 0 < cfg.v_r <= 1:
        raise InvalidValue("v_r", "reduced volume must lie in (0, 1]")
    if cfg.snapshot_every < 0:
        raise InvalidValue("snapshot_every", "must be nonnegative")
    if cfg.azimuthal < 3:
        raise InvalidValue("azimuthal", "need at least 3 segments")
    return cfg


def parse_config(path: str | Path) -> RunConfig:
    """Read a key=value config file with defaults for missing keys."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"config file not found: {path}")
    cfg = RunConfig()
    for lineno, rawline in enumerate(path.read_text().splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidValue(f"line {lineno}", f"expected key=value, got '{line}'")
        key, _, value = line.partition("=")
        apply_setting(cfg, key.strip(), value.strip(), lineno)
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# output formats


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(fmt(x) for x in row) + "\n")


def write_timeseries(path: Path, diagnostics: list[Diagnostics]) -> None:
    write_csv(path, Diagnostics.COLUMNS, (d.row() for d in diagnostics))


def write_snapshot(path: Path, state: SchemeState) -> None:
    """Nodal state dump: per phase one line per node 'j r z kappa Y1 Y2'."""
    mesh = state.mesh
    with open(path, "w") as f:
        f.write(
            f"snapshot J1={mesh.gamma1.J} J2={mesh.gamma2.J} t={fmt(state.t)}\n"
        )
        for curve in mesh.curves:
            kap = state.kappa.kappa(curve.phase)
            Y = state.Y(curve.phase)
            f.write(f"phase {curve.phase}\n")
            for j in range(curve.J + 1):
                vals = (curve.nodes[j, 0], curve.nodes[j, 1], kap[j], Y[j, 0], Y[j, 1])
                f.write(f"{j} " + " ".join(fmt(v) for v in vals) + "\n")


def load_snapshot(path: str | Path):
    """Inverse of write_snapshot; returns (state-like dict)."""
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if not head or head[0] != "snapshot":
        raise InvalidValue("snapshot", f"bad header in {path}")
    meta = dict(kv.split("=") for kv in head[1:])
    J1, J2, t = int(meta["J1"]), int(meta["J2"]), float(meta["t"])
    out = {}
    idx = 1
    for phase, J in ((1, J1), (2, J2)):
        if lines[idx] != f"phase {phase}":
            raise InvalidValue("snapshot", f"expected 'phase {phase}' at line {idx + 1}")
        idx += 1
        nodes = np.empty((J + 1, 2))
        kap = np.empty(J + 1)
        Y = np.empty((J + 1, 2))
        for j in range(J + 1):
            parts = lines[idx].split()
            if int(parts[0]) != j or len(parts) != 6:
                raise InvalidValue("snapshot", f"bad node line {idx + 1}")
            nodes[j] = (float(parts[1]), float(parts[2]))
            kap[j] = float(parts[3])
            Y[j] = (float(parts[4]), float(parts[5]))
            idx += 1
        out[phase] = (nodes, kap, Y)
    mesh = TwoPhaseMesh(PhaseCurve(1, out[1][0]), PhaseCurve(2, out[2][0]))
    return {"mesh": mesh, "kappa": (out[1][1], out[2][1]), "Y": (out[1][2], out[2][2]), "t": t}


def export_revolved_mesh(path: Path, mesh: TwoPhaseMesh, azimuthal: int) -> None:
    """Triangulated surface of revolution in OBJ text form.

    Vertices are shared at the junction, the poles and the azimuthal seam,
    so the result is watertight for a closed generating curve pair.
    """
    profile = np.vstack([mesh.gamma1.nodes, mesh.gamma2.nodes[1:]])
    n = profile.shape[0]
    K = azimuthal
    theta = 2.0 * np.pi * np.arange(K) / K
    ids = np.full((n, K), -1, dtype=int)
    verts = []

    def add_vertex(x, y, z):
        verts.append((x, y, z))
        return len(verts)

    for i in range(n):
        r, z = profile[i]
        if i == 0 or i == n - 1:
            vid = add_vertex(0.0, z, 0.0)
            ids[i, :] = vid
        else:
            for k in range(K):
                ids[i, k] = add_vertex(r * np.cos(theta[k]), z, r * np.sin(theta[k]))
    faces = []
    for i in range(n - 1):
        for k in range(K):
            kn = (k + 1) % K
            a, b = ids[i, k], ids[i, kn]
            c, d = ids[i + 1, k], ids[i + 1, kn]
            if a == b:          # top pole fan
                faces.append((a, d, c))
            elif c == d:        # bottom pole fan
                faces.append((a, b, c))
            else:
                faces.append((a, b, c))
                faces.append((b, d, c))
    with open(path, "w") as f:
        for v in verts:
            f.write("v " + " ".join(fmt(x) for x in v) + "\n")
        for tri in faces:
            f.write(f"f {tri[0]} {tri[1]} {tri[2]}\n")


# ---------------------------------------------------------------------------
# subcommands


_OUTPUT_PATTERNS = ("timeseries*.csv", "convergence.csv", "comparison.csv",
                    "snapshot_*.txt", "junction_diagnostics.csv")


def _prepare_outdir(cfg: RunConfig) -> Path:
    out = Path(os.environ.get(ENV_OUT) or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for pattern in _OUTPUT_PATTERNS:
        if any(out.glob(pattern)):
            raise ConfigError(
                f"output_dir '{out}' already holds results; use a fresh directory"
            )
    return out

def _do_run(cfg: RunConfig, quiet: bool) -> int:
    out = _prepare_outdir(cfg)
    params = cfg.params()
    mesh = cfg.mesh()
    flow = cfg.flow()
    snaps = []

    def hook(step, prev, new, sol, diag):
        if cfg.snapshot_every and step % cfg.snapshot_every == 0:
            p = out / f"snapshot_{step:08d}.txt"
            write_snapshot(p, new)
            snaps.append(p)

    result = run(flow, params, mesh, on_step=hook)
    write_timeseries(out / "timeseries.csv", result.diagnostics)
    write_snapshot(out / "snapshot_final.txt", result.state)
    if not quiet:
        last = result.diagnostics[-1]
        print(f"status={result.status} steps={result.steps} t={fmt(last.t)} E={fmt(last.energy)}")
    if result.status == "degenerated":
        print(f"degenerated: {result.reason}", file=sys.stderr)
        return EXIT_DEGENERATED
    if result.status == "solver_failure":
        print(f"solver failure: {result.reason}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _do_converge(cfg: RunConfig, rows_arg: str, processes: int, quiet: bool) -> int:
    out = _prepare_outdir(cfg)
    resolutions = []
    for chunk in rows_arg.split(";"):
        a, b = chunk.split(",")
        resolutions.append((int(a), int(b)))
    kbar = cfg.kbar1
    rows = convergence_ladder(resolutions, kbar=kbar, T=cfg.t_end, processes=processes)
    write_csv(out / "convergence.csv", ConvergenceRow.COLUMNS, (r.row() for r in rows))
    if not quiet:
        for r in rows:
            print(
                f"({r.elements[0]},{r.elements[1]}) h={fmt(r.h)} err={fmt(r.error)} "
                f"EOC={r.eoc_error if r.eoc_error is not None else '---'} "
                f"drift={fmt(r.drift)} "
                f"EOC={r.eoc_drift if r.eoc_drift is not None else '---'}"
            )
    return EXIT_OK


def _do_compare(cfg: RunConfig, quiet: bool) -> int:
    out = _prepare_outdir(cfg)
    params = cfg.params()
    if params.c1 != 1:
        raise InvalidValue("junction", "the comparison needs junction=c1")
    mesh = cfg.mesh()
    rep = compare_junction_drift(
        cfg.J1, cfg.J2, cfg.dt, cfg.t_end, params=params, mode=cfg.mode, mesh=mesh
    )
    for name, res in (("beta", rep.result_beta), ("sideh", rep.result_sideh)):
        write_timeseries(out / f"timeseries_{name}.csv", res.diagnostics)
    write_csv(
        out / "comparison.csv",
        ("variant", "junction_drift", "max_rel_energy_increase"),
        [
            ("beta", rep.drift_beta, rep.max_increase_beta),
            ("sideh", rep.drift_sideh, rep.max_increase_sideh),
        ],
    )
    if not quiet:
        print(f"drift beta={fmt(rep.drift_beta)} sideh={fmt(rep.drift_sideh)}")
        print(
            f"max relative energy increase beta={fmt(rep.max_increase_beta)} "
            f"sideh={fmt(rep.max_increase_sideh)}"
        )
    return EXIT_OK


def _do_residuals(cfg: RunConfig, quiet: bool) -> int:
    out = _prepare_outdir(cfg)
    params = cfg.params()
    flow = cfg.flow()
    result = run(flow, params, cfg.mesh())
    last = result.diagnostics[-1]
    ms = MultiplierState(
        lam_a=np.array([last.lam_a1, last.lam_a2]), lam_v=last.lam_v, mode=cfg.mode
    )
    diag = junction_residuals(result.state, params, ms)
    write_timeseries(out / "timeseries.csv", result.diagnostics)
    write_csv(out / "junction_diagnostics.csv", JunctionDiagnostics.COLUMNS, [diag.row()])
    write_snapshot(out / "snapshot_final.txt", result.state)
    if not quiet:
        print(f"status={result.status} kappa_jump={fmt(diag.kappa_jump)}")
    if result.status == "degenerated":
        return EXIT_DEGENERATED
    return EXIT_OK


def _do_export3d(cfg: RunConfig, snapshot: str, output: str, quiet: bool) -> int:
    if snapshot:
        data = load_snapshot(snapshot)
        mesh = data["mesh"]
    else:
        mesh = cfg.mesh()
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    export_revolved_mesh(path, mesh, cfg.azimuthal)
    if not quiet:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="axibilayer",
        description="Axisymmetric two-phase membrane gradient flow solver",
    )
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="override a config entry (repeatable)",
    )
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", help="integrate the flow and write time series + snapshots")
    pc = sub.add_parser("converge", help="sphere convergence study")
    pc.add_argument("--rows", default="16,8;32,16;64,32", help="element counts, e.g. 16,8;32,16")
    pc.add_argument("--processes", type=int, default=1)
    sub.add_parser("compare", help="junction-motion comparison of the two schemes")
    sub.add_parser("residuals", help="run to stationarity and report junction residuals")
    pe = sub.add_parser("export3d", help="revolve a snapshot into an OBJ surface mesh")
    pe.add_argument("--snapshot", default="", help="snapshot file (default: initial shape)")
    pe.add_argument("--output", required=True, help="output OBJ path")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        for ov in args.override:
            if "=" not in ov:
                raise InvalidValue("override", f"expected KEY=VALUE, got '{ov}'")
            key, _, value = ov.partition("=")
            apply_setting(cfg, key.strip(), value.strip())
        validate_config(cfg)
        if args.command == "run":
            return _do_run(cfg, args.quiet)
        if args.command == "converge":
            return _do_converge(cfg, args.rows, args.processes, args.quiet)
        if args.command == "compare":
            return _do_compare(cfg, args.quiet)
        if args.command == "residuals":
            return _do_residuals(cfg, args.quiet)
        if args.command == "export3d":
            return _do_export3d(cfg, args.snapshot, args.output, args.quiet)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssumptionViolated, DegenerateMesh) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (SingularMatrix, SingularJacobian, NewtonDiverged) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except AxibilayerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATED


if __name__ == "__main__":
    sys.exit(main())
