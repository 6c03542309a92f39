"""Direct solution of the step system and the conserving Newton loop.

The step system is linear; conservation constraints enter through up to
three scalar multipliers whose response directions are obtained from the
same factorization, so one Newton iteration costs three functional
evaluations and a 3x3 solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .assembly import AssembledSystem, MODE_COLUMNS, SchemeState, SystemAssembler
from .errors import NewtonDiverged, SingularJacobian, SingularMatrix
from .functionals import (
    PhysicalParams,
    enclosed_volume,
    first_variation_area,
    first_variation_volume,
    surface_area,
)
from .mesh import CurvatureState, TwoPhaseMesh

PIVOT_RTOL = 1e-14


@dataclass
class MultiplierState:
    """Conservation multipliers; inactive entries stay exactly zero."""

    lam_a: np.ndarray = field(default_factory=lambda: np.zeros(2))
    lam_v: float = 0.0
    mode: str = "free"

    def as_tuple(self):
        return (float(self.lam_a[0]), float(self.lam_a[1]), float(self.lam_v))


@dataclass
class StepSolution:
    """Outcome of one implicit step."""

    dX1: np.ndarray
    dX2: np.ndarray
    kappa: CurvatureState
    Y1: np.ndarray
    Y2: np.ndarray
    beta: float
    multipliers: MultiplierState
    newton_iters: int
    constraint_residual: float
    solve_residual: float

    def max_displacement(self) -> float:
        a = np.hypot(self.dX1[:, 0], self.dX1[:, 1]).max()
        b = np.hypot(self.dX2[:, 0], self.dX2[:, 1]).max()
        return float(max(a, b))


def linear_solve(system: AssembledSystem, extra_rhs=None):
    """Factorize and solve; returns (solutions, relative residual).

    extra_rhs is an optional list of additional right-hand sides solved
    with the same factorization; solutions come back as columns.  Systems
    carrying band storage use the banded factorization, others a sparse LU.
    """
    A = system.matrix
    rhs_list = [system.rhs] + list(extra_rhs or [])
    B = np.column_stack(rhs_list)
    if system.banded is not None:
        bd = system.banded
        lu, piv, info = lapack.dgbtrf(bd.ab, kl=bd.lower, ku=bd.upper)
        if info > 0:
            raise SingularMatrix(f"zero pivot in band factorization (column {info})")
        if info < 0:
            raise SingularMatrix(f"band factorization failed (info {info})")
        diag = np.abs(lu[bd.lower + bd.upper])
        if diag.size and diag.min() <= PIVOT_RTOL * max(diag.max(), 1.0):
            raise SingularMatrix(
                f"negligible pivot (|u| = {diag.min():.3e}, scale {diag.max():.3e})"
            )
        # banded row p holds original row argsort(row_inv)[p]
        Bp = np.asfortranarray(B[np.argsort(bd.row_inv)])
        Xp, info = lapack.dgbtrs(lu, bd.lower, bd.upper, Bp, piv)
        if info != 0:
            raise SingularMatrix(f"band substitution failed (info {info})")
        X = np.empty_like(Xp)
        X[bd.col_perm] = Xp
    else:
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise SingularMatrix(f"factorization failed: {exc}") from exc
        piv = np.abs(lu.U.diagonal())
        if piv.size and piv.min() <= PIVOT_RTOL * max(piv.max(), 1.0):
            raise SingularMatrix(
                f"negligible pivot (|u| = {piv.min():.3e}, scale {piv.max():.3e})"
            )
        X = lu.solve(B)
    if not np.isfinite(X).all():
        raise SingularMatrix("solve produced non-finite values")
    num = np.linalg.norm(A @ X - B)
    den = max(np.linalg.norm(B), 1.0)
    return X, float(num / den)


def _unpack(system: AssembledSystem, state: SchemeState, u: np.ndarray) -> StepSolution:
    dX1, dX2, k1, k2, Y1, Y2, beta = system.reconstruct(u, include_consts=True)
    return StepSolution(
        dX1=dX1,
        dX2=dX2,
        kappa=CurvatureState(k1, k2),
        Y1=Y1,
        Y2=Y2,
        beta=beta,
        multipliers=MultiplierState(mode=system.mode),
        newton_iters=0,
        constraint_residual=0.0,
        solve_residual=0.0,
    )


def newton_conserve(
    assembler: SystemAssembler,
    state: SchemeState,
    params: PhysicalParams,
    dt: float,
    mode: str,
    targets=None,
    warm_start: MultiplierState | None = None,
    newton_tol: float = 1e-10,
    max_iters: int = 20,
    geos=None,
) -> StepSolution:
    """Solve one step; in conserving modes the multipliers are adjusted by
    Newton on the (tiny) constraint system.

    targets are the reference values (A1, A2, V) of the conserved
    quantities; the active subset is selected by the mode.
    """
    system = assembler.assemble(state, params, dt, mode=mode, geos=geos)
    names = list(MODE_COLUMNS[mode])
    extra = [system.columns[n] for n in names]
    X, solve_res = linear_solve(system, extra_rhs=extra)
    u_base = X[:, 0]
    if not names:
        sol = _unpack(system, state, u_base)
        sol.solve_residual = solve_res
        return sol

    if targets is None:
        raise ValueError("conserving modes need target values")
    mesh = state.mesh

    # displacement responses per multiplier (directions: no affine offsets)
    resp = []
    for k in range(len(names)):
        d1, d2, *_ = system.reconstruct(X[:, 1 + k], include_consts=False)
        resp.append((d1, d2))
    base1, base2, *_ = system.reconstruct(u_base, include_consts=True)

    target_map = {"A1": targets[0], "A2": targets[1], "V": targets[2]}
    scale = {n: max(abs(target_map[n]), 1.0) for n in names}

    lam = np.zeros(len(names))
    if warm_start is not None:
        warm = {"A1": warm_start.lam_a[0], "A2": warm_start.lam_a[1], "V": warm_start.lam_v}
        lam = np.array([warm[n] for n in names])

    def displaced(lam_vec):
        d1 = base1 + sum(l * r[0] for l, r in zip(lam_vec, resp))
        d2 = base2 + sum(l * r[1] for l, r in zip(lam_vec, resp))
        return mesh.displaced(d1, d2)

    def constraint_values(trial: TwoPhaseMesh):
        vals = []
        for n in names:
            if n == "A1":
                vals.append(surface_area(trial.gamma1) - target_map[n])
            elif n == "A2":
                vals.append(surface_area(trial.gamma2) - target_map[n])
            else:
                vals.append(enclosed_volume(trial) - target_map[n])
        return np.array(vals)

    iters = 0
    rel_res = np.inf
    worse_streak = 0
    prev_norm = np.inf
    while True:
        trial = displaced(lam)
        g = constraint_values(trial)
        rel = np.array([abs(gv) / scale[n] for gv, n in zip(g, names)])
        rel_res = float(rel.max())
        if rel_res <= newton_tol:
            break
        if iters >= max_iters:
            raise NewtonDiverged(
                f"no convergence in {max_iters} iterations (residual {rel_res:.3e})"
            )
        norm = float(np.linalg.norm(rel))
        worse_streak = worse_streak + 1 if norm >= prev_norm else 0
        if worse_streak >= 3:
            raise NewtonDiverged(f"residual grew for 3 iterations (residual {rel_res:.3e})")
        prev_norm = norm

        J = np.empty((len(names), len(names)))
        for row, n in enumerate(names):
            for col, (r1, r2) in enumerate(resp):
                if n == "A1":
                    J[row, col] = first_variation_area(trial.gamma1, r1)
                elif n == "A2":
                    J[row, col] = first_variation_area(trial.gamma2, r2)
                else:
                    J[row, col] = first_variation_volume(trial, (r1, r2))
        # minimum-norm update: near spheres the area and volume responses
        # become parallel and the Jacobian nearly rank-deficient, while the
        # constraints stay solvable; plain solves then send the multipliers
        # on huge cancelling excursions
        try:
            U, sv, Vt = np.linalg.svd(J)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        if sv[0] <= 0.0:
            raise SingularJacobian("zero constraint Jacobian")
        inv = np.where(sv > 1e-12 * sv[0], 1.0 / np.where(sv > 0, sv, 1.0), 0.0)
        delta = -(Vt.T @ (inv * (U.T @ g)))
        if not np.isfinite(delta).all():
            raise SingularJacobian("non-finite Newton update")
        lam = lam + delta
        iters += 1

    u = u_base.copy()
    for k in range(len(names)):
        u = u + lam[k] * X[:, 1 + k]
    sol = _unpack(system, state, u)
    ms = MultiplierState(mode=mode)
    for n, val in zip(names, lam):
        if n == "A1":
            ms.lam_a[0] = val
        elif n == "A2":
            ms.lam_a[1] = val
        else:
            ms.lam_v = val
    sol.multipliers = ms
    sol.newton_iters = iters
    sol.constraint_residual = rel_res
    sol.solve_residual = solve_res
    return sol
