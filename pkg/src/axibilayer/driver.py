"""Initial data, reference solutions, test shapes and the time loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .assembly import (
    SchemeState,
    SystemAssembler,
    DofLayout,
    VARIANT_BETA,
    make_geometry,
    require_assumptions,
)
from .errors import (
    AssumptionViolated,
    NewtonDiverged,
    RootNotBracketed,
    SingularJacobian,
    SingularMatrix,
)
from .functionals import (
    Diagnostics,
    PhysicalParams,
    TWO_PI,
    discrete_energy,
    junction_conormal,
    make_diagnostics,
    surface_area,
    enclosed_volume,
)
from .mesh import (
    CurvatureState,
    PhaseCurve,
    TwoPhaseMesh,
    element_frames,
    node_weights,
    vertex_normals,
)
from .solver import MultiplierState, newton_conserve

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# initial data


def make_initial_data(mesh: TwoPhaseMesh, params: PhysicalParams) -> SchemeState:
    """Construct the starting curvature and multiplier fields for a mesh.

    The nodal curvature vector solves the diagonal mass-lumped relation
    against the tangent turn at each node; its projection onto the vertex
    normal gives the scalar curvature, with pole values pinned to zero.
    The multiplier field matches the bending force density away from the
    junction and is overwritten with its junction condition there.
    """
    kappas = []
    Ys = []
    for curve in mesh.curves:
        alpha, alphaG, kbar = params.for_phase(curve.phase)
        frames = element_frames(curve)
        vf = vertex_normals(curve, frames)
        m = node_weights(frames)
        N = curve.J + 1

        kvec = np.zeros((N, 2))
        kvec[0] = frames.tau[0] / m[0]
        kvec[-1] = -frames.tau[-1] / m[-1]
        kvec[1:-1] = (frames.tau[1:] - frames.tau[:-1]) / m[1:-1, None]

        kappa = np.einsum("jk,jk->j", kvec, vf.v)
        kappa[curve.pole_index] = 0.0

        pole = curve.pole_index
        sel = np.arange(N) != pole
        frak = np.empty(N)
        frak[sel] = kappa[sel] - vf.omega[sel, 0] / curve.r[sel]
        frak[pole] = 2.0 * kappa[pole]

        wnorm = np.hypot(vf.omega[:, 0], vf.omega[:, 1])
        Y = TWO_PI * alpha * (curve.r * (frak - kbar) / wnorm)[:, None] * vf.v
        Y[curve.junction_index] = np.array([TWO_PI * alphaG, 0.0])
        # pole value of the formula vanishes with r; pin the radial
        # component exactly
        Y[pole, 0] = 0.0

        kappas.append(kappa)
        Ys.append(Y)
    return SchemeState(
        mesh=mesh.copy(),
        kappa=CurvatureState(kappas[0], kappas[1]),
        Y1=Ys[0],
        Y2=Ys[1],
        beta=0.0,
        t=0.0,
    )


# ---------------------------------------------------------------------------
# reference solution for the sphere with equal spontaneous curvatures


def sphere_radius_rate(kbar: float, radius: float) -> float:
    """Radial speed of a sphere under the free flow."""
    return -(kbar / radius) * (2.0 / radius + kbar)


@dataclass
class OdeReference:
    """Radius-over-time reference for a unit sphere with spontaneous
    curvature kbar, obtained from the closed-form implicit relation."""

    kbar: float

    def __post_init__(self):
        if self.kbar == 0.0:
            return
        self.z0 = 1.0 + 2.0 / self.kbar

    def radius(self, t: float) -> float:
        kb = self.kbar
        if t < 0.0:
            raise ValueError("t must be nonnegative")
        if kb == 0.0 or abs(kb + 2.0) < 1e-14:
            return 1.0  # stationary cases
        z0 = self.z0

        def F(z):
            return (
                0.5 * (z * z - z0 * z0)
                - (4.0 / kb) * (z - z0)
                + (4.0 / kb**2) * np.log(z / z0)
                + kb**2 * t
            )

        if t == 0.0:
            return 1.0
        if kb < 0.0:
            # z moves monotonically from z0 towards 0 (the steady sphere);
            # F has the sign of kb^2 t > 0 at z0 and diverges to -inf at 0
            tiny = np.copysign(1e-300, z0)
            lo, hi = (z0, tiny) if z0 < 0.0 else (tiny, z0)
        else:
            # shrinkage: z decreases from z0 to 2/kb at the extinction time
            lo, hi = 2.0 / kb, z0
            if F(lo) > 0.0:
                raise RootNotBracketed(f"no solution at t = {t:g}: the sphere is extinct")
        z = brentq(F, lo, hi, xtol=1e-15, rtol=8.9e-16)
        return float(z - 2.0 / kb)


def rk4_radius(kbar: float, t: float, step: float = 1e-6, r0: float = 1.0):
    """Classical fourth-order integration of the sphere radius equation.

    Returns a callable-friendly list of (t, R) checkpoints at multiples of
    t/10 up to t, used as an independent cross-check of OdeReference.
    """
    n = int(round(t / step))
    checkpoints = []
    r = r0
    marks = {int(round(k * n / 10)) for k in range(1, 11)}
    for i in range(n):
        k1 = sphere_radius_rate(kbar, r)
        k2 = sphere_radius_rate(kbar, r + 0.5 * step * k1)
        k3 = sphere_radius_rate(kbar, r + 0.5 * step * k2)
        k4 = sphere_radius_rate(kbar, r + step * k3)
        r += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (i + 1) in marks:
            checkpoints.append(((i + 1) * step, r))
    return checkpoints


# ---------------------------------------------------------------------------
# test shapes


def _curve_from_angles(theta: np.ndarray, phase: int, radius=1.0, scale_z=None) -> PhaseCurve:
    """Nodes on (radius sin theta, radius cos theta); theta measured from
    the top pole."""
    rr = radius * np.sin(theta)
    zz = (scale_z if scale_z is not None else radius) * np.cos(theta)
    nodes = np.column_stack([rr, zz])
    return PhaseCurve(phase, nodes)


def _snap_poles(mesh: TwoPhaseMesh) -> TwoPhaseMesh:
    mesh.gamma1.nodes[0, 0] = 0.0
    mesh.gamma2.nodes[-1, 0] = 0.0
    return mesh


def make_sphere(J1: int, J2: int, radius: float = 1.0, area_ratio: float = 0.5) -> TwoPhaseMesh:
    """Sphere split at the latitude giving the requested share of area to
    phase 1 (cap area fraction (1 - cos theta)/2)."""
    if not 0.0 < area_ratio < 1.0:
        raise ValueError("area_ratio must lie in (0, 1)")
    theta_c = float(np.arccos(1.0 - 2.0 * area_ratio))
    t1 = np.linspace(0.0, theta_c, J1 + 1)
    t2 = np.linspace(theta_c, np.pi, J2 + 1)
    return _snap_poles(
        TwoPhaseMesh(_curve_from_angles(t1, 1, radius), _curve_from_angles(t2, 2, radius))
    )


def make_quarter_pair(J1: int, J2: int) -> TwoPhaseMesh:
    """Unit sphere split at the equator; each phase a quarter circle."""
    return make_sphere(J1, J2, radius=1.0, area_ratio=0.5)


def make_perturbed_sphere(J1: int, J2: int) -> TwoPhaseMesh:
    """Unit sphere with a tangentially perturbed node distribution.

    The polar angle of node q is (1/2 - q) pi + 0.1 cos((1 - 4 q) pi / 2),
    which leaves the poles and the junction on their unperturbed positions
    but makes the spacing nonuniform in each phase.
    """
    curves = []
    for phase, J in ((1, J1), (2, J2)):
        h = 1.0 / (2 * J)
        q = (0.0 if phase == 1 else 0.5) + h * np.arange(J + 1)
        ang = (0.5 - q) * np.pi + 0.1 * np.cos((0.5 - 2.0 * q) * np.pi)
        nodes = np.column_stack([np.cos(ang), np.sin(ang)])
        curves.append(PhaseCurve(phase, nodes))
    return _snap_poles(TwoPhaseMesh(curves[0], curves[1]))


def make_cylinder(J1: int, J2: int, radius: float = 1.0, height: float = 1.0) -> TwoPhaseMesh:
    """Closed cylinder: phase 1 is the flat top cap, phase 2 the side wall
    plus the flat bottom cap."""
    z_top = height / 2.0
    r1 = np.linspace(0.0, radius, J1 + 1)
    g1 = PhaseCurve(1, np.column_stack([r1, np.full(J1 + 1, z_top)]))
    # phase 2: wall down, then bottom cap back to the axis
    n_wall = max(2, int(round(J2 * height / (height + radius))))
    n_cap = J2 - n_wall
    if n_cap < 2:
        n_cap = 2
        n_wall = J2 - 2
    zs = np.linspace(z_top, -z_top, n_wall + 1)
    wall = np.column_stack([np.full(n_wall + 1, radius), zs])
    rc = np.linspace(radius, 0.0, n_cap + 1)
    cap = np.column_stack([rc, np.full(n_cap + 1, -z_top)])
    g2 = PhaseCurve(2, np.vstack([wall, cap[1:]]))
    return TwoPhaseMesh(g1, g2)


def make_spheroid(
    J1: int,
    J2: int,
    v_r: float = 0.9,
    area_ratio: float = 0.1,
    total_area: float = 4.0 * np.pi,
) -> TwoPhaseMesh:
    """Prolate spheroid with prescribed reduced volume, split so phase 1
    holds the requested share of the total area, scaled to total_area."""
    if not 0.0 < v_r <= 1.0:
        raise ValueError("reduced volume must lie in (0, 1]")
    if not 0.0 < area_ratio < 1.0:
        raise ValueError("area_ratio must lie in (0, 1)")

    def reduced_volume_of(aspect: float) -> float:
        th = np.linspace(0.0, np.pi, 2049)
        mesh = TwoPhaseMesh(
            _curve_from_angles(th[:1025], 1, radius=1.0, scale_z=aspect),
            _curve_from_angles(th[1024:], 2, radius=1.0, scale_z=aspect),
        )
        _snap_poles(mesh)
        a = surface_area(mesh.gamma1) + surface_area(mesh.gamma2)
        v = enclosed_volume(mesh)
        return 6.0 * np.sqrt(np.pi) * v / a**1.5

    lo, hi = 1.0, 1.0
    if v_r >= reduced_volume_of(1.0):
        aspect = 1.0
    else:
        hi = 2.0
        while reduced_volume_of(hi) > v_r:
            hi *= 2.0
            if hi > 1e6:
                raise ValueError("cannot reach the requested reduced volume")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if reduced_volume_of(mid) > v_r:
                lo = mid
            else:
                hi = mid
        aspect = 0.5 * (lo + hi)

    # split angle for the area share on the fine profile
    th = np.linspace(0.0, np.pi, 4097)
    rr = np.sin(th)
    zz = aspect * np.cos(th)
    seg = np.hypot(np.diff(rr), np.diff(zz))
    ring = np.pi * (rr[:-1] + rr[1:]) * seg
    cum = np.concatenate([[0.0], np.cumsum(ring)])
    target = area_ratio * cum[-1]
    idx = int(np.searchsorted(cum, target))
    idx = min(max(idx, 2), th.size - 3)
    theta_c = th[idx]

    t1 = np.linspace(0.0, theta_c, J1 + 1)
    t2 = np.linspace(theta_c, np.pi, J2 + 1)
    mesh = TwoPhaseMesh(
        _curve_from_angles(t1, 1, radius=1.0, scale_z=aspect),
        _curve_from_angles(t2, 2, radius=1.0, scale_z=aspect),
    )
    _snap_poles(mesh)
    a = surface_area(mesh.gamma1) + surface_area(mesh.gamma2)
    s = np.sqrt(total_area / a)
    mesh.gamma1.nodes *= s
    mesh.gamma2.nodes *= s
    return mesh


def make_test_shapes(kind: str, J1: int, J2: int, **kwargs) -> TwoPhaseMesh:
    makers = {
        "sphere": make_sphere,
        "perturbed_sphere": make_perturbed_sphere,
        "quarter_pair": make_quarter_pair,
        "cylinder": make_cylinder,
        "spheroid": make_spheroid,
    }
    if kind not in makers:
        raise ValueError(f"unknown shape '{kind}'")
    return makers[kind](J1, J2, **kwargs)


# ---------------------------------------------------------------------------
# time loop


@dataclass
class FlowConfig:
    dt: float
    t_end: float
    mode: str = "free"
    variant: str = VARIANT_BETA
    stationarity_tol: float = 1e-6
    max_steps: int = 10_000_000
    newton_tol: float = 1e-10
    newton_max_iters: int = 20
    pinch_rtol: float = 1e-4
    snapshot_every: int = 0

    def __post_init__(self):
        if self.dt <= 0.0 or self.t_end <= 0.0:
            raise ValueError("dt and t_end must be positive")


@dataclass
class RunResult:
    status: str    # "t_end" | "stationary" | "degenerated" | "solver_failure"
    reason: str
    steps: int
    state: SchemeState
    diagnostics: list[Diagnostics] = field(default_factory=list)
    snapshots: list[SchemeState] = field(default_factory=list)
    targets: tuple[float, float, float] = (0.0, 0.0, 0.0)


def _initial_energy(state: SchemeState, params: PhysicalParams) -> float:
    conormal = junction_conormal(state.mesh, state.mesh, state.kappa, state.beta, params.c1)
    return discrete_energy(state.mesh, state.kappa, conormal, state.mesh, params)


def _light_validate(mesh: TwoPhaseMesh, c1: int, geos, tol: float) -> None:
    """Per-step admissibility checks using precomputed geometry."""
    for curve, geo in zip(mesh.curves, geos):
        r = curve.r
        sel = np.arange(curve.J + 1) != curve.pole_index
        if (r[sel] <= 0.0).any():
            node = int(np.nonzero(sel & (r <= 0.0))[0][0])
            raise AssumptionViolated("positivity", curve.phase, node,
                                     "interior/junction node with r <= 0")
        if (geo.frames.length <= tol).any():
            node = int(np.argmin(geo.frames.length))
            raise AssumptionViolated("distinct-consecutive", curve.phase, node,
                                     "consecutive nodes coincide")
    if c1:
        fr1, fr2 = geos[0].frames, geos[1].frames
        if np.hypot(*(fr1.edge[-1] + fr2.edge[0])) <= tol:
            raise AssumptionViolated("junction-neighbor-distinct", None, None,
                                     "the nodes next to the junction coincide")
        # the next-nearest condition is caught through vanishing averaged
        # normals when the geometry is built; the span condition through a
        # singular solve


def run(
    config: FlowConfig,
    params: PhysicalParams,
    mesh: TwoPhaseMesh,
    on_step=None,
    keep_snapshots: bool = False,
) -> RunResult:
    """Drive the flow from a mesh until t_end, stationarity or degeneration.

    on_step(step_index, state_prev, state_new, solution, diag) is invoked
    after every accepted step.
    """
    require_assumptions(mesh, params.c1)
    state = make_initial_data(mesh, params)
    targets = (
        surface_area(mesh.gamma1),
        surface_area(mesh.gamma2),
        enclosed_volume(mesh),
    )
    diameter0 = mesh.diameter()
    dist_tol = 1e-12 * max(diameter0, 1.0)
    r_min = config.pinch_rtol * diameter0
    speed_tol = config.stationarity_tol * diameter0

    assembler = SystemAssembler(
        DofLayout(mesh.gamma1.J, mesh.gamma2.J, params.c1, config.variant)
    )
    diag0 = make_diagnostics(0.0, mesh, _initial_energy(state, params))
    diags = [diag0]
    snapshots = [state] if keep_snapshots else []
    warm = MultiplierState(mode=config.mode)
    geos = make_geometry(state)

    n_steps = min(config.max_steps, int(np.ceil(config.t_end / config.dt - 1e-12)))
    status, reason = "t_end", ""
    step = 0
    for step in range(1, n_steps + 1):
        try:
            _light_validate(state.mesh, params.c1, geos, dist_tol)
            sol = newton_conserve(
                assembler,
                state,
                params,
                config.dt,
                config.mode,
                targets=targets,
                warm_start=warm,
                newton_tol=config.newton_tol,
                max_iters=config.newton_max_iters,
                geos=geos,
            )
        except (NewtonDiverged, SingularMatrix, SingularJacobian) as exc:
            status = "solver_failure"
            reason = f"step {step}: {exc}"
            log.warning("run stopped: %s", reason)
            step -= 1
            break
        except AssumptionViolated as exc:
            # mid-run loss of admissibility counts as degeneration; the
            # initial mesh was validated before the loop
            status = "degenerated"
            reason = f"step {step}: {exc}"
            log.warning("run stopped: %s", reason)
            step -= 1
            break
        warm = sol.multipliers
        t_new = step * config.dt
        new_mesh = state.mesh.displaced(sol.dX1, sol.dX2)
        conormal = junction_conormal(
            state.mesh, new_mesh, sol.kappa, sol.beta, params.c1,
            prev_frames=(geos[0].frames, geos[1].frames),
        )
        energy = discrete_energy(
            state.mesh, sol.kappa, conormal, new_mesh, params,
            prev_geometry=[(g.vframes.omega, g.m) for g in geos],
        )
        new_state = SchemeState(
            mesh=new_mesh, kappa=sol.kappa, Y1=sol.Y1, Y2=sol.Y2, beta=sol.beta, t=t_new
        )
        new_geos = make_geometry(new_state)
        diag = make_diagnostics(
            t_new, new_mesh, energy,
            lam=sol.multipliers.as_tuple(), beta=sol.beta,
            newton_iters=sol.newton_iters,
            lengths=(new_geos[0].frames.length, new_geos[1].frames.length),
        )
        diags.append(diag)
        if keep_snapshots or (
            config.snapshot_every and step % config.snapshot_every == 0
        ):
            snapshots.append(new_state)
        if on_step is not None:
            on_step(step, state, new_state, sol, diag)

        state = new_state
        geos = new_geos

        # pinch-off: a non-pole node reached the axis neighbourhood
        hit = False
        for curve in new_mesh.curves:
            sel = np.arange(curve.J + 1) != curve.pole_index
            if (curve.r[sel] < r_min).any():
                hit = True
        if hit:
            status, reason = "degenerated", f"pinch-off at step {step} (r < {r_min:.3e})"
            log.warning(reason)
            break
        if sol.max_displacement() / config.dt < speed_tol:
            status, reason = "stationary", f"stationary at step {step}"
            break

    return RunResult(
        status=status,
        reason=reason,
        steps=step,
        state=state,
        diagnostics=diags,
        snapshots=snapshots,
        targets=targets,
    )
