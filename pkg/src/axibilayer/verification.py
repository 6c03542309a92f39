"""Verification instruments: convergence study against the shrinking/growing
sphere, total-curvature closure, junction-condition residuals and the
junction-motion scheme comparison."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from .assembly import VARIANT_BETA, VARIANT_SIDEH, SchemeState
from .driver import (
    FlowConfig,
    OdeReference,
    RunResult,
    make_perturbed_sphere,
    make_quarter_pair,
    run,
)
from .functionals import (
    PhysicalParams,
    TWO_PI,
    junction_conormal,
)
from .mesh import (
    CurvatureState,
    TwoPhaseMesh,
    element_frames,
    element_ratio,
    node_weights,
    vertex_normals,
)
from .solver import MultiplierState

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# sphere convergence study


def linf_radius_error(trajectory, ode: OdeReference) -> float:
    """Largest deviation of any node radius from the reference sphere over
    a recorded trajectory of (t, mesh) pairs."""
    worst = 0.0
    for t, mesh in trajectory:
        R = ode.radius(t)
        for curve in mesh.curves:
            rr = np.hypot(curve.nodes[:, 0], curve.nodes[:, 1])
            worst = max(worst, float(np.abs(rr - R).max()))
    return worst


@dataclass
class ConvergenceRow:
    elements: tuple[int, int]
    h: float
    error: float
    eoc_error: float | None
    drift: float
    eoc_drift: float | None
    ratio1: float
    ratio2: float

    COLUMNS = ("J1", "J2", "h", "err", "EOC_err", "drift", "EOC_drift", "rM1", "rM2")

    def row(self):
        return (
            self.elements[0], self.elements[1], self.h,
            self.error, self.eoc_error if self.eoc_error is not None else float("nan"),
            self.drift, self.eoc_drift if self.eoc_drift is not None else float("nan"),
            self.ratio1, self.ratio2,
        )


def _ladder_row(args):
    (J1, J2, kbar, T) = args
    params = PhysicalParams(kbar=(kbar, kbar), c1=1)
    mesh = make_perturbed_sphere(J1, J2)
    h = max(
        element_frames(mesh.gamma1).length.max(),
        element_frames(mesh.gamma2).length.max(),
    )
    dt = 1e-3 * h * h
    ode = OdeReference(kbar)
    worst = [0.0]

    def hook(step, prev, new, sol, diag):
        R = ode.radius(new.t)
        for curve in new.mesh.curves:
            rr = np.hypot(curve.nodes[:, 0], curve.nodes[:, 1])
            worst[0] = max(worst[0], float(np.abs(rr - R).max()))

    result = run(FlowConfig(dt=dt, t_end=T, mode="free"), params, mesh, on_step=hook)
    R_end = ode.radius(result.state.t)
    jr, jz = result.state.mesh.junction
    drift = float(np.hypot(jr - R_end, jz))
    return {
        "elements": (J1, J2),
        "h": float(h),
        "error": worst[0],
        "drift": drift,
        "ratio1": element_ratio(result.state.mesh.gamma1),
        "ratio2": element_ratio(result.state.mesh.gamma2),
    }


def convergence_ladder(resolutions, kbar: float = -1.0, T: float = 1.0, processes: int = 1):
    """Run the sphere convergence protocol over a list of element-count
    pairs and attach experimental orders of convergence."""
    jobs = [(J1, J2, kbar, T) for (J1, J2) in resolutions]
    if processes > 1 and len(jobs) > 1:
        with get_context("spawn").Pool(min(processes, len(jobs))) as pool:
            raw = pool.map(_ladder_row, jobs)
    else:
        raw = [_ladder_row(j) for j in jobs]
    rows: list[ConvergenceRow] = []
    for k, r in enumerate(raw):
        eoc_e = eoc_d = None
        if k > 0:
            lh = np.log(raw[k - 1]["h"] / r["h"])
            eoc_e = float(np.log(raw[k - 1]["error"] / r["error"]) / lh)
            eoc_d = float(np.log(raw[k - 1]["drift"] / r["drift"]) / lh)
        rows.append(
            ConvergenceRow(
                elements=r["elements"], h=r["h"], error=r["error"],
                eoc_error=eoc_e, drift=r["drift"], eoc_drift=eoc_d,
                ratio1=r["ratio1"], ratio2=r["ratio2"],
            )
        )
    return rows


# ---------------------------------------------------------------------------
# total-curvature closure (two disks glued along the junction circle)


def gauss_bonnet_check(mesh: TwoPhaseMesh, kappa: CurvatureState) -> float:
    """Defect of the discrete total Gaussian curvature against 4 pi.

    The surface quadrature uses the mass-lumped product of the Gaussian
    curvature kappa (frak - kappa); the boundary contribution enters
    through the radial components of the reconstructed junction conormals.
    """
    total = 0.0
    for curve, kap in zip(mesh.curves, (kappa.kappa1, kappa.kappa2)):
        frames = element_frames(curve)
        vf = vertex_normals(curve, frames)
        m = node_weights(frames)
        pole = curve.pole_index
        sel = np.arange(curve.J + 1) != pole
        gauss = np.empty(curve.J + 1)
        gauss[sel] = -kap[sel] * vf.omega[sel, 0] / curve.r[sel]
        gauss[pole] = kap[pole] ** 2
        total += TWO_PI * float(np.sum(gauss * curve.r * m))
    con = junction_conormal(mesh, mesh, kappa, 0.0, c1=0)
    boundary = TWO_PI * float(con.m1[0] + con.m2[0])
    return float(total + boundary - 4.0 * np.pi)


# ---------------------------------------------------------------------------
# junction-condition residuals


@dataclass
class JunctionDiagnostics:
    """Discrete evaluations of the junction balance laws."""

    frak1: float                 # surface mean curvature, phase-1 side
    frak2: float
    kappa_jump: float            # frak1 - frak2
    dfrak1: float                # one-sided arclength derivatives
    dfrak2: float
    k_normal: tuple[float, float]    # boundary normal curvature proxies
    k_conormal: tuple[float, float]  # boundary geodesic curvature proxies
    res_curvature: float         # first junction balance (per junction type)
    res_derivative: float        # C1 derivative balance
    res_force: float             # C1 tangential force balance

    COLUMNS = (
        "frak1", "frak2", "kappa_jump", "dfrak1", "dfrak2",
        "kn1", "kn2", "kmu1", "kmu2",
        "res_curvature", "res_derivative", "res_force",
    )

    def row(self):
        return (
            self.frak1, self.frak2, self.kappa_jump, self.dfrak1, self.dfrak2,
            self.k_normal[0], self.k_normal[1],
            self.k_conormal[0], self.k_conormal[1],
            self.res_curvature, self.res_derivative, self.res_force,
        )


def junction_residuals(
    state: SchemeState,
    params: PhysicalParams,
    multipliers: MultiplierState | None = None,
) -> JunctionDiagnostics:
    """Evaluate the junction conditions with one-sided differences.

    Meaningful as equilibrium diagnostics; all quantities are finite on
    valid meshes (junction radius positive).
    """
    mesh = state.mesh
    lam = multipliers.lam_a if multipliers is not None else np.zeros(2)
    frak = state.kappa.mean_curvature(mesh)
    rj = mesh.junction[0]

    fj = []
    dfj = []
    om_j = []
    kap_j = []
    for curve, fr in zip(mesh.curves, frak):
        frames = element_frames(curve)
        vf = vertex_normals(curve, frames)
        jn = curve.junction_index
        fj.append(float(fr[jn]))
        kap_j.append(float(state.kappa.kappa(curve.phase)[jn]))
        om_j.append(vf.omega[jn])
        if curve.phase == 1:
            dfj.append(float((fr[jn] - fr[jn - 1]) / frames.length[jn - 1]))
        else:
            # derivative taken towards the interior of phase 2
            dfj.append(float((fr[1] - fr[0]) / frames.length[0]))

    con = junction_conormal(mesh, mesh, state.kappa, state.beta, params.c1)
    mu1 = con.m1 / max(np.hypot(*con.m1), 1e-300)
    mu2 = con.m2 / max(np.hypot(*con.m2), 1e-300)
    k_normal = (-om_j[0][0] / rj, -om_j[1][0] / rj)
    k_conormal = (-mu1[0] / rj, -mu2[0] / rj)

    a1, aG1, kb1 = params.for_phase(1)
    a2, aG2, kb2 = params.for_phase(2)
    if params.c1:
        nu_e1 = 0.5 * (om_j[0][0] + om_j[1][0])
        res_curv = (a2 * (fj[1] - kb2) - a1 * (fj[0] - kb1)) - (aG2 - aG1) * nu_e1 / rj
        res_deriv = -(a2 * dfj[1] - a1 * dfj[0]) - params.varsigma * nu_e1 / rj
        force = lambda a, f, kb, kap, l: (  # noqa: E731
            -0.5 * a * (f - kb) ** 2 + a * (f - kb) * kap - l
        )
        res_force = (
            force(a2, fj[1], kb2, kap_j[1], lam[1])
            - force(a1, fj[0], kb1, kap_j[0], lam[0])
            - params.varsigma * mu2[0] / rj
        )
    else:
        r1 = a1 * (fj[0] - kb1) - aG1 * om_j[0][0] / rj
        r2 = a2 * (fj[1] - kb2) - aG2 * om_j[1][0] / rj
        res_curv = max(abs(r1), abs(r2))
        res_deriv = float("nan")
        res_force = float("nan")

    return JunctionDiagnostics(
        frak1=fj[0], frak2=fj[1], kappa_jump=fj[0] - fj[1],
        dfrak1=dfj[0], dfrak2=dfj[1],
        k_normal=k_normal, k_conormal=k_conormal,
        res_curvature=float(res_curv),
        res_derivative=float(res_deriv),
        res_force=float(res_force),
    )


# ---------------------------------------------------------------------------
# junction drift scheme comparison


@dataclass
class ComparisonReport:
    drift_beta: float
    drift_sideh: float
    energy_beta: list[float]
    energy_sideh: list[float]
    max_increase_beta: float
    max_increase_sideh: float
    result_beta: RunResult
    result_sideh: RunResult

    @property
    def statuses(self) -> tuple[str, str]:
        return (self.result_beta.status, self.result_sideh.status)


def _relative_increases(energies) -> float:
    e = np.asarray(energies)
    if e.size < 2:
        return 0.0
    rel = np.diff(e) / np.maximum(np.abs(e[:-1]), 1e-300)
    return float(rel.max())


def compare_junction_drift(
    J1: int,
    J2: int,
    dt: float,
    T: float,
    params: PhysicalParams | None = None,
    mode: str = "free",
    mesh: TwoPhaseMesh | None = None,
) -> ComparisonReport:
    """Run the same flow with the junction degree of freedom and with the
    plain side constraint, and compare junction motion and energy decay.

    The default setup is the steady quarter-circle pair, where any
    junction motion is purely numerical.
    """
    if params is None:
        params = PhysicalParams(c1=1)
    if params.c1 != 1:
        raise ValueError("the comparison needs a matched-normal junction")
    base = mesh if mesh is not None else make_quarter_pair(J1, J2)
    start = base.junction.copy()
    results = {}
    for variant in (VARIANT_BETA, VARIANT_SIDEH):
        cfg = FlowConfig(dt=dt, t_end=T, mode=mode, variant=variant)
        results[variant] = run(cfg, params, base.copy())
    rep = {}
    for variant, res in results.items():
        jr, jz = res.state.mesh.junction
        rep[variant] = float(np.hypot(jr - start[0], jz - start[1]))
    e_beta = [d.energy for d in results[VARIANT_BETA].diagnostics[1:]]
    e_sideh = [d.energy for d in results[VARIANT_SIDEH].diagnostics[1:]]
    return ComparisonReport(
        drift_beta=rep[VARIANT_BETA],
        drift_sideh=rep[VARIANT_SIDEH],
        energy_beta=e_beta,
        energy_sideh=e_sideh,
        max_increase_beta=_relative_increases(e_beta),
        max_increase_sideh=_relative_increases(e_sideh),
        result_beta=results[VARIANT_BETA],
        result_sideh=results[VARIANT_SIDEH],
    )
