"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line.  Heavy runs are shared through session fixtures.

Run with `pytest tests/test_acceptance.py -v -s`.
"""

import time

import numpy as np
import pytest

from axibilayer.assembly import (
    DofLayout,
    SystemAssembler,
    validate_assumptions,
)
from axibilayer.driver import (
    FlowConfig,
    OdeReference,
    make_initial_data,
    make_perturbed_sphere,
    make_sphere,
    make_spheroid,
    rk4_radius,
    run,
)
from axibilayer.functionals import (
    PhysicalParams,
    enclosed_volume,
    surface_area,
)
from axibilayer.mesh import PhaseCurve, TwoPhaseMesh
from axibilayer.solver import MultiplierState, linear_solve, newton_conserve
from axibilayer.verification import (
    compare_junction_drift,
    convergence_ladder,
    gauss_bonnet_check,
    junction_residuals,
)

from conftest import random_valid_mesh

REFERENCE_ERRORS = (4.4399e-02, 1.3277e-02, 3.8599e-03)
REFERENCE_DRIFTS = (3.9101e-02, 1.8489e-02, 9.1529e-03)
REFERENCE_EOC_ERR = (1.75, 1.79)
REFERENCE_EOC_DRIFT = (1.09, 1.02)


def report(name, ok, detail=""):
    print(f"[ACCEPT] {name}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


@pytest.fixture(scope="session")
def ladder():
    t0 = time.time()
    rows = convergence_ladder([(16, 8), (32, 16), (64, 32)], kbar=-1.0, T=1.0,
                              processes=3)
    wall = time.time() - t0
    return rows, wall


@pytest.fixture(scope="session")
def comparison_free():
    # steady quarter-circle pair at strongly asymmetric resolution
    return compare_junction_drift(65, 9, dt=1e-4, T=1.0)


@pytest.fixture(scope="session")
def comparison_conserving():
    params = PhysicalParams(kbar=(-0.5, -4.0), c1=1)
    mesh = make_sphere(65, 9, area_ratio=0.5)
    return compare_junction_drift(65, 9, dt=1e-4, T=0.1, params=params,
                                  mode="area", mesh=mesh)


@pytest.fixture(scope="session")
def perturbed_free_run():
    params = PhysicalParams(kbar=(-1.0, -1.0), c1=1)
    mesh = make_perturbed_sphere(16, 8)
    h = 0.2340801429379425
    return run(FlowConfig(dt=1e-3 * h * h, t_end=1.0, mode="free"), params, mesh)


class TestTable1:
    def test_radius_errors(self, ladder):
        rows, wall = ladder
        errs = [r.error for r in rows]
        rel = [abs(e - p) / p for e, p in zip(errs, REFERENCE_ERRORS)]
        ok = all(x <= 0.05 for x in rel)
        report(
            "table-1 L-inf radius errors within 5%", ok,
            f"got {[f'{e:.4e}' for e in errs]} vs {REFERENCE_ERRORS}, "
            f"rel dev {[f'{x:.1%}' for x in rel]}",
        )
        # known deviation: the scheme is verified against independent
        # dense and unreduced assembly oracles, exact gradient checks
        # and dt-refinement, yet sits ~6% above the reference error
        # constants; the reference run's implementation details beyond
        # the scheme itself are not available
        assert ok, f"relative deviations {rel} exceed 5%"

    def test_junction_drifts(self, ladder):
        rows, _ = ladder
        drifts = [r.drift for r in rows]
        rel = [abs(d - p) / p for d, p in zip(drifts, REFERENCE_DRIFTS)]
        ok = all(x <= 0.05 for x in rel)
        report(
            "table-1 junction drifts within 5%", ok,
            f"got {[f'{d:.4e}' for d in drifts]} vs {REFERENCE_DRIFTS}, "
            f"rel dev {[f'{x:.1%}' for x in rel]}",
        )
        assert ok, f"relative deviations {rel} exceed 5%"

    def test_error_orders(self, ladder):
        rows, _ = ladder
        eoc_err = [r.eoc_error for r in rows[1:]]
        eoc_drift = [r.eoc_drift for r in rows[1:]]
        ok = all(
            abs(e - p) <= 0.2 for e, p in zip(eoc_err, REFERENCE_EOC_ERR)
        ) and all(abs(e - p) <= 0.2 for e, p in zip(eoc_drift, REFERENCE_EOC_DRIFT))
        report(
            "table-1 EOCs within 0.2", ok,
            f"err EOC {[f'{e:.3f}' for e in eoc_err]} vs {REFERENCE_EOC_ERR}; "
            f"drift EOC {[f'{e:.3f}' for e in eoc_drift]} vs {REFERENCE_EOC_DRIFT}",
        )
        assert ok

    def test_runtime(self, ladder):
        rows, wall = ladder
        per_row = wall  # rows run concurrently; wall clock bounds each row
        ok = per_row <= 15 * 60
        report("table-1 runtime", ok, f"ladder wall time {wall:.0f}s (3 rows in parallel)")
        assert ok

    def test_equidistribution_ratios(self, ladder):
        rows, _ = ladder
        worst = max(max(r.ratio1, r.ratio2) for r in rows)
        ok = worst <= 1.0 + 1e-6
        report(
            "element ratios r^M = 1 within 1e-6", ok,
            f"worst ratio deviation {worst - 1.0:.2e}; while the shape "
            "still moves the mesh keeps a drift-coupled length gradient "
            "of first order in h; ratios reach 1 + 3e-11 at stationary "
            "states",
        )
        assert ok, f"worst ratio {worst}"


class TestConservation:
    def test_thousand_step_drift(self):
        params = PhysicalParams(kbar=(-0.5, -4.0), c1=1)
        mesh = make_spheroid(24, 40, v_r=0.9, area_ratio=0.3)
        targets = (
            surface_area(mesh.gamma1),
            surface_area(mesh.gamma2),
            enclosed_volume(mesh),
        )
        worst = [0.0]

        def hook(step, prev, new, sol, diag):
            worst[0] = max(
                worst[0],
                abs(diag.area1 - targets[0]) / targets[0],
                abs(diag.area2 - targets[1]) / targets[1],
                abs(diag.volume - targets[2]) / abs(targets[2]),
            )

        res = run(
            FlowConfig(dt=1e-5, t_end=1200 * 1e-5, mode="area_volume"),
            params, mesh, on_step=hook,
        )
        ok = res.steps >= 1000 and worst[0] <= 1e-8
        report(
            "conservation over 1000+ steps", ok,
            f"steps {res.steps}, worst relative drift {worst[0]:.2e}",
        )
        assert ok


class TestEnergyDecay:
    def test_free_flow_monotone(self, perturbed_free_run):
        E = np.array([d.energy for d in perturbed_free_run.diagnostics[1:]])
        inc = np.diff(E) - 1e-10 * np.abs(E[:-1])
        ok = bool((inc <= 0).all())
        report(
            "energy decay, free flow on perturbed sphere", ok,
            f"{E.size} steps, max relative increase "
            f"{(np.diff(E) / np.abs(E[:-1])).max():.2e}",
        )
        assert ok

    def test_conserving_run_monotone(self, comparison_conserving):
        rep = comparison_conserving
        ok = rep.max_increase_beta <= 1e-10
        report(
            "energy decay, conserving junction-dof run", ok,
            f"max relative increase {rep.max_increase_beta:.2e}",
        )
        assert ok

    def test_sideh_oscillates(self, comparison_conserving):
        rep = comparison_conserving
        ok = rep.max_increase_sideh > 1e-6
        report(
            "plain side constraint oscillates", ok,
            f"max relative increase {rep.max_increase_sideh:.2e}",
        )
        assert ok


class TestSteadySphere:
    def test_speed_second_order(self):
        params = PhysicalParams(kbar=(-1.0, -1.0), c1=1)
        speeds = []
        for J in (16, 32):
            mesh = make_sphere(J, J, radius=2.0)
            state = make_initial_data(mesh, params)
            asm = SystemAssembler(DofLayout(J, J, 1, "beta"))
            sol = newton_conserve(asm, state, params, 1e-5, "free")
            speeds.append(sol.max_displacement() / 1e-5)
        h = np.pi / 16
        ok = speeds[0] <= 5e5 * h * h and speeds[0] / speeds[1] >= 3.0
        report(
            "steady sphere speed = O(h^2)", ok,
            f"speeds {speeds[0]:.2f} -> {speeds[1]:.2f}, "
            f"reduction {speeds[0] / speeds[1]:.2f}x per halving",
        )
        assert ok


class TestOdeOracle:
    def test_implicit_vs_rk4(self):
        ode = OdeReference(-1.0)
        worst = 0.0
        for t, r in rk4_radius(-1.0, 1.0, step=1e-6):
            worst = max(worst, abs(ode.radius(t) - r))
        ok = worst <= 1e-9
        report("radius formula vs RK4(1e-6)", ok, f"max deviation {worst:.2e}")
        assert ok


class TestJunctionJump:
    def test_curvature_jump(self):
        params = PhysicalParams(kbar=(-0.5, -4.0), c1=1)
        mesh = make_sphere(32, 32, area_ratio=0.5)
        res = run(
            FlowConfig(dt=1e-4, t_end=1.0, mode="area", max_steps=10000),
            params, mesh,
        )
        last = res.diagnostics[-1]
        ms = MultiplierState(lam_a=np.array([last.lam_a1, last.lam_a2]),
                             lam_v=0.0, mode="area")
        diag = junction_residuals(res.state, params, ms)
        ok = abs(diag.kappa_jump - 3.5) <= 0.05 * 3.5
        report(
            "junction curvature jump 3.5 within 5%", ok,
            f"jump {diag.kappa_jump:.4f}",
        )
        assert ok


class TestDriftComparison:
    # thresholds frozen from the first oracle run of this experiment and
    # committed: junction-dof drift 1.54e-1, plain side constraint 4.85e-1
    # (ratio 0.32); the junction degree of freedom suppresses most but not
    # all of the discretization-induced junction motion at this strongly
    # asymmetric resolution
    FROZEN_RATIO = 0.4
    FROZEN_ABS = 0.2

    def test_junction_dof_wins(self, comparison_free):
        rep = comparison_free
        ok = (
            rep.drift_beta < self.FROZEN_RATIO * rep.drift_sideh
            and rep.drift_beta <= self.FROZEN_ABS
        )
        report(
            "junction drift comparison", ok,
            f"junction-dof drift {rep.drift_beta:.3e} vs plain {rep.drift_sideh:.3e} "
            f"(ratio {rep.drift_beta / rep.drift_sideh:.2f})",
        )
        assert ok


class TestGaussBonnet:
    def test_closure_and_order(self):
        defects = []
        for J in (32, 64, 128):
            mesh = make_sphere(J, J)
            state = make_initial_data(mesh, PhysicalParams())
            defects.append(abs(gauss_bonnet_check(mesh, state.kappa)))
        ok = defects[-1] <= 0.02 * 4 * np.pi and all(
            defects[k] / defects[k + 1] >= 3.0 for k in range(len(defects) - 1)
        )
        report(
            "total curvature closes to 4 pi", ok,
            f"defects {[f'{d:.2e}' for d in defects]} "
            f"(J=128 relative {defects[-1] / (4 * np.pi):.2e})",
        )
        assert ok


class TestWellPosedness:
    def test_random_meshes_and_rejections(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for k in range(50):
            c1 = k % 2
            mesh = random_valid_mesh(rng, J1=8 + (k % 5), J2=6 + (k % 4))
            params = PhysicalParams(kbar=(-1.0, -0.5), c1=c1)
            assert validate_assumptions(mesh, c1).ok
            state = make_initial_data(mesh, params)
            asm = SystemAssembler(DofLayout(mesh.gamma1.J, mesh.gamma2.J, c1, "beta"))
            system = asm.assemble(state, params, dt=1e-4)
            _, res = linear_solve(system)
            worst = max(worst, res)
        ok = worst <= 1e-10

        # constructed violations are rejected before assembly, by name
        g1 = PhaseCurve(1, np.array([(0.0, 1.0), (0.5, 0.8), (0.0, 0.5),
                                     (0.6, 0.2), (0.8, 0.0)]))
        t = np.linspace(np.arctan2(0.8, 0.0), np.pi, 5)
        g2 = PhaseCurve(2, np.column_stack([0.8 * np.sin(t), 0.8 * np.cos(t)]))
        g2.nodes[0] = (0.8, 0.0)
        g2.nodes[-1, 0] = 0.0
        rep = validate_assumptions(TwoPhaseMesh(g1, g2), c1=1)
        named = {c.assumption for c in rep.failures()}
        ok = ok and "positivity" in named
        flat1 = PhaseCurve(1, np.column_stack([np.linspace(0, 1, 6), np.ones(6)]))
        flat2 = PhaseCurve(2, np.column_stack(
            [np.linspace(1, 0, 6), 1 + np.linspace(0, -1, 6)]))
        rep2 = validate_assumptions(TwoPhaseMesh(flat1, flat2), c1=1)
        named2 = {c.assumption for c in rep2.failures()}
        ok = ok and "normal-span" in named2
        report(
            "well-posedness gate", ok,
            f"50 random meshes, worst solve residual {worst:.2e}; "
            f"violations named: {sorted(named | named2)}",
        )
        assert ok
