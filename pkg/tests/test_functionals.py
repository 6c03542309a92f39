import numpy as np
import pytest

from axibilayer.driver import make_cylinder, make_initial_data, make_quarter_pair, make_sphere
from axibilayer.errors import InvalidValue
from axibilayer.functionals import (
    PhysicalParams,
    discrete_energy,
    enclosed_volume,
    first_variation_area,
    first_variation_volume,
    junction_conormal,
    reduced_volume,
    surface_area,
)
from axibilayer.mesh import PhaseCurve, TwoPhaseMesh

from conftest import random_direction_pair, random_valid_mesh


def fd_area(curve, direction, eps=1e-6):
    up = PhaseCurve(curve.phase, curve.nodes + eps * direction)
    dn = PhaseCurve(curve.phase, curve.nodes - eps * direction)
    return (surface_area(up) - surface_area(dn)) / (2 * eps)


def fd_volume(mesh, d1, d2, eps=1e-6):
    up = mesh.displaced(eps * d1, eps * d2)
    dn = mesh.displaced(-eps * d1, -eps * d2)
    return (enclosed_volume(up) - enclosed_volume(dn)) / (2 * eps)


class TestPhysicalParams:
    def test_alpha_positive_required(self):
        with pytest.raises(InvalidValue):
            PhysicalParams(alpha=(0.0, 1.0))

    def test_gaussian_bound_warns_only(self):
        with pytest.warns(UserWarning):
            p = PhysicalParams(alpha=(0.1, 0.1), alphaG=(1.0, -1.0))
        assert p.alphaG == (1.0, -1.0)


class TestArea:
    def test_unit_cylinder_wall(self):
        z = np.linspace(1.0, 0.0, 9)
        wall = PhaseCurve(2, np.column_stack([np.ones(9), z]))
        assert surface_area(wall) == pytest.approx(2.0 * np.pi)

    def test_unit_semicircle_refined(self):
        mesh = make_sphere(64, 64)
        total = surface_area(mesh.gamma1) + surface_area(mesh.gamma2)
        assert abs(total - 4.0 * np.pi) <= 4e-2

    def test_single_element_cone(self):
        # one slanted element from (0,1) to (1,0) swept: area pi*sqrt(2);
        # padded with degenerate-free extra elements along the same line
        nodes = np.array([(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)])
        cone = PhaseCurve(1, nodes)
        assert surface_area(cone) == pytest.approx(np.pi * np.sqrt(2.0))

    def test_scaling_quadratic(self, rng):
        mesh = random_valid_mesh(rng)
        c = 1.7
        scaled = PhaseCurve(1, c * mesh.gamma1.nodes)
        assert surface_area(scaled) == pytest.approx(c**2 * surface_area(mesh.gamma1))


class TestVolume:
    def test_closed_cylinder(self):
        mesh = make_cylinder(8, 16, radius=1.5, height=2.0)
        assert enclosed_volume(mesh) == pytest.approx(np.pi * 1.5**2 * 2.0)

    def test_unit_sphere_refined(self):
        mesh = make_sphere(64, 64)
        assert abs(enclosed_volume(mesh) - 4.0 * np.pi / 3.0) <= 2e-2

    def test_reversed_traversal_flips_sign(self, rng):
        mesh = random_valid_mesh(rng)
        v = enclosed_volume(mesh)
        # same geometry, poles swapped: phase 1 now runs from the former
        # bottom pole to the junction, so the integrand changes sign
        flipped = TwoPhaseMesh(
            PhaseCurve(1, mesh.gamma2.nodes[::-1].copy()),
            PhaseCurve(2, mesh.gamma1.nodes[::-1].copy()),
        )
        assert enclosed_volume(flipped) == pytest.approx(-v)

    def test_scaling_cubic(self, rng):
        mesh = random_valid_mesh(rng)
        c = 0.8
        scaled = TwoPhaseMesh(
            PhaseCurve(1, c * mesh.gamma1.nodes), PhaseCurve(2, c * mesh.gamma2.nodes)
        )
        assert enclosed_volume(scaled) == pytest.approx(c**3 * enclosed_volume(mesh))

    def test_reduced_volume_bounded(self, rng):
        for k in range(20):
            mesh = random_valid_mesh(rng)
            assert reduced_volume(mesh) <= 1.0 + 1e-9
        assert reduced_volume(make_sphere(64, 64)) == pytest.approx(1.0, abs=2e-3)


class TestFirstVariations:
    def test_area_euler_identity(self):
        z = np.linspace(1.0, 0.0, 9)
        wall = PhaseCurve(2, np.column_stack([np.ones(9), z]))
        assert first_variation_area(wall, wall.nodes.copy()) == pytest.approx(
            2.0 * surface_area(wall)
        )

    def test_volume_euler_identity(self, unit_sphere_mesh):
        mesh = unit_sphere_mesh
        val = first_variation_volume(mesh, (mesh.gamma1.nodes, mesh.gamma2.nodes))
        assert val == pytest.approx(3.0 * enclosed_volume(mesh))

    def test_area_matches_finite_differences(self, rng):
        for _ in range(20):
            mesh = random_valid_mesh(rng)
            d1, _ = random_direction_pair(rng, mesh)
            exact = first_variation_area(mesh.gamma1, d1)
            approx = fd_area(mesh.gamma1, d1)
            assert abs(exact - approx) <= 1e-6 * max(1.0, abs(exact))

    def test_volume_matches_finite_differences(self, rng):
        for _ in range(20):
            mesh = random_valid_mesh(rng)
            d1, d2 = random_direction_pair(rng, mesh)
            exact = first_variation_volume(mesh, (d1, d2))
            approx = fd_volume(mesh, d1, d2)
            assert abs(exact - approx) <= 1e-6 * max(1.0, abs(exact))

    def test_vertical_slide_of_straight_wall(self):
        z = np.linspace(1.0, 0.0, 9)
        wall = PhaseCurve(2, np.column_stack([np.ones(9), z]))
        slide = np.zeros((9, 2))
        slide[1:-1, 1] = np.sin(np.linspace(0, np.pi, 7))
        assert first_variation_area(wall, slide) == pytest.approx(0.0, abs=1e-12)

    def test_volume_invariant_under_node_slide(self):
        # sliding nodes along straight runs of the polygon leaves the
        # revolved body unchanged
        mesh = make_cylinder(8, 16, radius=1.0, height=2.0)
        d1 = np.zeros_like(mesh.gamma1.nodes)
        d2 = np.zeros_like(mesh.gamma2.nodes)
        d1[2:-2, 0] = 0.37          # radial slide on the flat top cap
        edges = np.diff(mesh.gamma2.nodes, axis=0)
        runs = np.nonzero(
            (np.abs(edges[:-1, 0]) < 1e-14) & (np.abs(edges[1:, 0]) < 1e-14)
        )[0]
        d2[runs + 1, 1] = -0.21     # vertical slide on the wall
        val = first_variation_volume(mesh, (d1, d2))
        assert abs(val) <= 1e-12
        assert abs(fd_volume(mesh, d1, d2, eps=1e-5)) <= 1e-9


class TestJunctionConormal:
    def test_quarter_pair_conormals(self):
        mesh = make_quarter_pair(64, 64)
        state = make_initial_data(mesh, PhysicalParams(c1=1))
        con = junction_conormal(mesh, mesh, state.kappa, 0.0, c1=1)
        h = np.pi / 128
        assert np.allclose(con.m2, [0.0, 1.0], atol=5 * h)
        assert np.allclose(con.m1, [0.0, -1.0], atol=5 * h)

    def test_flat_disk_junction_in_plane(self):
        # both curves horizontal at the junction: conormals lie in the plane
        g1 = PhaseCurve(1, np.column_stack([np.linspace(0, 1, 9), np.ones(9)]))
        n2 = np.vstack([
            np.column_stack([np.linspace(1, 1.5, 5), np.ones(5)]),
            np.column_stack([np.full(4, 1.5), np.linspace(0.8, 0.0, 4)]),
        ])
        g2 = PhaseCurve(2, n2)
        mesh = TwoPhaseMesh(g1, g2)
        state = make_initial_data(mesh, PhysicalParams())
        con = junction_conormal(mesh, mesh, state.kappa, 0.0, c1=0)
        assert abs(con.m2[1]) <= 1e-12
        assert abs(con.m1[1]) <= 1e-12


class TestDiscreteEnergy:
    def test_unit_sphere_bending_energy(self):
        mesh = make_sphere(64, 64)
        state = make_initial_data(mesh, PhysicalParams())
        con = junction_conormal(mesh, mesh, state.kappa, 0.0, c1=0)
        e = discrete_energy(mesh, state.kappa, con, mesh, PhysicalParams())
        assert 0.99 * 8 * np.pi <= e <= 1.01 * 8 * np.pi

    def test_line_tension_term(self):
        mesh = make_sphere(64, 64)
        params = PhysicalParams(varsigma=0.02)
        state = make_initial_data(mesh, params)
        con = junction_conormal(mesh, mesh, state.kappa, 0.0, c1=0)
        base = discrete_energy(mesh, state.kappa, con, mesh, PhysicalParams())
        e = discrete_energy(mesh, state.kappa, con, mesh, params)
        rj = mesh.junction[0]
        assert e - base == pytest.approx(2.0 * np.pi * 0.02 * rj)

    def test_gaussian_term_small_at_equator(self):
        mesh = make_sphere(64, 64)
        params = PhysicalParams(alphaG=(0.7, -0.3))
        state = make_initial_data(mesh, params)
        con = junction_conormal(mesh, mesh, state.kappa, 0.0, c1=0)
        base = discrete_energy(mesh, state.kappa, con, mesh, PhysicalParams())
        e = discrete_energy(mesh, state.kappa, con, mesh, params)
        h = np.pi / 128
        assert abs(e - base) <= 2 * np.pi * h

    def test_translation_invariance(self, rng):
        mesh = random_valid_mesh(rng)
        params = PhysicalParams()
        state = make_initial_data(mesh, params)
        con = junction_conormal(mesh, mesh, state.kappa, 0.0, c1=0)
        e0 = discrete_energy(mesh, state.kappa, con, mesh, params)
        shift = np.array([0.0, 0.83])
        moved = mesh.displaced(
            np.broadcast_to(shift, mesh.gamma1.nodes.shape),
            np.broadcast_to(shift, mesh.gamma2.nodes.shape),
        )
        e1 = discrete_energy(moved, state.kappa, con, moved, params)
        assert e1 == pytest.approx(e0, rel=1e-12)
