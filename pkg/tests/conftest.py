"""Shared fixtures and mesh builders for the test suite."""

import numpy as np
import pytest

from axibilayer.driver import make_sphere
from axibilayer.mesh import PhaseCurve, TwoPhaseMesh


def random_valid_mesh(rng, J1=12, J2=10, junction_r=None):
    """Random smooth closed two-phase mesh: a radially perturbed sphere.

    Low-frequency radial perturbations keep the curve simple and the
    admissibility conditions satisfied.
    """
    amps = rng.uniform(-0.08, 0.08, size=4)
    split = junction_r if junction_r is not None else rng.uniform(0.35, 0.65)
    theta_c = np.pi * split

    def radius(theta):
        r = 1.0
        for k, a in enumerate(amps, start=1):
            r = r + a * np.cos(k * theta) / (k + 1)
        return r

    t1 = np.linspace(0.0, theta_c, J1 + 1)
    t2 = np.linspace(theta_c, np.pi, J2 + 1)
    curves = []
    for phase, tt in ((1, t1), (2, t2)):
        rr = radius(tt) * np.sin(tt)
        zz = radius(tt) * np.cos(tt)
        nodes = np.column_stack([rr, zz])
        nodes[0 if phase == 1 else -1, 0] = 0.0
        curves.append(PhaseCurve(phase, nodes))
    return TwoPhaseMesh(curves[0], curves[1])


def random_direction_pair(rng, mesh, zero_junction=False):
    """Random admissible displacement fields (pole r-components zero, shared
    junction value)."""
    d1 = rng.standard_normal(mesh.gamma1.nodes.shape)
    d2 = rng.standard_normal(mesh.gamma2.nodes.shape)
    d1[mesh.gamma1.pole_index, 0] = 0.0
    d2[mesh.gamma2.pole_index, 0] = 0.0
    if zero_junction:
        d1[mesh.gamma1.junction_index] = 0.0
        d2[mesh.gamma2.junction_index] = 0.0
    else:
        d2[mesh.gamma2.junction_index] = d1[mesh.gamma1.junction_index]
    return d1, d2


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def unit_sphere_mesh():
    return make_sphere(24, 24)
