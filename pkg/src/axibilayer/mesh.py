"""Discrete generating curves and their mass-lumped calculus.

A two-phase axisymmetric surface is described by two polygonal generating
curves in the (r, z) half plane.  Phase 1 runs from the top pole (on the
rotation axis) down to the junction, phase 2 from the junction to the
bottom pole.  Each curve is a piecewise linear map from an equispaced
parameter grid; phase 1 covers the parameter interval [0, 1/2], phase 2
covers [1/2, 1].

Conventions used throughout:

* perp of a vector: (a, b)^perp = (b, -a) (clockwise quarter turn);
* element tangent tau points in the direction of increasing parameter;
* element normal nu = -tau^perp, which is the outward normal of the
  revolved surface for the orientation above;
* curve curvature of the unit circle is -1 and the unit sphere has mean
  curvature -2 with these signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMesh, NonFiniteInput

# Relative threshold for node-distinctness checks, scaled by curve diameter.
DISTINCT_RTOL = 1e-12


def perp(a: np.ndarray) -> np.ndarray:
    """Clockwise quarter turn, (a, b) -> (b, -a). Works on (..., 2) arrays."""
    out = np.empty_like(a)
    out[..., 0] = a[..., 1]
    out[..., 1] = -a[..., 0]
    return out


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Scalar cross product of (..., 2) arrays."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass
class PhaseCurve:
    """One polygonal generating curve.

    nodes is a (J+1, 2) array of (r, z) positions; J >= 3 elements.  The
    pole node (r = 0) is node 0 for phase 1 and node J for phase 2; the
    junction is the opposite end.
    """

    phase: int
    nodes: np.ndarray

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if self.phase not in (1, 2):
            raise ValueError("phase must be 1 or 2")
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise ValueError("nodes must be a (J+1, 2) array")
        # the evolution scheme needs J >= 3 (checked at validation); the
        # plain curve calculus already works with two elements
        if self.nodes.shape[0] < 3:
            raise ValueError("need at least 2 elements per curve")
        if not np.isfinite(self.nodes).all():
            raise NonFiniteInput("curve nodes contain NaN/Inf")

    @property
    def J(self) -> int:
        """Number of elements."""
        return self.nodes.shape[0] - 1

    @property
    def h(self) -> float:
        """Parameter-grid spacing, h = 1 / (2 J)."""
        return 1.0 / (2 * self.J)

    @property
    def pole_index(self) -> int:
        return 0 if self.phase == 1 else self.J

    @property
    def junction_index(self) -> int:
        return self.J if self.phase == 1 else 0

    @property
    def r(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def z(self) -> np.ndarray:
        return self.nodes[:, 1]

    def param_nodes(self) -> np.ndarray:
        """Parameter values q_j of the nodes."""
        start = 0.0 if self.phase == 1 else 0.5
        return start + self.h * np.arange(self.J + 1)

    def diameter(self) -> float:
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def copy(self) -> "PhaseCurve":
        return PhaseCurve(self.phase, self.nodes.copy())

    def displaced(self, delta: np.ndarray) -> "PhaseCurve":
        return PhaseCurve(self.phase, self.nodes + delta)


@dataclass
class TwoPhaseMesh:
    """Two generating curves sharing their junction node."""

    gamma1: PhaseCurve
    gamma2: PhaseCurve

    def __post_init__(self):
        if self.gamma1.phase != 1 or self.gamma2.phase != 2:
            raise ValueError("gamma1 must be phase 1 and gamma2 phase 2")
        a = self.gamma1.nodes[self.gamma1.junction_index]
        b = self.gamma2.nodes[self.gamma2.junction_index]
        tol = DISTINCT_RTOL * max(self.diameter(), 1.0)
        if np.hypot(*(a - b)) > tol:
            raise DegenerateMesh(
                f"junction mismatch: phase 1 ends at {a}, phase 2 starts at {b}"
            )
        # Keep the shared node bit-identical.
        self.gamma2.nodes[0] = a

    @property
    def curves(self) -> tuple[PhaseCurve, PhaseCurve]:
        return (self.gamma1, self.gamma2)

    @property
    def junction(self) -> np.ndarray:
        return self.gamma1.nodes[self.gamma1.junction_index]

    def diameter(self) -> float:
        allnodes = np.vstack([self.gamma1.nodes, self.gamma2.nodes])
        lo = allnodes.min(axis=0)
        hi = allnodes.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def copy(self) -> "TwoPhaseMesh":
        return TwoPhaseMesh(self.gamma1.copy(), self.gamma2.copy())

    def displaced(self, d1: np.ndarray, d2: np.ndarray) -> "TwoPhaseMesh":
        return TwoPhaseMesh(self.gamma1.displaced(d1), self.gamma2.displaced(d2))


@dataclass
class ElementFrames:
    """Per-element geometry of one curve: edges, lengths, unit frames."""

    edge: np.ndarray     # (J, 2) node differences
    length: np.ndarray   # (J,) edge lengths
    tau: np.ndarray      # (J, 2) unit tangents
    nu: np.ndarray       # (J, 2) unit normals, outward for standard orientation

    @property
    def metric(self) -> np.ndarray:
        """|X_rho| per element for the equispaced parameter grid."""
        return self.length / self._h

    _h: float = field(default=0.0, repr=False)


def element_frames(curve: PhaseCurve) -> ElementFrames:
    """Edge vectors, lengths and unit tangent/normal per element."""
    edge = np.diff(curve.nodes, axis=0)
    length = np.hypot(edge[:, 0], edge[:, 1])
    tol = DISTINCT_RTOL * max(curve.diameter(), 1.0)
    if (length <= tol).any():
        j = int(np.argmin(length))
        raise DegenerateMesh(
            f"phase {curve.phase}: element {j + 1} degenerate (length {length[j]:.3e})"
        )
    tau = edge / length[:, None]
    nu = -perp(tau)
    f = ElementFrames(edge=edge, length=length, tau=tau, nu=nu)
    f._h = curve.h
    return f


def node_weights(frames: ElementFrames) -> np.ndarray:
    """Mass-lumped node weights: half the total length of adjacent edges."""
    L = frames.length
    m = np.zeros(L.size + 1)
    m[:-1] += 0.5 * L
    m[1:] += 0.5 * L
    return m


def weighted_normals(frames: ElementFrames) -> np.ndarray:
    """Unnormalized vertex normals w_j = (L_j nu_j + L_{j+1} nu_{j+1}) / 2.

    Boundary nodes see only their single adjacent element, so w there is
    half an edge length times that element's normal.
    """
    Lnu = frames.length[:, None] * frames.nu
    w = np.zeros((frames.length.size + 1, 2))
    w[:-1] += 0.5 * Lnu
    w[1:] += 0.5 * Lnu
    return w


@dataclass
class VertexFrames:
    """Per-node quantities: averaged normal, its direction, motion projector."""

    omega: np.ndarray   # (J+1, 2) mass-lumped projection of the element normals
    v: np.ndarray       # (J+1, 2) omega / |omega|
    Q: np.ndarray       # (J+1, 2, 2) v otimes v, identity at the junction node
    zweight: np.ndarray  # (J+1,) 2 at the pole node, 1 elsewhere


def vertex_normals(curve: PhaseCurve, frames: ElementFrames | None = None) -> VertexFrames:
    """Mass-lumped vertex normals and the nodal motion projector.

    omega solves the diagonal projection (omega, phi |X_rho|)^h =
    (nu, phi |X_rho|)^h for all nodal phi; a vanishing omega means the two
    edges at a node fold back onto each other.
    """
    if frames is None:
        frames = element_frames(curve)
    w = weighted_normals(frames)
    m = node_weights(frames)
    omega = w / m[:, None]
    norms = np.hypot(omega[:, 0], omega[:, 1])
    tol = DISTINCT_RTOL * 10.0
    if (norms <= tol).any():
        j = int(np.argmin(norms))
        raise DegenerateMesh(
            f"phase {curve.phase}: averaged normal vanishes at node {j} "
            "(next-nearest nodes coincide)"
        )
    v = omega / norms[:, None]
    Q = v[:, :, None] * v[:, None, :]
    Q[curve.junction_index] = np.eye(2)
    zweight = np.ones(curve.J + 1)
    zweight[curve.pole_index] = 2.0
    return VertexFrames(omega=omega, v=v, Q=Q, zweight=zweight)


def _element_end_values(f, curve: PhaseCurve):
    """Normalize a field to its (J, 2, ...) element-end values.

    Accepts scalars, nodal arrays of shape (J+1, ...) for continuous
    piecewise linears, or already element-end arrays of shape (J, 2, ...)
    for fields with jumps at the nodes.
    """
    J = curve.J
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        return np.broadcast_to(f, (J, 2))
    if f.shape[0] == J + 1:
        out = np.empty((J, 2) + f.shape[1:])
        out[:, 0] = f[:-1]
        out[:, 1] = f[1:]
        return out
    if f.shape[0] == J and f.ndim >= 2 and f.shape[1] == 2:
        return f
    raise ValueError(f"cannot interpret field of shape {f.shape} on a {J}-element curve")


def metric_field(curve: PhaseCurve, frames: ElementFrames | None = None) -> np.ndarray:
    """|X_rho| as an element-end field, usable in mass_lumped_ip."""
    if frames is None:
        frames = element_frames(curve)
    vals = frames.length / curve.h
    return np.stack([vals, vals], axis=1)


def mass_lumped_ip(f, g, curve: PhaseCurve) -> float:
    """Mass-lumped inner product of two piecewise fields on one curve.

    Evaluates (h/2) * sum over elements of the integrand at both element
    ends, taking one-sided limits; vector-valued fields are contracted
    componentwise.
    """
    fe = _element_end_values(f, curve)
    ge = _element_end_values(g, curve)
    prod = fe * ge
    while prod.ndim > 2:
        prod = prod.sum(axis=-1)
    return float(0.5 * curve.h * prod.sum())


def discrete_mean_curvature(
    curve: PhaseCurve, kappa: np.ndarray, vframes: VertexFrames | None = None
) -> np.ndarray:
    """Nodal mean-curvature field of the revolved surface.

    At non-pole nodes this is kappa - (omega . e1) / r; at the pole the
    axial limit gives twice the curve curvature.
    """
    if vframes is None:
        vframes = vertex_normals(curve)
    kappa = np.asarray(kappa, dtype=float)
    r = curve.r
    out = np.empty_like(kappa)
    pole = curve.pole_index
    nonpole = np.arange(curve.J + 1) != pole
    if (r[nonpole] <= 0.0).any():
        j = int(np.nonzero(nonpole & (r <= 0.0))[0][0])
        raise DegenerateMesh(f"phase {curve.phase}: node {j} lies on the axis (r <= 0)")
    out[nonpole] = kappa[nonpole] - vframes.omega[nonpole, 0] / r[nonpole]
    out[pole] = 2.0 * kappa[pole]
    return out


@dataclass
class CurvatureState:
    """Nodal curvature fields of both curves; pole values are pinned to 0."""

    kappa1: np.ndarray
    kappa2: np.ndarray

    def __post_init__(self):
        self.kappa1 = np.asarray(self.kappa1, dtype=float)
        self.kappa2 = np.asarray(self.kappa2, dtype=float)

    def kappa(self, phase: int) -> np.ndarray:
        return self.kappa1 if phase == 1 else self.kappa2

    def mean_curvature(self, mesh: TwoPhaseMesh) -> tuple[np.ndarray, np.ndarray]:
        return (
            discrete_mean_curvature(mesh.gamma1, self.kappa1),
            discrete_mean_curvature(mesh.gamma2, self.kappa2),
        )


def equidistribution_report(curve: PhaseCurve, rtol: float = 1e-9):
    """Check the interior-node certificate: adjacent edges are equal in
    length or parallel.

    Returns (ok, worst) where worst is the largest combined deviation
    min(relative length mismatch, parallelism defect) over interior nodes.
    """
    frames = element_frames(curve)
    L = frames.length
    tau = frames.tau
    scale = L.max()
    len_dev = np.abs(L[1:] - L[:-1]) / scale
    par_dev = np.abs(cross2(tau[:-1], tau[1:]))
    dev = np.minimum(len_dev, par_dev)
    worst = float(dev.max()) if dev.size else 0.0
    return worst <= rtol, worst


def element_ratio(curve: PhaseCurve) -> float:
    """Max over min edge length of one curve (>= 1, equal to 1 when
    equidistributed)."""
    L = element_frames(curve).length
    return float(L.max() / L.min())
