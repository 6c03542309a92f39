"""Assembly of the implicit time-step system.

One step of the scheme couples the nodal displacement, the nodal curvature
and the curvature-multiplier field (plus, for matched-normal junctions, a
scalar junction degree of freedom) into one square sparse linear system.
Junction sharing, pole pinning and the junction conditions on the
multiplier field are folded in by degree-of-freedom elimination; the two
pole conditions on the multiplier's radial component are kept as explicit
identity rows so the system stays square.

Assembly happens in two stages: all bilinear terms are first written in
"raw" per-phase nodal coordinates with static sparsity templates, then
mapped to the reduced unknowns through per-column affine maps
(value = coeff * unknown + const) and a raw-row -> reduced-row map.  The
templates are built once per layout; only the numeric values change from
step to step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssumptionViolated, NonFiniteInput
from .functionals import PhysicalParams, TWO_PI
from .mesh import (
    CurvatureState,
    DISTINCT_RTOL,
    ElementFrames,
    PhaseCurve,
    TwoPhaseMesh,
    VertexFrames,
    cross2,
    element_frames,
    node_weights,
    perp,
    vertex_normals,
    weighted_normals,
)

VARIANT_BETA = "beta"
VARIANT_SIDEH = "sideh"

MODE_COLUMNS = {
    "free": (),
    "area": ("A1", "A2"),
    "volume": ("V",),
    "area_volume": ("A1", "A2", "V"),
}


@dataclass
class SchemeState:
    """Full state of the evolution at one time level."""

    mesh: TwoPhaseMesh
    kappa: CurvatureState
    Y1: np.ndarray
    Y2: np.ndarray
    beta: float = 0.0
    t: float = 0.0

    def Y(self, phase: int) -> np.ndarray:
        return self.Y1 if phase == 1 else self.Y2


@dataclass
class AssumptionCheck:
    assumption: str
    passed: bool
    phase: int | None = None
    node: int | None = None
    detail: str = ""


@dataclass
class AssumptionReport:
    checks: list[AssumptionCheck]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def first_failure(self) -> AssumptionCheck | None:
        fails = self.failures()
        return fails[0] if fails else None


def validate_assumptions(mesh: TwoPhaseMesh, c1: int) -> AssumptionReport:
    """Check mesh admissibility: interior positivity, node distinctness,
    and (for matched-normal junctions) the extra junction conditions."""
    checks: list[AssumptionCheck] = []
    tol = DISTINCT_RTOL * max(mesh.diameter(), 1.0)

    for curve in mesh.curves:
        i = curve.phase
        checks.append(
            AssumptionCheck(
                "element-count", curve.J >= 3, i, None,
                f"need at least 3 elements, got {curve.J}" if curve.J < 3 else "",
            )
        )
        r = curve.r
        sel = np.arange(curve.J + 1) != curve.pole_index
        bad = np.nonzero(sel & (r <= 0.0))[0]
        checks.append(
            AssumptionCheck(
                "positivity", bad.size == 0, i,
                int(bad[0]) if bad.size else None,
                "interior/junction node with r <= 0" if bad.size else "",
            )
        )
        pole_r = abs(r[curve.pole_index])
        checks.append(
            AssumptionCheck(
                "pole-on-axis", pole_r <= tol, i, curve.pole_index,
                f"pole node has r = {pole_r:.3e}" if pole_r > tol else "",
            )
        )
        edges = np.diff(curve.nodes, axis=0)
        L = np.hypot(edges[:, 0], edges[:, 1])
        bad = np.nonzero(L <= tol)[0]
        checks.append(
            AssumptionCheck(
                "distinct-consecutive", bad.size == 0, i,
                int(bad[0]) if bad.size else None,
                "consecutive nodes coincide" if bad.size else "",
            )
        )
        skip = curve.nodes[2:] - curve.nodes[:-2]
        D = np.hypot(skip[:, 0], skip[:, 1])
        bad = np.nonzero(D <= tol)[0]
        checks.append(
            AssumptionCheck(
                "distinct-next-nearest", bad.size == 0, i,
                int(bad[0] + 1) if bad.size else None,
                "next-nearest nodes coincide" if bad.size else "",
            )
        )

    if c1:
        g1, g2 = mesh.curves
        a = g1.nodes[g1.J] - g1.nodes[g1.J - 1]
        b = g2.nodes[1] - g2.nodes[0]
        gap = np.hypot(*(a + b))  # = |X_2(q_{2,1}) - X_1(q_{1,J_1-1})|
        checks.append(
            AssumptionCheck(
                "junction-neighbor-distinct", gap > tol, None, None,
                "the nodes next to the junction coincide" if gap <= tol else "",
            )
        )
        span_ok = False
        try:
            w1 = vertex_normals(g1).omega[1:]          # interior + junction
            w2 = vertex_normals(g2).omega[:-1]         # junction + interior
            for ws in (w1, w2):
                ref = ws[0]
                if np.max(np.abs(cross2(ref[None, :], ws))) > 1e-10:
                    span_ok = True
                    break
        except Exception:
            span_ok = False
        checks.append(
            AssumptionCheck(
                "normal-span", span_ok, None, None,
                "" if span_ok else "averaged normals of each phase are all parallel",
            )
        )
    return AssumptionReport(checks)


def require_assumptions(mesh: TwoPhaseMesh, c1: int) -> None:
    report = validate_assumptions(mesh, c1)
    fail = report.first_failure()
    if fail is not None:
        raise AssumptionViolated(fail.assumption, fail.phase, fail.node, fail.detail)


class DofLayout:
    """Index maps between raw per-phase nodal coordinates and the reduced
    square system."""

    def __init__(self, J1: int, J2: int, c1: int, variant: str = VARIANT_BETA):
        if variant not in (VARIANT_BETA, VARIANT_SIDEH):
            raise ValueError(f"unknown variant '{variant}'")
        if variant == VARIANT_SIDEH and not c1:
            raise ValueError("the sideh variant only differs for c1 = 1")
        self.J1, self.J2, self.c1, self.variant = J1, J2, int(c1), variant
        N1, N2 = J1 + 1, J2 + 1
        self.N = (N1, N2)

        # raw column offsets: [X1 | X2 | K1 | K2 | Y1 | Y2 | beta]
        self.ox = (0, 2 * N1)
        self.ok = (2 * N1 + 2 * N2, 2 * N1 + 2 * N2 + N1)
        base = 2 * N1 + 2 * N2 + N1 + N2
        self.oy = (base, base + 2 * N1)
        self.obeta = base + 2 * N1 + 2 * N2
        self.n_raw_cols = self.obeta + 1
        self.n_raw_rows = self.obeta  # raw rows have no beta slot

        # ---- reduced columns ----
        xc1 = np.full((N1, 2), -1, dtype=np.int64)
        xc2 = np.full((N2, 2), -1, dtype=np.int64)
        idx = 0
        xc1[0, 1] = idx; idx += 1                      # top pole: z only
        for j in range(1, N1):
            xc1[j, 0] = idx; xc1[j, 1] = idx + 1; idx += 2
        xc2[0] = xc1[J1]                               # shared junction
        for j in range(1, J2):
            xc2[j, 0] = idx; xc2[j, 1] = idx + 1; idx += 2
        xc2[J2, 1] = idx; idx += 1                     # bottom pole: z only
        self.n_x = idx

        kc1 = np.full(N1, -1, dtype=np.int64)
        kc2 = np.full(N2, -1, dtype=np.int64)
        for j in range(1, N1):
            kc1[j] = idx; idx += 1
        for j in range(0, J2):
            kc2[j] = idx; idx += 1
        self.n_k = idx - self.n_x

        yc1 = np.full((N1, 2), -1, dtype=np.int64)
        yc2 = np.full((N2, 2), -1, dtype=np.int64)
        self.s_col = -1
        for j in range(0, J1):
            yc1[j, 0] = idx; yc1[j, 1] = idx + 1; idx += 2
        if c1 and variant == VARIANT_BETA:
            self.s_col = idx; idx += 1
            yc1[J1] = self.s_col
            yc2[0] = self.s_col
        elif c1 and variant == VARIANT_SIDEH:
            yc2[0, 0] = idx; yc2[0, 1] = idx + 1; idx += 2
            yc1[J1] = yc2[0]
        # C0: junction values of both phases fully eliminated (stay -1)
        for j in range(1, N2):
            yc2[j, 0] = idx; yc2[j, 1] = idx + 1; idx += 2
        self.n_y = idx - self.n_x - self.n_k

        self.beta_col = -1
        if c1 and variant == VARIANT_BETA:
            self.beta_col = idx; idx += 1
        self.n_beta = 1 if self.beta_col >= 0 else 0
        self.dim = idx

        self.xcol = (xc1, xc2)
        self.kcol = (kc1, kc2)
        self.ycol = (yc1, yc2)

        col_t = np.full(self.n_raw_cols, -1, dtype=np.int64)
        col_t[self.ox[0]:self.ox[0] + 2 * N1] = xc1.ravel()
        col_t[self.ox[1]:self.ox[1] + 2 * N2] = xc2.ravel()
        col_t[self.ok[0]:self.ok[0] + N1] = kc1
        col_t[self.ok[1]:self.ok[1] + N2] = kc2
        col_t[self.oy[0]:self.oy[0] + 2 * N1] = yc1.ravel()
        col_t[self.oy[1]:self.oy[1] + 2 * N2] = yc2.ravel()
        col_t[self.obeta] = self.beta_col
        self.col_t = col_t

        # raw Y columns at the junction carry affine maps set per assembly
        self.junction_ycols = np.array(
            [self.oy[0] + 2 * J1, self.oy[0] + 2 * J1 + 1,
             self.oy[1] + 0, self.oy[1] + 1],
            dtype=np.int64,
        )

        # ---- reduced rows ----
        # X and K test rows reuse the corresponding column enumerations.
        xr1, xr2 = xc1, xc2
        kr1, kr2 = kc1, kc2

        yr1 = np.full((N1, 2), -1, dtype=np.int64)
        yr2 = np.full((N2, 2), -1, dtype=np.int64)
        rid = self.n_x + self.n_k
        yr1[0, 1] = rid; rid += 1                      # pole: axial test only
        for j in range(1, J1):
            yr1[j, 0] = rid; yr1[j, 1] = rid + 1; rid += 2
        for j in range(1, J2):
            yr2[j, 0] = rid; yr2[j, 1] = rid + 1; rid += 2
        yr2[J2, 1] = rid; rid += 1
        if c1:
            yr1[J1, 0] = rid; yr1[J1, 1] = rid + 1     # shared junction test
            yr2[0, 0] = rid; yr2[0, 1] = rid + 1
            rid += 2
        # pole identity rows for the radial multiplier components
        self.dirichlet = [(rid, int(yc1[0, 0])), (rid + 1, int(yc2[J2, 0]))]
        rid += 2
        if rid != self.dim:
            raise AssertionError(f"layout not square: rows {rid} != cols {self.dim}")

        row_map = np.full(self.n_raw_rows, -1, dtype=np.int64)
        row_map[self.ox[0]:self.ox[0] + 2 * N1] = xr1.ravel()
        row_map[self.ox[1]:self.ox[1] + 2 * N2] = xr2.ravel()
        row_map[self.ok[0]:self.ok[0] + N1] = kr1
        row_map[self.ok[1]:self.ok[1] + N2] = kr2
        row_map[self.oy[0]:self.oy[0] + 2 * N1] = yr1.ravel()
        row_map[self.oy[1]:self.oy[1] + 2 * N2] = yr2.ravel()
        self.row_map = row_map
        self.yrow = (yr1, yr2)

    # raw index helpers -------------------------------------------------
    def xraw(self, i: int, nodes, comp) -> np.ndarray:
        return self.ox[i - 1] + 2 * np.asarray(nodes) + comp

    def kraw(self, i: int, nodes) -> np.ndarray:
        return self.ok[i - 1] + np.asarray(nodes)

    def yraw(self, i: int, nodes, comp) -> np.ndarray:
        return self.oy[i - 1] + 2 * np.asarray(nodes) + comp

    def block_slices(self):
        n = self.n_x
        return {
            "X": slice(0, n),
            "K": slice(n, n + self.n_k),
            "Y": slice(n + self.n_k, n + self.n_k + self.n_y),
        }


@dataclass
class BandedForm:
    """LAPACK band storage of the row/column permuted system."""

    ab: np.ndarray
    lower: int
    upper: int
    row_inv: np.ndarray    # original row -> banded row
    col_perm: np.ndarray   # banded col -> original col


@dataclass
class AssembledSystem:
    """Sparse step system with optional constraint-response columns."""

    matrix: sp.csc_matrix
    rhs: np.ndarray
    columns: dict[str, np.ndarray]
    layout: DofLayout
    col_a: np.ndarray
    col_d: np.ndarray
    mode: str
    banded: BandedForm | None = None

    @property
    def dim(self) -> int:
        return self.layout.dim

    def reconstruct(self, u: np.ndarray, include_consts: bool = True):
        """Map a reduced solution vector back to raw per-phase fields."""
        lay = self.layout
        t = lay.col_t
        w = np.where(t >= 0, self.col_a * u[np.clip(t, 0, None)], 0.0)
        if include_consts:
            w = w + self.col_d
        N1, N2 = lay.N
        dX1 = w[lay.ox[0]:lay.ox[0] + 2 * N1].reshape(N1, 2)
        dX2 = w[lay.ox[1]:lay.ox[1] + 2 * N2].reshape(N2, 2)
        k1 = w[lay.ok[0]:lay.ok[0] + N1].copy()
        k2 = w[lay.ok[1]:lay.ok[1] + N2].copy()
        Y1 = w[lay.oy[0]:lay.oy[0] + 2 * N1].reshape(N1, 2)
        Y2 = w[lay.oy[1]:lay.oy[1] + 2 * N2].reshape(N2, 2)
        beta = float(w[lay.obeta])
        return dX1, dX2, k1, k2, Y1, Y2, beta


@dataclass
class _PhaseGeometry:
    frames: ElementFrames
    vframes: VertexFrames
    m: np.ndarray          # mass-lumped node weights
    w: np.ndarray          # weighted normals m_j * omega_j
    frak: np.ndarray       # mean-curvature field of (X^m, kappa^m)


def _phase_geometry(curve: PhaseCurve, kappa: np.ndarray) -> _PhaseGeometry:
    frames = element_frames(curve)
    vf = vertex_normals(curve, frames)
    m = node_weights(frames)
    w = weighted_normals(frames)
    frak = np.empty_like(kappa)
    pole = curve.pole_index
    sel = np.arange(curve.J + 1) != pole
    frak[sel] = kappa[sel] - vf.omega[sel, 0] / curve.r[sel]
    frak[pole] = 2.0 * kappa[pole]
    return _PhaseGeometry(frames, vf, m, w, frak)


def make_geometry(state: SchemeState) -> list[_PhaseGeometry]:
    """Per-phase frames/normals/weights of a state, for reuse across the
    validation, assembly and diagnostics of one step."""
    return [
        _phase_geometry(state.mesh.gamma1, state.kappa.kappa1),
        _phase_geometry(state.mesh.gamma2, state.kappa.kappa2),
    ]


def _edge_functional(b: np.ndarray, cf: np.ndarray) -> None:
    """Accumulate the functional sum_j cf_j . (chi_j - chi_{j-1}) into b."""
    b[1:] += cf
    b[:-1] -= cf


def _explicit_forcing(
    curve: PhaseCurve,
    geo: _PhaseGeometry,
    kappa_m: np.ndarray,
    Y_m: np.ndarray,
    beta_m: float,
    params: PhysicalParams,
    include_beta_term: bool,
) -> np.ndarray:
    """Explicit right-hand side of the displacement rows for one phase."""
    alpha, _, kbar = params.for_phase(curve.phase)
    fr = geo.frames
    L, tau, nu = fr.length, fr.tau, fr.nu
    r = curve.r
    m = geo.m
    om = geo.vframes.omega
    g = geo.frak - kbar
    N = curve.J + 1
    b = np.zeros((N, 2))
    pole = curve.pole_index
    nonpole = np.arange(N) != pole

    # lagged tangential part of the multiplier stiffness
    dY = np.diff(Y_m, axis=0)
    cf = -(np.einsum("jk,jk->j", dY, tau) / L)[:, None] * tau
    _edge_functional(b, cf)

    # junction degree-of-freedom forcing from the previous step
    if include_beta_term and beta_m != 0.0:
        jn = curve.junction_index
        el = jn - 1 if curve.phase == 1 else 0
        cf = np.zeros((curve.J, 2))
        cf[el] = 0.5 * beta_m * Y_m[jn]
        _edge_functional(b, cf)

    # squared bending density against the metric variation
    b[:, 0] += -np.pi * alpha * g**2 * m
    g2r = g**2 * r
    cf = (-np.pi * alpha * 0.5 * (g2r[1:] + g2r[:-1]))[:, None] * tau
    _edge_functional(b, cf)

    # azimuthal curvature coupling (vanishes at the poles)
    b[nonpole, 0] += -TWO_PI * alpha * g[nonpole] * om[nonpole, 0] * m[nonpole] / r[nonpole]

    # frame-variation terms; fscal carries the pole cutoff
    fscal = np.where(nonpole, -TWO_PI * alpha * g, 0.0)
    fl, fr_ = fscal[:-1], fscal[1:]
    coef = 0.5 * (
        (fl + fr_)[:, None] * tau[:, 0:1] * nu
        + ((fl * (om[:-1, 0] - nu[:, 0]) + fr_ * (om[1:, 0] - nu[:, 0])))[:, None] * tau
    )
    _edge_functional(b, coef)

    # rotated multiplier term
    Yp = perp(Y_m)
    cf = 0.5 * (kappa_m[1:, None] * Yp[1:] + kappa_m[:-1, None] * Yp[:-1])
    _edge_functional(b, cf)

    # junction line tension
    b[curve.junction_index, 0] += -np.pi * params.varsigma
    return b


def _area_column(curve: PhaseCurve, geo: _PhaseGeometry) -> np.ndarray:
    """Response column of the phase-area multiplier (displacement rows)."""
    fr = geo.frames
    r = curve.r
    N = curve.J + 1
    col = np.zeros((N, 2))
    col[:, 0] += -TWO_PI * geo.m
    cf = (-TWO_PI * 0.5 * (r[:-1] + r[1:]))[:, None] * fr.tau
    _edge_functional(col, cf)
    return col


def _volume_column(curve: PhaseCurve, geo: _PhaseGeometry) -> np.ndarray:
    """Response column of the volume multiplier (displacement rows)."""
    fr = geo.frames
    r = curve.r
    N = curve.J + 1
    col = np.zeros((N, 2))
    Lnu = fr.length[:, None] * fr.nu
    col[:-1] += -TWO_PI * Lnu * ((2.0 * r[:-1] + r[1:]) / 6.0)[:, None]
    col[1:] += -TWO_PI * Lnu * ((r[:-1] + 2.0 * r[1:]) / 6.0)[:, None]
    return col


class SystemAssembler:
    """Builds step systems for a fixed layout; sparsity templates are
    precomputed, only values change between steps."""

    def __init__(self, layout: DofLayout):
        self.layout = layout
        rows, cols, self._slots = self._build_templates()
        mapped_rows = layout.row_map[rows]
        mapped_cols = layout.col_t[cols]
        self._keep = (mapped_rows >= 0) & (mapped_cols >= 0)
        self._rows_kept = mapped_rows[self._keep]
        self._cols_kept = mapped_cols[self._keep]
        self._raw_cols_kept = cols[self._keep]
        # entries whose raw column carries an affine constant (junction
        # multiplier values); their row-mapped scatter targets
        jset = set(layout.junction_ycols.tolist())
        self._const_sel = np.array(
            [k for k, c in enumerate(cols) if c in jset and mapped_rows[k] >= 0],
            dtype=np.int64,
        )
        self._const_rows = mapped_rows[self._const_sel]
        self._const_cols = cols[self._const_sel]
        self._nvals = rows.size
        # Dirichlet identity rows appended outside the templates
        self._dir_rows = np.array([r for r, _ in layout.dirichlet], dtype=np.int64)
        self._dir_cols = np.array([c for _, c in layout.dirichlet], dtype=np.int64)
        # canonical compressed-column pattern, filled by bincount per step
        all_rows = np.concatenate([self._rows_kept, self._dir_rows])
        all_cols = np.concatenate([self._cols_kept, self._dir_cols])
        key = all_cols * layout.dim + all_rows
        uniq, inverse = np.unique(key, return_inverse=True)
        self._fill_pos = inverse
        self._csc_indices = (uniq % layout.dim).astype(np.int32)
        self._csc_indptr = np.searchsorted(
            uniq // layout.dim, np.arange(layout.dim + 1)
        ).astype(np.int32)
        self._nnz = uniq.size
        self._build_band_pattern(all_rows, all_cols)

    def _build_band_pattern(self, all_rows, all_cols):
        """Node-interleaved permutation making the system narrowly banded,
        plus the template for filling the LAPACK band storage directly."""
        lay = self.layout
        seen = np.zeros(lay.dim, dtype=bool)
        cperm: list[int] = []
        rperm: list[int] = []

        def push(seq, idx):
            for c in np.atleast_1d(idx).ravel():
                c = int(c)
                if c >= 0 and not seen_arr[c]:
                    seen_arr[c] = True
                    seq.append(c)

        seen_arr = seen.copy()
        for i, N in enumerate(lay.N):
            for j in range(N):
                push(cperm, lay.xcol[i][j])
                push(cperm, lay.kcol[i][j])
                push(cperm, lay.ycol[i][j])
                if i == 0 and j == lay.J1 and lay.beta_col >= 0:
                    push(cperm, lay.beta_col)
        seen_arr = seen.copy()
        dir_rows = [r for r, _ in lay.dirichlet]
        for i, N in enumerate(lay.N):
            for j in range(N):
                push(rperm, lay.xcol[i][j])
                push(rperm, lay.kcol[i][j])
                push(rperm, lay.yrow[i][j])
                if i == 0 and j == 0:
                    push(rperm, dir_rows[0])
                if i == 1 and j == N - 1:
                    push(rperm, dir_rows[1])
        if len(cperm) != lay.dim or len(rperm) != lay.dim:
            raise AssertionError("band permutation incomplete")
        self._band_rinv = np.empty(lay.dim, dtype=np.int64)
        self._band_rinv[np.array(rperm)] = np.arange(lay.dim)
        self._band_cperm = np.array(cperm, dtype=np.int64)
        cinv = np.empty(lay.dim, dtype=np.int64)
        cinv[self._band_cperm] = np.arange(lay.dim)
        ri = self._band_rinv[all_rows]
        ci = cinv[all_cols]
        self.band_lower = int((ri - ci).max())
        self.band_upper = int((ci - ri).max())
        width = 2 * self.band_lower + self.band_upper + 1
        flat = (self.band_upper + self.band_lower + ri - ci) * lay.dim + ci
        self._band_fill = flat
        self._band_shape = (width, lay.dim)

    def _build_templates(self):
        lay = self.layout
        rows, cols, slots = [], [], {}

        def add(name, r, c):
            slots[name] = (sum(x.size for x in rows), r.size)
            rows.append(r.astype(np.int64))
            cols.append(c.astype(np.int64))

        for i in (1, 2):
            J = (lay.J1, lay.J2)[i - 1]
            nodes = np.arange(J + 1)
            elems = np.arange(J)
            # velocity mass: 2x2 block per node, order (cc') in [00,01,10,11]
            nn = np.repeat(nodes, 4)
            cc = np.tile([0, 0, 1, 1], J + 1)
            cp = np.tile([0, 1, 0, 1], J + 1)
            add(f"vel{i}", lay.xraw(i, nn, cc), lay.xraw(i, nn, cp))
            # displacement-row stiffness acting on the multiplier field
            el = np.repeat(elems, 8)
            pat_r = np.tile([1, 1, 0, 0, 1, 1, 0, 0], J)   # 1: right node
            pat_c = np.tile([1, 0, 1, 0, 1, 0, 1, 0], J)
            comp = np.tile([0, 0, 0, 0, 1, 1, 1, 1], J)
            add(
                f"xy{i}",
                lay.xraw(i, el + pat_r, comp),
                lay.yraw(i, el + pat_c, comp),
            )
            # curvature rows: diagonal + multiplier coupling
            add(f"kk{i}", lay.kraw(i, nodes), lay.kraw(i, nodes))
            nn2 = np.repeat(nodes, 2)
            cc2 = np.tile([0, 1], J + 1)
            add(f"ky{i}", lay.kraw(i, nn2), lay.yraw(i, nn2, cc2))
            # constraint rows: curvature mass + displacement stiffness
            add(f"yk{i}", lay.yraw(i, nn2, cc2), lay.kraw(i, nn2))
            add(
                f"yx{i}",
                lay.yraw(i, el + pat_r, comp),
                lay.xraw(i, el + pat_c, comp),
            )
        if lay.beta_col >= 0:
            r = np.concatenate(
                [lay.yraw(1, [lay.J1, lay.J1], [0, 1]), lay.yraw(2, [0, 0], [0, 1])]
            )
            c = np.full(4, lay.obeta, dtype=np.int64)
            add("ybeta", r, c)
        return np.concatenate(rows), np.concatenate(cols), slots

    def _fill(self, vals, name, data):
        start, size = self._slots[name]
        vals[start:start + size] = np.asarray(data, dtype=float).ravel()

    def assemble(
        self,
        state: SchemeState,
        params: PhysicalParams,
        dt: float,
        mode: str = "free",
        geos: list[_PhaseGeometry] | None = None,
    ) -> AssembledSystem:
        lay = self.layout
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if mode not in MODE_COLUMNS:
            raise ValueError(f"unknown mode '{mode}'")
        mesh = state.mesh
        if not (
            np.isfinite(mesh.gamma1.nodes).all()
            and np.isfinite(mesh.gamma2.nodes).all()
            and np.isfinite(state.Y1).all()
            and np.isfinite(state.Y2).all()
        ):
            raise NonFiniteInput("state contains NaN/Inf")

        if geos is None:
            geos = make_geometry(state)

        # affine column maps; only junction multiplier columns are nontrivial
        col_a = np.ones(lay.n_raw_cols)
        col_d = np.zeros(lay.n_raw_cols)
        col_a[lay.col_t < 0] = 0.0
        gvec = np.array([TWO_PI * (params.alphaG[0] - params.alphaG[1]), 0.0])
        if not lay.c1:
            col_d[lay.junction_ycols[0]] = TWO_PI * params.alphaG[0]
            col_d[lay.junction_ycols[1]] = 0.0
            col_d[lay.junction_ycols[2]] = TWO_PI * params.alphaG[1]
            col_d[lay.junction_ycols[3]] = 0.0
        elif lay.variant == VARIANT_SIDEH:
            col_d[lay.junction_ycols[0]] = gvec[0]
            col_d[lay.junction_ycols[1]] = gvec[1]
        else:
            a = geos[0].frames.edge[-1]
            b = geos[1].frames.edge[0]
            c = a + b
            nc = np.hypot(*c)
            if nc <= DISTINCT_RTOL * max(mesh.diameter(), 1.0):
                raise AssumptionViolated(
                    "junction-neighbor-distinct",
                    detail="junction parameterization degenerate (neighbor nodes coincide)",
                )
            u_p = -(a @ gvec) / nc**2 * c
            wdir = perp(c) / nc
            col_a[lay.junction_ycols[0]] = wdir[0]
            col_a[lay.junction_ycols[1]] = wdir[1]
            col_a[lay.junction_ycols[2]] = wdir[0]
            col_a[lay.junction_ycols[3]] = wdir[1]
            col_d[lay.junction_ycols[0]] = u_p[0] + gvec[0]
            col_d[lay.junction_ycols[1]] = u_p[1] + gvec[1]
            col_d[lay.junction_ycols[2]] = u_p[0]
            col_d[lay.junction_ycols[3]] = u_p[1]

        vals = np.zeros(self._nvals)
        b_raw = np.zeros(lay.n_raw_rows)
        include_beta = bool(lay.c1 and lay.variant == VARIANT_BETA)

        for i, (curve, geo) in enumerate(zip(mesh.curves, geos), start=1):
            alpha = params.alpha[i - 1]
            kbar = params.kbar[i - 1]
            r = curve.r
            m, w, fr = geo.m, geo.w, geo.frames
            Q = geo.vframes.Q
            scale = (TWO_PI / dt) * r * m
            self._fill(vals, f"vel{i}", scale[:, None, None] * Q)
            invL = 1.0 / fr.length
            block = np.array([-1.0, 1.0, 1.0, -1.0])
            self._fill(vals, f"xy{i}", (invL[:, None] * np.tile(block, 2)[None, :]))
            self._fill(vals, f"kk{i}", TWO_PI * alpha * r * m)
            self._fill(vals, f"ky{i}", -w)
            self._fill(vals, f"yk{i}", w)
            self._fill(vals, f"yx{i}", (invL[:, None] * np.tile(-block, 2)[None, :]))

            s = lay.ox[i - 1]
            N = curve.J + 1
            b_raw[s:s + 2 * N] = _explicit_forcing(
                curve, geo, state.kappa.kappa(i), state.Y(i), state.beta,
                params, include_beta,
            ).ravel()
            ks = lay.ok[i - 1]
            rhs_k = TWO_PI * alpha * (w[:, 0] + r * m * kbar)
            b_raw[ks:ks + N] = rhs_k
            ys = lay.oy[i - 1]
            by = np.zeros((N, 2))
            _edge_functional(by, -fr.tau)
            b_raw[ys:ys + 2 * N] = by.ravel()

        if include_beta:
            e1 = geos[0].frames.edge[-1]
            e2 = geos[1].frames.edge[0]
            self._fill(vals, "ybeta", 0.5 * np.concatenate([e1, e2]))

        # reduce to the square system through the prebuilt patterns
        data = vals[self._keep] * col_a[self._raw_cols_kept]
        data = np.concatenate([data, np.ones(self._dir_rows.size)])
        packed = np.bincount(self._fill_pos, weights=data, minlength=self._nnz)
        A = sp.csc_matrix(
            (packed, self._csc_indices, self._csc_indptr),
            shape=(lay.dim, lay.dim),
        )
        ab = np.bincount(
            self._band_fill, weights=data,
            minlength=self._band_shape[0] * lay.dim,
        ).reshape(self._band_shape)
        banded = BandedForm(
            ab=ab, lower=self.band_lower, upper=self.band_upper,
            row_inv=self._band_rinv, col_perm=self._band_cperm,
        )

        rhs = np.zeros(lay.dim)
        valid = lay.row_map >= 0
        np.add.at(rhs, lay.row_map[valid], b_raw[valid])
        if self._const_sel.size:
            contrib = vals[self._const_sel] * col_d[self._const_cols]
            np.subtract.at(rhs, self._const_rows, contrib)

        columns: dict[str, np.ndarray] = {}
        for name in MODE_COLUMNS[mode]:
            colraw = np.zeros(lay.n_raw_rows)
            if name == "V":
                for i, (curve, geo) in enumerate(zip(mesh.curves, geos), start=1):
                    s = lay.ox[i - 1]
                    colraw[s:s + 2 * (curve.J + 1)] = _volume_column(curve, geo).ravel()
            else:
                i = 1 if name == "A1" else 2
                curve, geo = mesh.curves[i - 1], geos[i - 1]
                s = lay.ox[i - 1]
                colraw[s:s + 2 * (curve.J + 1)] = _area_column(curve, geo).ravel()
            red = np.zeros(lay.dim)
            np.add.at(red, lay.row_map[valid], colraw[valid])
            columns[name] = red

        return AssembledSystem(
            matrix=A, rhs=rhs, columns=columns, layout=lay,
            col_a=col_a, col_d=col_d, mode=mode, banded=banded,
        )


def assemble(
    state: SchemeState,
    params: PhysicalParams,
    dt: float,
    mode: str = "free",
    variant: str = VARIANT_BETA,
) -> AssembledSystem:
    """One-shot assembly (builds a fresh layout; reuse SystemAssembler in
    loops)."""
    lay = DofLayout(state.mesh.gamma1.J, state.mesh.gamma2.J, params.c1, variant)
    return SystemAssembler(lay).assemble(state, params, dt, mode)


def assemble_sideh_variant(
    state: SchemeState, params: PhysicalParams, dt: float, mode: str = "free"
) -> AssembledSystem:
    """Comparison scheme without the junction degree of freedom."""
    return assemble(state, params, dt, mode, variant=VARIANT_SIDEH)


def curvature_constraint_residual(
    previous: TwoPhaseMesh,
    updated: TwoPhaseMesh,
    kappa_new: CurvatureState,
    beta_new: float,
    c1: int,
    variant: str = VARIANT_BETA,
) -> float:
    """Residual of the curvature side constraint after a step, re-tested
    against the full reduced test space (junction and pole conditions
    included).  Scheme output should satisfy this to solver accuracy."""
    lay = DofLayout(previous.gamma1.J, previous.gamma2.J, c1, variant if c1 else VARIANT_BETA)
    res_raw = np.zeros(lay.n_raw_rows)
    for i, (curve_old, curve_new) in enumerate(zip(previous.curves, updated.curves), start=1):
        fr = element_frames(curve_old)
        w = weighted_normals(fr)
        kap = kappa_new.kappa(i)
        N = curve_old.J + 1
        b = w * kap[:, None]
        e_new = np.diff(curve_new.nodes, axis=0)
        _edge_functional(b, e_new / fr.length[:, None])
        if c1 and variant == VARIANT_BETA:
            jn = curve_old.junction_index
            el = jn - 1 if i == 1 else 0
            b[jn] += 0.5 * beta_new * fr.edge[el]
        s = lay.oy[i - 1]
        res_raw[s:s + 2 * N] = b.ravel()
    res = np.zeros(lay.dim)
    valid = lay.row_map >= 0
    np.add.at(res, lay.row_map[valid], res_raw[valid])
    # constraint-block test rows only; the last two rows are the appended
    # identity rows, which test the unknowns rather than the step
    block = res[lay.n_x + lay.n_k:lay.dim - 2]
    return float(np.abs(block).max())
