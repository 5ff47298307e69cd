"""The moduli space of solutions as complex-group endpoint data.

A point is a pair (U, eta) in G^c x g^c.  ``point_to_solution`` composes
the closed-form complex-equation generator with gauge fixing to produce a
full quadruple solution; ``solution_to_point`` inverts it by integrating
the group path out of alpha and reading eta off beta at s = 0.  Tangent
spaces are built by central differencing of the full pipeline followed by
horizontal projection, and the metric / Kahler data are assembled from
the L^2 pairing and the flat quaternionic structure on representatives.

Symmetries: left/right translation by the compact group acts on (U, eta)
coordinates, and rotations of the (A_1, A_2, A_3) components act on
solutions directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gaugefix, liecore, nahm
from .gaugefix import DStarDOperator, GaugeFixResult, SolverConfig
from .liecore import GroupSpec, bracket, dag
from .nahm import ComplexPair, NahmQuadruple, Path

DEFAULT_FD_EPS = 1e-4


class DegenerateBasisError(RuntimeError):
    """Tangent representatives came out numerically dependent."""


class IntegrationError(RuntimeError):
    """Group-path integration produced non-finite values."""


@dataclass(frozen=True)
class ModuliPoint:
    """Endpoint data (U, eta) in complex-group x complex-algebra coordinates."""

    U: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "U", np.asarray(self.U, dtype=complex))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=complex))
        if self.U.ndim != 2 or self.U.shape[0] != self.U.shape[1]:
            raise ValueError(f"U must be a square matrix, got shape {self.U.shape}")
        if self.eta.shape != self.U.shape:
            raise ValueError(f"eta shape {self.eta.shape} does not match U {self.U.shape}")

    @property
    def n(self) -> int:
        return self.U.shape[0]

    def validate(self, group: GroupSpec, tol: float = liecore.KERNEL_TOL) -> None:
        group.check_role(self.U, liecore.COMPLEX_GROUP, tol)
        group.check_role(self.eta, liecore.COMPLEX_ALGEBRA, tol)

    @staticmethod
    def origin(group: GroupSpec) -> "ModuliPoint":
        return ModuliPoint(group.identity(), np.zeros((group.n, group.n), dtype=complex))


@dataclass
class PointSolution:
    """Full pipeline output for one moduli point, with certificates."""

    point: ModuliPoint
    group: GroupSpec
    quadruple: NahmQuadruple
    pair: ComplexPair
    generated: ComplexPair
    u_path: Path
    fix: GaugeFixResult

    @property
    def residuals(self) -> dict:
        return {
            "real": self.fix.real_residual,
            "complex": self.fix.complex_residual,
            "nahm": nahm.nahm_residual_norm(self.quadruple, self.group.c),
        }


@dataclass
class TangentRep:
    """Horizontal representative of a tangent vector at a base solution."""

    label: str
    a: np.ndarray  # (4, N+1, n, n), anti-Hermitian samplewise
    linearized_residual: float
    slice_defect: float


@dataclass
class MetricReport:
    point: ModuliPoint
    labels: list[str]
    gram: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    omega3: np.ndarray
    N: int
    extrapolated: bool
    residuals: dict = field(default_factory=dict)

    @property
    def omega_c(self) -> np.ndarray:
        return self.omega2 + 1j * self.omega3

    def spectrum(self) -> np.ndarray:
        return np.sort(np.linalg.eigvalsh(0.5 * (self.gram + self.gram.T)))


# ---------------------------------------------------------------------------
# point <-> solution


def _solve_point(
    point: ModuliPoint,
    group: GroupSpec,
    n_intervals: int = nahm.DEFAULT_N,
    cfg: SolverConfig | None = None,
    psi0: np.ndarray | None = None,
) -> PointSolution:
    pair0, u_path = nahm.generate_from_moduli(point.U, point.eta, n_intervals)
    fix = gaugefix.gauge_fix(pair0, group, cfg, psi0=psi0)
    quad = nahm.pair_to_quadruple(fix.pair)
    return PointSolution(point, group, quad, fix.pair, pair0, u_path, fix)


def point_to_solution(
    point: ModuliPoint,
    group: GroupSpec,
    n_intervals: int = nahm.DEFAULT_N,
    cfg: SolverConfig | None = None,
) -> NahmQuadruple:
    """Quadruple solution of the full system representing ``point``."""
    return _solve_point(point, group, n_intervals, cfg).quadruple


def _midpoint_values(samples: np.ndarray) -> np.ndarray:
    """Cubic (4-point) interpolation of a field to interval midpoints."""
    npts = samples.shape[0]
    if npts < 4:
        raise ValueError("need at least four samples for midpoint interpolation")
    mids = np.empty((npts - 1,) + samples.shape[1:], dtype=samples.dtype)
    # interior midpoints: nodes k-1..k+2 with weights (-1, 9, 9, -1)/16
    core = (
        -samples[:-3] + 9.0 * samples[1:-2] + 9.0 * samples[2:-1] - samples[3:]
    ) / 16.0
    mids[1:-1] = core
    w_edge = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0  # cubic at s = h/2
    mids[0] = sum(w_edge[i] * samples[i] for i in range(4))
    mids[-1] = sum(w_edge[i] * samples[npts - 1 - i] for i in range(4))
    return mids


def _integrate_group_path(
    coeff_nodes: np.ndarray, coeff_mids: np.ndarray | None = None
) -> np.ndarray:
    """RK4 integration of dg/ds = coeff(s) g from g(0) = 1.

    ``coeff_nodes`` holds the matrix coefficient at the N+1 nodes; the
    midpoint values are interpolated cubically unless supplied.
    """
    npts = coeff_nodes.shape[0]
    n = coeff_nodes.shape[1]
    h = 1.0 / (npts - 1)
    if coeff_mids is None:
        coeff_mids = _midpoint_values(coeff_nodes)
    g = np.empty_like(coeff_nodes)
    g[0] = np.eye(n)
    cur = g[0]
    for k in range(npts - 1):
        f0, fm, f1 = coeff_nodes[k], coeff_mids[k], coeff_nodes[k + 1]
        k1 = f0 @ cur
        k2 = fm @ (cur + 0.5 * h * k1)
        k3 = fm @ (cur + 0.5 * h * k2)
        k4 = f1 @ (cur + h * k3)
        cur = cur + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        g[k + 1] = cur
    if not np.all(np.isfinite(g)):
        raise IntegrationError("group-path integration diverged")
    return g


def solution_to_point(a: NahmQuadruple, group: GroupSpec) -> ModuliPoint:
    """Endpoint data of a quadruple solution.

    From alpha = -(1/2) u' u^-1 the group path solves du/ds = -2 alpha u
    with u(0) = 1 (integrated by RK4 on the sampling grid); eta is beta
    at s = 0.
    """
    pair = nahm.quadruple_to_pair(a)
    u = _integrate_group_path(-2.0 * pair.alpha)
    return ModuliPoint(u[-1], pair.beta[0])


# ---------------------------------------------------------------------------
# tangent spaces


def coordinate_directions(group: GroupSpec) -> list[tuple[str, np.ndarray]]:
    """Real basis of the (U, eta) tangent coordinates, in block order
    (compact directions of U, i * compact, compact directions of eta, i * compact)."""
    basis = group.algebra_basis()
    dirs: list[tuple[str, np.ndarray]] = []
    for a, t in enumerate(basis):
        dirs.append((f"u:g:{a}", t))
    for a, t in enumerate(basis):
        dirs.append((f"u:ig:{a}", 1j * t))
    for a, t in enumerate(basis):
        dirs.append((f"eta:g:{a}", t))
    for a, t in enumerate(basis):
        dirs.append((f"eta:ig:{a}", 1j * t))
    return dirs


def _displaced_point(point: ModuliPoint, label: str, direction: np.ndarray, eps: float) -> ModuliPoint:
    if label.startswith("u:"):
        return ModuliPoint(point.U @ liecore.expm(eps * direction), point.eta)
    return ModuliPoint(point.U, point.eta + eps * direction)


def tangent_basis(
    point: ModuliPoint,
    group: GroupSpec,
    n_intervals: int = nahm.DEFAULT_N,
    cfg: SolverConfig | None = None,
    eps: float = DEFAULT_FD_EPS,
    base: PointSolution | None = None,
    operator: DStarDOperator | None = None,
    directions: list[tuple[str, np.ndarray]] | None = None,
) -> list[TangentRep]:
    """Horizontal representatives of the 4*dim(g) coordinate directions.

    Each direction is differenced centrally through the full pipeline
    (generation + gauge fixing) at +/- eps and projected onto the slice
    at the base solution.  ``directions`` restricts the basis (locus
    checks need only the endpoint block).  Raises
    :class:`DegenerateBasisError` when the representatives fail to be
    numerically independent.
    """
    cfg = cfg or SolverConfig()
    if base is None:
        base = _solve_point(point, group, n_intervals, cfg)
    op = operator or DStarDOperator(base.quadruple, group)
    warm = base.fix.psi

    reps: list[TangentRep] = []
    for label, direction in directions or coordinate_directions(group):
        plus = _solve_point(_displaced_point(point, label, direction, +eps),
                            group, n_intervals, cfg, psi0=warm)
        minus = _solve_point(_displaced_point(point, label, direction, -eps),
                             group, n_intervals, cfg, psi0=warm)
        v = (plus.quadruple.samples - minus.quadruple.samples) / (2.0 * eps)
        a = gaugefix.horizontal_project(op, v)
        lin = nahm.linearized_residuals(base.quadruple, a)
        lin_norm = float(
            np.sqrt(sum(nahm.field_l2_norm(lin[i], group.c) ** 2 for i in range(1, 4)))
        )
        reps.append(
            TangentRep(
                label,
                a,
                lin_norm,
                gaugefix.slice_residual(base.quadruple, a, group.c),
            )
        )

    gram = _gram(reps, group.c)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e10:
        raise DegenerateBasisError(f"tangent Gram condition number {cond:.3e}")
    return reps


def _gram(reps: list[TangentRep], c: float) -> np.ndarray:
    k = len(reps)
    g = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            g[i, j] = g[j, i] = nahm.l2_inner(reps[i].a, reps[j].a, c)
    return g


def _omega(reps: list[TangentRep], which: str, c: float) -> np.ndarray:
    k = len(reps)
    out = np.empty((k, k))
    rotated = [nahm.quaternion_act(which, r.a) for r in reps]
    for i in range(k):
        for j in range(k):
            out[i, j] = nahm.l2_inner(rotated[i], reps[j].a, c)
    return out


def _richardson(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    """Eliminate the O(N^-2) bias from values at N and 2N."""
    return (4.0 * fine - coarse) / 3.0


def metric_report(
    point: ModuliPoint,
    group: GroupSpec,
    n_intervals: int = nahm.DEFAULT_N,
    cfg: SolverConfig | None = None,
    extrapolate: bool = False,
    eps: float = DEFAULT_FD_EPS,
) -> MetricReport:
    """Gram matrix and Kahler two-forms of the coordinate tangent basis.

    With ``extrapolate`` the whole computation runs at N and 2N and each
    reported entry is Richardson-extrapolated.
    """
    cfg = cfg or SolverConfig()

    def level(nn: int):
        base = _solve_point(point, group, nn, cfg)
        reps = tangent_basis(point, group, nn, cfg, eps, base=base)
        gram = _gram(reps, group.c)
        omegas = {w: _omega(reps, w, group.c) for w in ("I", "J", "K")}
        res = base.residuals
        res["max_linearized"] = max(r.linearized_residual for r in reps)
        return gram, omegas, res

    gram, omegas, res = level(n_intervals)
    if extrapolate:
        gram2, omegas2, res2 = level(2 * n_intervals)
        gram = _richardson(gram, gram2)
        omegas = {w: _richardson(omegas[w], omegas2[w]) for w in omegas}
        res = {"coarse": res, "fine": res2}

    labels = [lab for lab, _ in coordinate_directions(group)]
    return MetricReport(
        point=point,
        labels=labels,
        gram=gram,
        omega1=omegas["I"],
        omega2=omegas["J"],
        omega3=omegas["K"],
        N=n_intervals,
        extrapolated=extrapolate,
        residuals=res,
    )


def induced_complex_structures(
    reps: list[TangentRep],
    operator: DStarDOperator,
    group: GroupSpec,
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Coordinate matrices of I, J, K on a tangent basis.

    Each structure is applied to a representative and re-projected onto
    the slice (the action preserves the linearized system exactly, but
    horizontality of the inputs only holds within solver tolerance); the
    result is expanded in the basis through the Gram matrix.
    """
    gram = _gram(reps, group.c)
    out: dict[str, np.ndarray] = {}
    for which in ("I", "J", "K"):
        cols = []
        for r in reps:
            v = gaugefix.horizontal_project(operator, nahm.quaternion_act(which, r.a))
            b = np.array([nahm.l2_inner(rr.a, v, group.c) for rr in reps])
            cols.append(np.linalg.solve(gram, b))
        out[which] = np.array(cols).T
    return out, gram


# ---------------------------------------------------------------------------
# holomorphic symplectic pairing

# The flat structure pairs (omega_2 + i omega_3)(a, b) with the complex
# pairing of the half-sum splits: with alpha-dot = (a_0 + i a_1)/2 the
# pointwise identity (omega_2 + i omega_3) = 4 * (<ad_1, bd_2>_c -
# <ad_2, bd_1>_c) holds exactly, so the canonical comparison carries the
# structural factor 4.
_CANONICAL_SCALE = 4.0


def _endpoint_variations(
    point: ModuliPoint,
    group: GroupSpec,
    n_intervals: int,
    eps: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference variations of the generated (alpha, beta) data.

    Returns arrays of shape (k, N+1, n, n) for alpha-dot and beta-dot in
    the coordinate-direction order; no gauge fixing is applied.
    """
    alphas, betas = [], []
    for label, direction in coordinate_directions(group):
        p_plus, _ = nahm.generate_from_moduli(
            *_point_tuple(_displaced_point(point, label, direction, +eps)), n_intervals
        )
        p_minus, _ = nahm.generate_from_moduli(
            *_point_tuple(_displaced_point(point, label, direction, -eps)), n_intervals
        )
        alphas.append((p_plus.alpha - p_minus.alpha) / (2 * eps))
        betas.append((p_plus.beta - p_minus.beta) / (2 * eps))
    return np.array(alphas), np.array(betas)


def _point_tuple(point: ModuliPoint) -> tuple[np.ndarray, np.ndarray]:
    return point.U, point.eta


def canonical_omega_c(
    point: ModuliPoint,
    group: GroupSpec,
    n_intervals: int,
    eps: float = DEFAULT_FD_EPS,
) -> np.ndarray:
    """The complex symplectic pairing of endpoint-data variations.

    canonical(i, j) = 4 * integral of <alpha-dot_i, beta-dot_j>_c -
    <alpha-dot_j, beta-dot_i>_c over [0,1].
    """
    adot, bdot = _endpoint_variations(point, group, n_intervals, eps)
    w = nahm.trapezoid_weights(n_intervals)
    # pointwise complex pairing -c tr(x y), integrated
    pair = -group.c * np.einsum("t,itab,jtba->ij", w, adot, bdot)
    return _CANONICAL_SCALE * (pair - pair.T)


def check_omega_c(
    point: ModuliPoint,
    group: GroupSpec,
    report: MetricReport,
    eps: float = DEFAULT_FD_EPS,
) -> float:
    """Max entrywise deviation of the report's omega_c from the canonical form."""
    canonical = canonical_omega_c(point, group, report.N, eps)
    if report.extrapolated:
        fine = canonical_omega_c(point, group, 2 * report.N, eps)
        canonical = _richardson(canonical, fine)
    return float(np.max(np.abs(report.omega_c - canonical)))


# ---------------------------------------------------------------------------
# symmetries


def act_GxG(g_left: np.ndarray, g_right: np.ndarray, point: ModuliPoint) -> ModuliPoint:
    """(U, eta) -> (gL U gR^-1, gR eta gR^-1) for compact gL, gR.

    Which interval endpoint carries the left factor is a recorded
    convention, not an assertion.
    """
    for g in (g_left, g_right):
        if not liecore.is_unitary(np.asarray(g, dtype=complex), 1e-8):
            raise ValueError("translation elements must be unitary")
    gr = np.asarray(g_right, dtype=complex)
    gl = np.asarray(g_left, dtype=complex)
    return ModuliPoint(gl @ point.U @ dag(gr), gr @ point.eta @ dag(gr))


def act_SO3(rot: np.ndarray, a: NahmQuadruple, tol: float = 1e-10) -> NahmQuadruple:
    """Rotate the components (A_1, A_2, A_3) by an SO(3) matrix; A_0 is fixed."""
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3):
        raise ValueError("rotation must be a 3x3 matrix")
    if np.max(np.abs(rot @ rot.T - np.eye(3))) > tol or abs(np.linalg.det(rot) - 1) > tol:
        raise ValueError("matrix is not a rotation (orthogonal, det 1) within tolerance")
    out = a.samples.copy()
    out[1:] = np.einsum("ab,bkij->akij", rot, a.samples[1:])
    return NahmQuadruple(out)


def so3_isometry_check(
    point: ModuliPoint,
    group: GroupSpec,
    rot: np.ndarray,
    n_intervals: int = nahm.DEFAULT_N,
    cfg: SolverConfig | None = None,
    eps: float = DEFAULT_FD_EPS,
) -> dict:
    """Metric preservation of a component rotation, in a transported basis.

    The rotation acts linearly on horizontal representatives; the rotated
    representatives are re-projected at the rotated base (a solution
    again) and the Gram matrices before and after are compared.  The
    comparison is frame-honest: re-coordinatizing the rotated point and
    comparing raw chart Gram spectra is not rotation-invariant, since the
    induced chart map is not orthogonal.
    """
    cfg = cfg or SolverConfig()
    base = _solve_point(point, group, n_intervals, cfg)
    op = DStarDOperator(base.quadruple, group)
    reps = tangent_basis(point, group, n_intervals, cfg, eps, base=base, operator=op)
    gram0 = _gram(reps, group.c)

    rotated_base = act_SO3(rot, base.quadruple)
    op_rot = DStarDOperator(rotated_base, group)
    mix = np.zeros((4, 4))
    mix[0, 0] = 1.0
    mix[1:, 1:] = rot
    projected = []
    defect = 0.0
    for r in reps:
        v = np.einsum("ab,bkij->akij", mix, r.a)
        p = gaugefix.horizontal_project(op_rot, v)
        defect = max(defect, nahm.l2_norm(p - v, group.c) / max(nahm.l2_norm(v, group.c), 1e-300))
        projected.append(p)
    k = len(projected)
    gram1 = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            gram1[i, j] = gram1[j, i] = nahm.l2_inner(projected[i], projected[j], group.c)
    spec0 = np.sort(np.linalg.eigvalsh(gram0))
    spec1 = np.sort(np.linalg.eigvalsh(gram1))
    return {
        "gram_deviation": float(np.max(np.abs(gram1 - gram0))),
        "spectrum_deviation": float(np.max(np.abs(spec1 - spec0))),
        "projection_defect": float(defect),
        "rotated_residual": nahm.nahm_residual_norm(rotated_base, group.c),
    }


def so3_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation about ``axis`` by ``angle`` (Rodrigues form)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


# ---------------------------------------------------------------------------
# the complex submanifold with beta = 0


def check_kahler_locus(
    point: ModuliPoint,
    group: GroupSpec,
    n_intervals: int = nahm.DEFAULT_N,
    cfg: SolverConfig | None = None,
    eps: float = DEFAULT_FD_EPS,
) -> dict:
    """I-invariance of the tangent directions along the eta = 0 locus.

    The locus A_2 = A_3 = 0 sits inside the moduli space as a complex
    submanifold for the structure I: its tangent directions (eta-dot = 0)
    must be closed under I, while J maps them out.  Returns defects of
    projecting I * rep and J * rep back onto the locus tangent span.

    Raises ``ValueError`` when eta != 0.
    """
    if np.max(np.abs(point.eta)) > 1e-12:
        raise ValueError("point is not on the locus: eta must vanish")
    cfg = cfg or SolverConfig()
    m = group.algebra_dim
    locus_dirs = coordinate_directions(group)[: 2 * m]
    locus = tangent_basis(point, group, n_intervals, cfg, eps, directions=locus_dirs)

    gram = _gram(locus, group.c)

    def span_defect(vec: np.ndarray) -> float:
        b = np.array([nahm.l2_inner(r.a, vec, group.c) for r in locus])
        coeff = np.linalg.solve(gram, b)
        norm2 = nahm.l2_inner(vec, vec, group.c)
        resid2 = max(norm2 - b @ coeff, 0.0)
        return float(np.sqrt(resid2 / norm2)) if norm2 > 0 else 0.0

    i_defect = max(span_defect(nahm.quaternion_act("I", r.a)) for r in locus)
    j_defect = min(span_defect(nahm.quaternion_act("J", r.a)) for r in locus)
    return {
        "i_defect": i_defect,
        "j_defect_min": j_defect,
        "closed_under_i": bool(i_defect <= 1e-5),
    }
