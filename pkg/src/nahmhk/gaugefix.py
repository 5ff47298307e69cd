"""Complex gauge fixing and the orbit-direction boundary-value solver.

Two solvers live here.

``solve_dstar_d`` inverts the self-adjoint operator D*D built from the
infinitesimal gauge action at a base quadruple A,

    D u = (-du/ds + [u, A_0], [u, A_1], [u, A_2], [u, A_3]),

with Dirichlet conditions u(0) = u(1) = 0.  The discrete operator is the
exact weighted adjoint composition N^T W N of the sampled orbit map, so
self-adjointness and orbit orthogonality hold to rounding, and it is
factorized once per base for reuse.  ``horizontal_project`` uses it to
split off the gauge-orbit component of a tangent four-tuple.

``gauge_fix`` takes a solution (alpha, beta) of the complex equation and
finds g with g(0) = g(1) = 1 carrying it onto the real-equation locus.
The unknown is a Hermitian exponent field psi with g = expm(psi)
(positive-part search: uniqueness modulo unitary gauge lets the unitary
factor be pinned to 1).  The squared residual norm is driven down by a
descent flow preconditioned with the D*D solve and finished by damped
Gauss-Newton once the norm passes ``newton_switch``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import liecore, nahm
from .liecore import GroupSpec, bracket, dag
from .nahm import ComplexPair, GaugeTransform, NahmQuadruple


class SingularSystemError(RuntimeError):
    """The discrete D*D system is numerically singular (bug signal)."""


class NonConvergenceError(RuntimeError):
    """Gauge fixing exhausted its iteration budget.

    Carries the final residual so callers can report a certificate.
    """

    def __init__(self, message: str, final_residual: float):
        super().__init__(message)
        self.final_residual = final_residual


@dataclass
class SolverConfig:
    """Tolerances and budgets for the nonlinear solvers."""

    residual_tol: float = 1e-8
    max_newton_iters: int = 50
    max_flow_steps: int = 5000
    flow_step: float = 0.05
    linesearch_shrink: float = 0.5
    newton_switch: float = 1e-3
    verbose: bool = False

    def __post_init__(self):
        for name in ("residual_tol", "max_newton_iters", "max_flow_steps",
                     "flow_step", "linesearch_shrink", "newton_switch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"SolverConfig.{name} must be positive")


# ---------------------------------------------------------------------------
# the discrete orbit map and D*D


# Weight of the spurious-mode penalty inside D*D; small enough that its
# leak into horizontal projections stays below solver tolerance.
PENALTY_WEIGHT = 1e-3


def _sawtooth_penalty(n_intervals: int, m: int) -> scipy.sparse.csr_matrix:
    """S^T S for the undivided fourth difference on the interior unknowns.

    Rows run over nodes 2..N-2 with stencil (1, -4, 6, -4, 1); the
    endpoint values are identically zero (Dirichlet) so columns outside
    the interior are dropped.
    """
    npts = n_intervals + 1
    s = scipy.sparse.lil_matrix((npts, npts))
    for k in range(2, npts - 2):
        s[k, k - 2 : k + 3] = [1.0, -4.0, 6.0, -4.0, 1.0]
    s = s.tocsr()[:, 1:-1]
    s_big = scipy.sparse.kron(s, scipy.sparse.identity(m, format="csr"), format="csr")
    return (s_big.T @ s_big).tocsr()


class DStarDOperator:
    """Discrete D*D at a base quadruple, with Dirichlet endpoint conditions.

    The orbit map N sends interior algebra coordinates of u to the four
    algebra-coordinate fields of the infinitesimal gauge motion; the
    operator solved here is M = N^T W N with W the trapezoidal weights,
    which is symmetric positive definite and banded.
    """

    def __init__(self, base: NahmQuadruple, group: GroupSpec):
        self.base = base
        self.group = group
        self.N = base.N
        m = group.algebra_dim
        self.m = m
        basis = group.algebra_basis()
        npts = self.N + 1

        # ad-matrices of the four base components in the orthonormal basis:
        # ad[i][k] is the m x m real matrix of [A_i(s_k), . ].
        br = bracket(base.samples[:, :, None, :, :], basis[None, None, :, :, :])
        ad = np.einsum("aij,tkbji->tkab", -basis, br).real  # (4, npts, m, m)

        # 2nd-order derivative: exactly summation-by-parts against the
        # trapezoidal weights, so the weak composition below is boundary
        # consistent (4th-order one-sided closures are not).
        dmat = nahm.diff_matrix_2nd(self.N)
        eye_m = scipy.sparse.identity(m, format="csr")
        d_big = scipy.sparse.kron(dmat, eye_m, format="csr")

        def blockdiag(fields):
            return scipy.sparse.block_diag([fields[k] for k in range(npts)], format="csr")

        # D u = (-u' + [u, A_0], [u, A_i]) = (-u' - ad0 u, -adi u).
        blocks = [-d_big - blockdiag(ad[0])]
        for i in (1, 2, 3):
            blocks.append(-blockdiag(ad[i]))
        n_full = scipy.sparse.vstack(blocks, format="csc")

        # Dirichlet: keep interior node columns only.
        keep = np.arange(m, npts * m - m)
        self._keep = keep
        self.n_mat = n_full[:, keep].tocsr()

        w = nahm.trapezoid_weights(self.N)
        w4 = np.tile(np.repeat(w, m), 4)
        self._w4 = w4
        gram = self.n_mat.T @ scipy.sparse.diags(w4) @ self.n_mat
        # The centered stencil annihilates the node-alternating mode, so
        # N^T W N has a spurious near-kernel of envelope-modulated
        # sawtooths.  An undivided fourth-difference penalty prices them
        # well above any smooth-field energy while perturbing smooth
        # solves only at O(h^7), far below discretization error.
        self.m_mat = (gram + PENALTY_WEIGHT * _sawtooth_penalty(self.N, m)).tocsc()

        try:
            self._solve = scipy.sparse.linalg.factorized(self.m_mat)
        except RuntimeError as exc:
            raise SingularSystemError(f"D*D factorization failed: {exc}") from exc

        diag = self.m_mat.diagonal()
        if np.min(np.abs(diag)) < 1e-14 * np.max(np.abs(diag)):
            raise SingularSystemError("D*D diagonal collapse: discrete operator singular")

    # -- coordinate helpers

    def orbit_motion(self, u_interior: np.ndarray) -> np.ndarray:
        """Gauge motion delta_u A as a four-tuple field (4, N+1, n, n)."""
        flat = self.n_mat @ u_interior.ravel()
        coords = flat.reshape(4, self.N + 1, self.m)
        return self.group.from_coords(coords)

    def solve_interior(self, rhs_interior_coords: np.ndarray) -> np.ndarray:
        out = self._solve(rhs_interior_coords.ravel())
        if not np.all(np.isfinite(out)):
            raise SingularSystemError("D*D solve produced non-finite values")
        return out

    def apply(self, u_interior: np.ndarray) -> np.ndarray:
        """M u in interior coordinates (rarely needed; tests use it)."""
        return self.m_mat @ u_interior.ravel()


def solve_dstar_d(op: DStarDOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve D*D u = rhs with u(0) = u(1) = 0.

    ``rhs`` is an algebra-valued field (N+1, n, n); the weak form
    N^T W N u = W rhs is solved on the interior nodes and the result is
    returned as a full field with zero endpoints.
    """
    group = op.group
    if rhs.shape[0] != op.N + 1:
        raise ValueError("rhs grid does not match operator grid")
    coords = group.coords(rhs)  # (N+1, m)
    w = nahm.trapezoid_weights(op.N)[:, None]
    rhs_int = (w * coords)[1:-1]
    u_int = op.solve_interior(rhs_int).reshape(op.N - 1, op.m)
    full = np.zeros((op.N + 1, op.m))
    full[1:-1] = u_int
    return group.from_coords(full)


def horizontal_project(
    op: DStarDOperator, v: np.ndarray, return_motion: bool = False
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """L^2-orthogonal projection of a four-tuple onto the gauge slice.

    Solves the weighted least-squares problem min_u || v - delta_u A ||
    over endpoint-vanishing u (normal equations through the factorized
    D*D), and returns a = v - delta_u A.  Orthogonality of a to every
    discrete orbit direction holds to rounding; the slice equation
    da_0/ds + [A, a] evaluated with the standard stencils is satisfied to
    discretization error.
    """
    group = op.group
    if v.shape != (4, op.N + 1, group.n, group.n):
        raise ValueError(f"tangent tuple shape {v.shape} does not match operator")
    coords = group.coords(v).reshape(-1)  # (4*(N+1)*m,)
    rhs = op.n_mat.T @ (op._w4 * coords)
    u_int = op.solve_interior(rhs)
    motion = op.orbit_motion(u_int.reshape(op.N - 1, op.m))
    a = v - motion
    if return_motion:
        return a, motion
    return a


def slice_residual(base: NahmQuadruple, a: np.ndarray, c: float = 1.0) -> float:
    """Stencil evaluation of the slice equation da_0/ds + [A, a] (L^2 norm)."""
    f = nahm.apply_diff(a[0]) + sum(bracket(base.samples[i], a[i]) for i in range(4))
    return nahm.field_l2_norm(f, c)


# ---------------------------------------------------------------------------
# gauge fixing


@dataclass
class GaugeFixResult:
    """Solver output with its residual certificate."""

    gauge: GaugeTransform
    pair: ComplexPair
    real_residual: float
    complex_residual: float
    flow_steps: int
    newton_iters: int
    psi: np.ndarray  # Hermitian coordinates of log g, warm-start handle


def _hermitian_exp_field(psi_coords: np.ndarray, group: GroupSpec) -> tuple[np.ndarray, np.ndarray]:
    """g = expm(psi), g^-1 = expm(-psi) for a Hermitian coordinate field."""
    psi = group.from_hermitian_coords(psi_coords)
    w, v = np.linalg.eigh(psi)
    g = np.einsum("kij,kj,klj->kil", v, np.exp(w), np.conj(v))
    ginv = np.einsum("kij,kj,klj->kil", v, np.exp(-w), np.conj(v))
    return g, ginv


class _GaugeResidual:
    """Weighted residual of the real equation as a function of psi."""

    def __init__(self, pair: ComplexPair, group: GroupSpec):
        self.pair = pair
        self.group = group
        self.N = pair.N
        self.m = group.algebra_dim
        self.w = nahm.trapezoid_weights(self.N)
        self.sqrt_w = np.sqrt(self.w)

    def transformed(self, psi_coords: np.ndarray) -> tuple[ComplexPair, np.ndarray, np.ndarray]:
        g, ginv = _hermitian_exp_field(psi_coords, self.group)
        dginv = nahm.apply_diff(ginv)
        alpha = g @ self.pair.alpha @ ginv + 0.5 * (g @ dginv)
        beta = g @ self.pair.beta @ ginv
        return ComplexPair(alpha, beta), g, ginv

    def residual_coords(self, psi_coords: np.ndarray) -> np.ndarray:
        """Hermitian coordinates of the real-equation field, shape (N+1, m)."""
        p, _, _ = self.transformed(psi_coords)
        ad = dag(p.alpha)
        bd = dag(p.beta)
        r = nahm.apply_diff(p.alpha + ad) + 2.0 * (bracket(p.alpha, ad) + bracket(p.beta, bd))
        return self.group.hermitian_coords(r)

    def norm(self, rho: np.ndarray) -> float:
        return float(np.sqrt(self.group.c * np.sum(self.w[:, None] * rho**2)))


@lru_cache(maxsize=None)
def _jacobian_rows_for(j: int, npts: int) -> tuple[int, ...]:
    """Residual nodes influenced by a perturbation at node j.

    The residual composes two 5-point stencils: interior reach is 4, but
    the one-sided closures give the first and last five rows reach up to
    8, so those rows are appended whenever j is near an end.
    """
    rows = np.arange(max(0, j - 4), min(npts, j + 5))
    if j <= 8:
        rows = np.union1d(rows, np.arange(0, min(5, npts)))
    if j >= npts - 9:
        rows = np.union1d(rows, np.arange(max(0, npts - 5), npts))
    return tuple(int(r) for r in rows)


def _colored_jacobian(
    res: _GaugeResidual, psi: np.ndarray, rho0: np.ndarray, eps: float = 1e-7
) -> scipy.sparse.csr_matrix:
    """Forward-difference Jacobian d(rho)/d(psi_interior), banded by stencils.

    Interior dependence has node reach 4 (two nested 5-point stencils),
    so columns at node stride 9 never share a responding row and are
    computed from a single residual evaluation per color.
    """
    npts, m = rho0.shape
    n_int = npts - 2
    row_chunks, col_chunks, val_chunks = [], [], []
    scale = eps * max(1.0, float(np.max(np.abs(psi))))
    comp = np.arange(m)
    for offset in range(9):
        nodes = np.arange(1 + offset, npts - 1, 9)
        if len(nodes) == 0:
            continue
        for a in range(m):
            pert = psi.copy()
            pert[nodes, a] += scale
            drho = (res.residual_coords(pert) - rho0) / scale
            for j in nodes:
                rows_j = np.asarray(_jacobian_rows_for(int(j), npts))
                block = drho[rows_j]  # (len(rows_j), m)
                row_chunks.append((rows_j[:, None] * m + comp[None, :]).ravel())
                col_chunks.append(np.full(block.size, (j - 1) * m + a))
                val_chunks.append(block.ravel())
    return scipy.sparse.csr_matrix(
        (np.concatenate(val_chunks), (np.concatenate(row_chunks), np.concatenate(col_chunks))),
        shape=(npts * m, n_int * m),
    )


def gauge_fix(
    pair: ComplexPair,
    group: GroupSpec,
    cfg: SolverConfig | None = None,
    psi0: np.ndarray | None = None,
) -> GaugeFixResult:
    """Find g = expm(psi) with g(0) = g(1) = 1 putting ``pair`` on the real locus.

    Parameters
    ----------
    pair : ComplexPair
        Must satisfy the complex equation to discretization accuracy; the
        complex residual is preserved by the action and re-certified on
        output.
    psi0 : optional (N+1, m) Hermitian coordinate field
        Warm start (used by tangent-space differencing); endpoints are
        forced to zero.

    Raises
    ------
    NonConvergenceError
        If the iteration budgets are exhausted; carries the final
        residual rather than returning silently.
    """
    cfg = cfg or SolverConfig()
    res = _GaugeResidual(pair, group)
    npts, m = pair.N + 1, group.algebra_dim

    psi = np.zeros((npts, m)) if psi0 is None else np.array(psi0, dtype=float)
    psi[0] = 0.0
    psi[-1] = 0.0

    rho = res.residual_coords(psi)
    norm = res.norm(rho)
    flow_steps = 0
    newton_iters = 0

    # Degenerate inputs (unitary endpoint with eta = 0, abelian case, ...)
    # are already on the real locus: do not polish an exact solution.
    if norm <= cfg.residual_tol and psi0 is None:
        g = GaugeTransform.identity(pair.N, pair.n)
        return GaugeFixResult(
            g, pair, norm,
            nahm.residual_norm(nahm.complex_residual(pair), group.c),
            0, 0, psi,
        )

    # Phase 1: residual flow preconditioned with the D*D solve at the
    # current quadruple.  Near the locus the linearization of the real
    # residual in the Hermitian exponent shares its principal and
    # first-order parts with D*D, so -(D*D)^-1 rho is a Newton-scaled
    # quasi-step; when the line search cannot descend along it the
    # damped Gauss-Newton phase takes over.
    step = cfg.flow_step
    op = None
    w_col = nahm.trapezoid_weights(pair.N)[:, None]
    while norm > cfg.newton_switch:
        if flow_steps >= cfg.max_flow_steps:
            raise NonConvergenceError(
                f"flow exhausted {cfg.max_flow_steps} steps (residual {norm:.3e})", norm
            )
        if op is None or flow_steps % 10 == 0:
            current = nahm.pair_to_quadruple(res.transformed(psi)[0])
            op = DStarDOperator(current, group)
        direction = -op.solve_interior((w_col * rho)[1:-1]).reshape(npts - 2, m)
        accepted = False
        while step > 1e-10:
            trial = psi.copy()
            trial[1:-1] += step * direction
            rho_t = res.residual_coords(trial)
            norm_t = res.norm(rho_t)
            if norm_t < norm:
                psi, rho, norm = trial, rho_t, norm_t
                step = min(step * 2.0, 1.0)
                accepted = True
                break
            step *= cfg.linesearch_shrink
        flow_steps += 1
        if cfg.verbose:
            print(f"  flow {flow_steps:4d}  residual {norm:.6e}  step {step:.3e}",
                  flush=True)
        if not accepted:
            break  # stalled flow: hand to Gauss-Newton

    # Phase 2: damped Gauss-Newton on the weighted least-squares system.
    # The banded Jacobian is reused while psi barely moves (warm-started
    # solves typically need a single assembly).
    lam = 0.0
    w_nodes = np.repeat(nahm.trapezoid_weights(pair.N), m)
    stall = 0
    jac = None
    psi_at_jac = None
    while newton_iters < cfg.max_newton_iters:
        if norm <= 0.05 * cfg.residual_tol:
            break
        if norm <= cfg.residual_tol and stall >= 1:
            break
        if jac is None or np.max(np.abs(psi - psi_at_jac)) > max(1e-5, 0.02 * np.max(np.abs(psi))):
            jac = _colored_jacobian(res, psi, rho)
            psi_at_jac = psi.copy()
            h = (jac.T @ (scipy.sparse.diags(w_nodes) @ jac)).tocsc()
        grad = jac.T @ (w_nodes * rho.ravel())
        solved = False
        for _ in range(8):
            reg = h + lam * scipy.sparse.identity(h.shape[0]) if lam > 0 else h
            try:
                delta = scipy.sparse.linalg.spsolve(reg.tocsc(), -grad)
            except RuntimeError:
                lam = max(lam * 10, 1e-10)
                continue
            if not np.all(np.isfinite(delta)):
                lam = max(lam * 10, 1e-10)
                continue
            t = 1.0
            while t > 1e-6:
                trial = psi.copy()
                trial[1:-1] += t * delta.reshape(npts - 2, m)
                rho_t = res.residual_coords(trial)
                norm_t = res.norm(rho_t)
                if norm_t < norm:
                    improvement = (norm - norm_t) / max(norm, 1e-300)
                    psi, rho, norm = trial, rho_t, norm_t
                    lam = lam / 4 if lam > 1e-14 else 0.0
                    solved = True
                    stall = stall + 1 if improvement < 1e-3 else 0
                    break
                t *= cfg.linesearch_shrink
            if solved:
                break
            if jac is not None and psi_at_jac is not None and not np.array_equal(psi, psi_at_jac):
                jac = None  # stale Jacobian could not descend: rebuild
                break
            lam = max(lam * 10, 1e-8)
        newton_iters += 1
        if cfg.verbose:
            print(f"  newton {newton_iters:3d}  residual {norm:.6e}  lambda {lam:.1e}",
                  flush=True)
        if not solved and jac is not None:
            stall += 1
            if stall >= 3:
                break

    if norm > cfg.residual_tol:
        raise NonConvergenceError(
            f"gauge fixing stopped at residual {norm:.3e} "
            f"(tolerance {cfg.residual_tol:.1e})", norm
        )

    fixed, g_samples, _ = res.transformed(psi)
    g_samples = g_samples.copy()
    g_samples[0] = np.eye(pair.n)
    g_samples[-1] = np.eye(pair.n)
    gauge = GaugeTransform(g_samples, liecore.COMPLEX_GROUP)
    return GaugeFixResult(
        gauge,
        fixed,
        norm,
        nahm.residual_norm(nahm.complex_residual(fixed), group.c),
        flow_steps,
        newton_iters,
        psi,
    )
