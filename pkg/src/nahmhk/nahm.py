"""Discretized paths on [0,1] and the structures living on them.

A path is sampled at the N+1 uniform nodes s_k = k/N.  This module holds
the quadruple residuals of the coupled first-order system

    dA_i/ds + [A_0, A_i] + [A_j, A_k] = 0,   (i,j,k) cyclic in {1,2,3},

their split into the complex equation  d(beta)/ds + 2[alpha, beta] = 0 and
the real equation  d(alpha+alpha*)/ds + 2([alpha,alpha*]+[beta,beta*]) = 0
under alpha = (A_0 + iA_1)/2, beta = (A_2 + iA_3)/2, the closed-form
generator of complex-equation solutions from endpoint data (U, eta), the
real and complex gauge actions, and the flat quaternionic structure with
its L^2 inner product.

Derivatives are 4th-order finite differences (one-sided at the interval
ends); integrals are trapezoidal.  Default grid resolution is N = 256.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse

from . import liecore
from .liecore import COMPACT_ALGEBRA, COMPLEX_GROUP, GroupSpec, bracket, dag

DEFAULT_N = 256
MIN_N = 8


# ---------------------------------------------------------------------------
# grid machinery


@lru_cache(maxsize=None)
def diff_matrix(n_intervals: int) -> scipy.sparse.csr_matrix:
    """4th-order first-derivative matrix on N+1 uniform nodes of [0,1].

    Central 5-point stencil in the interior, 4th-order one-sided 5-point
    stencils on the two rows nearest each end.
    """
    if n_intervals < MIN_N:
        raise ValueError(f"grid resolution N >= {MIN_N} required, got {n_intervals}")
    n = n_intervals
    h = 1.0 / n
    d = scipy.sparse.lil_matrix((n + 1, n + 1))
    for k in range(2, n - 1):
        d[k, k - 2 : k + 3] = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12 * h)
    fwd0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
    fwd1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h)
    d[0, :5] = fwd0
    d[1, :5] = fwd1
    d[n, n - 4 :] = -fwd0[::-1]
    d[n - 1, n - 4 :] = -fwd1[::-1]
    return d.tocsr()


def apply_diff(field_samples: np.ndarray) -> np.ndarray:
    """Differentiate a sampled matrix field (N+1, n, n) along s."""
    npts = field_samples.shape[0]
    d = diff_matrix(npts - 1)
    flat = field_samples.reshape(npts, -1)
    return (d @ flat).reshape(field_samples.shape)


@lru_cache(maxsize=None)
def diff_matrix_2nd(n_intervals: int) -> scipy.sparse.csr_matrix:
    """2nd-order derivative matrix: central interior, one-sided end rows.

    Together with the trapezoidal weights this pair satisfies exact
    summation by parts, so weak compositions built from it carry no
    boundary inconsistency.
    """
    n = n_intervals
    h = 1.0 / n
    d = scipy.sparse.lil_matrix((n + 1, n + 1))
    for k in range(1, n):
        d[k, k - 1] = -1.0 / (2 * h)
        d[k, k + 1] = 1.0 / (2 * h)
    d[0, 0] = -1.0 / h
    d[0, 1] = 1.0 / h
    d[n, n - 1] = -1.0 / h
    d[n, n] = 1.0 / h
    return d.tocsr()


@lru_cache(maxsize=None)
def trapezoid_weights(n_intervals: int) -> np.ndarray:
    w = np.full(n_intervals + 1, 1.0 / n_intervals)
    w[0] *= 0.5
    w[-1] *= 0.5
    w.setflags(write=False)
    return w


def grid(n_intervals: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_intervals + 1)


def field_l2_norm(field_samples: np.ndarray, c: float = 1.0) -> float:
    """Trapezoidal L^2 norm of a matrix field, pointwise norm c*tr(x^dag x)."""
    w = trapezoid_weights(field_samples.shape[0] - 1)
    pointwise = np.sum(np.abs(field_samples) ** 2, axis=(-2, -1))
    return float(np.sqrt(c * np.sum(w * pointwise)))


# ---------------------------------------------------------------------------
# domain types


@dataclass
class Path:
    """A sampled map [0,1] -> matrices with a role tag.

    ``samples`` has shape (N+1, n, n); node k holds the value at s = k/N.
    """

    samples: np.ndarray
    role: str

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.ndim != 3 or self.samples.shape[1] != self.samples.shape[2]:
            raise ValueError(f"expected samples of shape (N+1, n, n), got {self.samples.shape}")
        if self.samples.shape[0] < MIN_N + 1:
            raise ValueError(f"need at least {MIN_N + 1} samples, got {self.samples.shape[0]}")
        if self.role not in liecore.ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def N(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def validate(self, group: GroupSpec, tol: float = liecore.KERNEL_TOL) -> None:
        group.check_role(self.samples, self.role, tol)


@dataclass
class NahmQuadruple:
    """Four compact-algebra paths (A_0, ..., A_3) on a shared grid.

    ``samples`` has shape (4, N+1, n, n) and must be anti-Hermitian
    samplewise.
    """

    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.ndim != 4 or self.samples.shape[0] != 4:
            raise ValueError(f"expected samples of shape (4, N+1, n, n), got {self.samples.shape}")

    @property
    def N(self) -> int:
        return self.samples.shape[1] - 1

    @property
    def n(self) -> int:
        return self.samples.shape[2]

    def component(self, i: int) -> Path:
        return Path(self.samples[i], COMPACT_ALGEBRA)

    def validate(self, group: GroupSpec, tol: float = liecore.KERNEL_TOL) -> None:
        group.check_role(self.samples, COMPACT_ALGEBRA, tol)


@dataclass
class ComplexPair:
    """Paths (alpha, beta) with values in the complex algebra."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=complex)
        self.beta = np.asarray(self.beta, dtype=complex)
        if self.alpha.shape != self.beta.shape:
            raise ValueError("alpha and beta must share a grid and dimension")

    @property
    def N(self) -> int:
        return self.alpha.shape[0] - 1

    @property
    def n(self) -> int:
        return self.alpha.shape[1]


@dataclass
class GaugeTransform:
    """A sampled gauge path g(s), optionally with an analytic d(g^-1)/ds.

    ``endpoints_one`` marks membership of the based gauge group
    (g(0) = g(1) = 1).  When ``dginv`` is None, derivatives fall back to
    the standard finite-difference stencils.
    """

    samples: np.ndarray
    role: str = COMPLEX_GROUP
    dginv: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)

    @property
    def N(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def inverse_samples(self) -> np.ndarray:
        return np.linalg.inv(self.samples)

    def dginv_samples(self) -> np.ndarray:
        if self.dginv is not None:
            return self.dginv
        return apply_diff(self.inverse_samples())

    def endpoints_one(self, tol: float = 1e-8) -> bool:
        eye = np.eye(self.n)
        return bool(
            np.max(np.abs(self.samples[0] - eye)) <= tol
            and np.max(np.abs(self.samples[-1] - eye)) <= tol
        )

    @staticmethod
    def identity(n_intervals: int, n: int, role: str = COMPLEX_GROUP) -> "GaugeTransform":
        samples = np.broadcast_to(np.eye(n, dtype=complex), (n_intervals + 1, n, n)).copy()
        return GaugeTransform(samples, role, dginv=np.zeros_like(samples))

    @staticmethod
    def one_parameter(x: np.ndarray, n_intervals: int, role: str = COMPLEX_GROUP) -> "GaugeTransform":
        """g(s) = expm(s x), with analytic derivative d(g^-1)/ds = -x g^-1."""
        samples = _expm_scaled(x, grid(n_intervals))
        ginv = _expm_scaled(x, -grid(n_intervals))
        return GaugeTransform(samples, role, dginv=-(ginv @ x))

    @staticmethod
    def based_one_parameter(
        x: np.ndarray, n_intervals: int, role: str = COMPLEX_GROUP
    ) -> "GaugeTransform":
        """g(s) = expm(phi(s) x), phi = sin(pi s): endpoints are exactly 1."""
        s = grid(n_intervals)
        phi = np.sin(np.pi * s)
        dphi = np.pi * np.cos(np.pi * s)
        samples = _expm_scaled(x, phi)
        ginv = _expm_scaled(x, -phi)
        dginv = -dphi[:, None, None] * (x @ ginv)
        return GaugeTransform(samples, role, dginv=dginv)


def _expm_scaled(x: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """expm(t x) for a vector of scalars t, via one eigendecomposition.

    Uses the unitarily-stable path for normal matrices and falls back to
    per-sample expm when x is too far from diagonalizable.
    """
    x = np.asarray(x, dtype=complex)
    factors = np.asarray(factors, dtype=float)
    if liecore.is_hermitian(x, 1e-13):
        w, v = np.linalg.eigh(x)
        return np.einsum("ij,tj,kj->tik", v, np.exp(np.multiply.outer(factors, w)), np.conj(v))
    if liecore.is_anti_hermitian(x, 1e-13):
        w, v = np.linalg.eigh(1j * x)
        phases = np.exp(-1j * np.multiply.outer(factors, w))
        return np.einsum("ij,tj,kj->tik", v, phases, np.conj(v))
    try:
        w, v = np.linalg.eig(x)
        if np.linalg.cond(v) > 1e8:
            raise np.linalg.LinAlgError("ill-conditioned eigenbasis")
        vinv = np.linalg.inv(v)
        phases = np.exp(np.multiply.outer(factors, w))
        return np.einsum("ij,tj,jk->tik", v, phases, vinv)
    except np.linalg.LinAlgError:
        return np.array([liecore.expm(t * x) for t in factors])


# ---------------------------------------------------------------------------
# quadruple <-> pair


def quadruple_to_pair(a: NahmQuadruple) -> ComplexPair:
    """alpha = (A_0 + i A_1)/2, beta = (A_2 + i A_3)/2, samplewise."""
    s = a.samples
    return ComplexPair(0.5 * (s[0] + 1j * s[1]), 0.5 * (s[2] + 1j * s[3]))


def pair_to_quadruple(p: ComplexPair) -> NahmQuadruple:
    """Inverse split: A_0 = alpha - alpha^dag, A_1 = -i(alpha + alpha^dag),
    and likewise for (A_2, A_3) from beta.

    Exact on any pair; the outputs are anti-Hermitian by construction.
    """
    ad = dag(p.alpha)
    bd = dag(p.beta)
    return NahmQuadruple(
        np.stack(
            [
                p.alpha - ad,
                -1j * (p.alpha + ad),
                p.beta - bd,
                -1j * (p.beta + bd),
            ]
        )
    )


# ---------------------------------------------------------------------------
# residuals


def nahm_residual(a: NahmQuadruple) -> np.ndarray:
    """The three coupled-system residuals, shape (3, N+1, n, n).

    r_i = dA_i/ds + [A_0, A_i] + [A_j, A_k], (i,j,k) cyclic in {1,2,3}.
    """
    s = a.samples
    ds = np.stack([apply_diff(s[i]) for i in (1, 2, 3)])
    return np.stack(
        [
            ds[0] + bracket(s[0], s[1]) + bracket(s[2], s[3]),
            ds[1] + bracket(s[0], s[2]) + bracket(s[3], s[1]),
            ds[2] + bracket(s[0], s[3]) + bracket(s[1], s[2]),
        ]
    )


def nahm_residual_norm(a: NahmQuadruple, c: float = 1.0) -> float:
    r = nahm_residual(a)
    w = trapezoid_weights(a.N)
    total = np.sum(w * np.sum(np.abs(r) ** 2, axis=(0, -2, -1)))
    return float(np.sqrt(c * total))


def complex_residual(p: ComplexPair) -> np.ndarray:
    """d(beta)/ds + 2[alpha, beta], samplewise; shape (N+1, n, n)."""
    return apply_diff(p.beta) + 2.0 * bracket(p.alpha, p.beta)


def real_residual(p: ComplexPair) -> np.ndarray:
    """d(alpha+alpha^dag)/ds + 2([alpha,alpha^dag] + [beta,beta^dag]).

    The output is Hermitian samplewise; a safety assertion guards the
    identity at 1e-12 relative.
    """
    ad = dag(p.alpha)
    bd = dag(p.beta)
    r = apply_diff(p.alpha + ad) + 2.0 * (bracket(p.alpha, ad) + bracket(p.beta, bd))
    herm_defect = np.max(np.abs(r - dag(r)))
    scale = max(1.0, float(np.max(np.abs(r))))
    if herm_defect > 1e-12 * scale * 100:
        raise AssertionError(f"real residual lost Hermiticity: defect {herm_defect:.3e}")
    return r


def residual_norm(field_samples: np.ndarray, c: float = 1.0) -> float:
    """Trapezoidal L^2 norm of a single residual field."""
    return field_l2_norm(field_samples, c)


# ---------------------------------------------------------------------------
# closed-form generation from endpoint data


def generate_from_moduli(
    u_end: np.ndarray,
    eta: np.ndarray,
    n_intervals: int = DEFAULT_N,
    midpoints: bool = False,
) -> tuple[ComplexPair, Path]:
    """Complex-equation solution with endpoint data (u(1), eta).

    The path u(s) interpolates 1 -> u(1) through the polar splitting
    u(1) = w * expm(xi):  u(s) = expm(s log w) * expm(s xi).  Both alpha
    and beta are evaluated from closed forms (no finite differences):

        alpha(s) = -(l + expm(s l) xi expm(-s l)) / 2,   l = log w,
        beta(s)  = u(s) eta u(s)^-1.

    With ``midpoints`` the returned arrays are sampled on the doubled
    grid (2N+1 points: all nodes plus interval midpoints), which the
    integrators consume directly.
    """
    u_end = np.asarray(u_end, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    w, xi = liecore.polar_decompose(u_end)
    # Balanced-branch log keeps expm(l) = w exactly and lands in su(n)
    # when det(u(1)) = 1, so the path never leaves SL(n,C).
    l = liecore.unitary_log_balanced(w)
    npts = 2 * n_intervals if midpoints else n_intervals
    s = grid(npts)
    e1 = _expm_scaled(l, s)
    e1_inv = _expm_scaled(l, -s)
    e2 = _expm_scaled(xi, s)
    e2_inv = _expm_scaled(xi, -s)
    u = e1 @ e2
    uinv = e2_inv @ e1_inv
    alpha = -0.5 * (l[None, :, :] + e1 @ xi @ e1_inv)
    beta = u @ eta[None, :, :] @ uinv
    return ComplexPair(alpha, beta), Path(u, COMPLEX_GROUP)


# ---------------------------------------------------------------------------
# gauge actions


def gauge_act_real(g: GaugeTransform, a: NahmQuadruple) -> NahmQuadruple:
    """A_0 -> g A_0 g^-1 + g d(g^-1)/ds;  A_i -> g A_i g^-1 (i = 1,2,3)."""
    if g.N != a.N or g.n != a.n:
        raise ValueError("gauge transform and quadruple must share grid and dimension")
    ginv = g.inverse_samples()
    dginv = g.dginv if g.dginv is not None else apply_diff(ginv)
    out = g.samples[None] @ a.samples @ ginv[None]
    out[0] = out[0] + g.samples @ dginv
    return NahmQuadruple(out)


def gauge_act_complex(g: GaugeTransform, p: ComplexPair) -> ComplexPair:
    """alpha -> g alpha g^-1 + (1/2) g d(g^-1)/ds;  beta -> g beta g^-1."""
    if g.N != p.N or g.n != p.n:
        raise ValueError("gauge transform and pair must share grid and dimension")
    ginv = g.inverse_samples()
    dginv = g.dginv if g.dginv is not None else apply_diff(ginv)
    alpha = g.samples @ p.alpha @ ginv + 0.5 * (g.samples @ dginv)
    beta = g.samples @ p.beta @ ginv
    return ComplexPair(alpha, beta)


# ---------------------------------------------------------------------------
# flat quaternionic structure on four-path tuples

_QUAT_PERM = {
    "I": ((1, 0, 3, 2), (-1.0, 1.0, -1.0, 1.0)),
    "J": ((2, 3, 0, 1), (-1.0, 1.0, 1.0, -1.0)),
    "K": ((3, 2, 1, 0), (-1.0, -1.0, 1.0, 1.0)),
}


def quaternion_act(which: str, tuple4: np.ndarray) -> np.ndarray:
    """Apply I, J or K to a four-path tuple (shape (4, N+1, n, n)).

    I: (a0,a1,a2,a3) -> (-a1, a0, -a3, a2)
    J: (a0,a1,a2,a3) -> (-a2, a3, a0, -a1)
    K: (a0,a1,a2,a3) -> (-a3, -a2, a1, a0)
    """
    try:
        perm, signs = _QUAT_PERM[which]
    except KeyError:
        raise ValueError(f"unknown complex structure {which!r}; expected 'I', 'J' or 'K'")
    out = np.empty_like(tuple4)
    for slot in range(4):
        out[slot] = signs[slot] * tuple4[perm[slot]]
    return out


def l2_inner(a: np.ndarray, b: np.ndarray, c: float = 1.0) -> float:
    """Trapezoidal L^2 pairing of two four-path tuples.

    Pointwise factor is the invariant inner product -c*tr(xy) summed over
    the four slots; for anti-Hermitian tuples this equals the Hermitian
    pairing used here.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    w = trapezoid_weights(a.shape[1] - 1)
    pointwise = np.sum(np.conj(a) * b, axis=(0, -2, -1)).real
    return float(c * np.sum(w * pointwise))


def l2_norm(a: np.ndarray, c: float = 1.0) -> float:
    return float(np.sqrt(max(l2_inner(a, a, c), 0.0)))


# ---------------------------------------------------------------------------
# linearized system at a base quadruple


def linearized_residuals(a: NahmQuadruple, v: np.ndarray) -> np.ndarray:
    """The four linear fields cut out by the tangent-space equations.

    Slot 0 is the slice condition dv_0/ds + sum_i [A_i, v_i]; slots 1-3
    are the linearizations of the three quadruple residuals.  Shape
    (4, N+1, n, n).
    """
    s = a.samples
    dv = np.stack([apply_diff(v[i]) for i in range(4)])
    slice_field = dv[0] + sum(bracket(s[i], v[i]) for i in range(4))
    lin = [slice_field]
    cyc = ((1, 2, 3), (2, 3, 1), (3, 1, 2))
    for (i, j, k) in cyc:
        lin.append(
            dv[i]
            + bracket(s[0], v[i])
            + bracket(v[0], s[i])
            + bracket(s[j], v[k])
            + bracket(v[j], s[k])
        )
    return np.stack(lin)
