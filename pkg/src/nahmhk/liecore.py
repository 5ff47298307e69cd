"""Numerical kernel for compact matrix groups and their complexifications.

Supports U(n) and SU(n), the complex groups GL(n,C) / SL(n,C), and the
corresponding Lie algebras.  Elements are plain complex ndarrays; the
functions here supply the bracket, the invariant inner products, matrix
exp/log, the polar splitting of a complex group element, and role
validation (anti-Hermitian, unitary, ...).

All operations are pure; tolerances default to ``KERNEL_TOL`` and can be
overridden per call.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

# Kernel-level tolerance for role checks and decompositions.
KERNEL_TOL = 1e-10

# Role tags.  "compact" refers to the compact real form u(n)/su(n) or the
# group U(n)/SU(n); "complex" to gl/sl(n,C) or GL/SL(n,C).
COMPACT_ALGEBRA = "compact-algebra"
COMPLEX_ALGEBRA = "complex-algebra"
COMPACT_GROUP = "compact-group"
COMPLEX_GROUP = "complex-group"

ROLES = (COMPACT_ALGEBRA, COMPLEX_ALGEBRA, COMPACT_GROUP, COMPLEX_GROUP)


class BranchCutError(ValueError):
    """Principal matrix logarithm undefined: spectrum touches (-inf, 0]."""


class RoleError(ValueError):
    """A matrix fails the invariant required by its declared role."""


def dag(x: np.ndarray) -> np.ndarray:
    """Conjugate transpose, batched over leading axes."""
    return np.conj(np.swapaxes(x, -1, -2))


def adjoint_star(x: np.ndarray) -> np.ndarray:
    """The * operation of the compact real form: conjugate transpose."""
    return dag(x)


def bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix commutator [x, y] = xy - yx, batched over leading axes."""
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x @ y - y @ x


def inner_real(x: np.ndarray, y: np.ndarray, c: float = 1.0) -> float:
    """Invariant inner product -c*tr(xy) on the compact algebra.

    Positive definite on anti-Hermitian matrices; the imaginary part of
    the trace is discarded (it vanishes identically on u(n)).
    """
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(-c * np.trace(x @ y).real)


def inner_complex(x: np.ndarray, y: np.ndarray, c: float = 1.0) -> complex:
    """Complex-bilinear symmetric form -c*tr(xy) on the complex algebra.

    Restricts to :func:`inner_real` on anti-Hermitian arguments.
    """
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return complex(-c * np.trace(x @ y))


def frob_norm(x: np.ndarray, c: float = 1.0) -> float:
    """Hermitian norm sqrt(c*tr(x^dag x)); agrees with inner_real(x,x)^(1/2)
    on anti-Hermitian x."""
    return float(np.sqrt(c * np.sum(np.abs(x) ** 2)))


def is_anti_hermitian(x: np.ndarray, tol: float = KERNEL_TOL) -> bool:
    return bool(np.max(np.abs(x + dag(x))) <= tol * max(1.0, np.max(np.abs(x))))


def is_hermitian(x: np.ndarray, tol: float = KERNEL_TOL) -> bool:
    return bool(np.max(np.abs(x - dag(x))) <= tol * max(1.0, np.max(np.abs(x))))


def is_unitary(u: np.ndarray, tol: float = KERNEL_TOL) -> bool:
    n = u.shape[-1]
    return bool(np.max(np.abs(dag(u) @ u - np.eye(n))) <= tol * 10)


def expm(x: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring with Pade kernel)."""
    return scipy.linalg.expm(np.asarray(x, dtype=complex))


def logm_principal(u: np.ndarray, tol: float = KERNEL_TOL) -> np.ndarray:
    """Principal matrix logarithm.

    Valid for invertible matrices with no eigenvalue on the closed
    negative real axis; the result has eigenvalue imaginary parts in
    (-pi, pi).

    Raises
    ------
    BranchCutError
        If an eigenvalue lies on (-inf, 0] within ``tol``.
    """
    u = np.asarray(u, dtype=complex)
    eigs = np.linalg.eigvals(u)
    scale = float(np.max(np.abs(eigs)))
    if scale == 0.0 or np.min(np.abs(eigs)) <= tol * scale:
        raise BranchCutError("matrix is singular; logarithm undefined")
    bad = (eigs.real < 0) & (np.abs(eigs.imag) <= tol * np.abs(eigs))
    if np.any(bad):
        raise BranchCutError(
            f"eigenvalue {eigs[bad][0]:.3e} on the negative real axis; "
            "principal branch undefined"
        )
    out = scipy.linalg.logm(u)
    return np.asarray(out, dtype=complex)


def polar_decompose(u: np.ndarray, tol: float = KERNEL_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Split an invertible matrix as u = w * expm(xi) with w unitary, xi Hermitian.

    The positive factor is P = (u^dag u)^(1/2), computed by a Schur-based
    matrix square root; xi = log P.  For u in SL(n,C) both factors have
    unit determinant / zero trace automatically.
    """
    u = np.asarray(u, dtype=complex)
    h = dag(u) @ u
    h = 0.5 * (h + dag(h))
    if np.min(np.linalg.eigvalsh(h)) <= tol:
        raise ValueError("matrix is singular; polar decomposition undefined")
    p = scipy.linalg.sqrtm(h)
    p = 0.5 * (p + dag(p))
    xi = scipy.linalg.logm(p)
    xi = 0.5 * (xi + dag(xi))
    w = u @ np.linalg.inv(p)
    return w, np.asarray(xi, dtype=complex)


def _helmert_rows(n: int) -> np.ndarray:
    """Orthonormal basis of the zero-sum subspace of R^n (n-1 rows)."""
    rows = np.zeros((n - 1, n))
    for k in range(1, n):
        rows[k - 1, :k] = 1.0
        rows[k - 1, k] = -k
        rows[k - 1] /= np.sqrt(k * (k + 1))
    return rows


@dataclass(frozen=True)
class GroupSpec:
    """A compact matrix group U(n) or SU(n) with inner-product normalization c.

    The invariant inner product is <x, y> = -c * tr(xy); the orthonormal
    algebra basis returned by :meth:`algebra_basis` is normalized against
    c = 1, so metric values computed downstream scale linearly with c.
    """

    family: str
    n: int
    c: float = 1.0

    def __post_init__(self):
        if self.family not in ("U", "SU"):
            raise ValueError(f"unknown family {self.family!r}; expected 'U' or 'SU'")
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.family == "SU" and self.n < 2:
            raise ValueError("SU(n) requires n >= 2")
        if not self.c > 0:
            raise ValueError("normalization constant c must be positive")

    @property
    def algebra_dim(self) -> int:
        """Real dimension of the compact algebra."""
        return self.n * self.n if self.family == "U" else self.n * self.n - 1

    def algebra_basis(self) -> np.ndarray:
        """Orthonormal basis of u(n)/su(n), shape (dim, n, n).

        Orthonormal with respect to -tr(xy): imaginary diagonal
        combinations first, then real and imaginary off-diagonal pairs.
        """
        return _algebra_basis_cached(self.family, self.n)

    def coords(self, x: np.ndarray) -> np.ndarray:
        """Real coordinates of an algebra element in the orthonormal basis.

        Batched: input (..., n, n) gives output (..., dim).
        """
        basis = self.algebra_basis()
        return np.einsum("aij,...ji->...a", -basis, x).real

    def from_coords(self, v: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`coords` (batched)."""
        return np.einsum("...a,aij->...ij", v, self.algebra_basis())

    def hermitian_coords(self, x: np.ndarray) -> np.ndarray:
        """Real coordinates of a Hermitian element in the basis i*T_a."""
        basis = self.algebra_basis()
        return np.einsum("aij,...ji->...a", 1j * basis, x).real

    def from_hermitian_coords(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("...a,aij->...ij", v, 1j * self.algebra_basis())

    def project_algebra(self, x: np.ndarray) -> np.ndarray:
        """Nearest compact-algebra element: anti-Hermitian part, detraced for SU."""
        y = 0.5 * (x - dag(x))
        if self.family == "SU":
            tr = np.trace(y, axis1=-2, axis2=-1) / self.n
            y = y - tr[..., None, None] * np.eye(self.n)
        return y

    def random_algebra(self, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
        """Random compact-algebra element with <x,x>^(1/2) = norm (c = 1)."""
        v = rng.standard_normal(self.algebra_dim)
        v *= norm / np.linalg.norm(v)
        return self.from_coords(v)

    def random_complex_algebra(self, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
        """Random complex-algebra element with Hermitian norm = norm."""
        v = rng.standard_normal(2 * self.algebra_dim)
        v *= norm / np.linalg.norm(v)
        m = self.algebra_dim
        return self.from_coords(v[:m]) + 1j * self.from_coords(v[m:])

    def random_group(self, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
        """Random compact-group element expm(x) with ||x|| = norm."""
        return expm(self.random_algebra(rng, norm))

    def random_complex_group(self, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
        """Random complex-group element expm(z) with ||z|| = norm."""
        return expm(self.random_complex_algebra(rng, norm))

    def identity(self) -> np.ndarray:
        return np.eye(self.n, dtype=complex)

    def check_role(self, x: np.ndarray, role: str, tol: float = KERNEL_TOL) -> None:
        """Raise :class:`RoleError` if x violates the invariant of ``role``."""
        x = np.asarray(x)
        if x.shape[-2:] != (self.n, self.n):
            raise RoleError(f"expected {self.n}x{self.n} matrix, got {x.shape}")
        if role == COMPACT_ALGEBRA:
            if not is_anti_hermitian(x, tol):
                raise RoleError("compact-algebra element must be anti-Hermitian")
            if self.family == "SU" and np.max(np.abs(np.trace(x, axis1=-2, axis2=-1))) > tol * 10:
                raise RoleError("su(n) element must be traceless")
        elif role == COMPLEX_ALGEBRA:
            if self.family == "SU" and np.max(np.abs(np.trace(x, axis1=-2, axis2=-1))) > tol * 10:
                raise RoleError("sl(n,C) element must be traceless")
        elif role == COMPACT_GROUP:
            if not is_unitary(x, tol):
                raise RoleError("compact-group element must be unitary")
            if self.family == "SU" and np.max(np.abs(np.linalg.det(x) - 1)) > tol * 100:
                raise RoleError("SU(n) element must have unit determinant")
        elif role == COMPLEX_GROUP:
            if np.min(np.abs(np.linalg.det(x))) < tol:
                raise RoleError("complex-group element must be invertible")
            if self.family == "SU" and np.max(np.abs(np.linalg.det(x) - 1)) > tol * 100:
                raise RoleError("SL(n,C) element must have unit determinant")
        else:
            raise ValueError(f"unknown role {role!r}")


@lru_cache(maxsize=None)
def _algebra_basis_cached(family: str, n: int) -> np.ndarray:
    mats = []
    if family == "U":
        for k in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[k, k] = 1j
            mats.append(e)
    else:
        for row in _helmert_rows(n):
            mats.append(1j * np.diag(row).astype(complex))
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[j, k] = inv_sqrt2
            e[k, j] = -inv_sqrt2
            mats.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[j, k] = 1j * inv_sqrt2
            e[k, j] = 1j * inv_sqrt2
            mats.append(e)
    basis = np.array(mats)
    basis.setflags(write=False)
    return basis


# Batched exponentials for fields of structured matrices.  eigh-based,
# much faster on (N+1, n, n) stacks than a per-sample general expm.

def expm_hermitian(x: np.ndarray) -> np.ndarray:
    """Batched expm of Hermitian matrices via eigendecomposition."""
    w, v = np.linalg.eigh(x)
    return np.einsum("...ij,...j,...kj->...ik", v, np.exp(w), np.conj(v))


def expm_anti_hermitian(x: np.ndarray) -> np.ndarray:
    """Batched expm of anti-Hermitian matrices (result is unitary)."""
    w, v = np.linalg.eigh(1j * x)
    return np.einsum("...ij,...j,...kj->...ik", v, np.exp(-1j * w), np.conj(v))


def unitary_log_balanced(u: np.ndarray, tol: float = KERNEL_TOL) -> np.ndarray:
    """Anti-Hermitian logarithm of a unitary matrix with balanced winding.

    Starts from principal eigenangles in (-pi, pi) and shifts whole 2*pi
    branches until the total winding sum(theta) is minimal, keeping
    expm(result) = u exact.  For det(u) = 1 the principal total is a
    multiple of 2*pi (nonzero is possible once n >= 3), so the result is
    exactly traceless and one-parameter paths expm(s * result) stay in
    SU(n) / SL(n,C).
    """
    u = np.asarray(u, dtype=complex)
    t, q = scipy.linalg.schur(u, output="complex")
    eigs = np.diag(t)
    if np.any((eigs.real < 0) & (np.abs(eigs.imag) <= tol * np.abs(eigs))):
        raise BranchCutError("unitary matrix has eigenvalue -1; log branch undefined")
    theta = np.angle(eigs)
    total = np.sum(theta)
    k = int(np.round(total / (2 * np.pi)))
    for _ in range(abs(k)):
        if k > 0:
            j = int(np.argmax(theta))
            theta[j] -= 2 * np.pi
        else:
            j = int(np.argmin(theta))
            theta[j] += 2 * np.pi
    out = q @ np.diag(1j * theta) @ dag(q)
    return 0.5 * (out - dag(out))


def parse_group(token: str) -> GroupSpec:
    """Parse a group token: 'u1', 'su2', 'sun:4', 'un:3'."""
    t = token.strip().lower()
    if t == "u1":
        return GroupSpec("U", 1)
    if t == "su2":
        return GroupSpec("SU", 2)
    if t.startswith("sun:"):
        return GroupSpec("SU", int(t.split(":", 1)[1]))
    if t.startswith("un:"):
        return GroupSpec("U", int(t.split(":", 1)[1]))
    raise ValueError(f"unknown group token {token!r}; expected u1, su2, sun:n or un:n")
