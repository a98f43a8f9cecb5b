"""Dense complex linear algebra with explicit tolerance semantics.

Every other module funnels its numerics through the helpers here, so
Hermiticity, positivity, rank, and equality decisions all share one set
of cutoffs and every verdict is deterministic for identical input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InstrumentumError

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "as_matrix",
    "dagger",
    "kron",
    "herm_eig",
    "numeric_rank",
    "psd_check",
    "isometry_complete",
    "herm_exp",
]

_TOL_FIELDS = ("eps_herm", "eps_psd", "eps_eq", "sv_rel_cutoff")


@dataclass(frozen=True)
class Tolerances:
    """Numerical cutoffs used by every decision in the package.

    eps_herm:
        Relative Hermiticity tolerance, ``||a - a^dag|| <= eps_herm * max(1, ||a||)``.
    eps_psd:
        Relative tolerance for negative eigenvalues in positivity checks.
    eps_eq:
        Relative operator-equality tolerance.
    sv_rel_cutoff:
        Relative singular-value cutoff for rank decisions.
    """

    eps_herm: float = 1e-9
    eps_psd: float = 1e-9
    eps_eq: float = 1e-9
    sv_rel_cutoff: float = 1e-10

    def __post_init__(self) -> None:
        for name in _TOL_FIELDS:
            value = getattr(self, name)
            if not 0.0 < value < 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2), got {value!r}")

    def scaled(self, factor: float) -> "Tolerances":
        """A copy with all four cutoffs multiplied by ``factor``."""
        return Tolerances(**{name: getattr(self, name) * factor for name in _TOL_FIELDS})


DEFAULT_TOL = Tolerances()


def as_matrix(a, *, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a read-only 2-D complex128 array, rejecting non-finite entries."""
    out = np.array(a, dtype=np.complex128, order="C")
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {out.shape}")
    if out.size and not np.all(np.isfinite(out.view(np.float64))):
        raise ValueError(f"{name} contains NaN or Inf entries")
    out.setflags(write=False)
    return out


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(a).conj().T


def kron(a, b) -> np.ndarray:
    """Kronecker product with row-major block convention (first factor is the coarse index)."""
    return np.kron(as_matrix(a, name="kron factor"), as_matrix(b, name="kron factor"))


def herm_defect(a) -> float:
    """Frobenius distance from ``a`` to its conjugate transpose."""
    a = np.asarray(a)
    return float(np.linalg.norm(a - a.conj().T))


def require_hermitian(a, tol: Tolerances = DEFAULT_TOL, *, name: str = "matrix") -> np.ndarray:
    """Validate Hermiticity within ``eps_herm`` and return the symmetrized matrix."""
    a = as_matrix(a, name=name)
    if a.shape[0] != a.shape[1]:
        raise InstrumentumError(f"{name} must be square, got shape {a.shape}")
    defect = herm_defect(a)
    if defect > tol.eps_herm * max(1.0, float(np.linalg.norm(a))):
        raise InstrumentumError(f"{name} is not Hermitian: defect {defect:.3e}")
    sym = (a + a.conj().T) / 2.0
    sym.setflags(write=False)
    return sym


def herm_eig(a, tol: Tolerances = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with a deterministic convention.

    Returns ``(values, vectors)`` with eigenvalues sorted descending and each
    eigenvector's phase fixed so that its first entry of modulus above
    ``sv_rel_cutoff`` is real and positive.  ``vectors[:, j]`` belongs to
    ``values[j]``.  Input is symmetrized before LAPACK sees it.
    """
    sym = require_hermitian(a, tol)
    values, vectors = np.linalg.eigh(sym)
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        significant = np.flatnonzero(np.abs(col) > tol.sv_rel_cutoff)
        if significant.size:
            pivot = col[significant[0]]
            vectors[:, j] = col * (pivot.conjugate() / abs(pivot))
    return values, vectors


def svd_rank(a, tol: Tolerances = DEFAULT_TOL) -> tuple[int, np.ndarray, np.ndarray]:
    """Rank, singular values, and an orthonormal kernel basis in one pass.

    A singular value is retained when it exceeds
    ``sv_rel_cutoff * sigma_max * max(rows, cols)``.
    """
    a = as_matrix(a)
    rows, cols = a.shape
    if a.size == 0:
        return 0, np.zeros(0), np.eye(cols, dtype=np.complex128)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    if s.size and s[0] > 0.0:
        cut = tol.sv_rel_cutoff * float(s[0]) * max(rows, cols)
        rank = int(np.count_nonzero(s > cut))
    else:
        rank = 0
    null_basis = vh[rank:, :].conj().T.copy()
    return rank, s, null_basis


def numeric_rank(a, tol: Tolerances = DEFAULT_TOL) -> tuple[int, np.ndarray]:
    """Numerical rank and orthonormal kernel basis of a rectangular matrix.

    The kernel basis has shape ``(cols, cols - rank)``; its columns are the
    trailing right-singular vectors.
    """
    rank, _, null_basis = svd_rank(a, tol)
    return rank, null_basis


def psd_check(a, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True when the Hermitian matrix ``a`` is positive semidefinite.

    The criterion is ``lambda_min >= -eps_psd * max(1, lambda_max)``.
    Raises when ``a`` is not Hermitian within ``eps_herm``.
    """
    sym = require_hermitian(a, tol)
    values = np.linalg.eigvalsh(sym)
    lo, hi = float(values[0]), float(values[-1])
    return lo >= -tol.eps_psd * max(1.0, hi)


def isometry_complete(v, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Extend orthonormal columns ``v`` to a full unitary.

    The leading columns of the result are ``v`` exactly; later columns are
    obtained by orthonormalizing the standard basis vectors against what is
    already present, in index order, skipping candidates whose residual norm
    falls below ``sv_rel_cutoff``.
    """
    v = as_matrix(v, name="isometry columns")
    rows, cols = v.shape
    if rows < cols:
        raise InstrumentumError(f"cannot complete {rows}x{cols}: more columns than rows")
    gram_defect = float(np.linalg.norm(v.conj().T @ v - np.eye(cols)))
    if gram_defect > tol.eps_eq * max(1.0, np.sqrt(cols)):
        raise InstrumentumError(f"columns are not orthonormal: defect {gram_defect:.3e}")
    basis = [v[:, j].copy() for j in range(cols)]
    for i in range(rows):
        if len(basis) == rows:
            break
        cand = np.zeros(rows, dtype=np.complex128)
        cand[i] = 1.0
        # two orthogonalization sweeps keep the completion orthonormal to
        # working precision even when a residual is small
        for _ in range(2):
            for b in basis:
                cand = cand - b * (b.conj() @ cand)
        norm = float(np.linalg.norm(cand))
        if norm < tol.sv_rel_cutoff:
            continue
        basis.append(cand / norm)
    if len(basis) < rows:
        raise InstrumentumError("isometry completion ran out of candidate directions")
    return np.column_stack(basis)


def herm_exp(a, t: float, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Unitary ``exp(i * t * a)`` of a Hermitian generator, by eigendecomposition."""
    values, vectors = herm_eig(a, tol)
    phases = np.exp(1j * float(t) * values)
    return (vectors * phases) @ vectors.conj().T
