"""Completely positive maps between finite-dimensional matrix algebras.

Conventions
-----------
A map is stored through Kraus operators ``A_k : H -> K`` held as
``dim_out x dim_in`` arrays (``dim_out = dim K``, ``dim_in = dim H``) and acts

* in the Heisenberg picture as ``E(B) = sum_k A_k^dag B A_k`` on operators
  ``B`` of the output space, and
* in the Schrodinger picture as ``E_*(rho) = sum_k A_k rho A_k^dag`` on
  states of the input space.

The Choi matrix of ``E`` is the ``dim_out * dim_in`` sided block matrix whose
block ``(s, t)`` is ``E(|k_s><k_t|)``, an operator on the input space; the
flat index is ``(s, m) -> s * dim_in + m``.  With this convention the Choi
matrix of a valid Kraus set is ``sum_k w_k w_k^dag`` for
``w_k = conj(vec_row(A_k))``, so positivity of the Choi matrix is exactly
complete positivity of the map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InstrumentumError
from .matkernel import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    dagger,
    herm_eig,
    numeric_rank,
    psd_check,
)

__all__ = [
    "KrausSet",
    "ChoiMatrix",
    "choi",
    "cp_check",
    "kraus_from_choi",
    "apply_heisenberg",
    "apply_schrodinger",
    "kraus_equivalent",
]


@dataclass(frozen=True)
class KrausSet:
    """An ordered, possibly empty, family of Kraus operators of fixed shape.

    The empty set is the canonical representation of the zero map.
    """

    dim_in: int
    dim_out: int
    ops: tuple = ()

    def __post_init__(self) -> None:
        if self.dim_in < 1 or self.dim_out < 1:
            raise ValueError(f"dimensions must be positive, got {self.dim_in}, {self.dim_out}")
        ops = tuple(as_matrix(op, name="Kraus operator") for op in self.ops)
        for op in ops:
            if op.shape != (self.dim_out, self.dim_in):
                raise ValueError(
                    f"Kraus operator has shape {op.shape}, expected {(self.dim_out, self.dim_in)}"
                )
        object.__setattr__(self, "ops", ops)

    def __len__(self) -> int:
        return len(self.ops)


@dataclass(frozen=True)
class ChoiMatrix:
    """Choi matrix of a CP map, in the block convention of this module."""

    dim_in: int
    dim_out: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.dim_in < 1 or self.dim_out < 1:
            raise ValueError(f"dimensions must be positive, got {self.dim_in}, {self.dim_out}")
        m = as_matrix(self.matrix, name="Choi matrix")
        side = self.dim_in * self.dim_out
        if m.shape != (side, side):
            raise ValueError(f"Choi matrix has shape {m.shape}, expected {(side, side)}")
        object.__setattr__(self, "matrix", m)


def choi(k: KrausSet) -> ChoiMatrix:
    """Choi matrix of the Heisenberg map defined by ``k``."""
    side = k.dim_out * k.dim_in
    m = np.zeros((side, side), dtype=np.complex128)
    for op in k.ops:
        w = op.conj().reshape(side)
        m += np.outer(w, w.conj())
    return ChoiMatrix(k.dim_in, k.dim_out, m)


def cp_check(c: ChoiMatrix, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Whether ``c`` is the Choi matrix of a completely positive map.

    Raises when the matrix is not Hermitian within ``eps_herm``.
    """
    return psd_check(c.matrix, tol)


def kraus_from_choi(c: ChoiMatrix, tol: Tolerances = DEFAULT_TOL) -> KrausSet:
    """Minimal Kraus set of a CP map given its Choi matrix.

    One operator per eigenvalue above ``sv_rel_cutoff * lambda_max``, so the
    number of operators equals the numerical rank of the Choi matrix and the
    result is a linearly independent family.
    """
    if not cp_check(c, tol):
        raise InstrumentumError("Choi matrix is not positive semidefinite")
    values, vectors = herm_eig(c.matrix, tol)
    ops = []
    if values.size and values[0] > 0.0:
        cut = tol.sv_rel_cutoff * float(values[0])
        for j in range(values.size):
            if values[j] <= cut:
                break
            w = np.sqrt(values[j]) * vectors[:, j]
            ops.append(w.conj().reshape(c.dim_out, c.dim_in))
    return KrausSet(c.dim_in, c.dim_out, tuple(ops))


def apply_heisenberg(k: KrausSet, b) -> np.ndarray:
    """``sum_k A_k^dag b A_k`` for an operator ``b`` on the output space."""
    b = as_matrix(b, name="operator")
    if b.shape != (k.dim_out, k.dim_out):
        raise ValueError(f"operator has shape {b.shape}, expected {(k.dim_out, k.dim_out)}")
    out = np.zeros((k.dim_in, k.dim_in), dtype=np.complex128)
    for op in k.ops:
        out += dagger(op) @ b @ op
    return out


def apply_schrodinger(k: KrausSet, rho) -> np.ndarray:
    """``sum_k A_k rho A_k^dag`` for a state (or any operator) on the input space."""
    rho = as_matrix(rho, name="state")
    if rho.shape != (k.dim_in, k.dim_in):
        raise ValueError(f"state has shape {rho.shape}, expected {(k.dim_in, k.dim_in)}")
    out = np.zeros((k.dim_out, k.dim_out), dtype=np.complex128)
    for op in k.ops:
        out += op @ rho @ dagger(op)
    return out


def _op_stack(k: KrausSet) -> np.ndarray:
    """Operators of ``k`` vectorized row-major into the columns of one matrix."""
    if not k.ops:
        return np.zeros((k.dim_out * k.dim_in, 0), dtype=np.complex128)
    return np.column_stack([op.reshape(-1) for op in k.ops])


def kraus_equivalent(k1: KrausSet, k2: KrausSet, tol: Tolerances = DEFAULT_TOL):
    """Unitary ``u`` relating two minimal Kraus sets of the same map, if one exists.

    When ``choi(k1)`` and ``choi(k2)`` agree within ``eps_eq`` the returned
    matrix satisfies ``k2.ops[l] = sum_k u[l, k] * k1.ops[k]`` and is unitary;
    otherwise returns None.  Both inputs must be linearly independent
    families, and the maps must share dimensions.
    """
    if (k1.dim_in, k1.dim_out) != (k2.dim_in, k2.dim_out):
        raise ValueError("Kraus sets act between different spaces")
    m1 = _op_stack(k1)
    m2 = _op_stack(k2)
    for name, m, count in (("first", m1, len(k1)), ("second", m2, len(k2))):
        if count and numeric_rank(m, tol)[0] < count:
            raise InstrumentumError(f"{name} Kraus set is not minimal (linearly dependent)")
    if len(k1) != len(k2):
        return None
    c1 = choi(k1).matrix
    c2 = choi(k2).matrix
    if float(np.linalg.norm(c1 - c2)) > tol.eps_eq * max(1.0, float(np.linalg.norm(c1))):
        return None
    if not k1.ops:
        return np.zeros((0, 0), dtype=np.complex128)
    u, *_ = np.linalg.lstsq(m1, m2, rcond=None)
    u = u.T  # row l holds the expansion of k2.ops[l] in k1.ops
    residual = float(np.linalg.norm(m1 @ u.T - m2))
    unitary_defect = float(np.linalg.norm(dagger(u) @ u - np.eye(len(k1))))
    scale = max(1.0, float(np.linalg.norm(m1)))
    if residual > tol.eps_eq * scale or unitary_defect > tol.eps_eq * max(1.0, np.sqrt(len(k1))):
        return None
    return u
