"""Extreme points: instruments, POVMs, channels, and correlation matrices.

An instrument is an extreme point of the convex set of instruments with its
outcome space exactly when the operators ``A_k(i)^dag A_l(i)``, taken over
all outcomes ``i`` and all pairs from a minimal Kraus set of each outcome,
are linearly independent.  A failure of independence is certified by a
block-diagonal Hermitian witness ``D`` with
``sum_{i,k,l} D(i)[k,l] A_k(i)^dag A_l(i) = 0``; factoring ``I +- D(i)``
splits the instrument into two distinct instruments averaging back to it.

A unit-diagonal PSD matrix (a correlation matrix) is extreme in its convex
body exactly when the projectors onto its Gram vectors span the full matrix
algebra of the Gram space; the witness there is a matrix ``B`` with
``<m_i| B m_i> = 0`` for every Gram vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpmaps import KrausSet, apply_heisenberg, choi, kraus_from_choi
from .errors import InstrumentumError
from .instruments import DiscreteInstrument, Povm, require_valid, trivial_from_povm
from .matkernel import (
    DEFAULT_TOL,
    Tolerances,
    dagger,
    herm_eig,
    numeric_rank,
    psd_check,
    require_hermitian,
    svd_rank,
)

__all__ = [
    "ExtremalityReport",
    "CorrelationReport",
    "instrument_extremal",
    "povm_extremal",
    "channel_extremal",
    "witness_decompose",
    "correlation_extremal",
    "correlation_witness_split",
]


@dataclass(frozen=True)
class ExtremalityReport:
    """Verdict of the linear-independence criterion for an instrument.

    ``span_rank`` is the rank of the family ``{A_k(i)^dag A_l(i)}``,
    ``required_rank`` its cardinality ``sum_i n(i)^2``; the instrument is
    extreme exactly when the two agree.  ``witness`` (present only when not
    extreme) holds one Hermitian block per outcome, normalized to unit
    operator norm, annihilating the family.  ``marginal`` flags verdicts
    where the smallest retained singular value sits within a factor ten of
    the rank cutoff.
    """

    is_extreme: bool
    span_rank: int
    required_rank: int
    marginal: bool
    labels: tuple
    block_dims: tuple
    witness: tuple | None = None


@dataclass(frozen=True)
class CorrelationReport:
    """Verdict for a unit-diagonal PSD matrix.

    ``gram_vectors`` holds the Gram vector of row ``i`` in row ``i``
    (shape ``(n, gram_rank)``); ``witness`` (when not extreme) is Hermitian
    with unit operator norm and ``<m_i| witness m_i> = 0`` for all ``i``.
    """

    is_extreme: bool
    gram_rank: int
    span_rank: int
    marginal: bool
    gram_vectors: np.ndarray = field(repr=False, default=None)
    witness: np.ndarray | None = field(repr=False, default=None)


def _minimal_blocks(m: DiscreteInstrument, tol: Tolerances) -> list:
    """Minimal Kraus set of every outcome, recomputed deterministically."""
    return [kraus_from_choi(choi(kraus), tol) for _, kraus in m.outcomes]


def _gram_columns(blocks: list, dim_in: int) -> np.ndarray:
    """Columns ``vec(A_k^dag A_l)`` over all outcomes and index pairs."""
    cols = []
    for ks in blocks:
        for a_k in ks.ops:
            for a_l in ks.ops:
                cols.append((dagger(a_k) @ a_l).reshape(-1))
    if not cols:
        return np.zeros((dim_in * dim_in, 0), dtype=np.complex128)
    return np.column_stack(cols)


def _marginal_flag(singular_values: np.ndarray, rank: int, shape, tol: Tolerances) -> bool:
    if rank == 0 or singular_values.size == 0 or singular_values[0] <= 0.0:
        return False
    cut = tol.sv_rel_cutoff * float(singular_values[0]) * max(shape)
    smallest_kept = float(singular_values[rank - 1])
    return smallest_kept <= 10.0 * cut


def _hermitize_block_diagonal(blocks: list, tol: Tolerances) -> list | None:
    """Blockwise Hermitian part of a kernel element, picked by larger norm."""
    sym = [(b + dagger(b)) / 2.0 for b in blocks]
    anti = [1j * (b - dagger(b)) / 2.0 for b in blocks]
    norm_sym = np.sqrt(sum(float(np.linalg.norm(b)) ** 2 for b in sym))
    norm_anti = np.sqrt(sum(float(np.linalg.norm(b)) ** 2 for b in anti))
    chosen, norm = (sym, norm_sym) if norm_sym >= norm_anti else (anti, norm_anti)
    if norm <= tol.sv_rel_cutoff:
        return None
    op_norm = max(
        (float(np.max(np.abs(np.linalg.eigvalsh(b)))) if b.size else 0.0) for b in chosen
    )
    if op_norm <= 0.0:
        return None
    return [b / op_norm for b in chosen]


def instrument_extremal(m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL) -> ExtremalityReport:
    """Decide extremality of a valid instrument and produce a witness if it fails."""
    require_valid(m, tol)
    blocks = _minimal_blocks(m, tol)
    block_dims = tuple(len(ks) for ks in blocks)
    gram = _gram_columns(blocks, m.dim_in)
    rank, singular_values, null_basis = svd_rank(gram, tol)
    required = sum(n * n for n in block_dims)
    marginal = _marginal_flag(singular_values, rank, gram.shape, tol)
    if rank == required:
        return ExtremalityReport(True, rank, required, marginal, m.labels, block_dims)
    witness = None
    for column in range(null_basis.shape[1]):
        pieces = []
        offset = 0
        for n_i in block_dims:
            pieces.append(null_basis[offset : offset + n_i * n_i, column].reshape(n_i, n_i))
            offset += n_i * n_i
        witness_blocks = _hermitize_block_diagonal(pieces, tol)
        if witness_blocks is None:
            continue
        flat = np.concatenate([b.reshape(-1) for b in witness_blocks])
        if float(np.linalg.norm(gram @ flat)) <= tol.eps_eq * max(1.0, float(m.dim_in)):
            witness = tuple(witness_blocks)
            break
    if witness is None:
        raise InstrumentumError("failed to extract a Hermitian witness from the kernel")
    return ExtremalityReport(False, rank, required, marginal, m.labels, block_dims, witness)


def povm_extremal(p: Povm, tol: Tolerances = DEFAULT_TOL) -> ExtremalityReport:
    """Extremality of a POVM among POVMs, via its one-dimensional-output instrument."""
    return instrument_extremal(trivial_from_povm(p, tol), tol)


def channel_extremal(t: KrausSet, tol: Tolerances = DEFAULT_TOL) -> ExtremalityReport:
    """Extremality of a unital (Heisenberg) channel among such channels."""
    unital_defect = float(
        np.linalg.norm(
            apply_heisenberg(t, np.eye(t.dim_out, dtype=np.complex128)) - np.eye(t.dim_in)
        )
    )
    if unital_defect > tol.eps_eq * float(np.sqrt(t.dim_in)):
        raise InstrumentumError(f"map is not a channel: unit defect {unital_defect:.3e}")
    return instrument_extremal(DiscreteInstrument(t.dim_in, t.dim_out, (("0", t),)), tol)


def witness_decompose(
    m: DiscreteInstrument, witness, tol: Tolerances = DEFAULT_TOL
) -> tuple[DiscreteInstrument, DiscreteInstrument]:
    """Split a non-extreme instrument along a witness into two distinct halves.

    Factoring ``I +- D(i) = S^dag S`` per outcome yields instruments with
    Kraus operators ``sum_k S[n, k] A_k(i)`` whose average is ``m``.  Raises
    when the witness is zero, is not blockwise Hermitian with operator norm
    at most one, or does not annihilate ``{A_k(i)^dag A_l(i)}``.
    """
    require_valid(m, tol)
    blocks = _minimal_blocks(m, tol)
    block_dims = [len(ks) for ks in blocks]
    witness = list(witness)
    if len(witness) != len(blocks):
        raise ValueError(f"witness has {len(witness)} blocks for {len(blocks)} outcomes")
    herm = []
    for n_i, block in zip(block_dims, witness):
        block = np.asarray(block, dtype=np.complex128)
        if block.shape != (n_i, n_i):
            raise ValueError(f"witness block has shape {block.shape}, expected {(n_i, n_i)}")
        herm.append(require_hermitian(block, tol, name="witness block") if n_i else block)
    total_norm = np.sqrt(sum(float(np.linalg.norm(b)) ** 2 for b in herm))
    if total_norm <= tol.eps_eq:
        raise InstrumentumError("witness is numerically zero")
    op_norm = max((float(np.max(np.abs(np.linalg.eigvalsh(b)))) if b.size else 0.0) for b in herm)
    if op_norm > 1.0 + tol.eps_psd:
        raise InstrumentumError(f"witness operator norm {op_norm:.6f} exceeds one")
    gram = _gram_columns(blocks, m.dim_in)
    flat = np.concatenate([b.reshape(-1) for b in herm]) if herm else np.zeros(0)
    kernel_defect = float(np.linalg.norm(gram @ flat))
    if kernel_defect > tol.eps_eq * max(1.0, float(m.dim_in)):
        raise InstrumentumError(
            f"witness does not annihilate the Kraus products: defect {kernel_defect:.3e}"
        )

    def build(sign: float) -> DiscreteInstrument:
        outcomes = []
        for (label, _), ks, block in zip(m.outcomes, blocks, herm):
            n_i = len(ks)
            if n_i == 0:
                outcomes.append((label, KrausSet(m.dim_in, m.dim_out, ())))
                continue
            values, vectors = herm_eig(np.eye(n_i) + sign * block, tol)
            if values[-1] < -tol.eps_psd * max(1.0, float(values[0])):
                raise InstrumentumError("witness block pushes an eigenvalue below zero")
            keep = values > 0.0
            factor = (np.sqrt(values[keep])[:, None] * dagger(vectors[:, keep]))
            stacked = np.stack([np.asarray(op) for op in ks.ops])
            mixed = np.tensordot(factor, stacked, axes=(1, 0))
            ops = tuple(mixed[n] for n in range(mixed.shape[0]))
            outcomes.append((label, KrausSet(m.dim_in, m.dim_out, ops)))
        return DiscreteInstrument(m.dim_in, m.dim_out, tuple(outcomes))

    plus = build(1.0)
    minus = build(-1.0)
    distance = _pair_distance(plus, minus)
    if distance <= tol.eps_eq:
        raise InstrumentumError("witness produced two identical instruments")
    return plus, minus


def _pair_distance(m1: DiscreteInstrument, m2: DiscreteInstrument) -> float:
    worst = 0.0
    for (_, k1), (_, k2) in zip(m1.outcomes, m2.outcomes):
        for s in range(m1.dim_out):
            for t in range(m1.dim_out):
                unit = np.zeros((m1.dim_out, m1.dim_out), dtype=np.complex128)
                unit[s, t] = 1.0
                worst = max(
                    worst,
                    float(np.linalg.norm(apply_heisenberg(k1, unit) - apply_heisenberg(k2, unit))),
                )
    return worst


def correlation_extremal(c, tol: Tolerances = DEFAULT_TOL) -> CorrelationReport:
    """Extremality of a correlation matrix (unit-diagonal PSD) in its convex body."""
    c = require_hermitian(c, tol, name="correlation matrix")
    n = c.shape[0]
    if not psd_check(c, tol):
        raise InstrumentumError("correlation matrix is not positive semidefinite")
    diag_defect = float(np.max(np.abs(np.diag(c) - 1.0)))
    if diag_defect > tol.eps_eq:
        raise InstrumentumError(f"diagonal is not one: defect {diag_defect:.3e}")
    rank, _ = numeric_rank(c, tol)
    values, vectors = herm_eig(c, tol)
    gram = (np.sqrt(values[:rank])[:, None] * dagger(vectors[:, :rank])).T  # row i = m_i
    span = np.zeros((n, rank * rank), dtype=np.complex128)
    for i in range(n):
        span[i] = np.outer(gram[i].conj(), gram[i]).reshape(-1)
    span_rank, singular_values, null_basis = svd_rank(span, tol)
    marginal = _marginal_flag(singular_values, span_rank, span.shape, tol)
    if span_rank == rank * rank:
        return CorrelationReport(True, rank, span_rank, marginal, gram)
    witness = None
    for column in range(null_basis.shape[1]):
        b = null_basis[:, column].reshape(rank, rank)
        herm = _hermitize_block_diagonal([b], tol)
        if herm is None:
            continue
        candidate = herm[0]
        defect = float(np.max(np.abs(np.einsum("ia,ab,ib->i", gram.conj(), candidate, gram))))
        if defect <= tol.eps_eq * max(1.0, float(n)):
            witness = candidate
            break
    if witness is None:
        raise InstrumentumError("failed to extract a Hermitian witness from the kernel")
    return CorrelationReport(False, rank, span_rank, marginal, gram, witness)


def correlation_witness_split(report: CorrelationReport) -> tuple[np.ndarray, np.ndarray]:
    """The two correlation matrices a witness splits its subject into.

    For a non-extreme report with Gram vectors ``m_i`` and witness ``B`` the
    halves are ``K_pm[i, j] = <m_i | (I +- B) m_j>``; both are unit-diagonal
    PSD and average back to the original matrix.
    """
    if report.is_extreme or report.witness is None:
        raise InstrumentumError("report carries no witness to split along")
    gram = report.gram_vectors
    eye = np.eye(report.gram_rank, dtype=np.complex128)
    plus = gram.conj() @ (eye + report.witness) @ gram.T
    minus = gram.conj() @ (eye - report.witness) @ gram.T
    return plus, minus
