"""Dilations of instruments and their realization by measurement models.

Ambient-space conventions
-------------------------
A dilation of an instrument with input space H (dimension ``dim_in``) and
output space K (dimension ``dim_out``) lives on ``K (x) F`` where
``F = (+)_i C^{n(i)}`` is the direct sum of outcome fiber spaces.  The flat
ambient index is output-major: basis vector ``k_s (x) f`` sits at
``s * total + f`` with ``f = offset(i) + k`` running over blocks in outcome
order.  The isometry ``Y : H -> K (x) F`` has matrix elements

    Y[s * total + offset(i) + k, m] = <k_s | A_k(i) h_m>,

so ``M(i, B) = Y^dag (B (x) P_i) Y`` with ``P_i`` the projection of F onto
block ``i``.  Structure vectors ``psi_m^t(i)`` in ``C^{n(i)}`` and
generalized vectors ``d_k^t(i) = A_k(i)^dag k_t`` in H are the two natural
reshufflings of the same coefficients:

    psi_m^t(i)[k] = <k_t | A_k(i) h_m> = <d_k^t(i) | h_m>.

A measurement model realizes an instrument with ``dim_out == dim_in`` on
``H (x) ancilla`` (system-major flat index) through a unitary U, an ancilla
vector xi, and a pointer partition of the ancilla basis into outcome blocks.
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
    as_matrix,
    herm_eig,
    herm_exp,
    isometry_complete,
    numeric_rank,
    require_hermitian,
)

__all__ = [
    "StinespringDilation",
    "DilationReport",
    "MeasurementModel",
    "MarkovKernel",
    "IntertwinerReport",
    "minimal_stinespring",
    "naimark",
    "verify_dilation",
    "measurement_model",
    "realized_instrument",
    "model_intertwiner",
    "standard_model",
]


@dataclass(frozen=True)
class StinespringDilation:
    """Isometry-plus-pointer data dilating an instrument, in the ambient convention above."""

    dim_in: int
    dim_out: int
    labels: tuple
    block_dims: tuple
    isometry: np.ndarray = field(repr=False)
    structure_vectors: tuple = field(repr=False, default=())
    generalized_vectors: tuple = field(repr=False, default=())

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        block_dims = tuple(int(n) for n in self.block_dims)
        if len(labels) != len(block_dims):
            raise ValueError("labels and block_dims disagree in length")
        if any(n < 0 for n in block_dims):
            raise ValueError("block dimensions must be nonnegative")
        total = sum(block_dims)
        iso = as_matrix(self.isometry, name="dilation isometry")
        if iso.shape != (self.dim_out * total, self.dim_in):
            raise ValueError(
                f"isometry has shape {iso.shape}, expected {(self.dim_out * total, self.dim_in)}"
            )
        structure = tuple(np.array(a, dtype=np.complex128) for a in self.structure_vectors)
        general = tuple(np.array(a, dtype=np.complex128) for a in self.generalized_vectors)
        if structure:
            for n_i, a in zip(block_dims, structure):
                if a.shape != (self.dim_in, self.dim_out, n_i):
                    raise ValueError("structure vector array has wrong shape")
        if general:
            for n_i, a in zip(block_dims, general):
                if a.shape != (n_i, self.dim_out, self.dim_in):
                    raise ValueError("generalized vector array has wrong shape")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "block_dims", block_dims)
        object.__setattr__(self, "isometry", iso)
        object.__setattr__(self, "structure_vectors", structure)
        object.__setattr__(self, "generalized_vectors", general)

    @property
    def total_fibers(self) -> int:
        return sum(self.block_dims)

    def block_slice(self, index: int) -> slice:
        offset = sum(self.block_dims[:index])
        return slice(offset, offset + self.block_dims[index])


@dataclass(frozen=True)
class DilationReport:
    """Checks of a dilation against an instrument."""

    passed: bool
    isometry_defect: float
    max_reconstruction_error: float
    block_span_ranks: tuple
    block_dims: tuple


@dataclass(frozen=True)
class MeasurementModel:
    """Unitary realization of an instrument on system (x) ancilla.

    ``block_dims`` partitions the ancilla basis (in index order) into the
    pointer blocks of the outcomes in ``labels``; ``xi`` is the initial
    ancilla vector and ``unitary`` acts on the system-major product space.
    """

    system_dim: int
    labels: tuple
    block_dims: tuple
    xi: np.ndarray = field(repr=False)
    unitary: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        block_dims = tuple(int(n) for n in self.block_dims)
        if len(labels) != len(block_dims):
            raise ValueError("labels and block_dims disagree in length")
        if any(n < 0 for n in block_dims):
            raise ValueError("pointer block dimensions must be nonnegative")
        ancilla = sum(block_dims)
        if ancilla < 1:
            raise ValueError("ancilla must have positive dimension")
        xi = np.array(self.xi, dtype=np.complex128).reshape(-1)
        if xi.shape != (ancilla,):
            raise ValueError(f"xi has length {xi.size}, expected {ancilla}")
        if abs(np.linalg.norm(xi) - 1.0) > 1e-6:
            raise ValueError("xi is not normalized")
        u = as_matrix(self.unitary, name="model unitary")
        side = self.system_dim * ancilla
        if u.shape != (side, side):
            raise ValueError(f"unitary has shape {u.shape}, expected {(side, side)}")
        if float(np.linalg.norm(u.conj().T @ u - np.eye(side))) > 1e-6 * max(1.0, side):
            raise ValueError("model matrix is not unitary")
        xi.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "block_dims", block_dims)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "unitary", u)

    @property
    def ancilla_dim(self) -> int:
        return sum(self.block_dims)

    def block_slice(self, index: int) -> slice:
        offset = sum(self.block_dims[:index])
        return slice(offset, offset + self.block_dims[index])


@dataclass(frozen=True)
class MarkovKernel:
    """Column-stochastic kernel ``K[j, a]`` over pointer outcomes and input eigenvalues."""

    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    labels: tuple = ()

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        eigenvalues = np.array(self.eigenvalues, dtype=np.float64).reshape(-1)
        labels = tuple(self.labels)
        if matrix.ndim != 2:
            raise ValueError("kernel matrix must be 2-dimensional")
        if matrix.shape != (len(labels), eigenvalues.size):
            raise ValueError(
                f"kernel has shape {matrix.shape}, expected {(len(labels), eigenvalues.size)}"
            )
        if matrix.size and matrix.min() < -1e-9:
            raise ValueError("kernel has a negative entry")
        if matrix.size:
            col_sums = matrix.sum(axis=0)
            if float(np.max(np.abs(col_sums - 1.0))) > 1e-8:
                raise ValueError("kernel columns do not sum to one")
        matrix.setflags(write=False)
        eigenvalues.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class IntertwinerReport:
    """Residuals of the unique map from a minimal dilation into a model's ancilla."""

    passed: bool
    isometry_defect: float
    realization_residual: float
    threshold: float


def _minimal_outcome_sets(m: DiscreteInstrument, tol: Tolerances) -> list:
    return [(label, kraus_from_choi(choi(kraus), tol)) for label, kraus in m.outcomes]


def minimal_stinespring(m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL) -> StinespringDilation:
    """Minimal dilation of ``m``: fiber dimensions are the outcome Choi ranks.

    Returns the isometry together with structure vectors
    ``structure_vectors[i][m, t, k] = <k_t | A_k(i) h_m>`` and generalized
    vectors ``generalized_vectors[i][k, t, :] = conj(A_k(i)[t, :])``.
    """
    require_valid(m, tol)
    minimal = _minimal_outcome_sets(m, tol)
    block_dims = tuple(len(ks) for _, ks in minimal)
    total = sum(block_dims)
    iso = np.zeros((m.dim_out * total, m.dim_in), dtype=np.complex128)
    iso_blocks = iso.reshape(m.dim_out, total, m.dim_in)
    structure = []
    general = []
    offset = 0
    for _, ks in minimal:
        n_i = len(ks)
        ops = (
            np.stack([np.asarray(op) for op in ks.ops])
            if n_i
            else np.zeros((0, m.dim_out, m.dim_in), dtype=np.complex128)
        )
        iso_blocks[:, offset : offset + n_i, :] = ops.transpose(1, 0, 2)
        structure.append(ops.transpose(2, 1, 0))
        general.append(ops.conj())
        offset += n_i
    return StinespringDilation(
        dim_in=m.dim_in,
        dim_out=m.dim_out,
        labels=m.labels,
        block_dims=block_dims,
        isometry=iso,
        structure_vectors=tuple(structure),
        generalized_vectors=tuple(general),
    )


def naimark(p: Povm, tol: Tolerances = DEFAULT_TOL) -> StinespringDilation:
    """Dilation of a POVM: ``M(i) = Y^dag P_i Y`` with one-dimensional output space."""
    return minimal_stinespring(trivial_from_povm(p, tol), tol)


def verify_dilation(
    m: DiscreteInstrument, d: StinespringDilation, tol: Tolerances = DEFAULT_TOL
) -> DilationReport:
    """Check a dilation against an instrument.

    Verifies that Y is an isometry, that ``Y^dag (B (x) P_i) Y`` reproduces
    every outcome map on all matrix units B, and that each block's fibers are
    actually spanned (span rank equals the block dimension; padding shows up
    as a deficit).
    """
    require_valid(m, tol)
    if (d.dim_in, d.dim_out) != (m.dim_in, m.dim_out) or d.labels != m.labels:
        raise ValueError("dilation and instrument disagree on dimensions or labels")
    total = d.total_fibers
    y_blocks = d.isometry.reshape(m.dim_out, total, m.dim_in)
    iso_defect = float(np.linalg.norm(d.isometry.conj().T @ d.isometry - np.eye(m.dim_in)))
    max_err = 0.0
    span_ranks = []
    for i, (label, kraus) in enumerate(m.outcomes):
        z = y_blocks[:, d.block_slice(i), :]  # (dim_out, n_i, dim_in)
        for s in range(m.dim_out):
            for t in range(m.dim_out):
                unit = np.zeros((m.dim_out, m.dim_out), dtype=np.complex128)
                unit[s, t] = 1.0
                direct = apply_heisenberg(kraus, unit)
                dilated = z[s].conj().T @ z[t]
                max_err = max(max_err, float(np.linalg.norm(direct - dilated)))
        n_i = d.block_dims[i]
        fiber_matrix = z.transpose(1, 0, 2).reshape(n_i, m.dim_out * m.dim_in)
        span_ranks.append(numeric_rank(fiber_matrix, tol)[0])
    passed = (
        iso_defect <= tol.eps_eq * float(np.sqrt(m.dim_in))
        and max_err <= tol.eps_eq * max(1.0, float(m.dim_out))
        and all(r == n for r, n in zip(span_ranks, d.block_dims))
    )
    return DilationReport(passed, iso_defect, max_err, tuple(span_ranks), d.block_dims)


def measurement_model(
    m: DiscreteInstrument, xi_index: int = 0, tol: Tolerances = DEFAULT_TOL
) -> MeasurementModel:
    """Realize ``m`` (with ``dim_out == dim_in``) by a unitary on system (x) fibers.

    The ancilla is the fiber space of the minimal dilation, prepared in the
    basis vector ``xi_index``; the unitary sends ``h_n (x) xi`` to ``Y h_n``
    and is completed deterministically on the remaining slots.
    """
    if m.dim_out != m.dim_in:
        raise InstrumentumError(
            f"a measurement model needs matching dimensions, got {m.dim_in} -> {m.dim_out}"
        )
    dil = minimal_stinespring(m, tol)
    total = dil.total_fibers
    if not 0 <= xi_index < total:
        raise ValueError(f"xi_index {xi_index} outside the fiber space of dimension {total}")
    d = m.dim_in
    completed = isometry_complete(dil.isometry, tol)
    side = d * total
    unitary = np.zeros((side, side), dtype=np.complex128)
    given_slots = [n * total + xi_index for n in range(d)]
    unitary[:, given_slots] = completed[:, :d]
    rest = [a for a in range(side) if a not in set(given_slots)]
    unitary[:, rest] = completed[:, d:]
    xi = np.zeros(total, dtype=np.complex128)
    xi[xi_index] = 1.0
    model = MeasurementModel(
        system_dim=d,
        labels=dil.labels,
        block_dims=dil.block_dims,
        xi=xi,
        unitary=unitary,
    )
    realized = realized_instrument(model)
    err = _instrument_distance(m, realized)
    if err > tol.eps_eq * max(1.0, float(d)):
        raise InstrumentumError(f"model construction failed to reproduce the instrument: {err:.3e}")
    return model


def realized_instrument(model: MeasurementModel) -> DiscreteInstrument:
    """The instrument measured by a model: couple, then read the pointer blocks."""
    d = model.system_dim
    anc = model.ancilla_dim
    coupled = model.unitary @ np.kron(np.eye(d, dtype=np.complex128), model.xi.reshape(anc, 1))
    coupled = coupled.reshape(d, anc, d)  # [s, a, n] = <h_s (x) e_a | U (h_n (x) xi)>
    outcomes = []
    for i, label in enumerate(model.labels):
        block = model.block_slice(i)
        ops = tuple(coupled[:, a, :] for a in range(block.start, block.stop))
        outcomes.append((label, KrausSet(d, d, ops)))
    return DiscreteInstrument(d, d, tuple(outcomes))


def _instrument_distance(m1: DiscreteInstrument, m2: DiscreteInstrument) -> float:
    """Largest Frobenius distance between outcome maps on matrix units."""
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


def model_intertwiner(
    model: MeasurementModel, m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL
) -> tuple[np.ndarray, IntertwinerReport]:
    """The unique isometry from the minimal fiber space into the model's ancilla.

    Solves ``(I (x) W) Y psi = U (psi (x) xi)`` under the pointer
    compatibility ``P'_j W = W P_j``, block by block in least squares.  Raises
    when the model does not realize ``m`` within ``eps_eq * sqrt(dim)``.
    """
    require_valid(m, tol)
    if m.dim_out != m.dim_in or model.system_dim != m.dim_in:
        raise ValueError("model and instrument dimensions disagree")
    if model.labels != m.labels:
        raise ValueError("model and instrument outcome labels disagree")
    dil = minimal_stinespring(m, tol)
    d = m.dim_in
    total = dil.total_fibers
    anc = model.ancilla_dim
    y_blocks = dil.isometry.reshape(d, total, d)  # [s, f, n]
    coupled = model.unitary @ np.kron(np.eye(d, dtype=np.complex128), model.xi.reshape(anc, 1))
    v_blocks = coupled.reshape(d, anc, d)  # [s, a, n]
    w = np.zeros((anc, total), dtype=np.complex128)
    for i in range(len(dil.labels)):
        fibers = dil.block_slice(i)
        pointer = model.block_slice(i)
        n_i = fibers.stop - fibers.start
        if n_i == 0:
            continue
        # columns over (s, n) of the block components of Y h_n and U(h_n (x) xi)
        psi = y_blocks[:, fibers, :].transpose(1, 0, 2).reshape(n_i, d * d)
        img = v_blocks[:, pointer, :].transpose(1, 0, 2).reshape(pointer.stop - pointer.start, d * d)
        sol, *_ = np.linalg.lstsq(psi.T, img.T, rcond=None)
        w[pointer, fibers] = sol.T
    residual = 0.0
    for s in range(d):
        residual = max(residual, float(np.linalg.norm(w @ y_blocks[s] - v_blocks[s])))
    iso_defect = float(np.linalg.norm(w.conj().T @ w - np.eye(total)))
    threshold = tol.eps_eq * float(np.sqrt(d * total))
    passed = residual <= threshold and iso_defect <= threshold
    report = IntertwinerReport(passed, iso_defect, residual, threshold)
    if residual > threshold:
        raise InstrumentumError(
            f"model does not realize the instrument: residual {residual:.3e} "
            f"exceeds {threshold:.3e}"
        )
    return w, report


def _distinct_eigenvalues(values: np.ndarray, tol: Tolerances) -> list:
    """Group a descending eigenvalue list into clusters of equal values."""
    gap = tol.eps_eq * max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)
    clusters: list[list[int]] = []
    for idx, value in enumerate(values):
        if clusters and abs(values[clusters[-1][-1]] - value) <= gap:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    return clusters


def standard_model(
    a_op,
    b_op,
    coupling: float,
    xi,
    pointer,
    labels=None,
    tol: Tolerances = DEFAULT_TOL,
) -> tuple[Povm, MarkovKernel, DiscreteInstrument]:
    """Von Neumann coupling ``exp(i * coupling * a_op (x) b_op)`` read out by a pointer.

    ``a_op`` is the measured Hermitian observable on the system, ``b_op``
    the Hermitian probe generator on the ancilla, ``xi`` the initial probe
    vector, and ``pointer`` a partition of the ancilla basis indices into
    outcome blocks.  Writing ``xi(a) = exp(i * a * coupling * b_op) xi`` for
    each distinct eigenvalue ``a``, the pointer statistics are the Markov
    kernel ``K[j, a] = || Pi_j xi(a) ||^2``, the measured effects are
    ``sum_a K[j, a] E_a``, and outcome ``j`` of the returned instrument has
    one Kraus operator ``sum_a xi(a)[r] E_a`` per ancilla index ``r`` in
    block ``j``.
    """
    a_op = require_hermitian(a_op, tol, name="system observable")
    b_op = require_hermitian(b_op, tol, name="probe generator")
    xi = np.asarray(xi, dtype=np.complex128).reshape(-1)
    anc = b_op.shape[0]
    if xi.size != anc:
        raise ValueError(f"xi has length {xi.size}, expected {anc}")
    if abs(np.linalg.norm(xi) - 1.0) > tol.eps_eq * max(1.0, float(np.sqrt(anc))):
        raise InstrumentumError("probe vector is not normalized")
    blocks = [tuple(int(r) for r in block) for block in pointer]
    flat = sorted(r for block in blocks for r in block)
    if flat != list(range(anc)):
        raise ValueError("pointer blocks must partition the ancilla basis indices")
    if labels is None:
        labels = tuple(range(len(blocks)))
    labels = tuple(labels)
    if len(labels) != len(blocks):
        raise ValueError("labels and pointer blocks disagree in length")

    d = a_op.shape[0]
    values, vectors = herm_eig(a_op, tol)
    clusters = _distinct_eigenvalues(values, tol)
    distinct = np.array([values[cluster[0]] for cluster in clusters])
    projections = []
    for cluster in clusters:
        cols = vectors[:, cluster]
        projections.append(cols @ cols.conj().T)
    shifted = [herm_exp(b_op, float(a) * float(coupling), tol) @ xi for a in distinct]

    kernel = np.zeros((len(blocks), distinct.size))
    for j, block in enumerate(blocks):
        for a_idx, xi_a in enumerate(shifted):
            kernel[j, a_idx] = float(np.sum(np.abs(xi_a[list(block)]) ** 2))
    effects = []
    outcomes = []
    for j, block in enumerate(blocks):
        effect = np.zeros((d, d), dtype=np.complex128)
        for a_idx, proj in enumerate(projections):
            effect += kernel[j, a_idx] * proj
        effects.append((labels[j], effect))
        ops = []
        for r in block:
            op = np.zeros((d, d), dtype=np.complex128)
            for a_idx, proj in enumerate(projections):
                op += shifted[a_idx][r] * proj
            ops.append(op)
        outcomes.append((labels[j], KrausSet(d, d, tuple(ops))))
    povm = Povm(d, tuple(effects))
    markov = MarkovKernel(matrix=kernel, eigenvalues=distinct, labels=labels)
    instrument = DiscreteInstrument(d, d, tuple(outcomes))
    return povm, markov, instrument
