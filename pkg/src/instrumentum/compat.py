"""Instruments compatible with a given POVM, and their fiber-channel structure.

Every instrument whose effects are ``M(i)`` arises from the POVM's dilation
``M(i) = Y_N^dag P_i Y_N`` in two interchangeable ways:

* forward, from a coefficient tensor ``c[l, s, k]`` per outcome (rows
  orthonormal over the flattened ``(s, k)`` index), which mixes the
  generalized vectors ``d_l(i)`` of the effects into Kraus operators
  ``A_k(i) = sum_s |k_s><d_k^s(i)|`` with ``d_k^s(i) = sum_l c[l, s, k] d_l(i)``;
* backward, by solving for the isometries ``C_i`` that carry the POVM's
  fibers into the instrument's fibers tensored with the output space, which
  exhibits each outcome map as ``M(i, B) = Gram_i(T_i(B))`` for a channel
  ``T_i`` on the fiber space of outcome ``i``.

The backward decomposition also yields the square-root factorization
``sqrt(M(X)) Phi^X(B) sqrt(M(X)) = M(X, B)`` of any outcome subset through a
single channel ``Phi^X``, the conjugated plain channel for projection valued
measures, and the nuclear form of any instrument compatible with a rank-one
POVM.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpmaps import KrausSet, apply_heisenberg, apply_schrodinger
from .dilation import minimal_stinespring, naimark
from .errors import InstrumentumError
from .instruments import (
    DiscreteInstrument,
    Povm,
    associate_povm,
    nuclear,
    require_valid,
    require_valid_povm,
    trivial_from_povm,
)
from .matkernel import DEFAULT_TOL, Tolerances, dagger, herm_eig, isometry_complete, numeric_rank

__all__ = [
    "CompatCoefficients",
    "CompatChannelDecomposition",
    "FactorizationReport",
    "PvmCompatReport",
    "NuclearExtractionReport",
    "compat_from_coeffs",
    "compat_channel",
    "lueders_factorization",
    "pvm_compat",
    "rank1_nuclear_extract",
]


@dataclass(frozen=True)
class CompatCoefficients:
    """Per-outcome coefficient tensors selecting an instrument of a POVM.

    ``outcomes`` pairs each label with an array of shape
    ``(n_i, dim_k, r_i)`` where ``n_i`` is the rank of the effect, ``dim_k``
    the output dimension of the instrument to build, and ``r_i`` the number
    of Kraus operators outcome ``i`` will carry.  Rows (fixed first index)
    must be orthonormal under the flattened ``(s, k)`` inner product.
    """

    dim_k: int
    outcomes: tuple = ()

    def __post_init__(self) -> None:
        if self.dim_k < 1:
            raise ValueError(f"output dimension must be positive, got {self.dim_k}")
        entries = []
        for label, tensor in self.outcomes:
            tensor = np.array(tensor, dtype=np.complex128)
            if tensor.ndim != 3:
                raise ValueError(f"coefficients for {label!r} must be a rank-3 tensor")
            if tensor.shape[1] != self.dim_k:
                raise ValueError(
                    f"coefficients for {label!r} have middle dimension {tensor.shape[1]}, "
                    f"expected {self.dim_k}"
                )
            tensor.setflags(write=False)
            entries.append((label, tensor))
        object.__setattr__(self, "outcomes", tuple(entries))

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.outcomes)


@dataclass(frozen=True)
class CompatChannelDecomposition:
    """Fiber channels exhibiting an instrument over its POVM's dilation.

    ``isometries[i]`` is ``C_i : C^{n(i)} -> K (x) C^{n'(i)}`` (output-major
    rows); ``channels[i]`` is the Kraus set of ``T_i`` from the fiber space
    of outcome ``i`` into the output space, or None when the effect is zero;
    ``generalized_vectors[i][k, s, :]`` is ``D_k^s(i) = C_i^dag (k_s (x) b_k)``.
    ``max_residual`` bounds the defect of every defining identity checked.
    """

    dim_in: int
    dim_out: int
    labels: tuple
    naimark_dims: tuple
    fiber_dims: tuple
    isometries: tuple = field(repr=False, default=())
    channels: tuple = field(repr=False, default=())
    generalized_vectors: tuple = field(repr=False, default=())
    max_residual: float = 0.0
    passed: bool = True


@dataclass(frozen=True)
class FactorizationReport:
    """Defects of a square-root factorization through a channel."""

    passed: bool
    subset: tuple
    max_identity_error: float
    unit_defect: float


@dataclass(frozen=True)
class PvmCompatReport:
    """Defects of the conjugated-channel form available over a PVM."""

    passed: bool
    max_identity_error: float


@dataclass(frozen=True)
class NuclearExtractionReport:
    """Defects of the nuclear form ``M(i, B) = tr[sigma_i B] M(i)``."""

    passed: bool
    max_probe_error: float
    rebuild_error: float


def compat_from_coeffs(
    p: Povm, coeffs: CompatCoefficients, tol: Tolerances = DEFAULT_TOL
) -> DiscreteInstrument:
    """Build the instrument of ``p`` selected by a coefficient tensor family."""
    require_valid_povm(p, tol)
    if coeffs.labels != p.labels:
        raise ValueError("coefficient labels do not match the POVM labels")
    trivial = trivial_from_povm(p, tol)
    outcomes = []
    for (label, kraus), (_, tensor) in zip(trivial.outcomes, coeffs.outcomes):
        n_i = len(kraus)
        if tensor.shape[0] != n_i:
            raise ValueError(
                f"coefficients for {label!r} have {tensor.shape[0]} rows, "
                f"but the effect has rank {n_i}"
            )
        r_i = tensor.shape[2]
        flat = tensor.reshape(n_i, coeffs.dim_k * r_i)
        gram_defect = float(np.linalg.norm(flat @ flat.conj().T - np.eye(n_i)))
        if gram_defect > tol.eps_eq * max(1.0, float(np.sqrt(max(n_i, 1)))):
            raise InstrumentumError(
                f"coefficient rows for {label!r} are not orthonormal: defect {gram_defect:.3e}"
            )
        # d_l(i) are the conjugated rows of the one-dimensional-output Kraus set
        d_vectors = (
            np.stack([op[0].conj() for op in kraus.ops])
            if n_i
            else np.zeros((0, p.dim), dtype=np.complex128)
        )
        mixed = np.tensordot(tensor, d_vectors, axes=([0], [0]))  # (dim_k, r_i, dim)
        ops = tuple(mixed[:, k, :].conj() for k in range(r_i))
        outcomes.append((label, KrausSet(p.dim, coeffs.dim_k, ops)))
    built = DiscreteInstrument(p.dim, coeffs.dim_k, tuple(outcomes))
    require_valid(built, tol)
    return built


def compat_channel(
    m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL
) -> CompatChannelDecomposition:
    """Solve for the fiber isometries and channels of ``m`` over its POVM's dilation.

    For each outcome the isometry ``C_i`` is the least-squares solution of
    ``C_i psi_n(i) = sum_s k_s (x) psi_n^s(i)`` over the input basis, and
    ``T_i(B) = C_i^dag (B (x) I) C_i``; the decomposition reproduces
    ``M(i, B)`` through the Gram map of the POVM fibers.
    """
    require_valid(m, tol)
    p = associate_povm(m, tol)
    povm_dil = naimark(p, tol)
    inst_dil = minimal_stinespring(m, tol)
    dim_in, dim_out = m.dim_in, m.dim_out
    isometries = []
    channels = []
    generalized = []
    max_residual = 0.0
    for i, (label, kraus) in enumerate(m.outcomes):
        n_i = povm_dil.block_dims[i]
        np_i = inst_dil.block_dims[i]
        if n_i == 0:
            isometries.append(np.zeros((dim_out * np_i, 0), dtype=np.complex128))
            channels.append(None)
            generalized.append(np.zeros((np_i, dim_out, 0), dtype=np.complex128))
            continue
        # columns over the input basis of the two fiber images
        psi = povm_dil.structure_vectors[i][:, 0, :].T  # (n_i, dim_in)
        phi = inst_dil.structure_vectors[i].reshape(dim_in, dim_out * np_i).T
        sol, *_ = np.linalg.lstsq(psi.T, phi.T, rcond=None)
        c_i = sol.T  # (dim_out * np_i, n_i)
        solve_residual = float(np.linalg.norm(c_i @ psi - phi))
        iso_defect = float(np.linalg.norm(dagger(c_i) @ c_i - np.eye(n_i)))
        c_blocks = c_i.reshape(dim_out, np_i, n_i)
        ops = tuple(c_blocks[:, k, :] for k in range(np_i))
        t_i = KrausSet(n_i, dim_out, ops)
        recon = 0.0
        for s in range(dim_out):
            for t in range(dim_out):
                unit = np.zeros((dim_out, dim_out), dtype=np.complex128)
                unit[s, t] = 1.0
                lifted = psi.conj().T @ apply_heisenberg(t_i, unit) @ psi
                recon = max(recon, float(np.linalg.norm(lifted - apply_heisenberg(kraus, unit))))
        max_residual = max(max_residual, solve_residual, iso_defect, recon)
        isometries.append(c_i)
        channels.append(t_i)
        generalized.append(c_blocks.transpose(1, 0, 2).conj())
    threshold = tol.eps_eq * max(1.0, float(np.sqrt(dim_in)))
    return CompatChannelDecomposition(
        dim_in=dim_in,
        dim_out=dim_out,
        labels=m.labels,
        naimark_dims=povm_dil.block_dims,
        fiber_dims=inst_dil.block_dims,
        isometries=tuple(isometries),
        channels=tuple(channels),
        generalized_vectors=tuple(generalized),
        max_residual=max_residual,
        passed=max_residual <= threshold,
    )


def _decomposable_kraus(
    dec: CompatChannelDecomposition, povm_dil, m: DiscreteInstrument
) -> list:
    """Kraus operators of the block channel ``T = (+)_i T_i`` on the full fiber space."""
    total = povm_dil.total_fibers
    ops = []
    for i in range(len(m.outcomes)):
        block = povm_dil.block_slice(i)
        t_i = dec.channels[i]
        if t_i is None:
            continue
        for op in t_i.ops:
            lifted = np.zeros((m.dim_out, total), dtype=np.complex128)
            lifted[:, block] = op
            ops.append(lifted)
    return ops


def lueders_factorization(
    m: DiscreteInstrument, subset=None, tol: Tolerances = DEFAULT_TOL
) -> tuple[KrausSet, FactorizationReport]:
    """Factor ``M(X, B) = sqrt(M(X)) Phi^X(B) sqrt(M(X))`` through a channel.

    ``subset`` selects the outcome labels making up ``X`` (default: all).
    The channel is assembled from the fiber channels of ``compat_channel``
    conjugated by the subset-masked dilation isometry, extended isometrically
    off the range of ``M(X)``.
    """
    require_valid(m, tol)
    if subset is None:
        subset = m.labels
    subset = tuple(subset)
    if not subset:
        raise ValueError("subset must contain at least one outcome label")
    for label in subset:
        if label not in m.labels:
            raise KeyError(f"no outcome labeled {label!r}")
    dec = compat_channel(m, tol)
    p = associate_povm(m, tol)
    povm_dil = naimark(p, tol)
    dim = m.dim_in
    total = povm_dil.total_fibers

    mask = np.zeros(total)
    subset_effect = np.zeros((dim, dim), dtype=np.complex128)
    for i, (label, matrix) in enumerate(p.effects):
        if label in subset:
            mask[povm_dil.block_slice(i)] = 1.0
            subset_effect += matrix
    values, vectors = herm_eig(subset_effect, tol)
    cut = tol.sv_rel_cutoff * float(values[0]) if values.size and values[0] > 0.0 else np.inf
    r = int(np.count_nonzero(values > cut))
    root = (vectors[:, :r] * np.sqrt(values[:r])) @ dagger(vectors[:, :r])

    masked_iso = mask[:, None] * povm_dil.isometry  # dim_out of the dilation is one
    range_images = (
        masked_iso @ vectors[:, :r] / np.sqrt(values[:r])[None, :]
        if r
        else np.zeros((total, 0), dtype=np.complex128)
    )
    completed = isometry_complete(range_images, tol)
    carrier = completed[:, :dim] @ dagger(vectors)

    phi_ops = tuple(op @ carrier for op in _decomposable_kraus(dec, povm_dil, m))
    phi = KrausSet(dim, m.dim_out, phi_ops)

    max_err = 0.0
    for s in range(m.dim_out):
        for t in range(m.dim_out):
            unit = np.zeros((m.dim_out, m.dim_out), dtype=np.complex128)
            unit[s, t] = 1.0
            direct = np.zeros((dim, dim), dtype=np.complex128)
            for label, kraus in m.outcomes:
                if label in subset:
                    direct += apply_heisenberg(kraus, unit)
            factored = root @ apply_heisenberg(phi, unit) @ root
            max_err = max(max_err, float(np.linalg.norm(factored - direct)))
    unit_defect = float(
        np.linalg.norm(
            apply_heisenberg(phi, np.eye(m.dim_out, dtype=np.complex128)) - np.eye(dim)
        )
    )
    threshold = tol.eps_eq * max(1.0, float(np.sqrt(dim)))
    passed = max_err <= threshold and unit_defect <= threshold
    return phi, FactorizationReport(passed, subset, max_err, unit_defect)


def pvm_compat(
    m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL
) -> tuple[KrausSet, PvmCompatReport]:
    """The plain-channel form of an instrument whose POVM is projection valued.

    Over a PVM the dilation isometry is unitary, so conjugating the block
    channel by it yields a channel ``T`` on the input space itself with
    ``M(i, B) = M(i) T(B) = T(B) M(i)``.
    """
    require_valid(m, tol)
    p = associate_povm(m, tol)
    for label, matrix in p.effects:
        idem = float(np.linalg.norm(matrix @ matrix - matrix))
        if idem > tol.eps_eq * max(1.0, float(np.linalg.norm(matrix))):
            raise InstrumentumError(
                f"effect {label!r} is not a projection: defect {idem:.3e}"
            )
    dec = compat_channel(m, tol)
    povm_dil = naimark(p, tol)
    if povm_dil.total_fibers != m.dim_in:
        raise InstrumentumError("dilation of a projection valued measure should be unitary")
    y_n = povm_dil.isometry
    conjugated = KrausSet(
        m.dim_in,
        m.dim_out,
        tuple(op @ y_n for op in _decomposable_kraus(dec, povm_dil, m)),
    )
    max_err = 0.0
    for s in range(m.dim_out):
        for t in range(m.dim_out):
            unit = np.zeros((m.dim_out, m.dim_out), dtype=np.complex128)
            unit[s, t] = 1.0
            image = apply_heisenberg(conjugated, unit)
            for (label, kraus), (_, effect) in zip(m.outcomes, p.effects):
                direct = apply_heisenberg(kraus, unit)
                max_err = max(
                    max_err,
                    float(np.linalg.norm(effect @ image - direct)),
                    float(np.linalg.norm(image @ effect - direct)),
                )
    threshold = tol.eps_eq * max(1.0, float(np.sqrt(m.dim_in)))
    return conjugated, PvmCompatReport(max_err <= threshold, max_err)


def rank1_nuclear_extract(
    m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL
) -> tuple[Povm, tuple, NuclearExtractionReport]:
    """Recover the output states of an instrument compatible with a rank-one POVM.

    Every such instrument is nuclear: ``M(i, B) = tr[sigma_i B] M(i)``.  The
    state of outcome ``i`` is read off by pushing the maximally mixed state
    through the outcome map; a zero effect gets the maximally mixed output
    state by convention.  Raises when an effect has rank above one.
    """
    require_valid(m, tol)
    p = associate_povm(m, tol)
    for label, matrix in p.effects:
        rank, _ = numeric_rank(matrix, tol)
        if rank > 1:
            raise InstrumentumError(f"effect {label!r} has rank {rank}, expected at most one")
    dim_in, dim_out = m.dim_in, m.dim_out
    mixed_in = np.eye(dim_in, dtype=np.complex128) / dim_in
    states = []
    for (label, kraus), (_, effect) in zip(m.outcomes, p.effects):
        weight = float(np.trace(mixed_in @ effect).real)
        if weight <= tol.eps_eq:
            states.append(np.eye(dim_out, dtype=np.complex128) / dim_out)
            continue
        sigma = apply_schrodinger(kraus, mixed_in) / weight
        states.append((sigma + dagger(sigma)) / 2.0)
    max_probe_error = 0.0
    rng = np.random.default_rng(271828)
    for _ in range(10):
        g = rng.standard_normal((dim_in, dim_in)) + 1j * rng.standard_normal((dim_in, dim_in))
        rho = g @ dagger(g)
        rho = rho / float(np.trace(rho).real)
        for (label, kraus), (_, effect), sigma in zip(m.outcomes, p.effects, states):
            weight = float(np.trace(rho @ effect).real)
            defect = float(np.linalg.norm(apply_schrodinger(kraus, rho) - weight * sigma))
            max_probe_error = max(max_probe_error, defect)
    rebuilt = nuclear(p, states, tol)
    rebuild_error = 0.0
    for (_, k1), (_, k2) in zip(m.outcomes, rebuilt.outcomes):
        for s in range(dim_out):
            for t in range(dim_out):
                unit = np.zeros((dim_out, dim_out), dtype=np.complex128)
                unit[s, t] = 1.0
                rebuild_error = max(
                    rebuild_error,
                    float(
                        np.linalg.norm(apply_heisenberg(k1, unit) - apply_heisenberg(k2, unit))
                    ),
                )
    threshold = tol.eps_eq * max(1.0, float(np.sqrt(dim_in)))
    passed = max_probe_error <= threshold and rebuild_error <= threshold
    if max_probe_error > threshold:
        raise InstrumentumError(
            f"instrument is not nuclear over its POVM: probe defect {max_probe_error:.3e}"
        )
    return p, tuple(states), NuclearExtractionReport(passed, max_probe_error, rebuild_error)
