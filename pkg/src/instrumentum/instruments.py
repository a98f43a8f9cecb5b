"""Discrete quantum instruments, POVMs, and the constructions relating them.

An instrument assigns to each outcome label a CP map given by a Kraus set;
the maps share input/output spaces and their Heisenberg actions on the
identity sum to the identity.  Outcome labels may be strings, integers, or
tuples of those (tuples arise from sequential composition and from rank-one
refinement).  Zero effects and zero outcome maps are legal and retained, so
label sets round-trip through files unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .cpmaps import ChoiMatrix, KrausSet, apply_heisenberg, choi, kraus_from_choi
from .errors import InstrumentumError
from .matkernel import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    herm_eig,
    psd_check,
    require_hermitian,
)

__all__ = [
    "Label",
    "Povm",
    "DiscreteInstrument",
    "BiInstrument",
    "InstrumentValidation",
    "validate",
    "associate_povm",
    "associate_channel",
    "lueders",
    "trivial_from_povm",
    "trivial_from_channel",
    "nuclear",
    "compose_sequential",
    "margins",
    "refine_rank1",
]

Label = Union[str, int, tuple]


def _check_labels(labels) -> None:
    seen = set()
    for label in labels:
        if not isinstance(label, (str, int, tuple)):
            raise ValueError(f"label {label!r} is not a string, integer, or tuple")
        if label in seen:
            raise ValueError(f"duplicate outcome label {label!r}")
        seen.add(label)


@dataclass(frozen=True)
class Povm:
    """A discrete positive operator valued measure on a space of dimension ``dim``.

    Construction checks only shapes and label uniqueness; positivity and
    normalization are verified by the operations that require them, so that
    defective data can still be loaded and inspected.
    """

    dim: int
    effects: tuple = ()

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")
        effects = []
        for entry in self.effects:
            label, matrix = entry
            matrix = as_matrix(matrix, name=f"effect {label!r}")
            if matrix.shape != (self.dim, self.dim):
                raise ValueError(
                    f"effect {label!r} has shape {matrix.shape}, expected {(self.dim, self.dim)}"
                )
            effects.append((label, matrix))
        _check_labels(label for label, _ in effects)
        object.__setattr__(self, "effects", tuple(effects))

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.effects)

    def effect(self, label: Label) -> np.ndarray:
        for lab, matrix in self.effects:
            if lab == label:
                return matrix
        raise KeyError(f"no effect labeled {label!r}")

    def __len__(self) -> int:
        return len(self.effects)


@dataclass(frozen=True)
class DiscreteInstrument:
    """A CP instrument with finitely many outcomes.

    ``outcomes`` is an ordered tuple of ``(label, KrausSet)`` pairs; each
    Kraus set maps the input space (dimension ``dim_in``) to the output
    space (dimension ``dim_out``).
    """

    dim_in: int
    dim_out: int
    outcomes: tuple = ()

    def __post_init__(self) -> None:
        if self.dim_in < 1 or self.dim_out < 1:
            raise ValueError(f"dimensions must be positive, got {self.dim_in}, {self.dim_out}")
        outcomes = []
        for entry in self.outcomes:
            label, kraus = entry
            if not isinstance(kraus, KrausSet):
                kraus = KrausSet(self.dim_in, self.dim_out, tuple(kraus))
            if (kraus.dim_in, kraus.dim_out) != (self.dim_in, self.dim_out):
                raise ValueError(
                    f"outcome {label!r} acts between dimensions "
                    f"{(kraus.dim_in, kraus.dim_out)}, expected {(self.dim_in, self.dim_out)}"
                )
            outcomes.append((label, kraus))
        _check_labels(label for label, _ in outcomes)
        object.__setattr__(self, "outcomes", tuple(outcomes))

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.outcomes)

    def outcome(self, label: Label) -> KrausSet:
        for lab, kraus in self.outcomes:
            if lab == label:
                return kraus
        raise KeyError(f"no outcome labeled {label!r}")

    def __len__(self) -> int:
        return len(self.outcomes)


@dataclass(frozen=True)
class BiInstrument(DiscreteInstrument):
    """An instrument over a product outcome set, as produced by sequential composition.

    Labels are ``(first, second)`` pairs; ``first_labels`` and
    ``second_labels`` record the factor outcome sets in order.
    """

    first_labels: tuple = ()
    second_labels: tuple = ()

    def __post_init__(self) -> None:
        super().__post_init__()
        object.__setattr__(self, "first_labels", tuple(self.first_labels))
        object.__setattr__(self, "second_labels", tuple(self.second_labels))
        for label, _ in self.outcomes:
            if not (isinstance(label, tuple) and len(label) == 2):
                raise ValueError(f"outcome label {label!r} is not an ordered pair")
            if label[0] not in self.first_labels or label[1] not in self.second_labels:
                raise ValueError(f"outcome label {label!r} is not in the product label set")


@dataclass(frozen=True)
class InstrumentValidation:
    """Result of a normalization check on an instrument."""

    passed: bool
    normalization_defect: float
    threshold: float
    outcome_kraus_counts: tuple = ()


def validate(m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL) -> InstrumentValidation:
    """Check that the Heisenberg actions on the identity sum to the identity.

    The defect is the Frobenius norm of ``sum_i M(i, I) - I``; the check
    passes when it does not exceed ``eps_eq * sqrt(dim_in)``.
    """
    eye_out = np.eye(m.dim_out, dtype=np.complex128)
    total = np.zeros((m.dim_in, m.dim_in), dtype=np.complex128)
    counts = []
    for label, kraus in m.outcomes:
        total += apply_heisenberg(kraus, eye_out)
        counts.append((label, len(kraus)))
    defect = float(np.linalg.norm(total - np.eye(m.dim_in)))
    threshold = tol.eps_eq * float(np.sqrt(m.dim_in))
    return InstrumentValidation(defect <= threshold, defect, threshold, tuple(counts))


def require_valid(m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL) -> None:
    """Raise when ``m`` fails normalization."""
    report = validate(m, tol)
    if not report.passed:
        raise InstrumentumError(
            f"instrument is not normalized: defect {report.normalization_defect:.3e} "
            f"exceeds {report.threshold:.3e}"
        )


def povm_defect(p: Povm) -> float:
    """Frobenius norm of ``sum_i M(i) - I``."""
    total = np.zeros((p.dim, p.dim), dtype=np.complex128)
    for _, matrix in p.effects:
        total += matrix
    return float(np.linalg.norm(total - np.eye(p.dim)))


def require_valid_povm(p: Povm, tol: Tolerances = DEFAULT_TOL) -> None:
    """Raise unless every effect is Hermitian PSD and the effects sum to the identity."""
    for label, matrix in p.effects:
        if not psd_check(matrix, tol):
            raise InstrumentumError(f"effect {label!r} is not positive semidefinite")
    defect = povm_defect(p)
    if defect > tol.eps_eq * float(np.sqrt(p.dim)):
        raise InstrumentumError(f"effects do not sum to the identity: defect {defect:.3e}")


def associate_povm(m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL) -> Povm:
    """The measure ``i -> M(i, I)`` of outcome effects."""
    require_valid(m, tol)
    eye_out = np.eye(m.dim_out, dtype=np.complex128)
    effects = tuple((label, apply_heisenberg(kraus, eye_out)) for label, kraus in m.outcomes)
    return Povm(m.dim_in, effects)


def associate_channel(m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL) -> KrausSet:
    """The total channel ``M(Omega, .)``: all Kraus operators pooled across outcomes."""
    require_valid(m, tol)
    ops = tuple(op for _, kraus in m.outcomes for op in kraus.ops)
    return KrausSet(m.dim_in, m.dim_out, ops)


def lueders(p: Povm, tol: Tolerances = DEFAULT_TOL) -> DiscreteInstrument:
    """The instrument ``B -> P_i B P_i`` of a projection valued measure.

    Each effect must be Hermitian and idempotent within ``eps_eq``.
    """
    require_valid_povm(p, tol)
    outcomes = []
    for label, matrix in p.effects:
        proj = require_hermitian(matrix, tol, name=f"effect {label!r}")
        idem = float(np.linalg.norm(proj @ proj - proj))
        if idem > tol.eps_eq * max(1.0, float(np.linalg.norm(proj))):
            raise InstrumentumError(f"effect {label!r} is not a projection: defect {idem:.3e}")
        outcomes.append((label, KrausSet(p.dim, p.dim, (proj,))))
    return DiscreteInstrument(p.dim, p.dim, tuple(outcomes))


def trivial_from_povm(p: Povm, tol: Tolerances = DEFAULT_TOL) -> DiscreteInstrument:
    """The unique instrument of ``p`` into a one-dimensional output space.

    Outcome ``i`` carries the minimal Kraus set of the map ``c -> c * M(i)``,
    whose operators are the rows ``<d_l(i)|`` of a spectral square-root of the
    effect; a zero effect yields an empty Kraus set.
    """
    require_valid_povm(p, tol)
    outcomes = []
    for label, matrix in p.effects:
        kraus = kraus_from_choi(ChoiMatrix(p.dim, 1, matrix), tol)
        outcomes.append((label, kraus))
    return DiscreteInstrument(p.dim, 1, tuple(outcomes))


def trivial_from_channel(t: KrausSet, tol: Tolerances = DEFAULT_TOL) -> DiscreteInstrument:
    """The single-outcome instrument whose only map is the channel ``t``."""
    m = DiscreteInstrument(t.dim_in, t.dim_out, (("0", t),))
    require_valid(m, tol)
    return m


def nuclear(p: Povm, states, tol: Tolerances = DEFAULT_TOL) -> DiscreteInstrument:
    """The instrument ``M(i, B) = tr[sigma_i B] * M(i)`` for given output states.

    ``states`` pairs each outcome of ``p`` with a density matrix on the
    output space.  Outcome ``i`` gets one Kraus operator
    ``sqrt(p_m) |phi_m><d_l(i)|`` per pair of a retained spectral vector
    ``d_l(i)`` of the effect and eigenpair ``(p_m, phi_m)`` of ``sigma_i``,
    flattened row-major in ``(l, m)`` with both spectra descending.
    """
    require_valid_povm(p, tol)
    states = [as_matrix(s, name="output state") for s in states]
    if len(states) != len(p):
        raise ValueError(f"got {len(states)} states for {len(p)} effects")
    if not states:
        raise ValueError("at least one outcome is required")
    dim_out = states[0].shape[0]
    outcomes = []
    for (label, matrix), sigma in zip(p.effects, states):
        if sigma.shape != (dim_out, dim_out):
            raise ValueError(f"state for outcome {label!r} has shape {sigma.shape}")
        if not psd_check(sigma, tol):
            raise InstrumentumError(f"state for outcome {label!r} is not positive semidefinite")
        trace = float(np.trace(sigma).real)
        if abs(trace - 1.0) > tol.eps_eq * max(1.0, float(np.sqrt(dim_out))):
            raise InstrumentumError(f"state for outcome {label!r} has trace {trace!r}")
        effect_vals, effect_vecs = herm_eig(matrix, tol)
        state_vals, state_vecs = herm_eig(sigma, tol)
        ops = []
        if effect_vals.size and effect_vals[0] > 0.0:
            e_cut = tol.sv_rel_cutoff * float(effect_vals[0])
            s_cut = tol.sv_rel_cutoff * float(state_vals[0])
            for l in range(effect_vals.size):
                if effect_vals[l] <= e_cut:
                    break
                d_l = np.sqrt(effect_vals[l]) * effect_vecs[:, l]
                for m_idx in range(state_vals.size):
                    if state_vals[m_idx] <= s_cut:
                        break
                    phi = state_vecs[:, m_idx]
                    ops.append(np.sqrt(state_vals[m_idx]) * np.outer(phi, d_l.conj()))
        outcomes.append((label, KrausSet(p.dim, dim_out, tuple(ops))))
    return DiscreteInstrument(p.dim, dim_out, tuple(outcomes))


def compose_sequential(
    m1: DiscreteInstrument, m2: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL
) -> BiInstrument:
    """Feed the output of ``m1`` into ``m2``; outcome ``(i, j)`` observes ``i`` then ``j``.

    The composed Kraus set of outcome ``(i, j)`` is all products
    ``A'_k2(j) @ A_k1(i)``.
    """
    require_valid(m1, tol)
    require_valid(m2, tol)
    if m2.dim_in != m1.dim_out:
        raise ValueError(
            f"cannot compose: first output dimension {m1.dim_out} "
            f"!= second input dimension {m2.dim_in}"
        )
    outcomes = []
    for lab1, k1 in m1.outcomes:
        for lab2, k2 in m2.outcomes:
            ops = tuple(b @ a for a in k1.ops for b in k2.ops)
            outcomes.append(((lab1, lab2), KrausSet(m1.dim_in, m2.dim_out, ops)))
    return BiInstrument(
        m1.dim_in,
        m2.dim_out,
        tuple(outcomes),
        first_labels=m1.labels,
        second_labels=m2.labels,
    )


def margins(b: BiInstrument, tol: Tolerances = DEFAULT_TOL) -> tuple[Povm, Povm]:
    """Marginal POVMs of a product-outcome instrument.

    The first margin sums effects over the second label, the second margin
    over the first.
    """
    require_valid(b, tol)
    p = associate_povm(b, tol)
    first = {label: np.zeros((b.dim_in, b.dim_in), dtype=np.complex128) for label in b.first_labels}
    second = {
        label: np.zeros((b.dim_in, b.dim_in), dtype=np.complex128) for label in b.second_labels
    }
    for (lab1, lab2), matrix in p.effects:
        first[lab1] = first[lab1] + matrix
        second[lab2] = second[lab2] + matrix
    first_povm = Povm(b.dim_in, tuple((label, first[label]) for label in b.first_labels))
    second_povm = Povm(b.dim_in, tuple((label, second[label]) for label in b.second_labels))
    return first_povm, second_povm


def refine_rank1(m: DiscreteInstrument, tol: Tolerances = DEFAULT_TOL) -> DiscreteInstrument:
    """Split every outcome into rank-one pieces, one per minimal Kraus operator.

    The new outcome ``(k, i)`` carries the single operator ``A_k(i)`` from the
    minimal Kraus set of outcome ``i``; summing the new maps over ``k``
    recovers the old outcome maps.  Outcomes whose map is zero contribute no
    refined outcomes.
    """
    require_valid(m, tol)
    outcomes = []
    for label, kraus in m.outcomes:
        minimal = kraus_from_choi(choi(kraus), tol)
        for k, op in enumerate(minimal.ops):
            outcomes.append(((k, label), KrausSet(m.dim_in, m.dim_out, (op,))))
    return DiscreteInstrument(m.dim_in, m.dim_out, tuple(outcomes))
