"""Outcome statistics and post-measurement states of an instrument."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpmaps import apply_heisenberg, apply_schrodinger
from .errors import InstrumentumError
from .instruments import DiscreteInstrument, Label, require_valid
from .matkernel import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    dagger,
    psd_check,
    require_hermitian,
)

__all__ = [
    "PosteriorResult",
    "outcome_distribution",
    "posterior_state",
    "conditional_output",
    "conditional_expectation",
]


@dataclass(frozen=True)
class PosteriorResult:
    """An outcome (or outcome set), its probability, and the conditioned output state."""

    label: object
    probability: float
    state: np.ndarray = field(repr=False)


def _check_state(rho, dim: int, tol: Tolerances) -> np.ndarray:
    rho = require_hermitian(rho, tol, name="input state")
    if rho.shape != (dim, dim):
        raise ValueError(f"state has shape {rho.shape}, expected {(dim, dim)}")
    if not psd_check(rho, tol):
        raise InstrumentumError("input state is not positive semidefinite")
    trace = float(np.trace(rho).real)
    if abs(trace - 1.0) > tol.eps_eq * max(1.0, float(np.sqrt(dim))):
        raise InstrumentumError(f"input state has trace {trace!r}")
    return rho


def outcome_distribution(
    m: DiscreteInstrument, rho, tol: Tolerances = DEFAULT_TOL
) -> tuple:
    """Probabilities ``tr[rho M(i)]`` of all outcomes, in label order."""
    require_valid(m, tol)
    rho = _check_state(rho, m.dim_in, tol)
    eye_out = np.eye(m.dim_out, dtype=np.complex128)
    weights = []
    for label, kraus in m.outcomes:
        effect = apply_heisenberg(kraus, eye_out)
        weights.append((label, float(np.trace(rho @ effect).real)))
    return tuple(weights)


def posterior_state(
    m: DiscreteInstrument, rho, label: Label, tol: Tolerances = DEFAULT_TOL
) -> PosteriorResult:
    """The normalized output state conditioned on observing ``label``.

    Raises when the outcome has (numerically) zero probability.
    """
    require_valid(m, tol)
    rho = _check_state(rho, m.dim_in, tol)
    kraus = m.outcome(label)
    raw = apply_schrodinger(kraus, rho)
    weight = float(np.trace(raw).real)
    if weight <= tol.eps_eq:
        raise InstrumentumError(f"outcome {label!r} has zero probability on this state")
    state = (raw + dagger(raw)) / (2.0 * weight)
    return PosteriorResult(label, weight, state)


def conditional_output(
    m: DiscreteInstrument, rho, subset, tol: Tolerances = DEFAULT_TOL
) -> PosteriorResult:
    """The output state conditioned on the outcome falling in ``subset``."""
    require_valid(m, tol)
    rho = _check_state(rho, m.dim_in, tol)
    subset = tuple(subset)
    if not subset:
        raise ValueError("subset must contain at least one outcome label")
    for label in subset:
        if label not in m.labels:
            raise KeyError(f"no outcome labeled {label!r}")
    raw = np.zeros((m.dim_out, m.dim_out), dtype=np.complex128)
    for label, kraus in m.outcomes:
        if label in subset:
            raw += apply_schrodinger(kraus, rho)
    weight = float(np.trace(raw).real)
    if weight <= tol.eps_eq:
        raise InstrumentumError("outcome subset has zero probability on this state")
    state = (raw + dagger(raw)) / (2.0 * weight)
    return PosteriorResult(subset, weight, state)


def conditional_expectation(
    m: DiscreteInstrument, rho, b, tol: Tolerances = DEFAULT_TOL
) -> tuple:
    """Expectations ``tr[rho_i b]`` of an output observable given each outcome.

    Outcomes of zero probability are omitted.  The returned values satisfy
    ``sum_i p(i) <b|i> = tr[rho M(Omega, b)]``.
    """
    require_valid(m, tol)
    rho = _check_state(rho, m.dim_in, tol)
    b = as_matrix(b, name="observable")
    if b.shape != (m.dim_out, m.dim_out):
        raise ValueError(f"observable has shape {b.shape}, expected {(m.dim_out, m.dim_out)}")
    out = []
    for label, kraus in m.outcomes:
        raw = apply_schrodinger(kraus, rho)
        weight = float(np.trace(raw).real)
        if weight <= tol.eps_eq:
            continue
        out.append((label, complex(np.trace(raw @ b) / weight)))
    return tuple(out)
