"""Finite-dimensional quantum instruments: dilations, extremality, compatibility.

The package works throughout in the Heisenberg picture: an instrument
assigns to each outcome a completely positive map ``B -> sum_k A_k^dag B A_k``
and the maps sum to a unital channel.  Schrodinger-picture state updates are
available wherever they are the natural reading.
"""

from .cpmaps import (
    ChoiMatrix,
    KrausSet,
    apply_heisenberg,
    apply_schrodinger,
    choi,
    cp_check,
    kraus_equivalent,
    kraus_from_choi,
)
from .compat import (
    CompatChannelDecomposition,
    CompatCoefficients,
    compat_channel,
    compat_from_coeffs,
    lueders_factorization,
    pvm_compat,
    rank1_nuclear_extract,
)
from .dilation import (
    MarkovKernel,
    MeasurementModel,
    StinespringDilation,
    measurement_model,
    minimal_stinespring,
    model_intertwiner,
    naimark,
    realized_instrument,
    standard_model,
    verify_dilation,
)
from .errors import FormatError, InstrumentumError
from .formats import Document, load, save
from .extremality import (
    CorrelationReport,
    ExtremalityReport,
    channel_extremal,
    correlation_extremal,
    correlation_witness_split,
    instrument_extremal,
    povm_extremal,
    witness_decompose,
)
from .instruments import (
    BiInstrument,
    DiscreteInstrument,
    Povm,
    associate_channel,
    associate_povm,
    compose_sequential,
    lueders,
    margins,
    nuclear,
    refine_rank1,
    trivial_from_channel,
    trivial_from_povm,
    validate,
)
from .matkernel import (
    DEFAULT_TOL,
    Tolerances,
    herm_eig,
    herm_exp,
    isometry_complete,
    kron,
    numeric_rank,
    psd_check,
)
from .posterior import (
    PosteriorResult,
    conditional_expectation,
    conditional_output,
    outcome_distribution,
    posterior_state,
)

__version__ = "0.1.0"

__all__ = [
    "ChoiMatrix",
    "KrausSet",
    "apply_heisenberg",
    "apply_schrodinger",
    "choi",
    "cp_check",
    "kraus_equivalent",
    "kraus_from_choi",
    "CompatChannelDecomposition",
    "CompatCoefficients",
    "compat_channel",
    "compat_from_coeffs",
    "lueders_factorization",
    "pvm_compat",
    "rank1_nuclear_extract",
    "MarkovKernel",
    "MeasurementModel",
    "StinespringDilation",
    "measurement_model",
    "minimal_stinespring",
    "model_intertwiner",
    "naimark",
    "realized_instrument",
    "standard_model",
    "verify_dilation",
    "FormatError",
    "InstrumentumError",
    "Document",
    "load",
    "save",
    "CorrelationReport",
    "ExtremalityReport",
    "channel_extremal",
    "correlation_extremal",
    "correlation_witness_split",
    "instrument_extremal",
    "povm_extremal",
    "witness_decompose",
    "BiInstrument",
    "DiscreteInstrument",
    "Povm",
    "associate_channel",
    "associate_povm",
    "compose_sequential",
    "lueders",
    "margins",
    "nuclear",
    "refine_rank1",
    "trivial_from_channel",
    "trivial_from_povm",
    "validate",
    "DEFAULT_TOL",
    "Tolerances",
    "herm_eig",
    "herm_exp",
    "isometry_complete",
    "kron",
    "numeric_rank",
    "psd_check",
    "PosteriorResult",
    "conditional_expectation",
    "conditional_output",
    "outcome_distribution",
    "posterior_state",
    "__version__",
]
