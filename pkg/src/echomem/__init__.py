"""Spin-echo ensemble quantum memory simulator.

Three engines share one ensemble/error model:

* ``semiclassical``: product-state 2x2 propagation, echo/noise intensities,
  bang-bang sequences and far-field angular patterns.
* ``quantum``: collective-operator decomposition of the retrieved state into
  echo, single- and double-excitation sectors, O(N) in the atom count.
* ``oracle``: dense 2**N state-vector simulation used as ground truth.
"""

from echomem.ensemble import (
    Ensemble,
    EnsembleSpec,
    WaveVectorSet,
    phase_mismatch,
    sample_ensemble,
)
from echomem.errors import (
    AtomRotation,
    GlobalOverRotation,
    GradientAcrossSample,
    Ideal,
    PumpingDefect,
    RandomPerAtom,
    realize_initial_state,
    realize_rotations,
)
from echomem.exceptions import (
    DivergentRatioError,
    NoSignalError,
    OracleCapError,
    ValidationError,
)

__all__ = [
    "AtomRotation",
    "DivergentRatioError",
    "Ensemble",
    "EnsembleSpec",
    "GlobalOverRotation",
    "GradientAcrossSample",
    "Ideal",
    "NoSignalError",
    "OracleCapError",
    "PumpingDefect",
    "RandomPerAtom",
    "ValidationError",
    "WaveVectorSet",
    "phase_mismatch",
    "realize_initial_state",
    "realize_rotations",
    "sample_ensemble",
]

__version__ = "0.1.0"
