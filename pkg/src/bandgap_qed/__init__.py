"""Simulation and fitting tools for a qubit coupled to a 1D microwave photonic crystal."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BandgapQEDError, CalibrationError, DomainError, ExtractionError, FitError,
    NoBoundStateError, PoleError, SingularityError, SteadyStateError, TruncationError,
)
from .transfer_matrix import TwoPortMatrix, WaveguideSegment  # noqa: E402
from .band_structure import BandEdge, BandModel, CrystalGeometry  # noqa: E402
from .bound_state import BoundStateSolution, QubitParams, solve_bound_state  # noqa: E402
from .driven_qubit import CoolingRates, DressedSpectrum, DriveConfig, TransmonLadder  # noqa: E402
from .spectra import DeviceConfig, PeakFit, TransmissionMap  # noqa: E402
from .config import RunConfig, load_config  # noqa: E402
