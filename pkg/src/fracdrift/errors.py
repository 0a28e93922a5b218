"""Exception types shared across the package."""


class FracdriftError(Exception):
    """Base class for package-specific failures."""


class GridError(FracdriftError, ValueError):
    """Grid configuration is unusable (size, dimension, mismatch)."""


class ParameterError(FracdriftError, ValueError):
    """A numeric parameter is outside its admissible range."""


class SymbolSymmetryError(FracdriftError, ValueError):
    """A Fourier multiplier breaks the conjugate symmetry needed for real output."""


class CflError(FracdriftError, RuntimeError):
    """Advective CFL limit violated; carries a suggested step size."""

    def __init__(self, message, advisory_dt):
        super().__init__(message)
        self.advisory_dt = advisory_dt


class SolverAbortError(FracdriftError, RuntimeError):
    """Non-finite values appeared; carries the last finite state."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class HistoryGapError(FracdriftError, RuntimeError):
    """A recorded velocity history was queried outside its time coverage."""


class PicardDivergenceError(FracdriftError, RuntimeError):
    """Successive-iterate ratios exceeded one repeatedly."""


class ResolutionError(FracdriftError, ValueError):
    """A discrete stencil (ball average, bump support) has too few cells."""


class MoleculeConstructionError(FracdriftError, RuntimeError):
    """Molecule conditions could not be met after repeated rescaling."""


class SnapshotFormatError(FracdriftError, ValueError):
    """A binary field snapshot is malformed."""


class ConfigError(FracdriftError, ValueError):
    """A run-configuration document is malformed or inconsistent."""
