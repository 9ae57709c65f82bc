"""Exception hierarchy."""


class SusyRabiError(Exception):
    """Base class for all package errors."""


class TruncationError(SusyRabiError):
    """The Fock cutoff is too small for the requested displacement."""


class DimensionMismatch(SusyRabiError, ValueError):
    pass


class NotHermitian(SusyRabiError, ValueError):
    pass


class NotCommuting(SusyRabiError, ValueError):
    pass


class StepTooCoarse(SusyRabiError, ValueError):
    """Time step does not resolve the fastest scale of the generator."""


class IllConditioned(SusyRabiError, ValueError):
    pass


class FitDiverged(SusyRabiError, RuntimeError):
    pass


class NonConvergence(SusyRabiError, RuntimeError):
    pass


class ConfigInvalid(SusyRabiError, ValueError):
    pass
