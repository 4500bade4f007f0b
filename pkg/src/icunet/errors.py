"""Exception types raised across the package."""


class IcunetError(Exception):
    """Base class for all package errors."""


class InvalidSpec(IcunetError, ValueError):
    pass


class ConstantChannel(IcunetError, ValueError):
    pass


class ShapeMismatch(IcunetError, ValueError):
    pass


class DegenerateBatch(IcunetError, ValueError):
    pass


class StaleCache(IcunetError, ValueError):
    pass


class NoBins(IcunetError, ValueError):
    pass


class ConstantSpectrum(IcunetError, ValueError):
    pass


class ZeroWeights(IcunetError, ValueError):
    pass


class NoArtifactICs(IcunetError, LookupError):
    pass


class EmptyDataset(IcunetError, ValueError):
    pass


class InvalidBand(IcunetError, ValueError):
    pass


class TooShort(IcunetError, ValueError):
    pass


class HeterogeneousShapes(IcunetError, ValueError):
    pass


class LoadError(IcunetError, IOError):
    pass


class IoFailure(IcunetError, IOError):
    pass
