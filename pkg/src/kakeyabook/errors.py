"""Exception hierarchy shared by all modules."""


class KakeyaError(Exception):
    pass


class ArgumentError(KakeyaError, ValueError):
    pass


class DimensionError(KakeyaError, ValueError):
    pass


class GeometryError(KakeyaError, ValueError):
    pass


class ParallelError(GeometryError):
    """Line and hyperplane are (numerically) parallel."""


class NearParallelError(GeometryError):
    """Two slabs are too close to parallel for a bounded intersection."""


class CapacityError(KakeyaError, RuntimeError):
    pass


class EmptySelectionError(KakeyaError, ValueError):
    pass


class InconclusiveError(KakeyaError, RuntimeError):
    """A search found nothing at the given sampling resolution (not a disproof)."""


class FormatError(KakeyaError, ValueError):
    pass


class ConfigError(KakeyaError, ValueError):
    """Invalid experiment config; the message carries the offending line."""
