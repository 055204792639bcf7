"""Exception hierarchy shared by every gaitedge module."""


class GaitEdgeError(Exception):
    """Base class for all errors raised by gaitedge."""


class MalformedFile(GaitEdgeError, ValueError):
    """A raster file has a bad header, bad dimensions or a truncated payload."""


class ValueOutOfRange(GaitEdgeError, ValueError):
    """A grid value lies outside [0, 1] or is not finite."""


class IoFailure(GaitEdgeError, OSError):
    pass


class EmptyDataset(GaitEdgeError):
    pass


class DuplicateEntry(GaitEdgeError):
    pass


class NonBinaryInput(GaitEdgeError, ValueError):
    pass


class DimensionMismatch(GaitEdgeError, ValueError):
    pass


class OverlappingMasks(GaitEdgeError, ValueError):
    """Edge and interior masks share at least one foreground pixel."""


class NonFiniteInput(GaitEdgeError, ValueError):
    pass


class NonFiniteResult(GaitEdgeError, ArithmeticError):
    pass


class EmptyMask(GaitEdgeError, ValueError):
    """A mask that must contain foreground has none."""


class DegenerateBox(GaitEdgeError, ValueError):
    pass


class BodyTooWide(GaitEdgeError, ValueError):
    pass


class BodyOutOfFrame(GaitEdgeError, ValueError):
    """A rendered walker does not fit the frame with the required margin."""


class NoValidCandidates(GaitEdgeError):
    """View exclusion or selection left a probe without gallery candidates."""


class EmptyProtocol(GaitEdgeError):
    pass


class ConfigError(GaitEdgeError, ValueError):
    pass
