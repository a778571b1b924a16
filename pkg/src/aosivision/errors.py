"""Exception hierarchy.

Everything raised on purpose by the package derives from ``AosiError`` so the
CLI can map failures onto exit codes: ``InputError`` subclasses are
parse/config problems (exit 2), ``AnalysisError`` subclasses are failures of
the analysis itself (exit 3).
"""


class AosiError(Exception):
    """Base class for package errors."""


class InputError(AosiError, ValueError):
    """Malformed input file or configuration."""


class AnalysisError(AosiError):
    """The analysis cannot proceed on well-formed input."""


class ParseError(InputError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class NonMonotonicFrames(ParseError):
    pass


class MissingField(InputError):
    pass


class UnknownTask(InputError):
    pass


class ConfigError(InputError):
    pass


# geometry_head
class DegenerateTriangle(AnalysisError):
    pass


class ZeroRatios(AnalysisError):
    pass


class FrameGapMismatch(AnalysisError):
    pass


class TooShort(AnalysisError):
    pass


class AllDegenerate(AnalysisError):
    pass


# fusion
class MissingMandatoryFeature(AnalysisError):
    pass


# attention
class AnnotationOutOfRange(AnalysisError):
    pass


# asymmetry
class ZeroLengthSegment(AnalysisError):
    pass


class EmptySequence(AnalysisError):
    pass


# csm
class EmptyPart(AnalysisError):
    pass


class DegenerateCloud(AnalysisError):
    pass


class MissingPart(AnalysisError):
    pass


class JointOutsidePart(AnalysisError):
    pass


class EmptyMask(AnalysisError):
    pass
