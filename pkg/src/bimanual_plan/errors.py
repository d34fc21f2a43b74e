"""Exception types raised across the pipeline."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


# trace ingestion / normalization
class ParseError(PipelineError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SchemaError(ParseError):
    pass


class DuplicateHand(PipelineError):
    pass


class EmptyOverlap(PipelineError):
    pass


class GapTooLong(PipelineError):
    pass


# estimators
class LengthMismatch(PipelineError):
    pass


class UnknownElement(PipelineError):
    pass


class WindowOutOfRange(PipelineError):
    pass


# graphs
class MalformedGraph(PipelineError):
    pass


class FrameMismatch(PipelineError):
    pass


class UnclassifiableTopology(PipelineError):
    pass


class NotSequential(PipelineError):
    pass


# segmentation / compilation
class OrphanOO(PipelineError):
    pass


class MalformedP(PipelineError):
    pass


class MissingGraspOffsets(PipelineError):
    pass


class NotSequentialSlice(PipelineError):
    pass


class SchemaViolation(PipelineError):
    pass


# dry run
class UnknownActionName(PipelineError):
    pass


class TickBudgetExhausted(PipelineError):
    pass


class GraspOutOfReach(PipelineError):
    pass


class ConfigError(PipelineError):
    pass
