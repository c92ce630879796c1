"""
Custom exceptions for the probewatch package.

Two intermediate bases map onto the command-line exit codes: every
``InvalidInputError`` exits with 2, every ``DegenerateDataError`` with 3.
"""


class ProbewatchError(Exception):
    """
    Base class of every exception raised by probewatch.
    """


class InvalidInputError(ProbewatchError):
    """
    Exception raised when an input, artifact or configuration violates its contract.

    The command line maps this family to exit code 2.
    """


class DegenerateDataError(ProbewatchError):
    """
    Exception raised when well-formed data cannot support the requested computation.

    The command line maps this family to exit code 3.
    """


class ArgumentError(InvalidInputError, ValueError):
    """
    Exception raised when a plain argument violates an operation's precondition.

    Still a ``ValueError``; any other ``ValueError`` from a command exits with 4.
    """


class BadMagicError(InvalidInputError):
    """
    Exception raised when a capture does not start with a classic pcap magic number.
    """


class TruncatedCaptureError(InvalidInputError):
    """
    Exception raised when a pcap header promises more bytes than remain in the stream.
    """


class InvalidPacketError(InvalidInputError):
    """
    Exception raised when a packet record violates its field invariants.

    Raised by ``PacketRecord.validate`` and by ``write_pcap`` before any byte is emitted.
    """


class DuplicateKeyError(InvalidInputError):
    """
    Exception raised when two rows of one feature set share a (start time, flow key) key.
    """


class SchemaMismatchError(InvalidInputError):
    """
    Exception raised when a table, model or CSV header disagrees with the expected columns.
    """


class RaggedRowError(InvalidInputError):
    """
    Exception raised when a CSV row has a different number of cells than its header.
    """


class MissingColumnError(InvalidInputError):
    """
    Exception raised when an external data set lacks a required column.
    """


class CoverageMismatchError(InvalidInputError):
    """
    Exception raised when label sets do not cover the same rows.
    """


class LengthMismatchError(InvalidInputError):
    """
    Exception raised when paired label/prediction sequences differ in length.
    """


class RowSetMismatchError(InvalidInputError):
    """
    Exception raised when two evaluation reports were computed over different rows.
    """


class BadRuleError(InvalidInputError):
    """
    Exception raised when a misuse rule cannot be parsed.
    """


class FeatureCountTooLargeError(InvalidInputError):
    """
    Exception raised when a feature vector does not fit into the requested image side.
    """


class ShapeMismatchError(InvalidInputError):
    """
    Exception raised when a CNN input batch does not match the network's encoding.
    """


class KTooLargeError(InvalidInputError):
    """
    Exception raised when a nearest-neighbour model asks for more neighbours than rows.
    """


class ConfigError(InvalidInputError):
    """
    Exception raised when a run configuration is malformed or references missing paths.
    """


class ScenarioError(InvalidInputError):
    """
    Exception raised when a traffic scenario is invalid or would produce ambiguous flows.
    """


class AllDroppedError(DegenerateDataError):
    """
    Exception raised when dropping uninformative columns leaves no column at all.
    """


class NoObservedValuesError(DegenerateDataError):
    """
    Exception raised when a column to impute has no observed value in the reference rows.
    """


class ClassTooSmallError(DegenerateDataError):
    """
    Exception raised when a class has too few rows for a three-way split.
    """


class OneClassOnlyError(DegenerateDataError):
    """
    Exception raised when a ROC curve is requested for labels of a single class.
    """


class EmptyMaskError(DegenerateDataError):
    """
    Exception raised when a feature mask selects no feature and cannot be repaired.
    """


class DivergenceError(DegenerateDataError):
    """
    Exception raised when CNN training produces a non-finite loss.

    Attributes:
        history (list): The per-epoch history recorded before training aborted.
    """

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history if history is not None else []

    def __reduce__(self):
        return (type(self), (str(self), self.history))


class NonConvergenceError(DegenerateDataError):
    """
    Exception raised when a solver is required to converge and did not.

    Solvers normally record non-convergence on the artifact; this is raised only
    where a caller asks for strict convergence.
    """


class EnsembleMemberError(DegenerateDataError):
    """
    Exception raised when a bagging member fails to fit.

    The command line reports the exit code of the wrapped cause.

    Attributes:
        member (int): Index of the failing member.
        cause (Exception): The base learner error.
    """

    def __init__(self, member: int, cause: Exception):
        super().__init__(f"bagging member {member} failed: {cause}")
        self.member = member
        self.cause = cause

    def __reduce__(self):
        return (type(self), (self.member, self.cause))
