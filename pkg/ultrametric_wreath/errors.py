"""Exception hierarchy for ultrametric-wreath.

Every failure raised by a construction derives from ``UltrametricWreathError``.
Each subclass carries a distinct ``exit_code`` which the CLI returns verbatim,
so scripts can tell a guard trip from a malformed input file.

Validators never raise for axiom violations: they return a report instead.
"""

from typing import Any, Optional


class UltrametricWreathError(Exception):
    """Base class for all library errors.

    Attributes:
        message (str): Human-readable description.
        details (dict[str, Any]): Offending tuple, witness or guard values.
    """

    exit_code: int = 9

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}


# Input files


class ParseError(UltrametricWreathError):
    """Raised when an input file is not valid JSON."""

    exit_code = 10


class SchemaError(UltrametricWreathError):
    """Raised when an input file parses but does not match any known schema."""

    exit_code = 11


# Search guards


class OrderGuardExceeded(UltrametricWreathError):
    """Raised when a group enumeration grows beyond the configured max_order."""

    exit_code = 20


class TooLarge(UltrametricWreathError):
    """Raised when a brute-force oracle is asked to filter a factorial-size set."""

    exit_code = 21


class UpSetTooLarge(UltrametricWreathError):
    """Raised when the finite-character partition search meets an oversized up-set."""

    exit_code = 22


# Permutation groups


class DomainMismatch(UltrametricWreathError):
    """Raised when permutations or groups disagree on their ground set."""

    exit_code = 23


class UnknownElement(UltrametricWreathError):
    """Raised when an element is not part of the ground set."""

    exit_code = 24


class NotInvariant(UltrametricWreathError):
    """Raised when a block is not mapped onto itself by the group."""

    exit_code = 25


# Spaces and trees


class UnknownPoint(UltrametricWreathError):
    """Raised when a point is not part of the space."""

    exit_code = 30


class NotAComponent(UltrametricWreathError):
    """Raised when a point set is not an isometry orbit."""

    exit_code = 31


class Comparable(UltrametricWreathError):
    """Raised when spl is requested for two comparable nodes."""

    exit_code = 32


class NotInClass(UltrametricWreathError):
    """Raised when a node does not belong to the expected condensed class."""

    exit_code = 33


class NotPruned(UltrametricWreathError):
    """Raised when a construction needs a pruned tree."""

    exit_code = 34


class NotUpwardClosed(UltrametricWreathError):
    """Raised when a chain given to the labeling is not upward closed."""

    exit_code = 35


# Functors


class ConditionTwoViolated(UltrametricWreathError):
    """Raised when the level order does not bracket the distance set."""

    exit_code = 40


class NotIsometric(UltrametricWreathError):
    """Raised when a map between spaces does not preserve distances."""

    exit_code = 41


class RadiiTooLarge(UltrametricWreathError):
    """Raised when comb radii are not strictly decreasing below min D."""

    exit_code = 42


# Wreath products


class NotFull(UltrametricWreathError):
    """Raised when a local family has a sequence with no coherent extension."""

    exit_code = 50


class InvalidSystem(UltrametricWreathError):
    """Raised when a projection system fails its axioms."""

    exit_code = 51


class NotTransitive(UltrametricWreathError):
    """Raised when a coordinate group is not transitive on N_delta."""

    exit_code = 52


class MissingLevels(UltrametricWreathError):
    """Raised when a padding needs a skeleton level map that is absent."""

    exit_code = 53


class DepthTooSmall(UltrametricWreathError):
    """Raised when the truncation depth cannot fit the skeleton tags."""

    exit_code = 54


class NotTreeable(UltrametricWreathError):
    """Raised when a skeleton with its levels does not read as an L-tree."""

    exit_code = 55


# Pipelines


class NotProper(UltrametricWreathError):
    """Raised when no node lies strictly below the given chain."""

    exit_code = 60


class ClassMismatch(UltrametricWreathError):
    """Raised when the labeling class or seed sequence does not fit the chain."""

    exit_code = 61


class NotOrderIso(UltrametricWreathError):
    """Raised when a node labeling is not an order isomorphism."""

    exit_code = 62


class BlockMismatch(UltrametricWreathError):
    """Raised when a node is labeled outside the block of its class."""

    exit_code = 63


class NotLinear(UltrametricWreathError):
    """Raised when a skeleton is required to be a chain."""

    exit_code = 64


class InvariantViolation(UltrametricWreathError):
    """Raised when an internal post-condition check fails."""

    exit_code = 70


def all_error_classes() -> list[type[UltrametricWreathError]]:
    """Return every concrete error class, ordered by exit code."""
    found: list[type[UltrametricWreathError]] = []
    pending = list(UltrametricWreathError.__subclasses__())
    while pending:
        cls = pending.pop()
        found.append(cls)
        pending.extend(cls.__subclasses__())
    return sorted(found, key=lambda c: c.exit_code)
