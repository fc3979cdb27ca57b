"""Exception types shared across the package."""

from __future__ import annotations


class MvfedError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(MvfedError):
    """Operands have incompatible shapes."""


class NotSPD(MvfedError):
    """A matrix required to be symmetric positive definite is not."""


class InvalidShape(MvfedError):
    """A requested array shape is impossible (e.g. more columns than rows)."""


class InvalidSpec(MvfedError):
    """A generator or run specification is internally inconsistent."""


class MalformedFrame(MvfedError):
    """A wire frame failed structural validation during decoding."""


class MissingClient(MvfedError):
    """A protocol round expected a message from a client that sent none."""


class PartyFailure(MvfedError):
    """A participant raised during a federated round.

    Carries the round index and the failing party id so orchestration
    errors can be attributed.
    """

    def __init__(self, round_index: int, party_id: int, cause: BaseException):
        super().__init__(
            f"party {party_id} failed in round {round_index}: {cause!r}"
        )
        self.round_index = round_index
        self.party_id = party_id
        self.cause = cause


class ParseError(MvfedError):
    """A dataset or config file is syntactically invalid."""


class ShapeError(MvfedError):
    """A dataset file parsed but its contents are inconsistent."""


class LengthMismatch(MvfedError):
    """Paired sequences (e.g. predictions and truth) differ in length."""


class EmptySequence(MvfedError):
    """A sequence sample has no time steps."""


class EmptyBatch(MvfedError):
    """A training batch contains no samples."""


class EmptyDataset(MvfedError):
    """A dataset that must be non-empty is empty."""


class ConfigError(MvfedError):
    """A run configuration is invalid; message names the offending field."""
