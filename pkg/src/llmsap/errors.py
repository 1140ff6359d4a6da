"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SapError(Exception):
    """Base class for every error raised by llmsap."""


class PlanError(SapError):
    """A plan is structurally unusable (fails referential integrity)."""


class PlanFormatError(SapError):
    """Base for errors while reading a serialized plan document."""


class PlanSyntaxError(PlanFormatError):
    def __init__(self, message: str, line: int, column: int, offset: int = 0):
        self.line = line
        self.column = column
        self.offset = offset
        super().__init__(f"{message} (line {line}, column {column})")


class PlanSchemaError(PlanFormatError):
    """Document is well-formed JSON but does not match the plan schema."""


class NoPlanFoundError(PlanFormatError):
    """A free-text response contains no fenced code block at all."""


class BlockParseError(PlanFormatError):
    """Fenced blocks were found but none of them held a valid plan document.

    ``errors`` lists ``(block_index, char_offset, error)`` for every block.
    """

    def __init__(self, errors: list[tuple[int, int, PlanFormatError]]):
        self.errors = errors
        first_idx, first_off, first_err = errors[0]
        super().__init__(
            f"no parseable plan among {len(errors)} fenced block(s); "
            f"block {first_idx} at offset {first_off}: {first_err}"
        )


class CatalogError(SapError):
    pass


class CorpusError(SapError):
    pass


class ScoringError(SapError):
    pass


class NoReplyBlockError(ScoringError):
    """An evaluator reply holds no fenced JSON object."""


class MissingDimensionError(ScoringError):
    pass


class ScoreRangeError(ScoringError):
    pass


class RbsError(SapError):
    pass


class PromptError(SapError):
    pass


class LeakageError(PromptError):
    """The exemplar plan belongs to the scenario being planned."""


class BackendError(SapError):
    """Transport-level failure talking to a model backend."""


class ExtractionFailed(SapError):
    """The model never produced a usable reply within the retry budget."""

    def __init__(self, message: str, attempts: int, last_error: Exception | None = None):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(message)


class LoopError(SapError):
    """A failure inside the refinement loop, annotated with its round."""

    def __init__(self, message: str, round_index: int, scenario_id: str):
        self.round_index = round_index
        self.scenario_id = scenario_id
        super().__init__(f"scenario {scenario_id}, round {round_index}: {message}")
