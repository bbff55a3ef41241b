"""Exception types shared across the pipeline."""

from __future__ import annotations


class MinrepairError(Exception):
    """Base class for all domain errors raised by this package."""


class IngestError(MinrepairError):
    """An input file (submissions, pairs, candidates, ...) is malformed."""

    def __init__(self, path: str, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class ConfigError(MinrepairError):
    """A problem directory, limits file, or run configuration is invalid."""


class SandboxError(MinrepairError):
    """The sandbox infrastructure failed; distinct from a candidate failing."""


class UnknownProblemError(MinrepairError):
    """A pair references a problem the current index or problem set lacks."""


class ExternalGeneratorError(MinrepairError):
    """An external generator violated the wire protocol."""

    def __init__(self, pair_id: str | None, reason: str):
        self.pair_id = pair_id
        self.reason = reason
        where = f"pair {pair_id}" if pair_id else "stream"
        super().__init__(f"external generator ({where}): {reason}")


class NoCorrectCandidate(MinrepairError):
    """No judged candidate passed all tests.

    Carries the compilable candidates (with their edit distances, best
    first) so callers can show diagnostics without presenting them as a
    repair.
    """

    def __init__(self, pair_id: str, compilable):
        self.pair_id = pair_id
        self.compilable = list(compilable)
        super().__init__(
            f"no functionally correct candidate for pair {pair_id} "
            f"({len(self.compilable)} compilable candidate(s) available)"
        )


class EvaluationError(MinrepairError):
    """An evaluation aborted; carries pair ids completed before the abort."""

    def __init__(self, reason: str, completed_pair_ids):
        self.completed_pair_ids = list(completed_pair_ids)
        super().__init__(reason)
