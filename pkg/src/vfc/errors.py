"""Exception types shared across the package.

Every failure mode callers are expected to branch on gets its own class;
free-form RuntimeErrors are reserved for genuine bugs.
"""

from __future__ import annotations


class VfcError(Exception):
    """Base class for all package errors."""


# --- gateway ---------------------------------------------------------------

class EndpointError(VfcError):
    """Remote endpoint returned a non-retriable failure (non-2xx)."""

    def __init__(self, status: int, body_excerpt: str = ""):
        self.status = status
        self.body_excerpt = body_excerpt[:500]
        super().__init__(f"endpoint returned HTTP {status}: {self.body_excerpt!r}")


class RetriableExhausted(VfcError):
    """Transport kept failing after all configured retries."""


class MalformedResponse(VfcError):
    """Endpoint answered 2xx but the payload is not usable."""


class ImageLoadError(VfcError):
    """Image bytes could not be read from the referenced source."""


class DimensionError(VfcError):
    """Embedding dimension disagrees with earlier vectors of the same model."""


class DegenerateVector(VfcError):
    """Zero-norm vector has no direction; cosine is undefined."""


class GenerationRefused(VfcError):
    """Image generator declined the prompt (safety refusal)."""

    def __init__(self, prompt_excerpt: str):
        self.prompt_excerpt = prompt_excerpt[:200]
        super().__init__(f"generation refused for prompt: {self.prompt_excerpt!r}")


class CacheCorrupt(VfcError):
    """Stored cache entry failed its integrity check."""


# --- prompts / parsers ------------------------------------------------------

class UnknownTemplate(VfcError):
    """No template registered under the requested id."""


class SlotArityError(VfcError):
    """Number of slot values does not match the template's slot count."""


class EmptyChecklist(VfcError):
    """Object-list parsing produced no usable entries."""


class MissingMarker(VfcError):
    """Expected output marker was not found in the LLM response."""


class NoQuestions(VfcError):
    """No questions recoverable from the question-generation response."""


class IncompleteJudgment(VfcError):
    """A required verdict line is missing from the judge response."""

    def __init__(self, missing: int | str = ""):
        self.missing = missing
        super().__init__(f"judge response missing verdict: {missing}")


# --- pipelines --------------------------------------------------------------

class ProposalFailed(VfcError):
    """Every configured captioner failed to produce a proposal."""


class VqaFailed(VfcError):
    """Every VQA question call failed for a view."""


class PipelineFailed(VfcError):
    """No final caption could be produced for the item."""


# --- metrics ----------------------------------------------------------------

class AlignmentError(VfcError):
    """Paired score lists have mismatched lengths."""


class ConfigError(VfcError):
    """Configuration value violates a documented constraint."""


# --- harness ----------------------------------------------------------------

class ManifestError(VfcError):
    """Base class for manifest validation failures."""


class MissingFiles(ManifestError):
    def __init__(self, paths: list[str]):
        self.paths = paths
        super().__init__(f"{len(paths)} referenced file(s) missing: {paths}")


class DuplicateIds(ManifestError):
    def __init__(self, ids: list[str]):
        self.ids = ids
        super().__init__(f"duplicate item ids: {ids}")


class SchemaError(ManifestError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"manifest line {line}: {reason}")


class BatchFailed(VfcError):
    """Every item in the batch failed."""


class EmptyReport(VfcError):
    """Report requested but no input rows were found."""


# --- human evaluation service ------------------------------------------------

class NoTasks(VfcError):
    """No open tasks remain for this rater."""


class DuplicateVote(VfcError):
    """This rater already voted on this task."""


class UnknownTask(VfcError):
    """Vote references a task id that does not exist."""


class TaskClosed(VfcError):
    """Task already collected its required number of votes."""
