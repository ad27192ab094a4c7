"""LLM-as-judge scoring with strict Likert parsing.

The judge receives the exact instruction text shown to human raters (a
single shared asset) plus a machine-readable output contract kept separate
from those instructions, so the "same instructions" property stays
checkable. Scores are integers 1-5 on four dimensions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import DEFAULT_JOINER, Document
from .providers import ChatProvider, ChatRequest

DIMENSIONS = ("clarity", "accuracy", "coverage", "overall")
SCALE_MIN, SCALE_MAX = 1, 5

FORMAT_CONTRACT = (
    "After your assessment, output your ratings as four lines, one per dimension, "
    "each in the exact form 'Dimension: score' with an integer score from 1 to 5:\n"
    "Clarity: <score>\nAccuracy: <score>\nCoverage: <score>\nOverall: <score>"
)

FORMAT_REMINDER = (
    "Your previous reply could not be parsed. Reply again, and make sure it ends with "
    "exactly four lines 'Clarity: <n>', 'Accuracy: <n>', 'Coverage: <n>', 'Overall: <n>' "
    "where each <n> is a whole number from 1 to 5."
)

_SCORE_LINE = re.compile(
    r"^[ \t*#>-]*(clarity|accuracy|coverage|overall)(?:\s+quality)?\s*[:=]\s*(\d+(?:\.\d+)?)",
    re.IGNORECASE | re.MULTILINE,
)


class JudgeError(ValueError):
    pass


class MismatchedIds(JudgeError):
    pass


class MissingDimension(JudgeError):
    def __init__(self, name: str):
        super().__init__(f"no score found for dimension {name!r}")
        self.dimension = name


class OutOfRange(JudgeError):
    def __init__(self, name: str, value: float):
        super().__init__(f"score for {name!r} is {value}, outside {SCALE_MIN}..{SCALE_MAX}")
        self.dimension = name
        self.value = value


class AmbiguousScore(JudgeError):
    def __init__(self, name: str, detail: str):
        super().__init__(f"ambiguous score for {name!r}: {detail}")
        self.dimension = name


class JudgeUnparseable(JudgeError):
    pass


@dataclass(frozen=True)
class JudgeScores:
    clarity: int
    accuracy: int
    coverage: int
    overall: int
    evaluator_id: str = ""
    rationale: str = ""

    def __post_init__(self):
        for name in DIMENSIONS:
            value = getattr(self, name)
            if not isinstance(value, int) or not (SCALE_MIN <= value <= SCALE_MAX):
                raise OutOfRange(name, value)

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in DIMENSIONS}

    def render(self) -> str:
        """Canonical labeled-line block; parse_scores inverts this exactly."""
        return "\n".join(f"{name.capitalize()}: {getattr(self, name)}" for name in DIMENSIONS)


@dataclass(frozen=True)
class JudgePrompt:
    instruction_text: str
    document_text: str
    summary_text: str
    output_format_contract: str
    truncation_applied: bool = False

    def system_prompt(self) -> str:
        return self.instruction_text

    def user_prompt(self) -> str:
        return (
            f"Document:\n{self.document_text}\n\n"
            f"Summary to evaluate:\n{self.summary_text}\n\n"
            f"{self.output_format_contract}"
        )


def instruction_text(path: str | Path | None = None) -> str:
    """The rater instructions, verbatim from the shared asset file."""
    if path is not None:
        return Path(path).read_text("utf-8")
    return resources.files("sumlab.assets").joinpath("rater_instructions.txt").read_text("utf-8")


def build_prompt(
    document: Document,
    summary,
    instructions: str | None = None,
    max_chars: int | None = None,
    joiner: str = DEFAULT_JOINER,
) -> JudgePrompt:
    """Deterministic judge prompt over the full document and summary.

    `summary` is anything with document_id and text attributes (a stored
    summary record, a refinement round, ...). Truncation happens only when
    max_chars is set, and is flagged on the prompt so no shortened input
    goes unrecorded.
    """
    if summary.document_id != document.id:
        raise MismatchedIds(f"summary belongs to {summary.document_id!r}, not {document.id!r}")
    doc_text = document.text(joiner)
    truncated = False
    if max_chars is not None and len(doc_text) > max_chars:
        doc_text = doc_text[:max_chars]
        truncated = True
    return JudgePrompt(
        instruction_text=instructions if instructions is not None else instruction_text(),
        document_text=doc_text,
        summary_text=summary.text,
        output_format_contract=FORMAT_CONTRACT,
        truncation_applied=truncated,
    )


def parse_scores(response_text: str, evaluator_id: str = "") -> JudgeScores:
    """Extract the four integer scores from labeled lines, prose-tolerant.

    Repeated identical labels are fine; conflicting or non-integer values
    are ambiguous, and every dimension must appear exactly once resolved.
    """
    found: dict[str, float] = {}
    spans: list[tuple[int, int]] = []
    for m in _SCORE_LINE.finditer(response_text):
        name = m.group(1).lower()
        value = float(m.group(2))
        if name in found and found[name] != value:
            raise AmbiguousScore(name, f"conflicting values {found[name]} and {value}")
        found[name] = value
        spans.append(m.span())

    for name in DIMENSIONS:
        if name not in found:
            raise MissingDimension(name)
    for name in DIMENSIONS:
        value = found[name]
        if value != int(value):
            raise AmbiguousScore(name, f"non-integer score {value}")
        if not (SCALE_MIN <= value <= SCALE_MAX):
            raise OutOfRange(name, value)

    rationale_parts = []
    cursor = 0
    for start, end in sorted(spans):
        rationale_parts.append(response_text[cursor:start])
        cursor = max(cursor, end)
    rationale_parts.append(response_text[cursor:])
    rationale = "\n".join(part.strip() for part in rationale_parts if part.strip())

    return JudgeScores(
        clarity=int(found["clarity"]),
        accuracy=int(found["accuracy"]),
        coverage=int(found["coverage"]),
        overall=int(found["overall"]),
        evaluator_id=evaluator_id,
        rationale=rationale,
    )


def judge_summary(
    document: Document,
    summary,
    provider: ChatProvider,
    retries: int = 1,
    instructions: str | None = None,
    joiner: str = DEFAULT_JOINER,
) -> JudgeScores:
    """Chat then parse; on parse failure re-prompt with a format reminder."""
    prompt = build_prompt(document, summary, instructions=instructions, joiner=joiner)
    user = prompt.user_prompt()
    last_error: JudgeError | None = None
    for attempt in range(retries + 1):
        request = ChatRequest(
            system_prompt=prompt.system_prompt(),
            user_prompt=user if attempt == 0 else f"{user}\n\n{FORMAT_REMINDER}",
            model_name=provider.model_name,
        )
        response = provider.chat(request)
        try:
            return parse_scores(response.text, evaluator_id=provider.model_name)
        except JudgeError as exc:
            last_error = exc
    raise JudgeUnparseable(f"no parseable scores after {retries + 1} attempts: {last_error}")
