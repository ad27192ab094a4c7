"""Iterative summary refinement driven by judge feedback.

Each round generates a summary, has it judged, and folds the judge's
verbal feedback (rationale plus rendered scores) verbatim into the next
round's generation prompt. Every round stores its full prompt, the prompt
hash, and a chain hash linking it to the previous round, so "round k+1 saw
round k's feedback" is verifiable after the fact.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import DEFAULT_JOINER, Document
from .judge import JudgeScores, judge_summary
from .providers import ChatProvider, ChatRequest

DEFAULT_MAX_ROUNDS = 2


class RefineError(RuntimeError):
    pass


class EmptyCompletion(RefineError):
    pass


class RefinementAborted(RefineError):
    """A provider or judge failure stopped the loop; completed rounds survive."""

    def __init__(self, transcript: "RefinementTranscript", cause: Exception):
        super().__init__(f"refinement aborted after {len(transcript.rounds)} round(s): {cause}")
        self.transcript = transcript
        self.cause = cause


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _load_template(name: str, override: str | Path | None) -> str:
    if override is not None:
        return Path(override).read_text("utf-8")
    return resources.files("sumlab.assets").joinpath(name).read_text("utf-8")


@dataclass(frozen=True)
class RefinementRound:
    round: int  # 0-based; round 0 is the base generation
    summary_text: str
    scores: JudgeScores
    feedback_text: str
    prompt_text: str
    prompt_sha256: str
    chain_sha256: str


@dataclass(frozen=True)
class StopRule:
    max_rounds: int = DEFAULT_MAX_ROUNDS
    stop_on_max_score: bool = True
    stop_on_fixed_point: bool = True


@dataclass
class RefinementTranscript:
    document_id: str
    model_name: str
    config: StopRule
    rounds: list[RefinementRound] = field(default_factory=list)
    stopped_reason: str = ""


def render_feedback(scores: JudgeScores) -> str:
    """The verbal feedback payload: judge rationale plus the numeric scores."""
    parts = []
    if scores.rationale:
        parts.append(scores.rationale)
    parts.append("Scores from the last evaluation:")
    parts.append(scores.render())
    return "\n".join(parts)


def build_generation_prompt(
    document: Document,
    prior_summary: str | None = None,
    prior_feedback: str | None = None,
    summarize_template: str | Path | None = None,
    refine_template: str | Path | None = None,
    joiner: str = DEFAULT_JOINER,
) -> str:
    """Base prompt, or the feedback-conditioned prompt when a prior round exists."""
    if (prior_summary is None) != (prior_feedback is None):
        raise ValueError("prior_summary and prior_feedback must be given together")
    if prior_feedback is None:
        template = _load_template("summarize_prompt.txt", summarize_template)
        return template.format(document=document.text(joiner))
    template = _load_template("refine_prompt.txt", refine_template)
    return template.format(document=document.text(joiner), previous_summary=prior_summary, feedback=prior_feedback)


def generate_summary(
    document: Document,
    provider: ChatProvider,
    prior_summary: str | None = None,
    prior_feedback: str | None = None,
    **template_overrides,
) -> tuple[str, str]:
    """Generate one summary; returns (summary_text, prompt_text).

    The prompt text is returned so callers can commit it to the transcript
    hash chain.
    """
    prompt = build_generation_prompt(document, prior_summary, prior_feedback, **template_overrides)
    request = ChatRequest(
        system_prompt="You are an expert technical writer producing faithful summaries.",
        user_prompt=prompt,
        model_name=provider.model_name,
    )
    response = provider.chat(request)
    text = response.text.strip()
    if not text:
        raise EmptyCompletion(f"provider {provider.model_name} returned an empty summary")
    return text, prompt


@dataclass(frozen=True)
class _SummaryView:
    document_id: str
    text: str


def refine_loop(
    document: Document,
    gen_provider: ChatProvider,
    judge_provider: ChatProvider,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    stop_on_max_score: bool = True,
    stop_on_fixed_point: bool = True,
    judge_retries: int = 1,
    joiner: str = DEFAULT_JOINER,
) -> RefinementTranscript:
    """Generate, judge, and re-generate with feedback up to max_rounds times.

    Stops early when the judge awards a perfect overall score or when a
    regeneration reproduces the previous summary byte for byte (both rules
    toggleable). Provider or judge failures raise RefinementAborted with
    the completed rounds attached.
    """
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")
    rule = StopRule(max_rounds, stop_on_max_score, stop_on_fixed_point)
    transcript = RefinementTranscript(document_id=document.id, model_name=gen_provider.model_name, config=rule)

    chain = ""
    prior_summary: str | None = None
    prior_feedback: str | None = None
    for k in range(max_rounds):
        try:
            summary_text, prompt_text = generate_summary(
                document, gen_provider, prior_summary, prior_feedback, joiner=joiner
            )
            scores = judge_summary(
                document, _SummaryView(document.id, summary_text), judge_provider, retries=judge_retries, joiner=joiner
            )
        except Exception as exc:
            transcript.stopped_reason = f"error:{type(exc).__name__}"
            raise RefinementAborted(transcript, exc) from exc

        feedback = render_feedback(scores)
        prompt_hash = _sha256(prompt_text)
        chain = _sha256(chain + prompt_hash)
        transcript.rounds.append(
            RefinementRound(
                round=k,
                summary_text=summary_text,
                scores=scores,
                feedback_text=feedback,
                prompt_text=prompt_text,
                prompt_sha256=prompt_hash,
                chain_sha256=chain,
            )
        )

        if rule.stop_on_max_score and scores.overall == 5:
            transcript.stopped_reason = "max_score"
            return transcript
        if rule.stop_on_fixed_point and prior_summary is not None and summary_text == prior_summary:
            transcript.stopped_reason = "fixed_point"
            return transcript
        prior_summary = summary_text
        prior_feedback = feedback

    transcript.stopped_reason = "max_rounds"
    return transcript


def verify_hash_chain(transcript: RefinementTranscript) -> bool:
    """Check that every stored prompt hash, chain link, and feedback embedding holds.

    For k >= 1 the round's prompt must contain round k-1's feedback text
    verbatim, so its hash commits to that feedback.
    """
    chain = ""
    for i, rnd in enumerate(transcript.rounds):
        if _sha256(rnd.prompt_text) != rnd.prompt_sha256:
            return False
        chain = _sha256(chain + rnd.prompt_sha256)
        if chain != rnd.chain_sha256:
            return False
        if i >= 1 and transcript.rounds[i - 1].feedback_text not in rnd.prompt_text:
            return False
    return len(transcript.rounds) >= 1
