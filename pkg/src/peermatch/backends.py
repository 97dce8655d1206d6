"""Completion backends: deterministic mock, replay cache, and live HTTP.

A backend turns prompt text plus decode parameters into reply text. The
mock is a pure function of (seed, prompt text, decode params); it parses
the structured sections that the protocol templates produce and plants a
recoverable pattern in its answer accuracy, so matching quality can be
verified entirely offline.
"""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .hashing import sha256_hex, stable_u64, unit_uniform
from .personas import PromptSet, default_prompts


class TransportError(RuntimeError):
    """Backend call failed. ``step`` is filled in by the interaction protocol."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class DecodeParams:
    """Decode settings recorded with every transcript entry.

    ``temperature=0.0`` means greedy decoding on live backends. ``seed``
    names the sampling stream; the mock folds it into its draws so repeated
    runs can be decorrelated on purpose (e.g. difficulty profiling).
    """

    temperature: float = 0.0
    max_tokens: int = 256
    seed: int | None = None

    def cache_key(self) -> str:
        return f"t={self.temperature!r}|n={self.max_tokens}|s={self.seed}"


class CompletionBackend(Protocol):
    name: str

    def complete(self, prompt: str, params: DecodeParams) -> str: ...


def mock_correct_label(stem: str, labels: tuple[str, ...]) -> str:
    """The option label the mock backend believes is correct for a stem.

    Synthetic corpora plant their answer keys with this same rule, so the
    mock's accuracy is meaningful without any live model.
    """
    if not labels:
        raise ValueError("no labels")
    return labels[stable_u64("mock-key", stem) % len(labels)]


class MockBackend:
    """Seeded, pure completion oracle with a planted complementarity pattern.

    Replies depend only on (seed, prompt text, decode params). For prompts
    that show answer options, the reply is correct with probability
    ``clamp(base_difficulty + bonus * complementarity, 0, 1)`` where
    complementarity is 1 iff the prompt's own role section and the partner
    summary section carry opposite-signed subject descriptors, else 0.

    The correctness draw is keyed on the question stem and the decode seed
    only, never on the role wording. Distinct variants that pose the same
    question to the same learner therefore share one underlying uniform
    draw, which makes their accuracies comparable draw by draw.
    """

    def __init__(
        self,
        seed: int,
        base_difficulty: float = 0.4,
        complementarity_bonus: float = 0.3,
        prompts: PromptSet | None = None,
    ):
        self.seed = seed
        self.base_difficulty = base_difficulty
        self.complementarity_bonus = complementarity_bonus
        self.prompts = prompts or default_prompts()
        self.name = (
            f"mock/v{self.prompts.version}/seed={seed}"
            f"/base={base_difficulty!r}/bonus={complementarity_bonus!r}"
        )

    def _detect_subject(self, region: str) -> int:
        """Earliest subject descriptor phrase in the region; 0 if none."""
        best_pos, best_value = len(region) + 1, 0
        for raw_value, phrase in self.prompts.subject.items():
            pos = region.find(phrase)
            if pos >= 0 and pos < best_pos:
                best_pos, best_value = pos, int(raw_value)
        return best_value

    def _detect_logic(self, region: str) -> int:
        best_pos, best_value = len(region) + 1, 0
        for raw_value, phrase in self.prompts.logic.items():
            pos = region.find(phrase)
            if pos >= 0 and pos < best_pos:
                best_pos, best_value = pos, int(raw_value)
        return best_value

    def _split_stem_and_labels(self, prompt: str) -> tuple[str, tuple[str, ...]]:
        p = self.prompts
        after_q = prompt.split(p.question_header, 1)[1]
        stem_part, options_part = after_q.split(p.options_header, 1)
        if p.summary_header in options_part:
            options_part = options_part.split(p.summary_header, 1)[0]
        labels = []
        for line in options_part.splitlines():
            line = line.strip()
            if len(line) >= 2 and line[1] == "." and line[0].isalpha() and line[0].isupper():
                labels.append(line[0])
        return stem_part.strip(), tuple(labels)

    def _answer(self, prompt: str, params: DecodeParams) -> str:
        p = self.prompts
        stem, labels = self._split_stem_and_labels(prompt)
        if not labels:
            return "I cannot find any options to choose from."
        belief = mock_correct_label(stem, labels)

        role_region = prompt.split(p.question_header, 1)[0]
        own_subject = self._detect_subject(role_region)
        partner_subject = 0
        if p.summary_header in prompt:
            summary_region = prompt.split(p.summary_header, 1)[1]
            partner_subject = self._detect_subject(summary_region)
        complementary = 1 if own_subject * partner_subject == -1 else 0

        prob = self.base_difficulty + self.complementarity_bonus * complementary
        prob = min(1.0, max(0.0, prob))
        draw = unit_uniform("draw", str(self.seed), params.cache_key(), stem)
        if draw < prob:
            choice = belief
        else:
            wrong = [lab for lab in labels if lab != belief]
            choice = wrong[stable_u64("miss", str(self.seed), params.cache_key(), stem) % len(wrong)]
        return f"Weighing the listed claims against the stated assumptions, option {choice} holds up best.\nAnswer: {choice}"

    def _draft(self, prompt: str) -> str:
        p = self.prompts
        role_region = prompt.split(p.question_header, 1)[0]
        subject = self._detect_subject(role_region)
        logic = self._detect_logic(role_region)
        lines = ["Draft notes on the question."]
        if subject != 0 or p.subject_phrase(0) in role_region:
            lines.append(f"My angle comes from {p.subject_phrase(subject)}.")
        if logic != 0 or p.logic_phrase(0) in role_region:
            lines.append(f"I lean on {p.logic_phrase(logic)} here.")
        lines.append("The question hinges on which claim survives the stated assumptions.")
        return "\n".join(lines)

    def _summary(self, prompt: str) -> str:
        p = self.prompts
        draft_region = prompt.split(p.partner_draft_header, 1)[1]
        if p.summary_task in draft_region:
            draft_region = draft_region.split(p.summary_task, 1)[0]
        partner_subject = self._detect_subject(draft_region)
        lines = ["In short, my partner reasons carefully about the claims."]
        if any(phrase in draft_region for phrase in p.subject.values()):
            lines.append(f"Their view is grounded in {p.subject_phrase(partner_subject)}.")
        lines.append("They weigh each claim against the assumptions before committing.")
        return "\n".join(lines)

    def complete(self, prompt: str, params: DecodeParams) -> str:
        p = self.prompts
        if p.question_header in prompt and p.options_header in prompt:
            return self._answer(prompt, params)
        if p.partner_draft_header in prompt:
            return self._summary(prompt)
        return self._draft(prompt)


class FunctionBackend:
    """Wraps a callable; mainly for scripted test backends."""

    def __init__(self, fn, name: str = "scripted"):
        self._fn = fn
        self.name = name

    def complete(self, prompt: str, params: DecodeParams) -> str:
        return self._fn(prompt, params)


class CachingBackend:
    """Content-addressed on-disk replay cache around another backend.

    Keys hash (inner backend name, decode params, prompt text); entries live
    at ``<root>/<2-hex-prefix>/<hash>``. A cache hit never touches the inner
    backend.
    """

    def __init__(self, inner: CompletionBackend, root: str | Path):
        self.inner = inner
        self.root = Path(root)
        self.name = f"cache({inner.name})"
        self.hits = 0
        self.misses = 0

    def _path_for(self, prompt: str, params: DecodeParams) -> Path:
        digest = sha256_hex(f"{self.inner.name}\x1f{params.cache_key()}\x1f{prompt}")
        return self.root / digest[:2] / digest

    def complete(self, prompt: str, params: DecodeParams) -> str:
        path = self._path_for(prompt, params)
        if path.exists():
            self.hits += 1
            return path.read_text("utf-8")
        reply = self.inner.complete(prompt, params)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(reply, "utf-8")
        self.misses += 1
        return reply


@dataclass(frozen=True)
class LiveConfig:
    """Connection settings for an OpenAI-style chat completion endpoint."""

    base_url: str
    model: str
    token_env: str = "PEERMATCH_API_TOKEN"
    timeout_s: float = 60.0


class HttpBackend:
    """Live backend posting to ``<base_url>/chat/completions``."""

    def __init__(self, config: LiveConfig):
        self.config = config
        self.name = f"http/{config.model}"

    def complete(self, prompt: str, params: DecodeParams) -> str:
        token = os.environ.get(self.config.token_env)
        if not token:
            raise TransportError(f"auth token env var {self.config.token_env!r} is not set")
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.seed is not None:
            payload["seed"] = params.seed
        request = urllib.request.Request(
            self.config.base_url.rstrip("/") + "/chat/completions",
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {token}"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout_s) as response:
                body = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise TransportError(f"live backend call failed: {exc}") from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected completion payload: {exc}") from exc
