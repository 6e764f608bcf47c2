"""Oracle and actor agents over a pluggable chat-completion client."""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import os
import re
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any, Protocol

from .plan import ActorPlan, OracleResult, SchemaError, validate_actor_output, validate_oracle_output

log = logging.getLogger(__name__)

API_KEY_ENV = "STREETDYN_LLM_API_KEY"
API_URL_ENV = "STREETDYN_LLM_URL"
MODEL_ENV = "STREETDYN_LLM_MODEL"
DEFAULT_URL = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL = "gpt-4"
MAX_RETRIES = 3


class LlmError(Exception):
    pass


class NoJsonFoundError(LlmError):
    pass


class MissingFixtureError(LlmError):
    pass


class ConfigError(LlmError):
    pass


class ExhaustedRetriesError(LlmError):
    def __init__(self, attempts: int, last_error: Exception):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(f"no valid answer after {attempts} attempts; last error: {last_error}")


class LlmClient(Protocol):
    def complete(self, prompt: str, context: list[dict], key: str | None = None) -> str: ...


# ---------------------------------------------------------------------------
# templates


def _template(name: str) -> Template:
    return Template(resources.files("streetdyn").joinpath("data", "prompts", f"{name}.txt").read_text())


@dataclass(frozen=True)
class PromptTemplates:
    oracle_template: Template = field(default_factory=lambda: _template("oracle"))
    actor_template: Template = field(default_factory=lambda: _template("actor"))

    def oracle(self, instruction: str) -> str:
        return self.oracle_template.substitute(instruction=instruction.strip())

    def actor(self, agent: "AgentInit", agent_list: dict[str, str], shared: str = "none") -> str:
        return self.actor_template.substitute(
            agent_list=json.dumps(agent_list, sort_keys=True),
            agent_id=agent.agent_id,
            agent_name=agent.name,
            agent_type=agent.agent_type,
            movement=agent.movement,
            guide_text=agent.guide_text.strip(),
            shared=shared,
        )


@dataclass(frozen=True)
class AgentInit:
    agent_id: str
    name: str
    agent_type: str
    movement: str
    guide_text: str


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# structured output


_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n?(.*?)```", re.S)


def structured_extract(raw: str, schema: str | None = None) -> Any:
    """Return the first JSON object found in model output.

    Code fences and surrounding prose are ignored. Python-literal dicts
    (single quotes) are accepted as a fallback. No semantic validation.
    """
    candidates = [m.group(1) for m in _FENCE.finditer(raw)] + [raw]
    decoder = json.JSONDecoder()
    for text in candidates:
        for start in (i for i, ch in enumerate(text) if ch == "{"):
            try:
                value, _ = decoder.raw_decode(text, start)
            except json.JSONDecodeError:
                block = _balanced(text, start)
                if block is None:
                    continue
                try:
                    value = ast.literal_eval(block)
                except (ValueError, SyntaxError, MemoryError, RecursionError):
                    continue
            if isinstance(value, dict):
                return value
    raise NoJsonFoundError(f"no JSON object found in model output{f' for {schema}' if schema else ''}: {raw[:80]!r}")


def _balanced(text: str, start: int) -> str | None:
    depth = 0
    quote = None
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if quote:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


# ---------------------------------------------------------------------------
# clients


class FixtureClient:
    """Canned responses from ``<directory>/<key>.json``.

    Each fixture holds ``responses`` (one per attempt; the last repeats) and an
    optional ``prompt_sha256``. Lookup is by prompt digest first, then by key;
    a keyed fixture whose digest disagrees with the prompt is treated as
    missing so template edits cannot go unnoticed.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise MissingFixtureError(f"fixture directory not found: {self.directory}")
        self._by_digest: dict[str, Path] = {}
        for path in sorted(self.directory.glob("*.json")):
            digest = json.loads(path.read_text()).get("prompt_sha256")
            if digest:
                self._by_digest.setdefault(digest, path)

    def _load(self, prompt: str, key: str | None) -> dict:
        digest = prompt_digest(prompt)
        if digest in self._by_digest:
            return json.loads(self._by_digest[digest].read_text())
        if key is None:
            raise MissingFixtureError(f"no fixture in {self.directory} matches prompt digest {digest[:12]}")
        path = self.directory / f"{key}.json"
        if not path.exists():
            raise MissingFixtureError(f"missing fixture file: {path}")
        doc = json.loads(path.read_text())
        if doc.get("prompt_sha256") and doc["prompt_sha256"] != digest:
            raise MissingFixtureError(f"missing fixture for current prompt: {path} was recorded for a different prompt")
        return doc

    def complete(self, prompt: str, context: list[dict], key: str | None = None) -> str:
        responses = self._load(prompt, key)["responses"]
        attempt = sum(1 for m in context if m.get("role") == "assistant")
        return responses[min(attempt, len(responses) - 1)]


class RemoteClient:
    """Generic chat-completion endpoint (``model``, ``messages``, ``temperature``)."""

    def __init__(self, url: str | None = None, model: str | None = None, api_key: str | None = None,
                 timeout: float = 120.0):
        self.api_key = api_key or os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise ConfigError(f"remote LLM needs an API key in ${API_KEY_ENV}")
        self.url = url or os.environ.get(API_URL_ENV, DEFAULT_URL)
        self.model = model or os.environ.get(MODEL_ENV, DEFAULT_MODEL)
        self.timeout = timeout

    def request_body(self, prompt: str, context: list[dict]) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}] + list(context),
            "temperature": 0,
        }

    def complete(self, prompt: str, context: list[dict], key: str | None = None) -> str:
        req = urllib.request.Request(
            self.url,
            data=json.dumps(self.request_body(prompt, context)).encode(),
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self.api_key}"},
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            doc = json.loads(resp.read())
        return doc["choices"][0]["message"]["content"]


# ---------------------------------------------------------------------------
# agents


@dataclass
class RunStats:
    retries: int = 0
    attempts: int = 0
    errors: list[str] = field(default_factory=list)


def _run(prompt: str, client: LlmClient, key: str, schema: str, validate, max_retries: int,
         stats: RunStats | None):
    if max_retries < 0:
        raise ValueError("max_retries must be >= 0")
    stats = stats if stats is not None else RunStats()
    context: list[dict] = []
    last: Exception | None = None
    for attempt in range(max_retries + 1):
        stats.attempts += 1
        raw = client.complete(prompt, list(context), key=key)
        try:
            value = validate(structured_extract(raw, schema))
        except (SchemaError, NoJsonFoundError) as exc:
            last = exc
            stats.errors.append(str(exc))
            log.info("%s attempt %d rejected: %s", key, attempt + 1, exc)
            if attempt < max_retries:
                stats.retries += 1
                context += [
                    {"role": "assistant", "content": raw},
                    {"role": "user", "content": f"Your answer was rejected: {exc}. Reply with corrected JSON only."},
                ]
            continue
        return value
    raise ExhaustedRetriesError(max_retries + 1, last)


def run_oracle(instruction: str, client: LlmClient, max_retries: int = MAX_RETRIES,
               templates: PromptTemplates | None = None, stats: RunStats | None = None) -> OracleResult:
    prompt = (templates or PromptTemplates()).oracle(instruction)
    return _run(prompt, client, "oracle", "oracle", validate_oracle_output, max_retries, stats)


def run_actor(agent: AgentInit, agent_list: dict[str, str], client: LlmClient, shared: str = "none",
              max_retries: int = MAX_RETRIES, templates: PromptTemplates | None = None,
              stats: RunStats | None = None) -> ActorPlan:
    prompt = (templates or PromptTemplates()).actor(agent, agent_list, shared)

    def validate(doc):
        return validate_actor_output(doc, agent.agent_id, agent.agent_type, agent.movement)

    return _run(prompt, client, agent.name, "actor", validate, max_retries, stats)


def agent_inits(oracle: OracleResult) -> list[AgentInit]:
    return [
        AgentInit(s.agent_id, oracle.agent_list[s.agent_id], s.agent_type, s.movement,
                  oracle.guide_texts[s.agent_id])
        for s in oracle.init_states
    ]


def shared_summary(oracle: OracleResult, agent_id: str) -> str:
    """Text offered to an actor about the other participants."""
    others = [a for a in agent_inits(oracle) if a.agent_id != agent_id]
    if not others:
        return "none"
    return "; ".join(f"{a.agent_id} {a.name} ({a.agent_type}, {a.movement}): {a.guide_text}" for a in others)
