"""Prompt assembly and generation backends (HTTP endpoint or scripted mock).

Templates are opaque text with literal `{placeholder}` markers; substitution
is plain string replacement so template bodies may contain braces freely.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass
from importlib import resources

from .errors import BackendError, MissingPlaceholder, UnknownTemplate
from .statements import FormalStatement
from .verifier import Diagnostic

# Matches the diagnostic rendering below; the mock backend uses it to detect
# whether a correction prompt actually carries error feedback.
ERROR_LINE_RE = re.compile(r"line \d+, col \d+: ")

_FENCE_RE = re.compile(r"```(?:lean4|lean)[ \t]*\n(.*?)```", re.DOTALL)


def _load_prompt(name: str) -> str:
    return resources.files("provekit.prompts").joinpath(name).read_text(encoding="utf-8")


class TemplateRegistry:
    def __init__(self):
        self._templates: dict[str, str] = {}

    def register(self, template_id: str, text: str) -> None:
        self._templates[template_id] = text

    def get(self, template_id: str) -> str:
        if template_id not in self._templates:
            raise UnknownTemplate(f"no template registered under {template_id!r}")
        return self._templates[template_id]


def default_registry() -> TemplateRegistry:
    reg = TemplateRegistry()
    reg.register("default", _load_prompt("prover_initial.txt"))
    reg.register("correction", _load_prompt("prover_correction.txt"))
    return reg


@dataclass(frozen=True)
class AttemptContext:
    statement: FormalStatement
    prior_attempts: tuple[tuple[str, str, tuple[Diagnostic, ...]], ...]
    include_error_messages: bool = True
    include_prior_cot: bool = True


@dataclass(frozen=True)
class GenerationResult:
    full_text: str
    cot_text: str
    proof_text: str
    prompt_tokens: int
    completion_tokens: int
    finish_reason: str  # "stop" | "length" | "backend_error"


def render_diagnostic(diag: Diagnostic) -> str:
    return f"line {diag.line}, col {diag.col}: {diag.message}"


def build_initial_prompt(stmt: FormalStatement, template: str = "default",
                         registry: TemplateRegistry | None = None) -> str:
    text = (registry or default_registry()).get(template)
    if "{formal_statement}" not in text:
        raise MissingPlaceholder(f"template {template!r} lacks {{formal_statement}}")
    out = text.replace("{formal_statement}", stmt.raw_text)
    if "{informal_statement}" in out:
        out = out.replace("{informal_statement}", stmt.docstring or "")
    return out


def build_correction_prompt(ctx: AttemptContext, template: str = "correction",
                            registry: TemplateRegistry | None = None) -> str:
    if not ctx.prior_attempts:
        raise ValueError("correction prompt requires at least one prior attempt")
    text = (registry or default_registry()).get(template)
    blocks = []
    for i, (cot, proof, diags) in enumerate(ctx.prior_attempts):
        lines = [f"## Attempt {i + 1}"]
        if ctx.include_prior_cot and cot:
            lines.append(cot.strip())
        lines.append(f"```lean\n{proof}\n```")
        if ctx.include_error_messages and diags:
            lines.append("Verifier feedback:")
            lines.extend(render_diagnostic(d) for d in diags)
        blocks.append("\n".join(lines))
    history = "\n\n".join(blocks)
    out = text.replace("{formal_statement}", ctx.statement.raw_text)
    out = out.replace("{attempt_history}", history)
    if "{informal_statement}" in out:
        out = out.replace("{informal_statement}", ctx.statement.docstring or "")
    return out


def parse_proof_block(full_text: str) -> tuple[str, str]:
    """Split model output into (cot_text, proof_text).

    The proof is the body of the last ```lean fenced block; with no such
    block the whole text is chain-of-thought.
    """
    matches = list(_FENCE_RE.finditer(full_text))
    if not matches:
        return full_text, ""
    last = matches[-1]
    return full_text[:last.start()], last.group(1).strip()


def derive_seed(run_seed: int, statement_id: str, sample_index: int, round_index: int) -> int:
    key = f"{run_seed}:{statement_id}:{sample_index}:{round_index}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def _count_tokens(text: str) -> int:
    return len(text.split())


def _truncate_tokens(text: str, max_tokens: int) -> tuple[str, bool]:
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text, False
    return " ".join(tokens[:max_tokens]), True


class MockBackend:
    """Deterministic scripted backend driven by a JSON-lines script file.

    Entries match on (statement_id, round). Several entries for the same key
    alternate per-sample via the request seed. An entry with
    `fixable_with_error` only yields its reply when the prompt carries
    rendered verifier diagnostics; otherwise it falls back to that
    statement's round-0 reply (the original failing proof).
    """

    backend_id = "mock"

    def __init__(self, script_path):
        self.entries: dict[tuple[str, int], list[dict]] = {}
        self.calls = 0
        with open(script_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                key = (entry["match"]["statement_id"], entry["match"]["round"])
                self.entries.setdefault(key, []).append(entry)

    def generate(self, prompt: str, max_tokens: int, temperature: float,
                 seed: int, statement_id: str | None = None,
                 round_index: int = 0) -> GenerationResult:
        assert max_tokens > 0
        self.calls += 1
        candidates = self.entries.get((statement_id, round_index), [])
        if not candidates:
            reply = ""
        else:
            entry = candidates[seed % len(candidates)]
            reply = entry["reply"]
            if entry.get("fixable_with_error") and not ERROR_LINE_RE.search(prompt):
                # without error feedback the fix is not found; fall back to
                # re-emitting the original round-0 proof
                base = self.entries.get((statement_id, 0), [])
                reply = base[seed % len(base)]["reply"] if base else ""
        reply, truncated = _truncate_tokens(reply, max_tokens)
        cot, proof = parse_proof_block(reply)
        return GenerationResult(
            full_text=reply,
            cot_text=cot,
            proof_text=proof,
            prompt_tokens=_count_tokens(prompt),
            completion_tokens=_count_tokens(reply),
            finish_reason="length" if truncated else "stop",
        )


class HTTPBackend:
    """Chat-completions style HTTP backend with retry + exponential backoff."""

    backend_id = "http"

    def __init__(self, url: str, token: str | None = None, model: str = "prover",
                 post=None, retries: int = 3, backoff: tuple = (1.0, 4.0, 16.0),
                 sleep=time.sleep):
        if post is None:
            import requests
            post = requests.post
        self.url = url
        self.token = token
        self.model = model
        self.post = post
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep

    def generate(self, prompt: str, max_tokens: int, temperature: float,
                 seed: int, statement_id: str | None = None,
                 round_index: int = 0) -> GenerationResult:
        assert max_tokens > 0
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": max_tokens,
            "temperature": temperature,
            "seed": seed,
        }
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error = None
        for attempt in range(self.retries):
            try:
                resp = self.post(self.url, json=payload, headers=headers, timeout=600)
            except OSError as exc:  # transport failure: retriable
                last_error = str(exc)
            else:
                status = getattr(resp, "status_code", 200)
                if status < 500 and status != 429:
                    if status >= 400:
                        raise BackendError(f"backend rejected request: HTTP {status}")
                    return self._parse_response(resp.json(), prompt, max_tokens)
                last_error = f"HTTP {status}"
            if attempt + 1 < self.retries:
                self.sleep(self.backoff[min(attempt, len(self.backoff) - 1)])
        raise BackendError(f"backend failed after {self.retries} attempts: {last_error}")

    def _parse_response(self, body: dict, prompt: str, max_tokens: int) -> GenerationResult:
        choice = body["choices"][0]
        content = choice["message"]["content"]
        usage = body.get("usage", {})
        completion = usage.get("completion_tokens", _count_tokens(content))
        completion = min(completion, max_tokens)
        cot, proof = parse_proof_block(content)
        return GenerationResult(
            full_text=content,
            cot_text=cot,
            proof_text=proof,
            prompt_tokens=usage.get("prompt_tokens", _count_tokens(prompt)),
            completion_tokens=completion,
            finish_reason=choice.get("finish_reason", "stop"),
        )


def generate(prompt: str, max_tokens: int, temperature: float, seed: int,
             backend, statement_id: str | None = None,
             round_index: int = 0) -> GenerationResult:
    """Uniform entry point over any backend object."""
    return backend.generate(prompt, max_tokens, temperature, seed,
                            statement_id=statement_id, round_index=round_index)
