"""External verifier backend speaking JSON-lines over a child process.

Wire format (UTF-8, one object per line):
  request:  {"id", "statement", "proof", "timeout_ms", "extract_goals"}
  response: {"id", "pass", "errors": [{"line","col","severity","message"}],
             "goals": [{"hypotheses": [[name, type], ...], "target"}]}

Every request id must receive exactly one response; a response with an
unknown id is a protocol error, and child exit fails all in-flight requests.
"""

from __future__ import annotations

import itertools
import json
import subprocess
import sys
import threading
import time

from .errors import BackendUnavailable, VerifierTimeout
from .statements import FormalStatement, parse_theorem
from .verifier import Diagnostic, GoalState, ToyVerifier, Verdict


class _Child:
    """One child process with a reader thread dispatching responses by id."""

    def __init__(self, cmd: list[str]):
        self.proc = subprocess.Popen(
            cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1,
        )
        self.lock = threading.Lock()
        self.pending: dict[str, dict] = {}
        self.events: dict[str, threading.Event] = {}
        self.dead = False
        self.protocol_errors: list[str] = []
        self.reader = threading.Thread(target=self._read_loop, daemon=True)
        self.reader.start()

    def _read_loop(self):
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                resp = json.loads(line)
                rid = resp["id"]
            except (ValueError, KeyError):
                with self.lock:
                    self.protocol_errors.append(f"unparseable response line: {line!r}")
                continue
            with self.lock:
                if rid not in self.events:
                    self.protocol_errors.append(f"response for unknown id {rid!r}")
                    continue
                self.pending[rid] = resp
                self.events[rid].set()
        # child closed stdout: fail everything still in flight
        with self.lock:
            self.dead = True
            for event in self.events.values():
                event.set()

    def request(self, payload: dict, timeout: float) -> dict:
        rid = payload["id"]
        event = threading.Event()
        with self.lock:
            if self.dead:
                raise BackendUnavailable("verifier child process has exited")
            self.events[rid] = event
        try:
            with self.lock:
                assert self.proc.stdin is not None
                self.proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n")
                self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendUnavailable(f"verifier child pipe closed: {exc}") from exc
        if not event.wait(timeout):
            with self.lock:
                self.events.pop(rid, None)
                self.pending.pop(rid, None)
            raise VerifierTimeout(f"no response for id {rid!r} within {timeout}s")
        with self.lock:
            self.events.pop(rid, None)
            resp = self.pending.pop(rid, None)
            if resp is None:
                raise BackendUnavailable("verifier child exited with requests in flight")
        return resp

    def close(self):
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class SubprocessVerifier:
    """Multiplexes verify calls over a pool of child processes."""

    backend_id = "subprocess"

    def __init__(self, cmd: list[str], pool_size: int = 1):
        self.cmd = cmd
        self.children = [_Child(cmd) for _ in range(pool_size)]
        self._counter = itertools.count()
        self._pick_lock = threading.Lock()

    def _next_child(self) -> _Child:
        with self._pick_lock:
            n = next(self._counter)
        return self.children[n % len(self.children)]

    def verify(self, stmt: FormalStatement, proof: str, timeout: float = 60.0,
               extract_goals: bool = True) -> Verdict:
        start = time.monotonic()
        payload = {
            "id": f"req-{next(self._counter)}",
            "statement": stmt.raw_text,
            "proof": proof,
            "timeout_ms": int(timeout * 1000),
            "extract_goals": extract_goals,
        }
        resp = self._next_child().request(payload, timeout + 5.0)
        diags = tuple(sorted(
            (Diagnostic(e["line"], e["col"], e["severity"], e["message"])
             for e in resp.get("errors", [])),
            key=lambda d: (d.line, d.col),
        ))
        goals = tuple(
            GoalState(tuple((n, t) for n, t in g["hypotheses"]), g["target"])
            for g in resp.get("goals", [])
        )
        return Verdict(bool(resp["pass"]), diags, goals,
                       time.monotonic() - start, self.backend_id)

    def extract_goals(self, stmt: FormalStatement, partial_proof: str,
                      timeout: float = 60.0) -> list[GoalState]:
        return list(self.verify(stmt, partial_proof, timeout, extract_goals=True).goals)

    def protocol_errors(self) -> list[str]:
        out = []
        for child in self.children:
            with child.lock:
                out.extend(child.protocol_errors)
        return out

    def close(self):
        for child in self.children:
            child.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(stdin=None, stdout=None) -> None:
    """Run the builtin verifier behind the wire protocol (used by the CLI)."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    toy = ToyVerifier()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        try:
            stmt = parse_theorem(req["statement"])
            verdict = toy.verify(stmt, req["proof"],
                                 timeout=req.get("timeout_ms", 60000) / 1000.0)
            goals = verdict.goals if req.get("extract_goals") else ()
            resp = {
                "id": req["id"],
                "pass": verdict.passed,
                "errors": [
                    {"line": d.line, "col": d.col, "severity": d.severity,
                     "message": d.message}
                    for d in verdict.diagnostics
                ],
                "goals": [
                    {"hypotheses": [[n, t] for n, t in g.hypotheses],
                     "target": g.target}
                    for g in goals
                ],
            }
        except Exception as exc:  # malformed statement: report as an error verdict
            resp = {
                "id": req.get("id", "?"),
                "pass": False,
                "errors": [{"line": 1, "col": 1, "severity": "error",
                            "message": str(exc)}],
                "goals": [],
            }
        stdout.write(json.dumps(resp, ensure_ascii=False) + "\n")
        stdout.flush()
