import io
import json
import sys

import pytest

from provekit.errors import BackendUnavailable
from provekit.statements import parse_theorem
from provekit.subproc import SubprocessVerifier, serve
from provekit.verifier import ToyVerifier


class TestServe:
    def _roundtrip(self, requests):
        out = io.StringIO()
        serve(io.StringIO("".join(json.dumps(r) + "\n" for r in requests)), out)
        return [json.loads(line) for line in out.getvalue().splitlines()]

    def test_pass(self, simple_stmt):
        (resp,) = self._roundtrip([{
            "id": "r1", "statement": simple_stmt.raw_text, "proof": "add_zero",
            "timeout_ms": 1000, "extract_goals": False,
        }])
        assert resp == {"id": "r1", "pass": True, "errors": [], "goals": []}

    def test_failure_with_goals(self, simple_stmt):
        (resp,) = self._roundtrip([{
            "id": "r2", "statement": simple_stmt.raw_text, "proof": "mul_one",
            "timeout_ms": 1000, "extract_goals": True,
        }])
        assert resp["pass"] is False
        assert resp["errors"][0]["severity"] == "error"
        assert resp["goals"] == [{"hypotheses": [["x", "Int"]],
                                  "target": "x + 0 = x"}]

    def test_malformed_statement_is_error_verdict(self):
        (resp,) = self._roundtrip([{
            "id": "r3", "statement": "not a theorem", "proof": "x",
            "timeout_ms": 1000, "extract_goals": False,
        }])
        assert resp["pass"] is False and resp["errors"]


class TestSubprocessVerifier:
    def test_agrees_with_builtin(self, serve_cmd, simple_stmt, hyp_stmt):
        toy = ToyVerifier()
        with SubprocessVerifier(serve_cmd) as sv:
            for stmt, proof in [(simple_stmt, "add_zero"),
                                (simple_stmt, "mul_one"),
                                (hyp_stmt, "rw h add_zero"),
                                (hyp_stmt, "sorry")]:
                local = toy.verify(stmt, proof)
                remote = sv.verify(stmt, proof)
                assert remote.passed == local.passed
                assert [(d.line, d.col, d.severity, d.message)
                        for d in remote.diagnostics] == \
                       [(d.line, d.col, d.severity, d.message)
                        for d in local.diagnostics]

    def test_extract_goals(self, serve_cmd, simple_stmt):
        with SubprocessVerifier(serve_cmd) as sv:
            goals = sv.extract_goals(simple_stmt, "sorry")
            assert goals[0].target == "x + 0 = x"

    def test_many_interleaved_requests(self, serve_cmd, simple_stmt):
        import concurrent.futures
        with SubprocessVerifier(serve_cmd, pool_size=2) as sv:
            with concurrent.futures.ThreadPoolExecutor(8) as pool:
                futures = [pool.submit(sv.verify, simple_stmt,
                                       "add_zero" if i % 2 == 0 else "mul_one")
                           for i in range(24)]
                results = [f.result() for f in futures]
        assert [v.passed for v in results] == [i % 2 == 0 for i in range(24)]
        assert sv.protocol_errors() == []

    def test_child_death_raises_backend_unavailable(self, simple_stmt):
        sv = SubprocessVerifier([sys.executable, "-c", "pass"])
        sv.children[0].reader.join(timeout=5)
        with pytest.raises(BackendUnavailable):
            sv.verify(simple_stmt, "add_zero")
        sv.close()

    def test_backend_id(self, serve_cmd, simple_stmt):
        with SubprocessVerifier(serve_cmd) as sv:
            assert sv.verify(simple_stmt, "add_zero").backend == "subprocess"


def test_pipeline_runs_over_subprocess_verifier(serve_cmd, toy_run, small_cfg,
                                                tmp_path):
    from provekit import pipeline
    stmts, backend, _ = toy_run
    with SubprocessVerifier(serve_cmd, pool_size=2) as sv:
        report = pipeline.run_benchmark(stmts[:4], small_cfg, backend, sv,
                                        tmp_path / "run")
    assert report.metrics["total"] == 4
