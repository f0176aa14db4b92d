import json

import pytest

from provekit import pipeline
from provekit.config import RunConfig
from provekit.errors import BackendError, EmptyCorpus, RepairFailed
from provekit.prover import GenerationResult, MockBackend
from provekit.statements import parse_theorem
from provekit.toydata import make_corpus, write_mock_script
from provekit.verifier import ToyVerifier


class CountingBackend:
    """Wraps another backend, counting generate calls."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def generate(self, *args, **kwargs):
        self.calls += 1
        return self.inner.generate(*args, **kwargs)


class FailingBackend:
    backend_id = "failing"

    def generate(self, *args, **kwargs):
        raise BackendError("boom")


class TestProveSample:
    def test_round_zero_success_stops(self, toy_run, small_cfg, verifier):
        stmts, backend, _ = toy_run
        traces = pipeline.prove_sample(stmts[0], 0, backend, verifier, small_cfg)
        assert len(traces) == 1
        assert traces[0].verdict.passed

    def test_correction_round_fixes_with_feedback(self, toy_run, small_cfg,
                                                  verifier):
        stmts, backend, _ = toy_run
        fixable = stmts[4]  # first failure in the 40%-solved corpus is fixable
        traces = pipeline.prove_sample(fixable, 0, backend, verifier, small_cfg)
        assert not traces[0].verdict.passed
        assert traces[-1].verdict.passed
        assert traces[-1].round >= 1

    def test_no_feedback_no_fix(self, toy_run, verifier):
        stmts, backend, _ = toy_run
        cfg = RunConfig(n_samples=4, max_rounds=2, include_error_messages=False)
        traces = pipeline.prove_sample(stmts[4], 0, backend, verifier, cfg)
        assert not any(t.verdict.passed for t in traces)

    def test_round_budget_caps_first_round(self, toy_run, verifier):
        stmts, backend, _ = toy_run
        cfg = RunConfig(n_samples=1, max_rounds=2, tokens_first=3,
                        tokens_total=5)
        traces = pipeline.prove_sample(stmts[4], 0, backend, verifier, cfg)
        assert traces[0].generation.completion_tokens <= 3
        assert sum(t.generation.completion_tokens for t in traces) <= 5

    def test_budget_exhaustion_stops_rounds(self, toy_run, verifier):
        stmts, backend, _ = toy_run
        cfg = RunConfig(n_samples=1, max_rounds=5, tokens_first=8,
                        tokens_total=8)
        traces = pipeline.prove_sample(stmts[4], 0, backend, verifier, cfg)
        assert len(traces) == 1  # whole budget burned in round 0

    def test_backend_failure_recorded(self, simple_stmt, small_cfg, verifier):
        traces = pipeline.prove_sample(simple_stmt, 0, FailingBackend(),
                                       verifier, small_cfg)
        assert len(traces) == 1
        assert traces[0].generation.finish_reason == "backend_error"
        assert pipeline.BACKEND_FAIL_DIAG in traces[0].verdict.diagnostics[0].message

    def test_missing_proof_block_fails(self, small_cfg, verifier, tmp_path,
                                       simple_stmt):
        script = tmp_path / "s.jsonl"
        write_mock_script([{"match": {"statement_id": "addZero", "round": 0},
                            "reply": "no fence here",
                            "fixable_with_error": False}], script)
        traces = pipeline.prove_sample(simple_stmt, 0, MockBackend(script),
                                       verifier, small_cfg)
        assert pipeline.NO_PROOF_DIAG in traces[0].verdict.diagnostics[0].message


class TestRunBenchmark:
    def test_end_to_end_metrics(self, toy_run, small_cfg, verifier, tmp_path):
        stmts, backend, _ = toy_run
        report = pipeline.run_benchmark(stmts, small_cfg, backend, verifier,
                                        tmp_path / "run")
        assert report.metrics["total"] == 10
        assert report.metrics["solved"] == 7  # 4 round-0 + 3 fixable
        assert report.metrics["pass_at"]["1"] == pytest.approx(0.7)

    def test_empty_corpus(self, small_cfg, verifier, tmp_path):
        with pytest.raises(EmptyCorpus):
            pipeline.run_benchmark([], small_cfg, MockBackend.__new__(MockBackend),
                                   verifier, tmp_path / "run")

    def test_manifest_contents(self, toy_run, small_cfg, verifier, tmp_path):
        stmts, backend, _ = toy_run
        pipeline.run_benchmark(stmts, small_cfg, backend, verifier,
                               tmp_path / "run")
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["statements"] == [s.id for s in stmts]
        assert manifest["corpus_digest"] == pipeline.corpus_digest(stmts)
        assert manifest["config"]["n_samples"] == 4

    def test_results_are_deterministic(self, toy_run, small_cfg, verifier,
                                       tmp_path):
        stmts, _, script = toy_run
        for name in ("run1", "run2"):
            pipeline.run_benchmark(stmts, small_cfg, MockBackend(script),
                                   verifier, tmp_path / name)
        assert ((tmp_path / "run1" / "results.jsonl").read_bytes()
                == (tmp_path / "run2" / "results.jsonl").read_bytes())
        assert ((tmp_path / "run1" / "metrics.json").read_bytes()
                == (tmp_path / "run2" / "metrics.json").read_bytes())

    def test_worker_count_does_not_change_output(self, toy_run, small_cfg,
                                                 verifier, tmp_path):
        stmts, _, script = toy_run
        pipeline.run_benchmark(stmts, small_cfg, MockBackend(script), verifier,
                               tmp_path / "run1")
        wide = RunConfig(n_samples=4, max_rounds=2, gen_workers=1)
        pipeline.run_benchmark(stmts, wide, MockBackend(script), verifier,
                               tmp_path / "run2")
        assert ((tmp_path / "run1" / "results.jsonl").read_bytes()
                == (tmp_path / "run2" / "results.jsonl").read_bytes())

    def test_resume_skips_completed_samples(self, toy_run, small_cfg, verifier,
                                            tmp_path):
        stmts, _, script = toy_run
        out = tmp_path / "run"
        pipeline.run_benchmark(stmts, small_cfg, MockBackend(script), verifier, out)
        first_metrics = (out / "metrics.json").read_bytes()
        counting = CountingBackend(MockBackend(script))
        report = pipeline.run_benchmark(stmts, small_cfg, counting, verifier,
                                        out, resume=True)
        assert counting.calls == 0
        assert (out / "metrics.json").read_bytes() == first_metrics
        assert report.metrics["solved"] == 7

    def test_resume_completes_partial_file(self, toy_run, small_cfg, verifier,
                                           tmp_path):
        stmts, _, script = toy_run
        out = tmp_path / "run"
        pipeline.run_benchmark(stmts, small_cfg, MockBackend(script), verifier, out)
        full = (out / "results.jsonl").read_text().splitlines()
        # drop the last record and also strip the final flag from another sample
        partial = full[:-1]
        (out / "results.jsonl").write_text("".join(line + "\n" for line in partial))
        counting = CountingBackend(MockBackend(script))
        report = pipeline.run_benchmark(stmts, small_cfg, counting, verifier,
                                        out, resume=True)
        assert counting.calls >= 1
        assert report.metrics["solved"] == 7

    def test_backend_failures_excluded_and_counted(self, simple_stmt, small_cfg,
                                                   verifier, tmp_path):
        report = pipeline.run_benchmark([simple_stmt], small_cfg,
                                        FailingBackend(), verifier,
                                        tmp_path / "run")
        assert report.excluded == 1
        assert report.metrics["total"] == 0


class TestCollectSft:
    def test_whole_proof_and_correction_records(self, toy_run, small_cfg,
                                                verifier, tmp_path):
        stmts, backend, _ = toy_run
        results = [pipeline.prove_statement(s, backend, verifier, small_cfg)
                   for s in stmts]
        out = tmp_path / "sft.jsonl"
        n = pipeline.collect_sft(results, {s.id: s for s in stmts}, out,
                                 source_run="test")
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == n
        kinds = {r["kind"] for r in rows}
        assert kinds == {"whole_proof", "correction"}
        for r in rows:
            if r["kind"] == "correction":
                assert r["round"] >= 1
                assert r["diagnostics"]
                assert r["failed_proof"] != r["proof"]

    def test_per_statement_cap(self, toy_run, small_cfg, verifier, tmp_path):
        stmts, backend, _ = toy_run
        result = pipeline.prove_statement(stmts[0], backend, verifier, small_cfg)
        out = tmp_path / "sft.jsonl"
        pipeline.collect_sft([result], {stmts[0].id: stmts[0]}, out,
                             max_per_statement=2)
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len([r for r in rows if r["kind"] == "whole_proof"]) == 2


class TestRepair:
    def _repair_setup(self, tmp_path, reply_proof):
        stmt = parse_theorem(
            "theorem two (x : Int) : (x + 0) * 1 = x := by sorry", stmt_id="two")
        script = tmp_path / "s.jsonl"
        write_mock_script([{
            "match": {"statement_id": "two_goal0", "round": 0},
            "reply": f"plan\n```lean\n{reply_proof}\n```\n",
            "fixable_with_error": False,
        }], script)
        return stmt, MockBackend(script)

    def test_end_to_end(self, tmp_path, verifier):
        stmt, backend = self._repair_setup(tmp_path, "mul_one")
        cfg = RunConfig(n_samples=1, max_rounds=0)
        fixed = pipeline.repair_proof(stmt, "add_zero sorry", backend, verifier,
                                      cfg)
        assert fixed == "add_zero mul_one"
        assert verifier.verify(stmt, fixed).passed

    def test_unsolvable_subgoal(self, tmp_path, verifier):
        stmt, backend = self._repair_setup(tmp_path, "zero_add")
        cfg = RunConfig(n_samples=1, max_rounds=0)
        with pytest.raises(RepairFailed):
            pipeline.repair_proof(stmt, "add_zero sorry", backend, verifier, cfg)

    def test_passing_proof_rejected(self, tmp_path, verifier):
        stmt, backend = self._repair_setup(tmp_path, "mul_one")
        cfg = RunConfig(n_samples=1, max_rounds=0)
        with pytest.raises(ValueError):
            pipeline.repair_proof(stmt, "add_zero mul_one", backend, verifier,
                                  cfg)
