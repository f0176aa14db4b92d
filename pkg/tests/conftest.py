import sys

import pytest

from provekit.config import RunConfig
from provekit.prover import MockBackend
from provekit.statements import parse_theorem
from provekit.toydata import make_corpus, write_mock_script
from provekit.verifier import ToyVerifier


@pytest.fixture
def verifier():
    return ToyVerifier()


@pytest.fixture
def simple_stmt():
    return parse_theorem("theorem addZero (x : Int) : x + 0 = x := by sorry",
                         stmt_id="addZero")


@pytest.fixture
def hyp_stmt():
    return parse_theorem(
        "theorem withHyp (x : Int) (h : x = 3) : x + 0 = 3 := by sorry",
        stmt_id="withHyp")


@pytest.fixture
def toy_run(tmp_path):
    """Small corpus + mock script + backend, ready for pipeline runs."""
    stmts, entries = make_corpus(10, solved_frac=0.4, fixable_frac=0.5, seed=1)
    script = tmp_path / "script.jsonl"
    write_mock_script(entries, script)
    return stmts, MockBackend(script), script


@pytest.fixture
def small_cfg():
    return RunConfig(n_samples=4, max_rounds=2, gen_workers=4)


@pytest.fixture
def serve_cmd():
    return [sys.executable, "-c", "from provekit.subproc import serve; serve()"]
