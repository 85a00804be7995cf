"""Acceptance suite: one test per acceptance criterion, stated sizes and
tolerances pinned. Run with `pytest tests/test_acceptance.py -v -s` to see
one PASS line per criterion.
"""

import json
import random
import time
from pathlib import Path

import psutil

from mixdistill.cli import main
from mixdistill.client import ChatClient, EndpointSpec
from mixdistill.core import Answer, AnswerKind, Dataset
from mixdistill.datasets import Split, load_dataset
from mixdistill.filtering import RejectReason, filter_paths
from mixdistill.inference import sample_paths, vote
from mixdistill.mock_endpoint import MockEndpoint, MockScript
from mixdistill.evaluation import overlap_stats
from mixdistill.sandbox import GRACE_MS, ExecLimits, ExecStatus, execute_many

from test_filtering import twelve_generation_fixture

REPO = Path(__file__).parent.parent
MOCK_CONFIG = str(REPO / "configs" / "mock.yaml")
GOLDENS = Path(__file__).parent / "goldens"


def _ok(name: str):
    print(f"[PASS] {name}")


class TestVotingOracleEquivalence:
    """vote matches an independent brute-force counter on >= 10,000 multisets."""

    @staticmethod
    def _brute_force(concat):
        # Independent oracle: exact counting plus the declared tie rule
        # (largest group, earliest first occurrence wins ties).
        if not concat:
            return None
        best = None
        for value in dict.fromkeys(concat):
            count = sum(1 for other in concat if other == value)
            first = concat.index(value)
            if best is None or count > best[1] or (count == best[1] and first < best[2]):
                best = (value, count, first)
        return best[0]

    def test_vote_oracle_equivalence(self):
        rng = random.Random(190_001)
        cases = 10_000
        started = time.monotonic()
        for _ in range(cases):
            a_cot = [rng.randint(0, 9) for _ in range(rng.randint(0, 10))]
            a_pot = [rng.randint(0, 9) for _ in range(rng.randint(0, 10))]
            got = vote([Answer.numeric(v) for v in a_cot], [Answer.numeric(v) for v in a_pot])
            expected = self._brute_force(a_cot + a_pot)
            if expected is None:
                assert got.kind is AnswerKind.NONE
            else:
                assert got == Answer.numeric(expected)
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"oracle sweep took {elapsed:.1f}s"
        _ok(f"voting oracle equivalence: {cases} multisets, 100% match, {elapsed:.1f}s")


class TestLoaderFidelity:
    """Counts on official-format files match the published table exactly."""

    def test_loader_fidelity(self, official_root):
        svamp_train = load_dataset(Dataset.SVAMP, Split.TRAIN, official_root / "svamp/train.json")
        svamp_test = load_dataset(Dataset.SVAMP, Split.TEST, official_root / "svamp/test.json")
        gsm_train = load_dataset(Dataset.GSM8K, Split.TRAIN, official_root / "gsm8k/train.jsonl")
        gsm_test = load_dataset(Dataset.GSM8K, Split.TEST, official_root / "gsm8k/test.jsonl")
        sqa_train = load_dataset(Dataset.STRATEGYQA, Split.TRAIN, official_root / "strategyqa/train.json")
        sqa_test = load_dataset(Dataset.STRATEGYQA, Split.TEST, official_root / "strategyqa/dev.json")
        asdiv_test = load_dataset(Dataset.ASDIV, Split.TEST, official_root / "asdiv/ASDiv.xml")
        assert (len(svamp_train), len(svamp_test)) == (700, 300)
        assert (len(gsm_train), len(gsm_test)) == (7473, 1319)
        assert (len(sqa_train), len(sqa_test)) == (2061, 229)
        assert len(asdiv_test) == 695
        _ok("loader fidelity: 700/300, 7473/1319, 2061/229, ASDIV test 695")


def _adversarial_programs():
    programs = []
    programs += ["while True: pass"] * 8
    programs += [f"import time\ntime.sleep({30 + i})\nanswer = 1" for i in range(8)]
    programs += [
        "x = [0] * (10 ** 10)\nanswer = 1",
        "x = 'a' * (10 ** 11)\nanswer = 1",
        "x = bytearray(10 ** 11)\nanswer = 1",
        "x = list(range(10 ** 10))\nanswer = 1",
    ] * 4
    programs += [
        "open('/tmp/mixdistill_escape_a', 'w').write('x')\nanswer = 1",
        "open('/etc/mixdistill_escape', 'w').write('x')\nanswer = 1",
        "import os\nos.remove('/etc/hostname')\nanswer = 1",
        "import os\nos.mkdir('/tmp/mixdistill_escape_dir')\nanswer = 1",
        "with open('../escape.txt', 'w') as f: f.write('x')\nanswer = 1",
        "import os\nos.rename('/etc/hostname', '/etc/hostname2')\nanswer = 1",
        "import pathlib\npathlib.Path('/tmp/mixdistill_escape_b').write_text('x')\nanswer = 1",
        "import os\nfd = os.open('/tmp/mixdistill_escape_c', os.O_WRONLY | os.O_CREAT)\nanswer = 1",
    ] * 2
    programs += [
        "import socket\nsocket.socket()\nanswer = 1",
        "import socket\nsocket.create_connection(('192.0.2.1', 80), timeout=2)\nanswer = 1",
        "import urllib.request\nurllib.request.urlopen('http://192.0.2.1/')\nanswer = 1",
        "import http.client\nc = http.client.HTTPConnection('192.0.2.1', timeout=2)\nc.connect()\nanswer = 1",
    ] * 3
    programs += [
        "answer = 1 / 0",
        "raise RuntimeError('boom')",
        "import sys\nsys.exit(3)",
        "int('not a number')",
        "def f():\n    return f()\nf()\nanswer = 1",
        "assert False, 'nope'",
        "answer = undefined_name",
        "x = {}['missing']",
        "answer = (1, 2) + 'three'",
        "def broken(:",
        "import not_a_real_module_xyz",
        "answer = 1\nraise KeyboardInterrupt()",
    ]
    return programs


class TestExecutorAdversarialSuite:
    def test_adversarial_suite(self):
        programs = _adversarial_programs()
        while len(programs) < 100:
            programs.append("answer = 1 / 0")
        assert len(programs) >= 100
        limits = ExecLimits(wall_timeout_ms=1000)
        results = execute_many(programs, limits, parallelism=8)

        timeouts = sum(1 for r in results if r.status is ExecStatus.TIMEOUT)
        errors = sum(1 for r in results if r.status is ExecStatus.EXEC_ERROR)
        assert all(r.status is not ExecStatus.OK for r in results)
        assert all(r.wall_ms <= limits.wall_timeout_ms + GRACE_MS for r in results)
        # loops and sleeps must time out; everything else must fail cleanly
        assert timeouts == 16
        assert errors == len(programs) - timeouts

        assert not Path("/tmp/mixdistill_escape_a").exists()
        assert not Path("/tmp/mixdistill_escape_dir").exists()

        deadline = time.monotonic() + GRACE_MS / 1000 + 1.0
        while time.monotonic() < deadline and psutil.Process().children(recursive=True):
            time.sleep(0.05)
        assert not psutil.Process().children(recursive=True), "orphan processes"
        _ok(
            f"executor adversarial suite: {len(programs)} programs, "
            f"{timeouts} timeouts / {errors} clean failures, no orphans"
        )


class TestFilterFixture:
    def test_twelve_generation_corpus(self):
        accepted, report = filter_paths(
            twelve_generation_fixture(), limits=ExecLimits(wall_timeout_ms=1500)
        )
        assert len(accepted) == 4
        assert report.rejections == {
            RejectReason.NO_ANSWER: 3,
            RejectReason.EXEC_ERROR: 3,
            RejectReason.TIMEOUT: 0,
            RejectReason.GOLD_MISMATCH: 2,
        }
        _ok("filter fixture: accepted 4, rejections {NoAnswer 3, ExecError 3, Timeout 0, GoldMismatch 2}")


class TestOverlapPartition:
    def test_partition_sums_and_enumerated_case(self):
        rng = random.Random(881)
        for _ in range(1_000):
            n = rng.randint(1, 200)
            flags = [(rng.random() < 0.5, rng.random() < 0.5) for _ in range(n)]
            report = overlap_stats(flags)
            assert abs(sum(report.as_tuple()) - 100.0) <= 0.01
        four = overlap_stats([(True, True), (False, True), (True, False), (False, False)])
        assert four.as_tuple() == (25.0, 25.0, 25.0, 25.0)
        _ok("overlap partition: 1000 random sets sum to 100 +- 0.01; 4-case = (25,25,25,25)")


class TestOfflineEndToEnd:
    def test_pipeline_offline(self, tmp_path):
        started = time.monotonic()
        assert main(["pipeline", "--config", MOCK_CONFIG, "--out", str(tmp_path / "run")]) == 0
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"pipeline took {elapsed:.1f}s"

        scores = json.loads((tmp_path / "run" / "svamp" / "scores.json").read_text())
        assert scores["accuracy"]["combined"] == 75.0  # hand-computed: 6 of 8

        for golden in sorted(GOLDENS.iterdir()):
            produced = tmp_path / "run" / "report" / golden.name
            assert produced.read_bytes() == golden.read_bytes(), golden.name
        _ok(f"offline end-to-end: accuracy 75.0 exact, goldens byte-identical, {elapsed:.1f}s")


class TestVoteDegradation:
    """Combined voting with one mode off equals that mode's self-consistency."""

    def _problems(self):
        return load_dataset(
            Dataset.SVAMP, Split.TEST, REPO / "fixtures" / "mock" / "svamp_mini_test.json"
        ).problems

    def test_eq_degradation_both_directions(self):
        script = MockScript.from_file(REPO / "fixtures" / "mock" / "student_script.json")
        limits = ExecLimits(wall_timeout_ms=2000)
        with MockEndpoint(script) as server:
            spec = EndpointSpec("student", server.base_url, "mock-student")
            with ChatClient(spec) as client:
                for problem in self._problems():
                    cot_only = sample_paths(problem, client, n_cot=3, n_pot=0, limits=limits)
                    assert cot_only.final == vote(cot_only.a_cot, [])
                    full = sample_paths(problem, client, n_cot=3, n_pot=3, limits=limits)
                    assert cot_only.final == vote(full.a_cot, [])

                    pot_only = sample_paths(problem, client, n_cot=0, n_pot=3, limits=limits)
                    assert pot_only.final == vote([], pot_only.a_pot)
                    assert pot_only.final == vote([], full.a_pot)
        _ok("vote degradation: n_pot=0 equals CoT self-consistency (and symmetrically) on all fixture problems")
