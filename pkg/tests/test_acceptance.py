"""
End-to-end acceptance suite. Each test checks one criterion at its stated
tolerance and prints a single ``[criterion N] PASS|FAIL`` line.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the lines also show
up without ``-s`` because they bypass output capture.
"""
import asyncio
import contextlib
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdma import datastore, distest, qcir, qsim
from hdma.distest import Centroid, PairSpec, Point, build_pair_circuit, classical_assign, squared_distance
from hdma.encode import FeatureVector, Profile, angle_embed
from hdma.orchestra import LocalSimulatorBackend, MockRemoteBackend, ProblemRequest, Route, WorkflowConfig, run_workflow

from conftest import CENTROID_A, CENTROID_B, TABLE1_PAIRS, POINT_2, POINT_3, TABLE1_CSV
from helpers import overlap_oracle, random_circuit

PROFILE = Profile(id_bit_width=2)
QUANTUM_KINDS = ["M1", "M1r", "M2", "M2r", "M3", "M3r", "M4", "M6", "M8"]
NEAR_PAIRS = [((2, 1), (2, 0)), ((3, 0), (3, 1))]  # (near, far) for points 2 and 3


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def check(number, title):
        detail = {}
        try:
            yield detail
        except BaseException:
            outcome = "FAIL"
            raise
        else:
            outcome = "PASS"
        finally:
            suffix = f" ({detail['info']})" if "info" in detail else ""
            with capsys.disabled():
                print(f"\n[criterion {number}] {outcome}: {title}{suffix}")

    return check


def kinds(trace):
    return [e.kind.value for e in trace]


def marginal_p1(circuit):
    probs = qsim.marginal_probability(qsim.run_statevector(circuit), circuit.measure_map(), circuit.num_clbits)
    return sum(p for bits, p in probs.items() if bits[0] == "1")


def test_criterion_1_table3_reproduction(criterion, table1_path):
    with criterion(1, "Table 1 -> Table 3 on the quantum route, every seed, < 1 s per run") as d:
        slowest = 0.0
        seeds = range(100)
        for seed in seeds:
            table1_path.write_text(TABLE1_CSV)
            start = time.perf_counter()
            result = run_workflow(ProblemRequest(table1_path), WorkflowConfig(shots=1000, seed=seed, sinks="both"))
            slowest = max(slowest, time.perf_counter() - start)
            assert result.route is Route.QUANTUM
            assert result.labels == {2: "green", 3: "blue"}, f"seed {seed}"
            assert table1_path.read_text() == datastore.dumps(result.table)
        d["info"] = f"{len(seeds)} seeds, slowest run {slowest * 1000:.1f} ms"
        assert slowest < 1.0


def test_criterion_2_swap_test_formula(criterion):
    with criterion(2, "simulated P(c[2]=1) equals 1/2 - 1/2|<q1|q2>|^2 within 1e-9") as d:
        rng = np.random.default_rng(20240)
        worst = 0.0
        for _ in range(200):
            f = rng.uniform(-1, 1, size=4)
            pair = PairSpec(Point(2, FeatureVector(*f[:2])), Centroid(0, FeatureVector(*f[2:]), "c"))
            expected = 0.5 - 0.5 * overlap_oracle(f[:2], f[2:])
            worst = max(worst, abs(marginal_p1(build_pair_circuit(pair, PROFILE)) - expected))
        d["info"] = f"200 pairs, max deviation {worst:.2e}"
        assert worst < 1e-9


def test_criterion_3_near_far_structure(criterion):
    with criterion(3, "near pairs <= 10 marked shots and below the far pair, 1000 seeds") as d:
        circuits = {k: build_pair_circuit(p, PROFILE) for k, p in TABLE1_PAIRS.items()}
        seeds = range(1000)
        within = ordered = 0
        for seed in seeds:
            marked = {
                k: distest.estimate(qsim.sample_counts(c, 1000, seed * 7 + i), TABLE1_PAIRS[k]).marked_count
                for i, (k, c) in enumerate(sorted(circuits.items()))
            }
            for near, far in NEAR_PAIRS:
                within += marked[near] <= 10
                ordered += marked[near] < marked[far]
        total = len(seeds) * len(NEAR_PAIRS)
        d["info"] = f"<=10: {within}/{total}, near<far: {ordered}/{total}"
        assert within / total >= 0.9999
        assert ordered == total


def test_criterion_4_id_bits_never_mismatch(criterion):
    with criterion(4, "c[1]c[0] equals the point ID on every shot of the four pair circuits") as d:
        mismatches = shots = 0
        for seed in range(50):
            for (point_id, _), pair in TABLE1_PAIRS.items():
                counts = qsim.sample_counts(build_pair_circuit(pair, PROFILE), 1000, seed)
                shots += counts.shots
                mismatches += sum(n for bits, n in counts.items() if bits[1:] != format(point_id, "02b"))
        d["info"] = f"{mismatches} mismatches over {shots} shots"
        assert mismatches == 0


def test_criterion_5_simulator_matches_bruteforce(criterion):
    with criterion(5, "statevector vs full-matrix oracle on 100 random circuits, < 1e-10") as d:
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(100):
            c = random_circuit(rng, int(rng.integers(1, 5)), 20)
            fast, slow = qsim.run_statevector(c), qsim.bruteforce_statevector(c)
            worst = max(worst, float(np.max(np.abs(fast.amplitudes - slow.amplitudes))))
        d["info"] = f"max deviation {worst:.2e}"
        assert worst < 1e-10


def test_criterion_6_protocol_conformance(criterion, tmp_path):
    with criterion(6, "message traces match the reference order; duplicates change nothing") as d:
        path = tmp_path / "t.csv"
        path.write_text(TABLE1_CSV)
        quantum = run_workflow(ProblemRequest(path), WorkflowConfig(seed=1))
        assert kinds(quantum.trace) == QUANTUM_KINDS
        classical = run_workflow(ProblemRequest(path, profile=Profile(max_points=0)), WorkflowConfig())
        assert kinds(classical.trace) == ["M1", "M1r", "M9"]
        for rate in (0.3, 0.6, 0.9):
            noisy = run_workflow(ProblemRequest(path), WorkflowConfig(seed=1), duplicate_rate=rate, bus_seed=99)
            assert kinds(noisy.trace) == QUANTUM_KINDS
            assert noisy.estimates == quantum.estimates and noisy.assignments == quantum.assignments
        d["info"] = "quantum, classical and 3 duplicate rates checked"


def test_criterion_7_classical_quantum_agreement(criterion, table1_path):
    with criterion(7, "classical_assign agrees with the quantum route; D^2 = 0.845 / 0.005") as d:
        expected = {(2, 0): 0.845, (2, 1): 0.005, (3, 0): 0.005, (3, 1): 0.845}
        for (p, c), want in expected.items():
            pair = TABLE1_PAIRS[p, c]
            assert squared_distance(pair.point.features, pair.centroid.features) == pytest.approx(want, abs=1e-12)
        classical = {a.point_id: a.cluster_label for a in classical_assign([POINT_2, POINT_3], [CENTROID_A, CENTROID_B])}
        quantum = run_workflow(ProblemRequest(table1_path), WorkflowConfig(seed=0)).labels
        assert classical == quantum == {2: "green", 3: "blue"}
        d["info"] = f"both give {quantum}"


feature = st.floats(-1, 1, allow_nan=False)
real = st.floats(allow_nan=False, allow_infinity=False)


@st.composite
def pair_circuits(draw):
    ids = draw(st.lists(st.integers(0, 7), min_size=2, max_size=2, unique=True))
    point = Point(ids[0], FeatureVector(draw(feature), draw(feature)))
    centroid = Centroid(ids[1], FeatureVector(draw(feature), draw(feature)), "c")
    return build_pair_circuit(PairSpec(point, centroid), Profile(id_bit_width=3))


@st.composite
def random_unitary_circuits(draw):
    return random_circuit(np.random.default_rng(draw(st.integers(0, 2**32 - 1))), draw(st.integers(1, 5)), 25)


@st.composite
def tables(draw):
    rows = []
    for id in draw(st.lists(st.integers(0, 10**6), unique=True, max_size=10)):
        role = draw(st.sampled_from(["centroid", "point"]))
        label = draw(st.one_of(st.none(), st.sampled_from(["red", "green", "blue", "x y"])))
        if role == "centroid" and label is None:
            label = "red"
        rows.append(datastore.Row(id, draw(real), draw(real), label, role))
    return datastore.Table(rows)


def test_criterion_8_round_trips(criterion, tmp_path):
    with criterion(8, "circuit text and CSV round-trips; mock-remote counts equal local counts") as d:
        @given(st.one_of(pair_circuits(), random_unitary_circuits()))
        @settings(max_examples=200, deadline=None)
        def circuit_round_trip(c):
            text = qcir.serialize(c)
            assert qcir.parse(text) == c
            assert qcir.serialize(qcir.parse(text)) == text

        counter = iter(range(10**9))

        @given(tables())
        @settings(max_examples=200, deadline=None)
        def csv_round_trip(t):
            path = tmp_path / f"t{next(counter)}.csv"
            datastore.persist(t, path)
            assert datastore.load(path) == t

        circuit_round_trip()
        csv_round_trip()

        remote, local = MockRemoteBackend(latency_polls=3), LocalSimulatorBackend()
        compared = 0
        for (p, c), pair in TABLE1_PAIRS.items():
            text = qcir.serialize(build_pair_circuit(pair, PROFILE))
            for seed in range(5):
                job_r, job_l = remote.submit_job(text, 1000, seed), local.submit_job(text, 1000, seed)
                while not remote.job_status(job_r).terminal:
                    pass
                assert remote.job_result(job_r) == local.job_result(job_l)
                compared += 1
        d["info"] = f"200 circuits, 200 tables, {compared} backend comparisons"
