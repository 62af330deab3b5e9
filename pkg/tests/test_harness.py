import csv
import json
import math

import numpy as np
import pytest

from rcrtr.harness import (
    RESULTS_HEADER,
    TAU_GRID,
    RunResult,
    SuiteError,
    build_problem,
    metric_table,
    parse_suite,
    performance_profile,
    performance_ratios,
    run_solver,
    run_suite,
    write_profile_csv,
    write_results_csv,
)
from rcrtr.mmio import save_matrix_market, save_vector
from rcrtr.problem import ProblemInstance, Rosenbrock, gen_experiment2_constraints
from rcrtr.trust import TrConfig

inf = math.inf


def test_two_solver_ratios():
    pi = performance_ratios({("p", "a"): 1.0, ("p", "b"): 2.0})
    assert pi["p", "a"] == 0.5 and pi["p", "b"] == 2.0


def test_single_solver_is_inf():
    assert performance_ratios({("p", "a"): 3.0}) == {("p", "a"): inf}


def test_hand_table_three_solvers():
    t = {
        ("p1", "a"): 4.0, ("p1", "b"): 2.0, ("p1", "c"): 8.0,
        ("p2", "a"): 1.0, ("p2", "b"): inf, ("p2", "c"): None,
        ("p3", "a"): 0.0, ("p3", "b"): 0.0, ("p3", "c"): 5.0,
    }
    pi = performance_ratios(t)
    assert pi["p1", "a"] == 2.0 and pi["p1", "b"] == 0.5 and pi["p1", "c"] == 4.0
    assert pi["p2", "a"] == 0.0
    assert pi["p2", "b"] == inf and pi["p2", "c"] == inf
    assert pi["p3", "a"] == 1.0 and pi["p3", "c"] == inf


def test_profile_bounds_and_monotone(rng):
    t = {(f"p{i}", s): (inf if rng.random() < 0.2 else rng.uniform(1, 50))
         for i in range(30) for s in "abc"}
    prof = performance_profile(performance_ratios(t))
    assert set(prof) == {"a", "b", "c"}
    for pts in prof.values():
        taus, rhos = zip(*pts)
        assert list(taus) == list(TAU_GRID)
        assert all(0.0 <= r <= 1.0 for r in rhos)
        assert all(np.diff(rhos) >= 0)


def test_tau_grid():
    assert TAU_GRID[0] == pytest.approx(0.25) and TAU_GRID[-1] == pytest.approx(64.0)
    assert len(TAU_GRID) == 33


@pytest.fixture
def quick_result():
    cs = gen_experiment2_constraints(40, 0.2, seed=1)
    pb = ProblemInstance(Rosenbrock(40), cs, name="tiny")
    return run_solver(pb, "sc-qr", TrConfig(), with_trace=True)


def test_run_result_round_trip(quick_result):
    r = quick_result
    assert r.solved and r.trace and r.trace[0]["k"] == 0
    text = r.to_json()
    json.loads(text)
    assert RunResult.from_json(text) == r
    # the first row has no radius yet; it must serialize as null, not NaN
    assert r.trace[0]["Delta"] is None


def test_from_json_rejects_unknown_field(quick_result):
    d = json.loads(quick_result.to_json())
    d["bogus"] = 1
    with pytest.raises(ValueError):
        RunResult.from_json(json.dumps(d))


def write(tmp_path, text, name="suite.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("text,lineno", [
    ("name=a n=10\nname=b n=10 colour=red\n", 2),
    ("# comment\n\nname=a n=10 n=12\n", 3),
    ("n=10\n", 1),
    ("name=a n=10\nname=a n=20\n", 2),
    ("name=a\n", 1),
    ("name=a n=10 matrix=A.mtx\n", 1),
    ("name=a n=10 objective=cubic\n", 1),
    ("name=a n=10 solvers=l2-qr,newton\n", 1),
    ("name=a n=ten\n", 1),
    ("name=a n=10 garbage\n", 1),
    ("# only comments\n", 1),
])
def test_suite_errors_carry_line_numbers(tmp_path, text, lineno):
    with pytest.raises(SuiteError) as ei:
        parse_suite(write(tmp_path, text))
    assert ei.value.lineno == lineno
    assert f":{lineno}:" in str(ei.value)


def test_suite_parsing_and_paths(tmp_path):
    cs = gen_experiment2_constraints(30, 0.2, seed=4)
    save_matrix_market(tmp_path / "A.mtx", cs.A)
    save_vector(tmp_path / "b.txt", cs.b)
    p = write(tmp_path, "name=syn n=30 density=0.2 seed=4 solvers=l2-qr  # trailing\n"
                        "name=file matrix=A.mtx rhs=b.txt objective=quadratic memory=3\n")
    e1, e2 = parse_suite(p)
    assert e1.solvers == ("l2-qr",) and e1.n == 30
    assert e2.matrix == str(tmp_path / "A.mtx") and e2.memory == 3 and e2.config().l == 3
    np.testing.assert_allclose(build_problem(e2).constraints.b, cs.b)
    assert build_problem(e1).constraints.A.shape == cs.A.shape


def test_run_suite_and_csvs(tmp_path):
    p = write(tmp_path, "name=a n=40 density=0.2 seed=1 solvers=l2-qr,sc-qr\n"
                        "name=b n=40 density=0.2 seed=2 solvers=l2-qr,sc-qr max_iter=2\n")
    results = run_suite(parse_suite(p))
    assert [(r.problem, r.solver) for r in results] == [
        ("a", "l2-qr"), ("a", "sc-qr"), ("b", "l2-qr"), ("b", "sc-qr")]
    assert results[0].solved and results[2].status == "MaxIter"
    m = metric_table(results, "iters")
    assert m["b", "l2-qr"] == inf
    write_results_csv(tmp_path / "results.csv", results)
    write_profile_csv(tmp_path / "profile.csv", results)
    rows = list(csv.reader(open(tmp_path / "results.csv")))
    assert rows[0] == RESULTS_HEADER and len(rows) == 5
    prof = list(csv.reader(open(tmp_path / "profile.csv")))
    assert prof[0] == ["metric", "solver", "tau", "rho"]
    assert len(prof) == 1 + 2 * 2 * len(TAU_GRID)
    with pytest.raises(ValueError):
        metric_table(results, "flops")
