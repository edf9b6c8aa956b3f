"""Acceptance checks, one test per criterion.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import json
import time

import pytest

from semalloc import compare, evaluate_decision, load_config, solve_enumeration, solve_evf, solve_structural
from semalloc.baselines import random_policy, trial_seeds
from semalloc.cli import main
from semalloc.recourse import demand_violations

from instances import random_instances

N_INSTANCES = 200
_audit: list = []


def _record(result, config):
    _audit.append((result, config))
    return result


@pytest.fixture(scope="module")
def instances():
    return random_instances(seed=20240601, count=N_INSTANCES)


@pytest.mark.criterion(1, "energy calibration 0.896 J vs 111 J")
def test_energy_calibration(tmp_path, data_dir):
    out = tmp_path / "metrics.json"
    t0 = time.perf_counter()
    status = main(["metrics", "--config", str(data_dir / "reference.json"), "--output", str(out)])
    elapsed = time.perf_counter() - t0
    assert status == 0
    text = out.read_text()
    pair = json.loads(text)["transmissions"][0]
    assert '"semantic_joules": 0.896000000' in text
    assert '"raw_joules": 111.000000000' in text
    assert pair["semantic_joules"] == 0.896
    assert pair["raw_joules"] == 111.0
    assert pair["raw_to_semantic_ratio"] == pytest.approx(123.88, abs=5e-3)
    print(f"semantic={pair['semantic_joules']} raw={pair['raw_joules']} "
          f"ratio={pair['raw_to_semantic_ratio']:.4f} t={elapsed:.4f}s")
    assert elapsed < 0.1


@pytest.mark.criterion(2, "structural and enumeration solvers agree")
def test_solver_equivalence(instances):
    t0 = time.perf_counter()
    mismatches = []
    for i, cfg in enumerate(instances):
        fast = _record(solve_structural(cfg), cfg)
        ref = _record(solve_enumeration(cfg), cfg)
        scale = max(1.0, abs(ref.expected_cost))
        if abs(fast.expected_cost - ref.expected_cost) > 1e-9 * scale or fast.decision != ref.decision:
            mismatches.append(i)
    elapsed = time.perf_counter() - t0
    print(f"instances={len(instances)} mismatches={len(mismatches)} t={elapsed:.2f}s")
    assert not mismatches
    assert elapsed < 60


@pytest.mark.criterion(3, "value of the stochastic solution is nonnegative")
def test_vss_nonnegative(instances, two_point):
    worst = float("inf")
    for cfg in instances:
        sip = _record(solve_structural(cfg), cfg)
        evf = _record(evaluate_decision(solve_evf(cfg)[0], None, cfg), cfg)
        worst = min(worst, evf.expected_cost - sip.expected_cost)
    assert worst >= -1e-9

    sip = _record(solve_structural(two_point), two_point)
    evf = _record(evaluate_decision(solve_evf(two_point)[0], None, two_point), two_point)
    print(f"min gap={worst:.3g} two-point SIP={sip.expected_cost} EVF={evf.expected_cost}")
    assert sip.expected_cost == 25.0
    assert evf.expected_cost == 40.0
    assert evf.expected_cost - sip.expected_cost == 15.0
    assert compare(two_point, random_trials=10).vss == 15.0


@pytest.mark.criterion(4, "SIP <= EVF <= mean(random) on the two-VSP, three-device market")
def test_policy_ordering(singapore):
    assert singapore.n_vsps == 2 and singapore.n_devices == 3
    t0 = time.perf_counter()
    cmp = compare(singapore, random_trials=100, seed=0)
    elapsed = time.perf_counter() - t0
    sip = cmp.row("SIP").expected_total_cost
    evf = cmp.row("EVF").expected_total_cost
    rnd = cmp.row("random-mean").expected_total_cost
    print(f"SIP={sip:.3f} EVF={evf:.3f} random-mean={rnd:.3f} t={elapsed:.3f}s")
    assert sip <= evf <= rnd
    assert sip < rnd
    assert elapsed < 5
    for s in trial_seeds(0, 100):
        _record(evaluate_decision(random_policy(singapore, s), None, singapore), singapore)


@pytest.mark.criterion(5, "single-scenario instances have zero VSS")
def test_single_scenario_degeneracy(data_dir):
    configs = random_instances(seed=5, count=100, max_scenarios=1)
    configs += [load_config(data_dir / name) for name in ("single.json", "reference.json")]
    for cfg in configs:
        assert len(cfg.scenarios) == 1
        sip = _record(solve_structural(cfg), cfg)
        evf = _record(evaluate_decision(solve_evf(cfg)[0], None, cfg), cfg)
        assert sip.expected_cost == evf.expected_cost
        assert compare(cfg, random_trials=3).vss == 0.0


@pytest.mark.criterion(6, "every returned decision is feasible")
def test_feasibility_audit(instances, singapore, two_point):
    # also audit fresh results so this check stands on its own when run alone
    for cfg in list(instances[:50]) + [singapore, two_point]:
        _record(solve_structural(cfg), cfg)
        _record(evaluate_decision(random_policy(cfg, 1), None, cfg), cfg)
    violations = [(i, p) for i, (res, cfg) in enumerate(_audit) for p in demand_violations(res, cfg)]
    print(f"audited={len(_audit)} violations={len(violations)}")
    assert not violations


@pytest.mark.criterion(7, "repeated CLI runs are byte-identical")
def test_determinism(tmp_path, data_dir):
    runs = [
        ["solve", "--config", str(data_dir / "singapore.json")],
        ["solve", "--config", str(data_dir / "single.json"), "--solver", "enumeration"],
        ["compare", "--config", str(data_dir / "singapore.json"), "--seed", "3", "--random-trials", "50"],
        ["compare", "--config", str(data_dir / "singapore.json"), "--seed", "3", "--holdout", "40"],
        ["generate-scenarios", "--spec", str(data_dir / "twopoint.json"), "--seed", "9", "--count", "25"],
        ["metrics", "--config", str(data_dir / "reference.json")],
    ]
    for i, args in enumerate(runs):
        blobs = []
        for rep in range(3):
            out = tmp_path / f"run{i}_{rep}.json"
            assert main(args + ["--output", str(out)]) == 0
            files = sorted(tmp_path.glob(f"run{i}_{rep}.*"))
            blobs.append([f.read_bytes() for f in files])
        assert blobs[0] == blobs[1] == blobs[2], args
