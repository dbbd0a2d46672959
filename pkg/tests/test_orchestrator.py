import json

import numpy as np
import pytest

from shotwise.backends import Backend, fleet_from_config
from shotwise.circuits import BenchmarkSpec
from shotwise.orchestrator import (
    CalibrationConfig, CalibrationMismatch, CalibrationReport, ProductionConfig, StopPolicy,
    evaluate, initial_split_weights, iteration_schedule, merged_precision, run_baseline,
    run_calibration, run_production,
)
from shotwise.policies import PolicyChoice, merge_uniform
from shotwise.presets import CALIBRATION_BENCHMARKS, STANDARD_FLEET
from shotwise.probdist import ProbDist, as_probs, relative_frequencies, sum_counts

HAAR10 = CalibrationConfig.from_dict({"benchmarks": CALIBRATION_BENCHMARKS, "shots": 1000})
GHZ5 = BenchmarkSpec("ghz", 5)


def fleet(*lams, eta=0.0, bias="uniform"):
    return fleet_from_config([{"id": f"q{i}", "lambda": lam, "eta": eta, "bias": bias, "seed": 100 + i}
                              for i, lam in enumerate(lams)])


@pytest.fixture(scope="module")
def standard():
    f = fleet_from_config(STANDARD_FLEET)
    return f, run_calibration(f, HAAR10)


# --- calibration -------------------------------------------------------------------------

def test_noiseless_calibration():
    cfg = CalibrationConfig((GHZ5,), shots=4000)
    rep = run_calibration(fleet(0.0), cfg)
    rec = rep.backends[0].record
    assert abs(rec.u) <= max(3 * rec.std_error, 1e-3)


def test_calibration_ranking_and_records(standard):
    f, rep = standard
    assert len(rep.backends) == 7
    u = rep.unreliability
    assert rep.ranking == sorted(u, key=lambda q: u[q])
    assert sorted(rep.ranking) == sorted(q.id for q in f)
    assert all(len(b.counts) == 10 and all(c.total == 1000 for c in b.counts) for b in rep.backends)
    assert rep.mise is not None and abs(rep.mise.weights.sum() - 1) < 1e-9


def test_calibration_ranks_low_noise_first():
    wins = 0
    for seed in range(20):
        f = fleet_from_config([{"id": "good", "lambda": 0.05, "seed": 2 * seed},
                               {"id": "bad", "lambda": 0.4, "seed": 2 * seed + 1}])
        wins += run_calibration(f, CalibrationConfig(HAAR10.benchmarks, 4000)).ranking[0] == "good"
    assert wins >= 19


def test_calibration_config_errors():
    with pytest.raises(ValueError):
        CalibrationConfig(())
    with pytest.raises(ValueError):
        CalibrationConfig((GHZ5,), shots=1)
    with pytest.raises(ValueError):
        run_calibration([], HAAR10)


def test_calibration_report_round_trip(standard):
    _, rep = standard
    back = CalibrationReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back.to_dict() == rep.to_dict()
    with pytest.raises(ValueError):
        CalibrationReport.from_dict({"schema": "other"})


def test_calibration_cache_reuses_backend_runs():
    f = fleet(0.05, 0.2, 0.3)
    cache = {}
    full = run_calibration(f, HAAR10, cache)
    sub = run_calibration(f[:2], HAAR10, cache)
    assert len(cache) == 3
    assert sub.backends[0] == full.backends[0]
    assert sub.to_dict()["backends"] == run_calibration(f[:2], HAAR10).to_dict()["backends"]


# --- initial weights ---------------------------------------------------------------------

def test_initial_weights(standard):
    _, rep = standard
    ids = rep.qpu_ids
    assert np.allclose(initial_split_weights(rep, PolicyChoice("uniform"), ids), 1 / 7)
    w = initial_split_weights(rep, PolicyChoice("hellinger"), ids)
    assert np.argmax(w) == ids.index(rep.ranking[0])
    w = initial_split_weights(rep, PolicyChoice("mise"), ids)
    assert all(w[ids.index(q)] == 0 for q in rep.mise.excluded)
    single = run_calibration(fleet(0.1), HAAR10)
    assert list(initial_split_weights(single, PolicyChoice("mise"))) == [1.0]


# --- production --------------------------------------------------------------------------

def test_uniform_production_m4():
    f = fleet(0.0, 0.1, 0.2, 0.3)
    rep = run_production(f, ProductionConfig(GHZ5, 4096, 1, PolicyChoice()))
    it = rep.iterations[0]
    assert list(it.allocation) == [1024] * 4
    assert rep.final == relative_frequencies(sum_counts(r.counts for r in it.results))
    assert len(rep.iterations) == 1 and rep.stop_reason == "completed"


def test_single_backend_equals_baseline(standard):
    f, rep_cal = standard
    ideal = GHZ5.ideal()
    for split in ("uniform", "hellinger", "mise"):
        for merge in ("uniform", "hellinger", "mise"):
            one = [f[2]]
            cal = run_calibration(one, HAAR10)
            rep = run_production(one, ProductionConfig(GHZ5, 3000, 1, PolicyChoice(split, merge)), cal)
            base = run_baseline(f[2], ideal, 3000, len(HAAR10.benchmarks))
            direct = Backend(f[2], last_index=9).run(ideal, 3000)
            assert rep.final == base == relative_frequencies(direct.counts)


@pytest.mark.parametrize("split", ["uniform", "hellinger", "mise"])
@pytest.mark.parametrize("merge", ["uniform", "hellinger", "mise"])
def test_budget_conservation(standard, split, merge):
    f, cal = standard
    for iters in (1, 3, 7):
        rep = run_production(f, ProductionConfig(GHZ5, 4099, iters, PolicyChoice(split, merge)), cal)
        assert rep.shots_used == 4099
        assert rep.stop_reason == "completed"
        assert len(rep.iterations) == iters


def test_iteration_schedule():
    assert iteration_schedule(10, 3) == [3, 3, 4]
    assert iteration_schedule(4096, 1) == [4096]
    with pytest.raises(ValueError):
        ProductionConfig(GHZ5, budget=2, iterations=3)
    with pytest.raises(ValueError):
        ProductionConfig(GHZ5, budget=0)


def test_production_deterministic(standard):
    f, cal = standard
    cfg = ProductionConfig(GHZ5, 2048, 3, PolicyChoice("hellinger", "hellinger"))
    a = run_production(f, cfg, cal).to_dict()
    b = run_production(f, cfg, cal).to_dict()
    assert json.dumps(a) == json.dumps(b)


def test_hellinger_weights_update_between_iterations(standard):
    f, cal = standard
    rep = run_production(f, ProductionConfig(GHZ5, 3000, 3, PolicyChoice("hellinger", "uniform")), cal)
    assert not np.array_equal(rep.iterations[0].weights, rep.iterations[1].weights)
    single = run_production(f, ProductionConfig(GHZ5, 3000, 1, PolicyChoice("hellinger", "uniform")), cal)
    assert np.array_equal(single.iterations[0].weights, rep.iterations[0].weights)


def test_multi_iteration_mise_warns(standard):
    f, cal = standard
    rep = run_production(f, ProductionConfig(GHZ5, 3000, 3, PolicyChoice("mise", "mise")), cal)
    assert any("reuses calibration weights" in w for w in rep.warnings)
    assert all(np.array_equal(it.weights, rep.iterations[0].weights) for it in rep.iterations)


def test_precision_stop_fires():
    stopped = 0
    for seed in range(20):
        f = fleet_from_config([{"id": "a", "lambda": 0.01, "seed": seed}])
        cfg = ProductionConfig(BenchmarkSpec("ghz", 2), 20000, 10, PolicyChoice(),
                               StopPolicy("precision_threshold", 0.05))
        rep = run_production(f, cfg)
        stopped += rep.stop_reason == "precision_reached"
        assert rep.shots_used <= 20000
    assert stopped >= 1


def test_stop_policy_validation():
    with pytest.raises(ValueError):
        StopPolicy("precision_threshold")
    with pytest.raises(ValueError):
        StopPolicy("whenever")
    assert merged_precision(as_probs([0.5, 0.5]), 1) == float("inf")


def test_calibration_mismatch(standard):
    f, cal = standard
    other = fleet(0.1, 0.2)
    with pytest.raises(CalibrationMismatch):
        run_production(other, ProductionConfig(GHZ5, 100, 1, PolicyChoice("hellinger")), cal)
    with pytest.raises(CalibrationMismatch):
        run_production(f[:3], ProductionConfig(GHZ5, 100, 1, PolicyChoice("mise", "mise")), cal)
    with pytest.raises(CalibrationMismatch):
        run_production(f, ProductionConfig(GHZ5, 100, 1, PolicyChoice("hellinger")))
    # hellinger weights only need per-backend data, so a sub-fleet is fine
    run_production(f[:3], ProductionConfig(GHZ5, 100, 1, PolicyChoice("hellinger", "hellinger")), cal)


def test_excluded_backends_listed_with_zero_shots(standard):
    f, cal = standard
    rep = run_production(f, ProductionConfig(GHZ5, 4096, 1, PolicyChoice("mise", "mise")), cal)
    assert rep.qpu_ids == [q.id for q in f]
    alloc = dict(zip(rep.qpu_ids, rep.iterations[0].allocation))
    assert cal.mise.excluded and all(alloc[q] == 0 for q in cal.mise.excluded)


def test_hellinger_merge_reports_raw_mass(standard):
    f, cal = standard
    rep = run_production(f, ProductionConfig(GHZ5, 4096, 1, PolicyChoice("uniform", "hellinger")), cal)
    assert 0 < rep.iterations[0].raw_mass <= 1


def test_evaluate():
    p = as_probs([0.5, 0.5])
    assert evaluate(p, p)["d_hellinger"] == 0.0
    assert evaluate(as_probs([1, 0]), as_probs([0, 1]))["d_hellinger"] == 1.0
    assert evaluate(p, as_probs([1, 0]))["d_hellinger"] == pytest.approx(0.541196, abs=1e-6)


def test_production_report_json(standard):
    f, cal = standard
    rep = run_production(f, ProductionConfig(GHZ5, 500, 2, PolicyChoice("hellinger", "mise")), cal)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["schema"] == "shotwise.production/1"
    assert d["shots_used"] == 500
    assert ProbDist.from_dict(d["final"]) == rep.final
    assert sum(sum(it["allocation"]) for it in d["iterations"]) == 500


def test_baseline_uses_merge_uniform():
    f = fleet(0.2)
    ideal = GHZ5.ideal()
    res = Backend(f[0], last_index=4).run(ideal, 777)
    assert run_baseline(f[0], ideal, 777, 5) == merge_uniform([res])
