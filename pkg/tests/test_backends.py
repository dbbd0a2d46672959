import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shotwise.backends import (
    Backend, ExecutionRequest, NoiseModel, QpuDescriptor, execute, fleet_from_config,
    fleet_to_config, noisy_distribution, readout_confusion, reseed_fleet,
)
from shotwise.circuits import BenchmarkSpec
from shotwise.presets import CALIBRATION_BENCHMARKS, STANDARD_FLEET
from shotwise.probdist import ProbDist, as_probs, hellinger, relative_frequencies

from conftest import random_dist


def qpu(lam=0.0, eta=0.0, bias="uniform", seed=1, **kw):
    return QpuDescriptor.from_dict({"id": kw.pop("id", "a"), "lambda": lam, "eta": eta,
                                    "bias": bias, "seed": seed, **kw})


# --- noise model -------------------------------------------------------------------------

def test_noiseless_is_identity():
    p = random_dist(np.random.default_rng(1), 3)
    assert np.array_equal(noisy_distribution(p, NoiseModel()).probs, p.probs)


def test_full_depolarizing_uniform():
    p = ProbDist.point_mass(3, 5)
    assert np.allclose(noisy_distribution(p, NoiseModel(1.0)).probs, 1 / 8, atol=1e-15)


def test_readout_flip_two_qubits():
    out = noisy_distribution(ProbDist.point_mass(2, 0), NoiseModel(0.0, readout_flip=0.1))
    assert np.allclose(out.probs, [0.81, 0.09, 0.09, 0.01], atol=1e-15)


def test_readout_flip_acts_per_qubit():
    # flipping only |100> with eta on qubit 0 moves mass to |000>
    p = readout_confusion(ProbDist.point_mass(3, 0b100).probs, 3, 0.2)
    assert p[0b100] == pytest.approx(0.8 ** 3)
    assert p[0b000] == pytest.approx(0.2 * 0.8 ** 2)
    assert p[0b010] == pytest.approx(0.8 * 0.2 ** 2)
    assert p[0b011] == pytest.approx(0.2 ** 3)


@given(st.floats(0, 1), st.floats(0, 0.5), st.integers(1, 4), st.integers(0, 2**32),
       st.sampled_from(["uniform", "random"]))
def test_noisy_output_normalized(lam, eta, q, seed, bias):
    p = random_dist(np.random.default_rng(seed), q)
    noise = NoiseModel(lam, bias, seed if bias == "random" else None, eta)
    assert abs(noisy_distribution(p, noise).probs.sum() - 1.0) < 1e-12


def test_random_bias_is_fixed_per_backend():
    ideal = ProbDist.point_mass(3, 0)
    a = noisy_distribution(ideal, NoiseModel(1.0, "random", 7))
    assert a == noisy_distribution(ideal, NoiseModel(1.0, "random", 7))
    assert a != noisy_distribution(ideal, NoiseModel(1.0, "random", 8))


def test_drift_clamped():
    noise = NoiseModel(0.2, drift=0.3)
    assert noise.effective_depolarizing(0) == 0.2
    assert noise.effective_depolarizing(2) == pytest.approx(0.8)
    assert noise.effective_depolarizing(5) == 1.0
    assert NoiseModel(0.2).effective_depolarizing(100) == 0.2


def test_invalid_noise():
    with pytest.raises(ValueError):
        NoiseModel(1.5)
    with pytest.raises(ValueError):
        NoiseModel(0.1, readout_flip=0.6)
    with pytest.raises(ValueError):
        NoiseModel(0.1, bias="gaussian")


# --- execution ---------------------------------------------------------------------------

def test_execute_examples():
    ideal = ProbDist.point_mass(2, 2)
    res = execute(qpu(), ExecutionRequest(ideal, 0, 0))
    assert res.counts.total == 0
    res = execute(qpu(), ExecutionRequest(ideal, 500, 0))
    assert res.counts.counts[2] == 500
    assert res.noisy_dist_used == ideal


def test_execute_deterministic_across_fleets():
    ideal = BenchmarkSpec("haar", 3, seed=1).ideal()
    fleet_a = fleet_from_config(STANDARD_FLEET)
    fleet_b = fleet_from_config(STANDARD_FLEET)
    for a, b in zip(fleet_a, fleet_b):
        ra = execute(a, ExecutionRequest(ideal, 300, 4))
        rb = execute(b, ExecutionRequest(ideal, 300, 4))
        assert ra.counts == rb.counts


def test_scheduling_independence():
    ideal = BenchmarkSpec("haar", 3, seed=2).ideal()
    fleet = fleet_from_config(STANDARD_FLEET)[:4]

    def run(order):
        out = {}
        for i in order:
            b = Backend(fleet[i])
            out[fleet[i].id] = [b.run(ideal, 100).counts for _ in range(3)]
        return out

    ref = run(range(4))
    for perm in itertools.permutations(range(4)):
        assert run(perm) == ref


def test_sequence_index_must_increase():
    b = Backend(qpu())
    ideal = ProbDist.point_mass(1, 0)
    b.run(ideal, 10)
    b.run(ideal, 10, sequence_index=5)
    with pytest.raises(ValueError):
        b.run(ideal, 10, sequence_index=5)
    with pytest.raises(ValueError):
        ExecutionRequest(ideal, -1, 0)


@given(st.integers(0, 2000), st.integers(0, 50))
def test_total_equals_shots(shots, index):
    res = execute(qpu(0.3, 0.05), ExecutionRequest(as_probs([0.1, 0.2, 0.3, 0.4]), shots, index))
    assert res.counts.total == shots == res.shots


def test_statistical_floor_noiseless():
    ideal = BenchmarkSpec("haar", 5, seed=0).ideal()
    res = execute(qpu(), ExecutionRequest(ideal, 10**5, 0))
    assert hellinger(relative_frequencies(res.counts), ideal) < 0.02


def test_distance_monotone_in_noise():
    ideal = BenchmarkSpec("ghz", 4).ideal()
    means = []
    for lam in (0.0, 0.1, 0.3):
        d = [hellinger(relative_frequencies(execute(qpu(lam, 0.01, seed=s),
                                                    ExecutionRequest(ideal, 1000, 0)).counts), ideal)
             for s in range(200)]
        means.append(np.mean(d))
    assert means[0] < means[1] < means[2]


# --- fleet config ------------------------------------------------------------------------

def test_standard_fleet():
    fleet = fleet_from_config(STANDARD_FLEET)
    assert len(fleet) == 7
    lams = [q.noise.depolarizing for q in fleet]
    assert sum(0.01 <= x <= 0.1 for x in lams) == 4
    assert sum(abs(x - 0.45) <= 0.05 for x in lams) == 3


def test_standard_fleet_unreliability_magnitudes():
    from shotwise.orchestrator import CalibrationConfig, run_calibration

    report = run_calibration(fleet_from_config(STANDARD_FLEET),
                             CalibrationConfig.from_dict({"benchmarks": CALIBRATION_BENCHMARKS}))
    for rec in report.backends:
        assert 1e-3 <= rec.record.u <= 0.1


def test_fleet_errors():
    with pytest.raises(ValueError):
        fleet_from_config([])
    with pytest.raises(ValueError, match="duplicate"):
        fleet_from_config([{"id": "a"}, {"id": "a"}])
    with pytest.raises(ValueError):
        fleet_from_config([{"id": "a", "lambda": 2.0}])
    with pytest.raises(ValueError):
        fleet_from_config([{"id": "a", "colour": "red"}])


def test_fleet_order_and_round_trip():
    fleet = fleet_from_config(STANDARD_FLEET)
    assert [q.id for q in fleet] == [e["id"] for e in STANDARD_FLEET]
    assert fleet_from_config(fleet_to_config(fleet)) == fleet


def test_seeded_random_shorthand():
    a = QpuDescriptor.from_dict({"id": "a", "bias": "seeded_random:42", "seed": 3})
    assert a.noise.bias == "random" and a.noise.bias_seed == 42


def test_reseed_changes_samples_not_device():
    fleet = fleet_from_config(STANDARD_FLEET)
    r1, r2 = reseed_fleet(fleet, 1), reseed_fleet(fleet, 2)
    assert [q.noise for q in r1] == [q.noise for q in fleet]
    assert all(a.rng_seed != b.rng_seed for a, b in zip(r1, r2))
    assert reseed_fleet(fleet, 1) == r1
