import csv
import io
import math

import numpy as np
import pytest

from shotwise.backends import fleet_from_config
from shotwise.circuits import BenchmarkSpec
from shotwise.harness import (
    AGG_COLUMNS, ALL_CIRCUITS, ROW_COLUMNS, ExperimentConfig, ResultRow, aggregate, emit,
    rows_from_csv, rows_from_json, rows_to_csv, rows_to_json, run_baselines, run_grid,
    subsets_for_size,
)
from shotwise.presets import PAPER_DESK

SMALL = {
    "fleet": [{"id": "a", "lambda": 0.02, "seed": 1},
              {"id": "b", "lambda": 0.2, "bias": "random", "bias_seed": 5, "seed": 2},
              {"id": "c", "lambda": 0.4, "eta": 0.02, "seed": 3}],
    "calibration": {"benchmarks": [{"kind": "haar", "qubits": 3, "seed": s} for s in range(3)],
                    "shots": 200},
    "targets": [{"kind": "ghz", "qubits": 3}],
    "subset_sizes": [2, 3],
    "repetitions": 5,
    "base_seed": 10,
    "budget": 512,
}


def config(**overrides):
    return ExperimentConfig.from_dict({**SMALL, **overrides})


@pytest.fixture(scope="module")
def small_rows():
    return run_grid(config())


# --- baselines ---------------------------------------------------------------------------

def test_baseline_noiseless_floor():
    f = fleet_from_config([{"id": "clean", "lambda": 0.0, "seed": 4}])
    assert run_baselines(f, BenchmarkSpec("ghz", 5), 4096, [0])[0].d_hellinger < 0.02
    # spread-out ideal: E[d^2] ~ (K - 1) / (8 n) for K populated outcomes
    d = [r.d_hellinger for r in run_baselines(f, BenchmarkSpec("haar", 5, seed=3), 4096, range(20))]
    assert np.mean(np.square(d)) == pytest.approx(31 / (8 * 4096), rel=0.25)


def test_baseline_fully_depolarized_ghz():
    f = fleet_from_config([{"id": "dead", "lambda": 1.0, "seed": 4}])
    d = [r.d_hellinger for r in run_baselines(f, BenchmarkSpec("ghz", 5), 4096, range(20))]
    assert np.mean(d) == pytest.approx(math.sqrt(1 - 2 * math.sqrt(1 / 64)), abs=0.01)


def test_baseline_one_row_per_backend():
    f = fleet_from_config(PAPER_DESK["fleet"])
    rows = run_baselines(f, BenchmarkSpec("ghz", 3), 100, [7])
    assert len(rows) == 7
    assert {r.merge for r in rows} == {f"baseline:{q.id}" for q in f}


# --- grid --------------------------------------------------------------------------------

def test_grid_cardinality_one_subset_per_size():
    rows = run_grid(config(max_subsets=1))
    policy = [r for r in rows if r.split != "baseline"]
    assert len(policy) == 2 * 9 * 5
    assert len(rows) - len(policy) == 3 * 5


def test_grid_cardinality_all_subsets(small_rows):
    policy = [r for r in small_rows if r.split != "baseline"]
    assert len(policy) == (3 + 1) * 9 * 5
    assert all(r.status == "ok" for r in small_rows)


def test_grid_deterministic(small_rows):
    assert rows_to_csv(run_grid(config())) == rows_to_csv(small_rows)


def test_grid_parallel_matches_serial(small_rows):
    assert rows_to_csv(run_grid(config(), jobs=2)) == rows_to_csv(small_rows)


def test_grid_seed_changes_values_not_shape(small_rows):
    other = run_grid(config(base_seed=11))
    assert len(other) == len(small_rows)
    assert [r.d_hellinger for r in other] != [r.d_hellinger for r in small_rows]


def test_grid_budget_conserved(small_rows):
    assert all(r.shots == 512 for r in small_rows if r.status == "ok")
    assert all(0 <= r.d_hellinger <= 1 for r in small_rows)


def test_grid_errors():
    with pytest.raises(ValueError):
        config(targets=[])
    with pytest.raises(ValueError):
        config(subset_sizes=[4])
    with pytest.raises(ValueError):
        config(repetitions=0)
    with pytest.raises(ValueError):
        config(policies=[["mise", "median"]])
    with pytest.raises(ValueError):
        config(colour="red")


def test_failed_cells_are_recorded(monkeypatch):
    import shotwise.harness as harness

    def broken(*args, **kwargs):
        raise RuntimeError("backend offline")

    monkeypatch.setattr(harness, "run_production", broken)
    rows = run_grid(config(repetitions=1, subset_sizes=[2]))
    failed = [r for r in rows if r.split != "baseline"]
    assert failed and all(r.status.startswith("error: backend offline") for r in failed)
    assert all(r.d_hellinger is None for r in failed)


def test_subsets_enumerate_or_sample():
    assert subsets_for_size(4, 2, seed=0) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    sampled = subsets_for_size(10, 4, seed=3)
    assert len(sampled) == 35 and len(set(sampled)) == 35
    assert sampled == subsets_for_size(10, 4, seed=3)
    assert len(subsets_for_size(7, 3, seed=0)) == 35


def test_config_round_trip():
    cfg = ExperimentConfig.from_dict(PAPER_DESK)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.seeds == [2024, 2025, 2026, 2027, 2028]


# --- aggregation -------------------------------------------------------------------------

def row(d, circuit="c", size=2, split="mise", merge="mise", seed=0, status="ok"):
    return ResultRow(circuit, 3, "x", size, split, merge, seed, d, 100, status)


def test_aggregate_examples():
    single = aggregate([row(0.2)], across_circuits=False)
    assert len(single) == 1
    a = single[0]
    assert a.min == a.max == a.mean == 0.2 and a.std == 0.0
    a = aggregate([row(0.1), row(0.3, seed=1)], across_circuits=False)[0]
    assert a.mean == pytest.approx(0.2) and a.std == pytest.approx(0.141421, abs=1e-6)
    assert aggregate([row(None, status="error: x")]) == []


def test_aggregate_groupings():
    rows = [row(0.1, circuit="g"), row(0.3, circuit="h"),
            row(0.5, split="baseline", merge="baseline:a", size=1),
            row(0.7, split="baseline", merge="baseline:b", size=1)]
    aggs = aggregate(rows)
    keys = {(a.circuit, a.subset_size, a.split, a.merge) for a in aggs}
    assert (ALL_CIRCUITS, 2, "mise", "mise") in keys
    assert ("c", 1, "baseline", "baseline") in keys
    pooled = next(a for a in aggs if a.circuit == ALL_CIRCUITS and a.split == "mise")
    assert pooled.count == 2 and pooled.mean == pytest.approx(0.2)
    assert all(a.min <= a.mean <= a.max and a.std >= 0 for a in aggs)


# --- output ------------------------------------------------------------------------------

def test_emit_empty_csv(tmp_path):
    path = emit([], tmp_path / "rows.csv")
    assert path.read_text() == ",".join(ROW_COLUMNS) + "\n"


def test_csv_fields_constant_and_round_trip(small_rows, tmp_path):
    text = rows_to_csv(small_rows)
    records = list(csv.reader(io.StringIO(text)))
    assert records[0] == ROW_COLUMNS
    assert {len(r) for r in records} == {len(ROW_COLUMNS)}
    assert rows_from_csv(text) == sorted(small_rows, key=ResultRow.sort_key)


def test_json_round_trip(small_rows, tmp_path):
    text = rows_to_json(small_rows)
    assert rows_to_json(rows_from_json(text)) == text
    path = emit(small_rows, tmp_path / "rows.json", fmt="json")
    assert path.read_text() == text


def test_aggregate_csv(small_rows, tmp_path):
    path = emit(aggregate(small_rows), tmp_path / "agg.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(AGG_COLUMNS)
    with pytest.raises(ValueError):
        emit(small_rows, tmp_path / "x", fmt="xml")
