"""Experiment grids: single-backend baselines against every split/merge pair
over growing fleet subsets, with CSV/JSON output and aggregate statistics."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from shotwise.backends import QpuDescriptor, fleet_from_config, fleet_to_config, reseed_fleet
from shotwise.circuits import BenchmarkSpec
from shotwise.orchestrator import (
    CalibrationConfig, ProductionConfig, run_baseline, run_calibration, run_production,
)
from shotwise.policies import MERGE_POLICIES, SPLIT_POLICIES, PolicyChoice
from shotwise.probdist import hellinger
from shotwise.rng import make_rng, mix_seed

MAX_SUBSETS = 35
ROW_COLUMNS = ["circuit", "qubits", "subset_id", "subset_size", "split", "merge", "seed",
               "d_hellinger", "shots", "status"]
AGG_COLUMNS = ["circuit", "subset_size", "split", "merge", "count", "min", "max", "mean", "std"]
ALL_CIRCUITS = "ALL"
FULL_GRID = tuple((s, m) for s in SPLIT_POLICIES for m in MERGE_POLICIES)


@dataclass(frozen=True)
class ExperimentConfig:
    fleet: tuple[QpuDescriptor, ...]
    targets: tuple[BenchmarkSpec, ...]
    calibration: CalibrationConfig
    subset_sizes: tuple[int, ...] = (2, 3, 4, 5, 6, 7)
    policies: tuple[tuple[str, str], ...] = FULL_GRID
    repetitions: int = 5
    base_seed: int = 0
    budget: int = 4096
    epsilon: float = 1e-3
    gamma: float = 1.0
    baselines: bool = True
    max_subsets: int = MAX_SUBSETS

    def __post_init__(self):
        for name in ("fleet", "targets", "subset_sizes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "policies", tuple(tuple(p) for p in self.policies))
        if not self.targets:
            raise ValueError("experiment needs at least one target circuit")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.max_subsets < 1:
            raise ValueError("max_subsets must be >= 1")
        if any(not 1 <= n <= len(self.fleet) for n in self.subset_sizes):
            raise ValueError("subset sizes must lie in [1, fleet size]")
        for s, m in self.policies:
            PolicyChoice(s, m)

    @property
    def seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.repetitions)]

    def to_dict(self) -> dict:
        return {
            "fleet": fleet_to_config(list(self.fleet)),
            "targets": [t.to_dict() for t in self.targets],
            "calibration": self.calibration.to_dict(),
            "subset_sizes": list(self.subset_sizes),
            "policies": [list(p) for p in self.policies],
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
            "budget": self.budget,
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "baselines": self.baselines,
            "max_subsets": self.max_subsets,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"fleet", "targets", "calibration", "subset_sizes", "policies", "repetitions",
                 "base_seed", "budget", "epsilon", "gamma", "baselines", "max_subsets"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment fields {sorted(unknown)}")
        fleet = fleet_from_config(d.get("fleet", []))
        return cls(
            fleet=tuple(fleet),
            targets=tuple(BenchmarkSpec.from_dict(t) for t in d.get("targets", [])),
            calibration=CalibrationConfig.from_dict(d.get("calibration", {})),
            subset_sizes=tuple(d.get("subset_sizes", range(2, len(fleet) + 1))),
            policies=tuple(tuple(p) for p in d.get("policies", FULL_GRID)),
            repetitions=int(d.get("repetitions", 5)),
            base_seed=int(d.get("base_seed", 0)),
            budget=int(d.get("budget", 4096)),
            epsilon=float(d.get("epsilon", 1e-3)),
            gamma=float(d.get("gamma", 1.0)),
            baselines=bool(d.get("baselines", True)),
            max_subsets=int(d.get("max_subsets", MAX_SUBSETS)),
        )


@dataclass(frozen=True)
class ResultRow:
    circuit: str
    qubits: int
    subset_id: str
    subset_size: int
    split: str
    merge: str
    seed: int
    d_hellinger: float | None
    shots: int
    status: str = "ok"

    def sort_key(self):
        return (self.circuit, self.subset_size, self.subset_id, self.split, self.merge, self.seed)


@dataclass(frozen=True)
class AggregateRow:
    circuit: str
    subset_size: int
    split: str
    merge: str
    count: int
    min: float
    max: float
    mean: float
    std: float


def subsets_for_size(m: int, size: int, seed: int, limit: int = MAX_SUBSETS) -> list[tuple[int, ...]]:
    """All size-``size`` index subsets, or ``limit`` of them drawn with ``seed``."""
    if math.comb(m, size) <= limit:
        return list(itertools.combinations(range(m), size))
    rng = make_rng(mix_seed(seed, size))
    chosen: set[tuple[int, ...]] = set()
    while len(chosen) < limit:
        chosen.add(tuple(sorted(rng.choice(m, size, replace=False).tolist())))
    return sorted(chosen)


def run_baselines(fleet: Sequence[QpuDescriptor], target: BenchmarkSpec, budget: int,
                  seeds: Iterable[int], offset: int = 0) -> list[ResultRow]:
    """One row per (backend, seed) with the whole budget on that backend."""
    ideal = target.ideal()
    rows = []
    for seed in seeds:
        for qpu in reseed_fleet(list(fleet), seed):
            merged = run_baseline(qpu, ideal, budget, offset)
            rows.append(ResultRow(target.label, ideal.num_qubits, qpu.id, 1, "baseline",
                                  f"baseline:{qpu.id}", seed, hellinger(merged, ideal), budget))
    return rows


def _seed_rows(config: ExperimentConfig, seed: int) -> list[ResultRow]:
    """Everything for one seed: baselines and every target x subset x policy.

    Calibration results are cached per backend, so each backend runs the
    benchmark set once per seed however many subsets contain it.
    """
    fleet = reseed_fleet(list(config.fleet), seed)
    offset = len(config.calibration.benchmarks)
    cache: dict = {}
    calibrations: dict = {}
    rows: list[ResultRow] = []
    for target in config.targets:
        ideal = target.ideal()
        if config.baselines:
            rows += run_baselines(config.fleet, target, config.budget, [seed], offset)
        for size in config.subset_sizes:
            for subset in subsets_for_size(len(fleet), size, config.base_seed, config.max_subsets):
                members = [fleet[i] for i in subset]
                sid = "+".join(q.id for q in members)

                def failed(split, merge, exc):
                    return ResultRow(target.label, ideal.num_qubits, sid, size, split, merge,
                                     seed, None, 0, f"error: {exc}")

                try:
                    if subset not in calibrations:
                        calibrations[subset] = run_calibration(members, config.calibration, cache)
                    cal = calibrations[subset]
                except Exception as exc:  # recorded per cell, never dropped
                    rows += [failed(s, m, exc) for s, m in config.policies]
                    continue
                for split, merge in config.policies:
                    policy = PolicyChoice(split, merge, config.epsilon, config.gamma)
                    try:
                        rep = run_production(members, ProductionConfig(target, config.budget, 1, policy),
                                             cal, ideal)
                    except Exception as exc:
                        rows.append(failed(split, merge, exc))
                        continue
                    rows.append(ResultRow(target.label, ideal.num_qubits, sid, size, split, merge,
                                          seed, rep.d_hellinger, rep.shots_used))
    return rows


def _seed_job(args):
    config, seed = args
    return _seed_rows(config, seed)


def run_grid(config: ExperimentConfig, jobs: int = 1) -> list[ResultRow]:
    """Full grid, returned in a deterministic sorted order whatever ``jobs`` is."""
    if not config.targets:
        raise ValueError("experiment needs at least one target circuit")
    tasks = [(config, s) for s in config.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_seed_job, tasks))
    else:
        chunks = [_seed_job(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=ResultRow.sort_key)


def _group_merge(row: ResultRow) -> str:
    return "baseline" if row.merge.startswith("baseline") else row.merge


def aggregate(rows: Sequence[ResultRow], per_circuit: bool = True,
              across_circuits: bool = True) -> list[AggregateRow]:
    """min/max/mean/sample-std of d_H per (circuit, subset size, split, merge).

    Baselines of all backends pool into one ``baseline`` group of size 1. The
    across-circuit grouping uses the circuit label ``ALL``.
    """
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        if r.status != "ok" or r.d_hellinger is None:
            continue
        keys = []
        if per_circuit:
            keys.append((r.circuit, r.subset_size, r.split, _group_merge(r)))
        if across_circuits:
            keys.append((ALL_CIRCUITS, r.subset_size, r.split, _group_merge(r)))
        for k in keys:
            groups.setdefault(k, []).append(r.d_hellinger)
    out = []
    for key in sorted(groups):
        v = np.asarray(groups[key])
        std = float(v.std(ddof=1)) if v.size > 1 else 0.0
        out.append(AggregateRow(*key, int(v.size), float(v.min()), float(v.max()),
                                float(v.mean()), std))
    return out


# --- output ---------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_COLUMNS)
    for r in sorted(rows, key=ResultRow.sort_key):
        writer.writerow([_fmt(getattr(r, c)) for c in ROW_COLUMNS])
    return buf.getvalue()


def aggregates_to_csv(aggs: Sequence[AggregateRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGG_COLUMNS)
    for a in aggs:
        writer.writerow([_fmt(getattr(a, c)) for c in AGG_COLUMNS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ResultRow]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append(ResultRow(rec["circuit"], int(rec["qubits"]), rec["subset_id"],
                             int(rec["subset_size"]), rec["split"], rec["merge"], int(rec["seed"]),
                             float(rec["d_hellinger"]) if rec["d_hellinger"] else None,
                             int(rec["shots"]), rec["status"]))
    return out


def rows_to_json(rows: Sequence[ResultRow]) -> str:
    return json.dumps([asdict(r) for r in sorted(rows, key=ResultRow.sort_key)], indent=1) + "\n"


def rows_from_json(text: str) -> list[ResultRow]:
    return [ResultRow(**rec) for rec in json.loads(text)]


def emit(items, path: str | Path, fmt: str = "csv") -> Path:
    """Write rows or aggregates as CSV or JSON (sorted, fixed column order)."""
    path = Path(path)
    items = list(items)
    is_agg = bool(items) and isinstance(items[0], AggregateRow)
    if fmt == "csv":
        text = aggregates_to_csv(items) if is_agg else rows_to_csv(items)
    elif fmt == "json":
        text = (json.dumps([asdict(a) for a in items], indent=1) + "\n") if is_agg else rows_to_json(items)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path.write_text(text, encoding="utf-8")
    return path
