"""Calibration, ranking and the production split/execute/merge loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from shotwise.backends import Backend, ExecutionResult, QpuDescriptor
from shotwise.circuits import BenchmarkSpec
from shotwise.estimators import (
    DistanceEstimate, UnreliabilityRecord, hellinger_jackknife_corrected,
    unreliability_from_distances,
)
from shotwise.policies import (
    MiseSolution, NoConvexSolution, PolicyChoice, allocate_shots, debiased_merge,
    hellinger_combine, merge_hellinger, merge_uniform, mise_merge, mise_split_allocation,
    mise_weights_calibration, noisy_variance, weights_from_unreliability, weights_uniform,
)
from shotwise.probdist import Counts, ProbDist, hellinger, bhattacharyya_angle, sum_counts

log = logging.getLogger(__name__)

CALIBRATION_SCHEMA = "shotwise.calibration/1"
PRODUCTION_SCHEMA = "shotwise.production/1"


class CalibrationMismatch(ValueError):
    pass


# --- calibration -------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationConfig:
    benchmarks: tuple[BenchmarkSpec, ...]
    shots: int = 1000
    allocation: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "benchmarks", tuple(self.benchmarks))
        if not self.benchmarks:
            raise ValueError("calibration needs at least one benchmark")
        if self.shots < 2:
            raise ValueError("calibration needs at least 2 shots per circuit")
        if self.allocation != "uniform":
            raise ValueError(f"unsupported prior allocation {self.allocation!r}")

    def to_dict(self) -> dict:
        return {"benchmarks": [b.to_dict() for b in self.benchmarks], "shots": self.shots,
                "allocation": self.allocation}

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationConfig":
        return cls(tuple(BenchmarkSpec.from_dict(b) for b in d.get("benchmarks", [])),
                   int(d.get("shots", 1000)), d.get("allocation", "uniform"))


@dataclass(frozen=True)
class BackendCalibration:
    """Per-backend calibration data; independent of which other backends are present."""

    qpu_id: str
    counts: tuple[Counts, ...]
    distances: tuple[DistanceEstimate, ...]
    record: UnreliabilityRecord
    noisy_variance: float


@dataclass
class CalibrationReport:
    qpu_ids: list[str]
    benchmarks: list[str]
    shots: int
    backends: list[BackendCalibration]
    ranking: list[str]
    mise: MiseSolution | None
    mise_fallback: bool = False
    warnings: list[str] = field(default_factory=list)
    timestamp: str | None = None

    @property
    def unreliability(self) -> dict[str, float]:
        return {b.qpu_id: b.record.u for b in self.backends}

    def u_vector(self, ids: Sequence[str]) -> np.ndarray:
        u = self.unreliability
        return np.array([u[i] for i in ids])

    def variance_vector(self, ids: Sequence[str]) -> np.ndarray:
        v = {b.qpu_id: b.noisy_variance for b in self.backends}
        return np.array([v[i] for i in ids])

    @property
    def num_circuits(self) -> int:
        return len(self.benchmarks)

    def to_dict(self) -> dict:
        return {
            "schema": CALIBRATION_SCHEMA,
            "qpu_ids": list(self.qpu_ids),
            "benchmarks": list(self.benchmarks),
            "shots": self.shots,
            "backends": [{
                "qpu_id": b.qpu_id,
                "counts": [c.to_dict() for c in b.counts],
                "distances": [d.to_dict() for d in b.distances],
                "unreliability": b.record.to_dict(),
                "noisy_variance": b.noisy_variance,
            } for b in self.backends],
            "ranking": list(self.ranking),
            "mise": None if self.mise is None else self.mise.to_dict(),
            "mise_fallback": self.mise_fallback,
            "warnings": list(self.warnings),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationReport":
        if d.get("schema") != CALIBRATION_SCHEMA:
            raise ValueError(f"not a calibration report (schema {d.get('schema')!r})")
        backends = [BackendCalibration(
            b["qpu_id"],
            tuple(Counts.from_dict(c) for c in b["counts"]),
            tuple(DistanceEstimate.from_dict(x) for x in b["distances"]),
            UnreliabilityRecord.from_dict(b["unreliability"]),
            float(b["noisy_variance"]),
        ) for b in d["backends"]]
        return cls(list(d["qpu_ids"]), list(d["benchmarks"]), int(d["shots"]), backends,
                   list(d["ranking"]), None if d.get("mise") is None else MiseSolution.from_dict(d["mise"]),
                   bool(d.get("mise_fallback", False)), list(d.get("warnings", [])), d.get("timestamp"))


def calibrate_backend(qpu: QpuDescriptor, ideals: Sequence[ProbDist], shots: int) -> BackendCalibration:
    """Run every benchmark once on ``qpu``; circuit ``c`` uses sequence index ``c``."""
    backend = Backend(qpu)
    counts, dists, var = [], [], []
    for ideal in ideals:
        res = backend.run(ideal, shots)
        counts.append(res.counts)
        dists.append(hellinger_jackknife_corrected(res.counts, ideal))
        var.append(noisy_variance(res.counts.counts / res.counts.total))
    record = unreliability_from_distances(qpu.id, [d.value for d in dists])
    return BackendCalibration(qpu.id, tuple(counts), tuple(dists), record, float(np.mean(var)))


def assemble_calibration(backends: Sequence[BackendCalibration], ideals: Sequence[ProbDist],
                         labels: Sequence[str], shots: int) -> CalibrationReport:
    ids = [b.qpu_id for b in backends]
    ranking = [ids[i] for i in sorted(range(len(ids)), key=lambda i: (backends[i].record.u, i))]
    warnings: list[str] = []
    fallback = False
    try:
        mise = mise_weights_calibration([b.counts for b in backends], ideals, ids)
    except (NoConvexSolution, ValueError) as exc:
        warnings.append(f"MISE calibration failed ({exc}); using uniform weights")
        log.warning(warnings[-1])
        fallback = True
        m = len(ids)
        mise = MiseSolution(tuple(ids), weights_uniform(m), 0.0, (), np.zeros((m, m)),
                            np.zeros(m), float("nan"))
    return CalibrationReport(ids, list(labels), shots, list(backends), ranking, mise, fallback, warnings)


def run_calibration(fleet: Sequence[QpuDescriptor], config: CalibrationConfig,
                    cache: dict | None = None) -> CalibrationReport:
    """Execute every benchmark on every backend, then rank and solve for MISE weights.

    ``cache`` (optional) memoizes per-backend results across calls that share
    benchmarks and shots, e.g. different subsets of one fleet.
    """
    if not fleet:
        raise ValueError("empty fleet")
    ideals = [b.ideal() for b in config.benchmarks]
    labels = [b.label for b in config.benchmarks]
    per_backend = []
    for qpu in fleet:
        key = (qpu, tuple(config.benchmarks), config.shots)
        if cache is not None and key in cache:
            cal = cache[key]
        else:
            cal = calibrate_backend(qpu, ideals, config.shots)
            if cache is not None:
                cache[key] = cal
        per_backend.append(cal)
    return assemble_calibration(per_backend, ideals, labels, config.shots)


# --- production ----------------------------------------------------------------

STOP_KINDS = ("budget_exhausted", "max_iterations", "precision_threshold")


@dataclass(frozen=True)
class StopPolicy:
    kind: str = "budget_exhausted"
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in STOP_KINDS:
            raise ValueError(f"unknown stop policy {self.kind!r}")
        if self.kind == "precision_threshold" and not (self.tau is not None and self.tau > 0):
            raise ValueError("precision_threshold needs tau > 0")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.tau is not None:
            d["tau"] = self.tau
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StopPolicy":
        return cls(d.get("kind", "budget_exhausted"), d.get("tau"))


@dataclass(frozen=True)
class ProductionConfig:
    target: BenchmarkSpec
    budget: int = 4096
    iterations: int = 1
    policy: PolicyChoice = PolicyChoice()
    stop: StopPolicy = StopPolicy()
    bootstrap_seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.budget < self.iterations:
            raise ValueError("budget must cover at least one shot per iteration")

    def to_dict(self) -> dict:
        return {"target": self.target.to_dict(), "budget": self.budget,
                "iterations": self.iterations, "policy": self.policy.to_dict(),
                "stop": self.stop.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ProductionConfig":
        if "target" not in d:
            raise ValueError("production config needs a 'target'")
        return cls(BenchmarkSpec.from_dict(d["target"]), int(d.get("budget", 4096)),
                   int(d.get("iterations", 1)), PolicyChoice.from_dict(d.get("policy", {})),
                   StopPolicy.from_dict(d.get("stop", {})))


@dataclass
class IterationRecord:
    index: int
    weights: np.ndarray
    allocation: np.ndarray
    results: list[ExecutionResult]
    merged: ProbDist
    d_hellinger: float | None
    raw_mass: float | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "weights": self.weights.tolist(),
            "allocation": self.allocation.tolist(),
            "results": [r.to_dict() for r in self.results],
            "merged": self.merged.to_dict(),
            "d_hellinger": self.d_hellinger,
            "raw_mass": self.raw_mass,
        }


@dataclass
class ProductionReport:
    qpu_ids: list[str]
    target: str
    budget: int
    policy: PolicyChoice
    iterations: list[IterationRecord]
    final: ProbDist
    stop_reason: str
    warnings: list[str] = field(default_factory=list)

    @property
    def shots_used(self) -> int:
        return int(sum(int(it.allocation.sum()) for it in self.iterations))

    @property
    def d_hellinger(self) -> float | None:
        return self.iterations[-1].d_hellinger

    def to_dict(self) -> dict:
        return {
            "schema": PRODUCTION_SCHEMA,
            "qpu_ids": list(self.qpu_ids),
            "target": self.target,
            "budget": self.budget,
            "policy": self.policy.to_dict(),
            "iterations": [it.to_dict() for it in self.iterations],
            "final": self.final.to_dict(),
            "d_hellinger": self.d_hellinger,
            "shots_used": self.shots_used,
            "stop_reason": self.stop_reason,
            "warnings": list(self.warnings),
        }


def evaluate(merged: ProbDist, ideal: ProbDist) -> dict:
    return {"d_hellinger": hellinger(merged, ideal),
            "bhattacharyya_angle": bhattacharyya_angle(merged, ideal)}


def check_coverage(ids: Sequence[str], calibration: CalibrationReport | None,
                    policy: PolicyChoice):
    needs = policy.split != "uniform" or policy.merge in ("hellinger", "mise")
    if calibration is None:
        if needs:
            raise CalibrationMismatch("this policy needs a calibration report")
        return
    missing = [i for i in ids if i not in calibration.qpu_ids]
    if missing:
        raise CalibrationMismatch(f"calibration does not cover backends {missing}")
    if policy.split == "mise" or policy.merge == "mise":
        if calibration.mise is None or set(calibration.mise.qpu_ids) != set(ids):
            raise CalibrationMismatch("MISE solution was computed for a different fleet")


def initial_split_weights(calibration: CalibrationReport | None, policy: PolicyChoice,
                          ids: Sequence[str] | None = None) -> np.ndarray:
    if ids is None:
        ids = calibration.qpu_ids
    if policy.split == "uniform":
        return weights_uniform(len(ids))
    if policy.split == "hellinger":
        return weights_from_unreliability(calibration.u_vector(ids), policy.epsilon, policy.gamma)
    return calibration.mise.weights_for(ids)


def merge_weights(calibration: CalibrationReport | None, policy: PolicyChoice,
                  ids: Sequence[str]) -> np.ndarray | None:
    if policy.merge == "uniform":
        return None
    if policy.merge == "hellinger":
        return weights_from_unreliability(calibration.u_vector(ids), policy.epsilon, policy.gamma)
    return calibration.mise.weights_for(ids)


def iteration_schedule(budget: int, iterations: int) -> list[int]:
    base = budget // iterations
    sched = [base] * iterations
    sched[-1] += budget - base * iterations
    return sched


def _merge(results: list[ExecutionResult], policy: PolicyChoice, w, seed: int):
    if policy.merge == "uniform":
        return merge_uniform(results), None
    live = [r for r, wi in zip(results, w) if r.counts.total > 0 and wi > 0]
    if len(live) == 1:
        return merge_uniform(live), 1.0
    if policy.debias_merge:
        return debiased_merge(results, w, policy.merge, seed=seed), None
    if policy.merge == "hellinger":
        p_hat = np.stack([r.counts.counts / r.counts.total for r in live])
        wl = np.array([wi for r, wi in zip(results, w) if r.counts.total > 0 and wi > 0])
        _, mass = hellinger_combine(p_hat, wl / wl.sum())
        return merge_hellinger(results, w), mass
    return mise_merge(results, w), None


def merged_precision(merged: ProbDist, shots: int) -> float:
    """Mean over outcomes of ``sqrt(p(1-p)/(n-1))`` for the merged estimate."""
    if shots < 2:
        return float("inf")
    p = merged.probs
    return float(np.mean(np.sqrt(p * (1.0 - p) / (shots - 1))))


def run_production(fleet: Sequence[QpuDescriptor], config: ProductionConfig,
                   calibration: CalibrationReport | None = None,
                   ideal: ProbDist | None = None) -> ProductionReport:
    """Split, execute and merge the target circuit's shots over ``fleet``.

    Production executions continue each backend's sequence after the
    calibration circuits, so a calibration run followed by production on the
    same descriptors never reuses a sampling seed.
    """
    if not fleet:
        raise ValueError("empty fleet")
    ids = [q.id for q in fleet]
    policy = config.policy
    check_coverage(ids, calibration, policy)
    if ideal is None:
        ideal = config.target.ideal()
    offset = calibration.num_circuits if calibration is not None else 0
    backends = [Backend(q, last_index=offset - 1) for q in fleet]
    warnings: list[str] = []

    w = initial_split_weights(calibration, policy, ids)
    w_merge = merge_weights(calibration, policy, ids)
    variances = calibration.variance_vector(ids) if policy.split == "mise" else None
    if config.iterations > 1 and (policy.split == "mise" or policy.merge == "mise"):
        warnings.append("multi-iteration MISE mode reuses calibration weights unchanged")

    acc = [Counts.zeros(ideal.num_qubits) for _ in fleet]
    records: list[IterationRecord] = []
    stop_reason = "completed"
    used = 0
    for i, shots in enumerate(iteration_schedule(config.budget, config.iterations)):
        if policy.split == "mise":
            alloc = mise_split_allocation(w, variances, shots)
        else:
            alloc = allocate_shots(w, shots)
        results = [b.run(ideal, int(n)) for b, n in zip(backends, alloc)]
        acc = [sum_counts([a, r.counts]) for a, r in zip(acc, results)]
        used += shots
        cumulative = [ExecutionResult(r.qpu_id, a, a.total, r.noisy_dist_used)
                      for r, a in zip(results, acc)]
        try:
            merged, mass = _merge(cumulative, policy, w_merge,
                                  seed=config.bootstrap_seed + i)
        except ValueError as exc:
            warnings.append(f"iteration {i}: {policy.merge} merge failed ({exc}); summed counts instead")
            merged, mass = merge_uniform(cumulative), None
        metric = evaluate(merged, ideal)["d_hellinger"]
        records.append(IterationRecord(i, w.copy(), alloc, results, merged, metric, mass))

        last = i == config.iterations - 1
        if (config.stop.kind == "precision_threshold" and not last
                and merged_precision(merged, used) < config.stop.tau):
            stop_reason = "precision_reached"
            break
        if not last and policy.split == "hellinger":
            w = _updated_hellinger_weights(acc, merged, policy)
    return ProductionReport(ids, config.target.label, config.budget, policy, records,
                            records[-1].merged, stop_reason, warnings)


def _updated_hellinger_weights(acc: Sequence[Counts], merged: ProbDist,
                               policy: PolicyChoice) -> np.ndarray:
    """Re-rank backends by their distance to the current merged estimate."""
    u = []
    for c in acc:
        if c.total >= 2:
            d = hellinger_jackknife_corrected(c, merged).value
        else:
            d = 1.0
        u.append(max(d, 0.0) ** 2)
    return weights_from_unreliability(u, policy.epsilon, policy.gamma)


def run_baseline(qpu: QpuDescriptor, ideal: ProbDist, budget: int, offset: int) -> ProbDist:
    """All ``budget`` shots on one backend, at the first production sequence index."""
    res = Backend(qpu, last_index=offset - 1).run(ideal, budget)
    return merge_uniform([res])
