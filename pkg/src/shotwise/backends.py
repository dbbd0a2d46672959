"""Simulated noisy QPUs.

Noise acts on the output distribution, not on gates: a depolarizing-style mix
towards a bias distribution followed by independent per-qubit readout flips.
Every execution draws from a seed derived from the backend seed and the
request's sequence index, so results never depend on scheduling order.

The :class:`ExecutionRequest` / :class:`ExecutionResult` records are the
contract an adapter for real hardware would implement (minus determinism).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from shotwise.probdist import Counts, ProbDist, sample_counts
from shotwise.rng import make_rng, mix_seed, splitmix64


@dataclass(frozen=True)
class NoiseModel:
    depolarizing: float = 0.0
    bias: str = "uniform"
    bias_seed: int | None = None
    readout_flip: float = 0.0
    drift: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.depolarizing <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.depolarizing}")
        if not 0.0 <= self.readout_flip <= 0.5:
            raise ValueError(f"eta must be in [0, 0.5], got {self.readout_flip}")
        if self.bias not in ("uniform", "random"):
            raise ValueError(f"bias must be 'uniform' or 'random', got {self.bias!r}")
        if self.bias == "random" and self.bias_seed is None:
            raise ValueError("random bias needs a bias_seed")

    def effective_depolarizing(self, iteration: int) -> float:
        lam = self.depolarizing + (iteration * self.drift if self.drift else 0.0)
        return min(max(lam, 0.0), 1.0)


@lru_cache(maxsize=512)
def _random_bias(num_qubits: int, seed: int) -> np.ndarray:
    rng = make_rng(mix_seed(seed, num_qubits))
    b = rng.dirichlet(np.ones(1 << num_qubits))
    b.setflags(write=False)
    return b


def bias_distribution(noise: NoiseModel, num_qubits: int) -> np.ndarray:
    if noise.bias == "uniform":
        return np.full(1 << num_qubits, 1.0 / (1 << num_qubits))
    return _random_bias(num_qubits, int(noise.bias_seed))


def readout_confusion(p: np.ndarray, num_qubits: int, eta: float) -> np.ndarray:
    """Apply the same symmetric bit-flip channel independently to every qubit."""
    if eta == 0.0:
        return p
    t = np.array([[1 - eta, eta], [eta, 1 - eta]])
    x = p.reshape((2,) * num_qubits)
    for axis in range(num_qubits):
        x = np.moveaxis(np.tensordot(t, x, axes=([1], [axis])), 0, axis)
    return x.reshape(-1)


def noisy_distribution(ideal: ProbDist, noise: NoiseModel, iteration: int = 0) -> ProbDist:
    q = ideal.num_qubits
    lam = noise.effective_depolarizing(iteration)
    p = (1.0 - lam) * ideal.probs + lam * bias_distribution(noise, q)
    p = readout_confusion(p, q, noise.readout_flip)
    p = np.clip(p, 0.0, 1.0)
    return ProbDist(q, p / p.sum())


@dataclass(frozen=True)
class QpuDescriptor:
    id: str
    noise: NoiseModel
    rng_seed: int

    def to_dict(self) -> dict:
        d = {"id": self.id, "lambda": self.noise.depolarizing, "bias": self.noise.bias,
             "eta": self.noise.readout_flip, "seed": self.rng_seed}
        if self.noise.bias_seed is not None:
            d["bias_seed"] = self.noise.bias_seed
        if self.noise.drift is not None:
            d["drift"] = self.noise.drift
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "QpuDescriptor":
        known = {"id", "lambda", "bias", "bias_seed", "eta", "seed", "drift"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown backend fields {sorted(unknown)}")
        if "id" not in data or not isinstance(data["id"], str) or not data["id"]:
            raise ValueError("backend needs a non-empty string 'id'")
        bias = data.get("bias", "uniform")
        bias_seed = data.get("bias_seed")
        # "seeded_random:<n>" is accepted as a shorthand for bias="random", bias_seed=n
        if isinstance(bias, str) and bias.startswith("seeded_random"):
            _, _, tail = bias.partition(":")
            bias, bias_seed = "random", int(tail) if tail else bias_seed
        if bias == "random" and bias_seed is None:
            bias_seed = int(data.get("seed", 0))
        noise = NoiseModel(float(data.get("lambda", 0.0)), bias, bias_seed,
                           float(data.get("eta", 0.0)),
                           None if data.get("drift") is None else float(data["drift"]))
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ValueError(f"backend {data['id']}: seed must be a non-negative integer")
        return cls(data["id"], noise, seed)


@dataclass(frozen=True)
class ExecutionRequest:
    ideal: ProbDist
    shots: int
    sequence_index: int

    def __post_init__(self):
        if self.shots < 0:
            raise ValueError("shots must be non-negative")


@dataclass(frozen=True)
class ExecutionResult:
    qpu_id: str
    counts: Counts
    shots: int
    noisy_dist_used: ProbDist

    def to_dict(self) -> dict:
        return {"qpu_id": self.qpu_id, "shots": self.shots, "counts": self.counts.to_dict()}


def execution_seed(qpu: QpuDescriptor, sequence_index: int) -> int:
    return qpu.rng_seed ^ splitmix64(sequence_index)


def execute(qpu: QpuDescriptor, req: ExecutionRequest) -> ExecutionResult:
    noisy = noisy_distribution(req.ideal, qpu.noise, req.sequence_index)
    counts = sample_counts(noisy, req.shots, execution_seed(qpu, req.sequence_index))
    return ExecutionResult(qpu.id, counts, req.shots, noisy)


@dataclass
class Backend:
    """Stateful wrapper enforcing increasing sequence indices on one descriptor."""

    descriptor: QpuDescriptor
    last_index: int = field(default=-1)

    @property
    def id(self) -> str:
        return self.descriptor.id

    def next_index(self) -> int:
        return self.last_index + 1

    def run(self, ideal: ProbDist, shots: int, sequence_index: int | None = None) -> ExecutionResult:
        idx = self.next_index() if sequence_index is None else int(sequence_index)
        if idx <= self.last_index:
            raise ValueError(f"{self.id}: sequence index {idx} not after {self.last_index}")
        self.last_index = idx
        return execute(self.descriptor, ExecutionRequest(ideal, int(shots), idx))


def fleet_from_config(config: list[dict]) -> list[QpuDescriptor]:
    if not isinstance(config, list) or not config:
        raise ValueError("fleet config must be a non-empty list of backends")
    fleet = [QpuDescriptor.from_dict(entry) for entry in config]
    seen: set[str] = set()
    for qpu in fleet:
        if qpu.id in seen:
            raise ValueError(f"duplicate backend id {qpu.id!r}")
        seen.add(qpu.id)
    return fleet


def fleet_to_config(fleet: list[QpuDescriptor]) -> list[dict]:
    return [q.to_dict() for q in fleet]


def reseed_fleet(fleet: list[QpuDescriptor], run_seed: int) -> list[QpuDescriptor]:
    """Same devices, fresh shot noise: only the sampling seeds depend on ``run_seed``."""
    return [replace(q, rng_seed=mix_seed(q.rng_seed, splitmix64(run_seed))) for q in fleet]
