"""Ideal output distributions of benchmark and target circuits."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from shotwise.circuits.haar import haar_random_unitary, unitarity_error
from shotwise.circuits.qasm import (
    GATE_ARITY, Circuit, GateOp, QasmError, UnsupportedGateError, parse_qasm, to_qasm,
)
from shotwise.circuits.simulate import (
    ideal_distribution, ideal_distribution_from_unitary, statevector,
)
from shotwise.probdist import MAX_QUBITS, ProbDist

__all__ = [
    "BenchmarkSpec", "Circuit", "GateOp", "QasmError", "UnsupportedGateError", "GATE_ARITY",
    "ghz_circuit", "haar_random_unitary", "ideal_distribution", "ideal_distribution_from_unitary",
    "parse_qasm", "statevector", "to_qasm", "unitarity_error",
]


def ghz_circuit(num_qubits: int) -> Circuit:
    ops = [GateOp("h", (0,))]
    ops += [GateOp("cx", (i, i + 1)) for i in range(num_qubits - 1)]
    return Circuit(num_qubits, tuple(ops), f"ghz{num_qubits}")


@lru_cache(maxsize=256)
def _haar_ideal(num_qubits: int, seed: int) -> ProbDist:
    return ideal_distribution_from_unitary(haar_random_unitary(num_qubits, seed))


@dataclass(frozen=True)
class BenchmarkSpec:
    """A circuit whose ideal distribution can be computed exactly.

    ``kind`` is ``"haar"`` (qubits, seed), ``"ghz"`` (qubits) or ``"qasm"`` (path).
    """

    kind: str
    qubits: int | None = None
    seed: int | None = None
    path: str | None = None

    def __post_init__(self):
        if self.kind == "haar":
            if self.qubits is None or self.seed is None:
                raise ValueError("haar benchmark needs 'qubits' and 'seed'")
        elif self.kind == "ghz":
            if self.qubits is None:
                raise ValueError("ghz benchmark needs 'qubits'")
        elif self.kind == "qasm":
            if not self.path:
                raise ValueError("qasm benchmark needs 'path'")
        else:
            raise ValueError(f"unknown benchmark kind {self.kind!r}")
        if self.qubits is not None and not 1 <= self.qubits <= MAX_QUBITS:
            raise ValueError(f"qubits must be in [1, {MAX_QUBITS}]")

    @property
    def label(self) -> str:
        if self.kind == "haar":
            return f"haar{self.qubits}_s{self.seed}"
        if self.kind == "ghz":
            return f"ghz{self.qubits}"
        return Path(self.path).stem

    def circuit(self) -> Circuit:
        if self.kind == "ghz":
            return ghz_circuit(self.qubits)
        if self.kind == "qasm":
            text = Path(self.path).read_text(encoding="utf-8")
            return parse_qasm(text, label=self.label)
        raise ValueError("haar benchmarks are applied as unitaries, not gate lists")

    def ideal(self) -> ProbDist:
        if self.kind == "haar":
            return _haar_ideal(self.qubits, self.seed)
        return ideal_distribution(self.circuit())

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in ("qubits", "seed", "path"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkSpec":
        unknown = set(data) - {"kind", "qubits", "seed", "path"}
        if unknown:
            raise ValueError(f"unknown benchmark fields {sorted(unknown)}")
        return cls(data.get("kind"), data.get("qubits"), data.get("seed"), data.get("path"))
