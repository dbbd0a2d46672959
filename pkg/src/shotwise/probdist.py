"""Dense outcome distributions, measurement counts and exact distances.

Outcome ``x`` is the integer value of the measured bitstring read big-endian:
qubit 0 is the most significant bit, so for ``q = 3`` the string ``100`` is
index 4 and means "qubit 0 measured 1".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from shotwise.rng import make_rng

MAX_QUBITS = 16
NORM_TOL = 1e-9


def _check_qubits(num_qubits: int) -> int:
    num_qubits = int(num_qubits)
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    return num_qubits


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProbDist:
    """Probability vector over the ``2**num_qubits`` outcomes."""

    num_qubits: int
    probs: np.ndarray

    def __post_init__(self):
        q = _check_qubits(self.num_qubits)
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.shape != (1 << q,):
            raise ValueError(f"expected {1 << q} probabilities, got {p.size}")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValueError("probabilities must be finite and lie in [0, 1]")
        if abs(p.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "num_qubits", q)
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def from_weights(cls, num_qubits: int, weights) -> "ProbDist":
        """Normalize a non-negative weight vector; tiny negative dust is zeroed."""
        w = np.array(weights, dtype=float).reshape(-1)
        w[(w < 0) & (w > -1e-12)] = 0.0
        total = w.sum()
        if total <= 0:
            raise ValueError("weights have no positive mass")
        return cls(num_qubits, w / total)

    @classmethod
    def point_mass(cls, num_qubits: int, index: int = 0) -> "ProbDist":
        p = np.zeros(1 << num_qubits)
        p[index] = 1.0
        return cls(num_qubits, p)

    @classmethod
    def uniform(cls, num_qubits: int) -> "ProbDist":
        return cls(num_qubits, np.full(1 << num_qubits, 1.0 / (1 << num_qubits)))

    @property
    def dim(self) -> int:
        return self.probs.size

    def __len__(self):
        return self.probs.size

    def __getitem__(self, x):
        return self.probs[x]

    def __eq__(self, other):
        if not isinstance(other, ProbDist):
            return NotImplemented
        return self.num_qubits == other.num_qubits and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.num_qubits, self.probs.tobytes()))

    def to_dict(self) -> dict:
        return {"num_qubits": self.num_qubits, "values": self.probs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ProbDist":
        return cls(data["num_qubits"], data["values"])


@dataclass(frozen=True, eq=False)
class Counts:
    """Integer outcome counts from ``total`` shots."""

    num_qubits: int
    counts: np.ndarray

    def __post_init__(self):
        q = _check_qubits(self.num_qubits)
        raw = np.asarray(self.counts).reshape(-1)
        c = raw.astype(np.int64)
        if raw.dtype.kind == "f" and not np.array_equal(c, raw):
            raise ValueError("counts must be integers")
        if c.shape != (1 << q,):
            raise ValueError(f"expected {1 << q} counts, got {c.size}")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "num_qubits", q)
        object.__setattr__(self, "counts", _frozen(c))

    @classmethod
    def zeros(cls, num_qubits: int) -> "Counts":
        return cls(num_qubits, np.zeros(1 << num_qubits, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def dim(self) -> int:
        return self.counts.size

    def __len__(self):
        return self.counts.size

    def __getitem__(self, x):
        return self.counts[x]

    def __eq__(self, other):
        if not isinstance(other, Counts):
            return NotImplemented
        return self.num_qubits == other.num_qubits and np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash((self.num_qubits, self.counts.tobytes()))

    def to_dict(self) -> dict:
        return {"num_qubits": self.num_qubits, "values": self.counts.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Counts":
        return cls(data["num_qubits"], data["values"])


def _same_dim(a, b):
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"dimension mismatch: {a.num_qubits} vs {b.num_qubits} qubits")


def sample_uniform_indices(probs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` categorical outcomes by inverse CDF over ``probs``.

    Each draw consumes one double from ``rng.random`` and picks the first index
    whose cumulative probability exceeds it, so zero-probability outcomes are
    never returned.
    """
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    u = rng.random(n)
    return np.searchsorted(cdf, u, side="right")


def sample_counts(dist: ProbDist, n: int, seed: int) -> Counts:
    """Multinomial counts of ``n`` shots from ``dist``; a pure function of its inputs."""
    n = int(n)
    if n < 0:
        raise ValueError("shot count must be non-negative")
    if n == 0:
        return Counts.zeros(dist.num_qubits)
    idx = sample_uniform_indices(dist.probs, n, make_rng(seed))
    return Counts(dist.num_qubits, np.bincount(idx, minlength=dist.dim))


def relative_frequencies(c: Counts) -> ProbDist:
    n = c.total
    if n < 1:
        raise ValueError("empty dataset")
    return ProbDist(c.num_qubits, c.counts / n)


def std_error(c: Counts) -> np.ndarray:
    """Per-outcome standard error ``sqrt(p(1-p)/(n-1))`` of the relative frequencies."""
    n = c.total
    if n < 2:
        raise ValueError("insufficient shots for error estimate")
    p = c.counts / n
    return np.sqrt(p * (1.0 - p) / (n - 1))


def bhattacharyya_coefficient(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(np.sqrt(p * q)))


def hellinger(p: ProbDist, q: ProbDist) -> float:
    """Hellinger distance, computed in the ``sqrt(1/2 sum (sqrt p - sqrt q)^2)`` form.

    For normalized inputs this equals ``sqrt(1 - sum sqrt(p q))`` but returns an
    exact 0 for identical inputs.
    """
    _same_dim(p, q)
    d2 = 0.5 * float(np.sum((np.sqrt(p.probs) - np.sqrt(q.probs)) ** 2))
    return float(np.sqrt(min(max(d2, 0.0), 1.0)))


def bhattacharyya_angle(p: ProbDist, q: ProbDist) -> float:
    _same_dim(p, q)
    bc = bhattacharyya_coefficient(p.probs, q.probs)
    return float(np.arccos(min(max(bc, 0.0), 1.0)))


def sum_counts(items: Iterable[Counts]) -> Counts:
    items = list(items)
    if not items:
        raise ValueError("cannot sum an empty list of counts")
    first = items[0]
    total = np.zeros(first.dim, dtype=np.int64)
    for c in items:
        _same_dim(first, c)
        total += c.counts
    return Counts(first.num_qubits, total)


def as_probs(values: Sequence[float]) -> ProbDist:
    """Convenience constructor inferring the qubit count from the vector length."""
    v = np.asarray(values, dtype=float)
    q = int(v.size).bit_length() - 1
    if v.size != 1 << q:
        raise ValueError("length must be a power of two")
    return ProbDist(q, v)


def as_counts(values: Sequence[int]) -> Counts:
    v = np.asarray(values)
    q = int(v.size).bit_length() - 1
    if v.size != 1 << q:
        raise ValueError("length must be a power of two")
    return Counts(q, v)
