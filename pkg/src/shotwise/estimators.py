"""Bias-aware Hellinger distance estimates from finite counts.

The plug-in distance ``d_H(c/n, q)`` is biased upward because of the square
root.  The jackknife variant averages leave-one-out estimates; since all shots
with the same outcome give the same leave-one-out dataset the average collapses
to a sum over observed outcomes weighted by their counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from shotwise.probdist import Counts, ProbDist, _same_dim
from shotwise.rng import make_rng, mix_seed
from shotwise.probdist import sample_uniform_indices

METHODS = ("naive", "jackknife", "jackknife_corrected", "bootstrap")
DEFAULT_BOOTSTRAP = 200


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    std_error: float
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.std_error >= 0:
            raise ValueError("std_error must be non-negative")

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "method": self.method}

    @classmethod
    def from_dict(cls, data: dict) -> "DistanceEstimate":
        return cls(float(data["value"]), float(data["std_error"]), data["method"])


@dataclass(frozen=True)
class UnreliabilityRecord:
    qpu_id: str
    u: float
    std_error: float
    circuits_used: int

    def to_dict(self) -> dict:
        return {"qpu_id": self.qpu_id, "u": self.u, "std_error": self.std_error,
                "circuits_used": self.circuits_used}

    @classmethod
    def from_dict(cls, data: dict) -> "UnreliabilityRecord":
        return cls(data["qpu_id"], float(data["u"]), float(data["std_error"]),
                   int(data["circuits_used"]))


def _overlap(c: np.ndarray, n: int, q: np.ndarray) -> float:
    return float(np.sum(np.sqrt(c / n * q)))


def _from_overlap(bc: float) -> float:
    return float(np.sqrt(min(max(1.0 - bc, 0.0), 1.0)))


def _naive_from_arrays(c: np.ndarray, n: int, q: np.ndarray) -> float:
    return _from_overlap(_overlap(c, n, q))


def hellinger_naive(c: Counts, q: ProbDist) -> DistanceEstimate:
    _same_dim(c, q)
    n = c.total
    if n < 1:
        raise ValueError("empty dataset")
    return DistanceEstimate(_naive_from_arrays(c.counts, n, q.probs), 0.0, "naive")


def _leave_one_out(c: np.ndarray, n: int, q: np.ndarray, overlap: float):
    """Distances with one shot of outcome ``y`` removed, for every observed ``y``.

    ``overlap`` is ``sum_x sqrt(c_x q_x / n)``, i.e. ``1 - d_naive**2`` before clamping.
    """
    obs = np.flatnonzero(c)
    cy = c[obs].astype(float)
    bc_full = np.sqrt(n) * overlap
    bc_loo = (bc_full - (np.sqrt(cy) - np.sqrt(cy - 1.0)) * np.sqrt(q[obs])) / np.sqrt(n - 1)
    return cy, np.sqrt(np.clip(1.0 - bc_loo, 0.0, 1.0))


def _jackknife(c: Counts, q: ProbDist):
    _same_dim(c, q)
    n = c.total
    if n < 2:
        raise ValueError("jackknife needs at least 2 shots")
    overlap = _overlap(c.counts, n, q.probs)
    naive = _from_overlap(overlap)
    cy, d_loo = _leave_one_out(c.counts, n, q.probs, overlap)
    d_jack = float(np.sum(cy * d_loo) / n)
    err = float(np.sqrt((n - 1) / n * np.sum(cy * (d_loo - d_jack) ** 2)))
    return n, naive, d_jack, err


def hellinger_jackknife(c: Counts, q: ProbDist) -> DistanceEstimate:
    _, _, d_jack, err = _jackknife(c, q)
    return DistanceEstimate(d_jack, err, "jackknife")


def hellinger_jackknife_corrected(c: Counts, q: ProbDist) -> DistanceEstimate:
    """Jackknife estimate with the residual O(1/n) bias removed.

    ``value = d_jack + n (d_naive - d_jack)``; may dip slightly below zero.
    """
    n, naive, d_jack, err = _jackknife(c, q)
    return DistanceEstimate(d_jack + n * (naive - d_jack), err, "jackknife_corrected")


def _resample_array(probs: np.ndarray, n: int, seed: int) -> np.ndarray:
    if n == 0:
        return np.zeros(probs.size, dtype=np.int64)
    idx = sample_uniform_indices(probs, n, make_rng(seed))
    return np.bincount(idx, minlength=probs.size)


def bootstrap_resample(c: Counts, k: int, seed: int) -> list[Counts]:
    """``k`` multinomial resamples of size ``n`` from the observed frequencies.

    Replicate ``i`` uses the sub-seed ``mix_seed(seed, i)`` so replicates can be
    generated in any order.
    """
    n = c.total
    if k < 0:
        raise ValueError("replicate count must be non-negative")
    if k == 0:
        return []
    if n < 1:
        raise ValueError("empty dataset")
    p = c.counts / n
    return [Counts(c.num_qubits, _resample_array(p, n, mix_seed(seed, i))) for i in range(k)]


def _pair_distance(a: np.ndarray, na: int, b: np.ndarray, nb: int) -> float:
    d2 = 0.5 * np.sum((np.sqrt(a / na) - np.sqrt(b / nb)) ** 2)
    return float(np.sqrt(min(max(d2, 0.0), 1.0)))


def hellinger_two_sample(c1: Counts, c2: Counts, k: int = DEFAULT_BOOTSTRAP,
                         seed: int = 0) -> DistanceEstimate:
    """Distance between two distributions both known only through counts.

    Paired bootstrap correction ``2 d(p1, p2) - mean_b d(p1*_b, p2*_b)``; the
    error is the standard deviation over replicates.
    """
    _same_dim(c1, c2)
    n1, n2 = c1.total, c2.total
    if n1 < 1 or n2 < 1:
        raise ValueError("empty dataset")
    if k < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    p1, p2 = c1.counts / n1, c2.counts / n2
    naive = _pair_distance(c1.counts, n1, c2.counts, n2)
    seed1, seed2 = mix_seed(seed, 1), mix_seed(seed, 2)
    reps = np.empty(k)
    for i in range(k):
        r1 = _resample_array(p1, n1, mix_seed(seed1, i))
        r2 = _resample_array(p2, n2, mix_seed(seed2, i))
        reps[i] = _pair_distance(r1, n1, r2, n2)
    return DistanceEstimate(2.0 * naive - float(reps.mean()), float(reps.std(ddof=1)), "bootstrap")


def unreliability_from_distances(qpu_id: str, distances: Sequence[float]) -> UnreliabilityRecord:
    """Mean of squared (clamped at zero) corrected distances over circuits."""
    if len(distances) == 0:
        raise ValueError("need at least one circuit")
    sq = np.maximum(np.asarray(distances, dtype=float), 0.0) ** 2
    err = float(sq.std(ddof=1) / np.sqrt(sq.size)) if sq.size > 1 else 0.0
    return UnreliabilityRecord(qpu_id, float(sq.mean()), err, int(sq.size))


def unreliability(pairs: Sequence[tuple[Counts, ProbDist]], qpu_id: str = "") -> UnreliabilityRecord:
    """Mean squared Hellinger distance to the ideal over benchmark circuits."""
    if len(pairs) == 0:
        raise ValueError("need at least one circuit")
    d = [hellinger_jackknife_corrected(c, ideal).value for c, ideal in pairs]
    return unreliability_from_distances(qpu_id, d)
