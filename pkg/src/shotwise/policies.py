"""Split weights, integer shot allocation and merge rules.

Split: uniform, inverse-unreliability ("hellinger") and MISE-optimal weights.
Merge: plain count summation, the weighted square-Hellinger optimum and the
MISE-optimal convex combination.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from shotwise.backends import ExecutionResult
from shotwise.probdist import Counts, ProbDist, relative_frequencies, sum_counts
from shotwise.rng import make_rng, mix_seed
from shotwise.probdist import sample_uniform_indices

log = logging.getLogger(__name__)

SPLIT_POLICIES = ("uniform", "hellinger", "mise")
MERGE_POLICIES = ("uniform", "hellinger", "mise")
DEFAULT_EPSILON = 1e-3
DEFAULT_GAMMA = 1.0


class NoConvexSolution(ValueError):
    """Every backend was excluded from the MISE optimum."""


@dataclass(frozen=True)
class PolicyChoice:
    split: str = "uniform"
    merge: str = "uniform"
    epsilon: float = DEFAULT_EPSILON
    gamma: float = DEFAULT_GAMMA
    debias_merge: bool = False

    def __post_init__(self):
        if self.split not in SPLIT_POLICIES:
            raise ValueError(f"unknown split policy {self.split!r}")
        if self.merge not in MERGE_POLICIES:
            raise ValueError(f"unknown merge policy {self.merge!r}")
        if not self.epsilon >= 0 or not self.gamma > 0:
            raise ValueError("need epsilon >= 0 and gamma > 0")

    def to_dict(self) -> dict:
        return {"split": self.split, "merge": self.merge, "epsilon": self.epsilon,
                "gamma": self.gamma, "debias_merge": self.debias_merge}

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyChoice":
        unknown = set(data) - {"split", "merge", "epsilon", "gamma", "debias_merge"}
        if unknown:
            raise ValueError(f"unknown policy fields {sorted(unknown)}")
        return cls(data.get("split", "uniform"), data.get("merge", "uniform"),
                   float(data.get("epsilon", DEFAULT_EPSILON)),
                   float(data.get("gamma", DEFAULT_GAMMA)),
                   bool(data.get("debias_merge", False)))


def _check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size == 0:
        raise ValueError("empty fleet")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    return w


# --- split ------------------------------------------------------------------

def weights_uniform(m: int) -> np.ndarray:
    if m < 1:
        raise ValueError("empty fleet")
    return np.full(m, 1.0 / m)


def weights_from_unreliability(u, epsilon: float = DEFAULT_EPSILON,
                               gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Inverse-power weights ``(u + epsilon)**-gamma``, normalized.

    Computed in log space so large ``gamma`` does not overflow.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size == 0:
        raise ValueError("empty fleet")
    if not np.all(np.isfinite(u)) or not math.isfinite(epsilon) or not math.isfinite(gamma):
        raise ValueError("non-finite input")
    if np.any(u < 0):
        raise ValueError("unreliabilities must be non-negative")
    base = u + epsilon
    if np.any(base <= 0):
        raise ValueError("epsilon must be positive when some unreliability is zero")
    logr = -gamma * np.log(base)
    r = np.exp(logr - logr.max())
    return r / r.sum()


def allocate_shots(w, n_tot: int) -> np.ndarray:
    """Largest-remainder apportionment; ties go to the lower index."""
    w = _check_weights(w)
    n_tot = int(n_tot)
    if n_tot < 0:
        raise ValueError("negative shot budget")
    quota = w * n_tot
    base = np.floor(quota).astype(np.int64)
    rem = quota - base
    left = n_tot - int(base.sum())
    if left > 0:
        order = sorted(range(w.size), key=lambda i: (-rem[i], i))
        for i in order[:left]:
            base[i] += 1
    return base


def noisy_variance(p: np.ndarray) -> float:
    """``sum_x p_x (1 - p_x)``: per-shot variance budget of a backend."""
    return float(np.sum(p * (1.0 - p)))


def mise_split_allocation(w, v, n_tot: int) -> np.ndarray:
    """Shots proportional to ``w_m sqrt(v_m)``.

    Minimizes ``sum_m w_m**2 v_m / n_m`` subject to ``sum_m n_m = n_tot``.
    """
    w = _check_weights(w)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != w.shape or np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("variances must be finite, non-negative and match the weights")
    r = w * np.sqrt(v)
    if r.sum() <= 0:
        return allocate_shots(w, n_tot)
    return allocate_shots(r / r.sum(), n_tot)


# --- merge ------------------------------------------------------------------

def _active(results: Sequence[ExecutionResult], w=None):
    """Drop backends that produced no shots, renormalizing ``w``."""
    if not results:
        raise ValueError("nothing to merge")
    keep = [i for i, r in enumerate(results) if r.counts.total > 0]
    if w is not None:
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.size != len(results):
            raise ValueError("one weight per result required")
        keep = [i for i in keep if w[i] > 0]
    if not keep:
        raise ValueError("no backend with shots and positive weight")
    kept = [results[i] for i in keep]
    if w is None:
        return kept, None
    wk = w[keep]
    return kept, wk / wk.sum()


def merge_uniform(results: Sequence[ExecutionResult]) -> ProbDist:
    kept, _ = _active(results)
    return relative_frequencies(sum_counts(r.counts for r in kept))


def _freqs(results) -> np.ndarray:
    return np.stack([r.counts.counts / r.counts.total for r in results])


def hellinger_combine(p_hat: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Closed-form minimizer ``[sum_m w_m sqrt(p_m)]**2`` and its raw mass.

    The raw mass is ``sum_{m,m'} w_m w_m' cos(angle(p_m, p_m'))`` and is at most 1;
    dividing by it gives the minimizer over normalized distributions.
    """
    a = w @ np.sqrt(p_hat)
    raw = a * a
    mass = float(raw.sum())
    return raw / mass, mass


def merge_hellinger(results: Sequence[ExecutionResult], w) -> ProbDist:
    kept, wk = _active(results, w)
    if len(kept) == 1:
        return relative_frequencies(kept[0].counts)
    probs, _ = hellinger_combine(_freqs(kept), wk)
    return ProbDist(kept[0].counts.num_qubits, probs)


def mise_merge(results: Sequence[ExecutionResult], w) -> ProbDist:
    kept, wk = _active(results, w)
    if len(kept) == 1:
        return relative_frequencies(kept[0].counts)
    probs = wk @ _freqs(kept)
    return ProbDist.from_weights(kept[0].counts.num_qubits, probs)


def debiased_merge(results: Sequence[ExecutionResult], w, merge: str, k: int = 200,
                   seed: int = 0) -> ProbDist:
    """``2 merge(data) - mean_b merge(resample_b)``, clipped at 0 and renormalized."""
    kept, wk = _active(results, w)
    combine = (lambda p: hellinger_combine(p, wk)[0]) if merge == "hellinger" else (lambda p: wk @ p)
    p_hat = _freqs(kept)
    ns = [r.counts.total for r in kept]
    acc = np.zeros(p_hat.shape[1])
    for b in range(k):
        rs = np.stack([
            np.bincount(sample_uniform_indices(p_hat[m], ns[m], make_rng(mix_seed(mix_seed(seed, b), m))),
                        minlength=p_hat.shape[1]) / ns[m]
            for m in range(len(kept))
        ])
        acc += combine(rs)
    out = np.clip(2.0 * combine(p_hat) - acc / k, 0.0, None)
    return ProbDist.from_weights(kept[0].counts.num_qubits, out)


# --- MISE optimum -------------------------------------------------------------

def c_diag_unbiased(c: Counts) -> float:
    """Unbiased estimate of ``E[sum_x p_hat_x**2] = 1/n + (1 - 1/n) sum_x p_x**2``."""
    n = c.total
    if n < 2:
        raise ValueError("need at least 2 shots")
    cc = c.counts.astype(float)
    u_hat = float(np.sum(cc * (cc - 1.0)) / (n * (n - 1.0)))
    return 1.0 / n + (1.0 - 1.0 / n) * u_hat


@dataclass(frozen=True)
class MiseSolution:
    qpu_ids: tuple[str, ...]
    weights: np.ndarray
    mu: float
    excluded: tuple[str, ...]
    c_matrix: np.ndarray
    f_vector: np.ndarray
    estimated_mise: float
    ideal_norm: float = 0.0

    @property
    def retained(self) -> tuple[str, ...]:
        return tuple(q for q in self.qpu_ids if q not in self.excluded)

    def weight_map(self) -> dict[str, float]:
        return dict(zip(self.qpu_ids, (float(x) for x in self.weights)))

    def weights_for(self, ids: Sequence[str]) -> np.ndarray:
        wm = self.weight_map()
        return np.array([wm.get(i, 0.0) for i in ids])

    def to_dict(self) -> dict:
        return {
            "qpu_ids": list(self.qpu_ids), "weights": self.weights.tolist(), "mu": self.mu,
            "excluded": list(self.excluded), "c_matrix": self.c_matrix.tolist(),
            "f_vector": self.f_vector.tolist(), "estimated_mise": self.estimated_mise,
            "ideal_norm": self.ideal_norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MiseSolution":
        return cls(tuple(d["qpu_ids"]), np.asarray(d["weights"], dtype=float), float(d["mu"]),
                   tuple(d["excluded"]), np.asarray(d["c_matrix"], dtype=float),
                   np.asarray(d["f_vector"], dtype=float), float(d["estimated_mise"]),
                   float(d.get("ideal_norm", 0.0)))


def mise_value(w, c_matrix, f_vector, ideal_norm: float) -> float:
    """``w^T C w - 2 w^T f + sum_x ideal_x**2``."""
    w = np.asarray(w, dtype=float)
    return float(w @ c_matrix @ w - 2.0 * w @ f_vector + ideal_norm)


def _solve(c: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(c, rhs)
    except np.linalg.LinAlgError:
        ridge = 1e-12 * np.trace(c) / c.shape[0]
        log.warning("singular MISE system, adding ridge %.3g", ridge)
        try:
            return np.linalg.solve(c + ridge * np.eye(c.shape[0]), rhs)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular system after ridge") from exc


def constrained_weights(c_matrix, f_vector) -> tuple[np.ndarray, float]:
    """Stationary point of ``w^T C w - 2 w^T f`` on ``sum w = 1``.

    ``w = C^-1 (f - mu 1)`` with ``mu = (1^T C^-1 f - 1) / (1^T C^-1 1)``.
    """
    c = np.asarray(c_matrix, dtype=float)
    f = np.asarray(f_vector, dtype=float)
    ones = np.ones(f.size)
    cinv_f = _solve(c, f)
    cinv_1 = _solve(c, ones)
    mu = (cinv_f.sum() - 1.0) / cinv_1.sum()
    return cinv_f - mu * cinv_1, float(mu)


def _best_face(c: np.ndarray, f: np.ndarray):
    """Fallback when the active-set loop cycles (only seen for indefinite C):
    best feasible stationary point over every face of the simplex."""
    m = f.size
    if m > 16:
        raise ValueError("MISE active-set iteration did not converge")
    best = None
    for mask in range(1, 2 ** m):
        idx = [i for i in range(m) if mask >> i & 1]
        try:
            wa, mu = constrained_weights(c[np.ix_(idx, idx)], f[idx])
        except ValueError:
            continue
        if np.any(wa < -1e-12):
            continue
        w = np.zeros(m)
        w[idx] = wa
        val = float(w @ c @ w - 2.0 * w @ f)
        if best is None or val < best[0]:
            best = (val, idx, w, mu)
    if best is None:
        raise NoConvexSolution("no convex solution")
    return best[1], best[2], best[3]


def solve_mise(c_matrix, f_vector, ideal_norm: float = 0.0,
               qpu_ids: Sequence[str] | None = None) -> MiseSolution:
    """Closed-form MISE weights with iterative exclusion of negative weights.

    While the solution has a negative component the most negative backend is
    dropped and the reduced system is solved again. Dropping greedily can
    discard a backend that belongs to the optimum, so once the weights are
    non-negative every excluded backend is checked against the optimality
    condition ``(C w - f)_j >= -mu`` and the worst violator is re-admitted.
    A lone backend always gets weight 1, so the active set never empties;
    ``NoConvexSolution`` guards that invariant.
    """
    c = np.asarray(c_matrix, dtype=float)
    f = np.asarray(f_vector, dtype=float)
    m = f.size
    ids = tuple(qpu_ids) if qpu_ids is not None else tuple(str(i) for i in range(m))
    if c.shape != (m, m) or len(ids) != m or m == 0:
        raise ValueError("C must be M x M and f of length M")
    active = list(range(m))
    tol = 1e-12 * max(1.0, float(np.abs(c).max()), float(np.abs(f).max()))
    for _ in range(10 * m * m + 10):
        wa, mu = constrained_weights(c[np.ix_(active, active)], f[active])
        if np.any(wa < 0):
            active.remove(active[int(np.argmin(wa))])
            if not active:
                raise NoConvexSolution("no convex solution")
            continue
        w = np.zeros(m)
        w[active] = wa
        slack = c @ w - f + mu
        outside = [j for j in range(m) if j not in active]
        worst = min(outside, key=lambda j: slack[j], default=None)
        if worst is None or slack[worst] >= -tol:
            break
        active = sorted(active + [worst])
    else:
        active, w, mu = _best_face(c, f)
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    excluded = tuple(ids[i] for i in range(m) if i not in active)
    return MiseSolution(ids, w, mu, excluded, c, f, mise_value(w, c, f, ideal_norm), ideal_norm)


def mise_statistics(counts: Sequence[Sequence[Counts]], ideals: Sequence[ProbDist]):
    """Estimate ``C``, ``f`` and ``sum_x ideal_x**2`` from calibration counts.

    ``counts[m][c]`` are the counts of backend ``m`` on circuit ``c``. Circuits
    are weighted by their share of the total calibration shots.
    """
    m_count = len(counts)
    if m_count == 0:
        raise ValueError("empty fleet")
    n_circ = len(ideals)
    if n_circ == 0 or any(len(row) != n_circ for row in counts):
        raise ValueError("every (backend, circuit) cell must be populated")
    n_mc = np.array([[counts[m][c].total for c in range(n_circ)] for m in range(m_count)], float)
    if np.any(n_mc < 2):
        raise ValueError("every cell needs at least 2 shots")
    share = n_mc.sum(axis=0) / n_mc.sum()
    c_mat = np.zeros((m_count, m_count))
    f_vec = np.zeros(m_count)
    ideal_norm = 0.0
    for ci, ideal in enumerate(ideals):
        p_hat = np.stack([counts[m][ci].counts / n_mc[m, ci] for m in range(m_count)])
        cross = p_hat @ p_hat.T
        diag = [c_diag_unbiased(counts[m][ci]) for m in range(m_count)]
        cross[np.diag_indices(m_count)] = diag
        c_mat += share[ci] * cross
        f_vec += share[ci] * (p_hat @ ideal.probs)
        ideal_norm += share[ci] * float(ideal.probs @ ideal.probs)
    c_mat = 0.5 * (c_mat + c_mat.T)
    return c_mat, f_vec, ideal_norm


def mise_weights_calibration(counts: Sequence[Sequence[Counts]], ideals: Sequence[ProbDist],
                             qpu_ids: Sequence[str] | None = None) -> MiseSolution:
    c_mat, f_vec, ideal_norm = mise_statistics(counts, ideals)
    return solve_mise(c_mat, f_vec, ideal_norm, qpu_ids)


def estimate_var_bootstrap(results: Sequence[ExecutionResult], w, k: int = 200,
                           seed: int = 0) -> float:
    """Variance term of the MISE from paired bootstrap resamples.

    Each replicate draws two independent resamples per backend and scores
    ``0.5 * sum_x (p_w - p'_w)**2``; the estimate is the replicate mean.
    """
    if k < 1:
        raise ValueError("need at least one replicate")
    kept, wk = _active(results, w)
    p_hat = _freqs(kept)
    ns = [r.counts.total for r in kept]
    dim = p_hat.shape[1]
    total = 0.0
    for b in range(k):
        pair = []
        for side in (0, 1):
            s = mix_seed(mix_seed(seed, b), side)
            rs = np.stack([
                np.bincount(sample_uniform_indices(p_hat[m], ns[m], make_rng(mix_seed(s, m))),
                            minlength=dim) / ns[m]
                for m in range(len(kept))
            ])
            pair.append(wk @ rs)
        total += 0.5 * float(np.sum((pair[0] - pair[1]) ** 2))
    return total / k
