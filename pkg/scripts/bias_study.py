"""Bias of the naive, jackknife and corrected Hellinger estimators when the
sample is drawn from the reference itself (true distance 0)."""

import argparse

import numpy as np

from shotwise.estimators import hellinger_jackknife, hellinger_jackknife_corrected, hellinger_naive
from shotwise.probdist import ProbDist, sample_counts
from shotwise.rng import mix_seed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--qubits", type=int, default=5)
    ap.add_argument("--shots", type=int, nargs="+", default=[50, 100, 200, 500, 1000, 4000])
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    q = ProbDist.uniform(args.qubits)
    print(f"{'shots':>6} {'naive':>9} {'jackknife':>10} {'corrected':>10}")
    for n in args.shots:
        vals = np.zeros((args.reps, 3))
        for r in range(args.reps):
            c = sample_counts(q, n, mix_seed(args.seed, r))
            vals[r] = [hellinger_naive(c, q).value, hellinger_jackknife(c, q).value,
                       hellinger_jackknife_corrected(c, q).value]
        m = vals.mean(axis=0)
        print(f"{n:>6} {m[0]:>9.5f} {m[1]:>10.5f} {m[2]:>10.5f}")


if __name__ == "__main__":
    main()
