"""Do the two minima born at the first bifurcation already encode a ground state?

The Hessian of U at the origin is (beta - alpha**2) I - S, so the origin
stops being a minimum once alpha**2 > beta - lambda_1(S) and a pair of minima
+-x branches off along the top eigenvector. The next eigenvalue lambda_2
gives the second bifurcation of the origin at alpha**2 = beta - lambda_2.
This script sweeps alpha**2 across that window for S3, then places alpha**2 a
fraction of the way into it for random instances (with beta = lambda_1 +
margin so the window sits at positive alpha**2), and checks sign(x) of the
minima against brute force. It reports; it asserts nothing.

    python scripts/first_bifurcation.py --count 200 --n-max 10
"""
import argparse
import math

import numpy as np

from isingflow import IsingProblem
from isingflow.bench import Distribution, InstanceSpec, random_instance
from isingflow.ising import brute_force
from isingflow.potential import PotentialParams, find_critical_points


def minima_at(problem, beta, alpha):
    minima = find_critical_points(PotentialParams(alpha, beta, problem)).minima
    oracle = brute_force(problem)
    return minima, sum(oracle.contains(p.sign) for p in minima if np.all(p.sign != 0))


def probe(problem, margin, frac):
    eig = np.linalg.eigvalsh(problem.coupling)
    gap = eig[-1] - eig[-2]
    if gap <= 1e-9:
        return None  # degenerate top eigenvalue: no isolated pair of minima
    beta = eig[-1] + margin
    alpha = math.sqrt(margin + frac * gap)
    minima, hits = minima_at(problem, beta, alpha)
    return alpha, len(minima), hits, minima


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--margin", type=float, default=1.0, help="beta = lambda_1(S) + margin")
    ap.add_argument("--frac", type=float, default=0.5, help="position in the window between the two bifurcations")
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--n-min", type=int, default=3)
    ap.add_argument("--n-max", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    s3 = IsingProblem(np.array([[0, 1, -2], [1, 0, 3], [-2, 3, 0]], dtype=float))
    eig = np.linalg.eigvalsh(s3.coupling)
    lo, hi = 10.0 - eig[-1], 10.0 - eig[-2]
    print(f"S3, beta=10: the origin bifurcates at alpha**2 = {lo:.4f} and {hi:.4f}")
    for a2 in sorted({lo + f * (hi - lo) for f in (0.02, 0.25, 0.5, 0.75, 0.98)} | {13.0}):
        minima, hits = minima_at(s3, 10.0, math.sqrt(a2))
        shown = " ".join(str(np.round(p.x, 2).tolist()) for p in minima[:2])
        print(f"  alpha**2={a2:8.4f}  {len(minima)} minima, {hits} with oracle signs  {shown}")

    rng = np.random.default_rng(args.seed)
    dists = list(Distribution)
    tally = {}
    skipped = 0
    for k in range(args.count):
        n = int(rng.integers(args.n_min, args.n_max + 1))
        dist = dists[k % len(dists)]
        out = probe(random_instance(InstanceSpec(n, dist, 1.0, args.seed * 100_000 + k)), args.margin, args.frac)
        if out is None:
            skipped += 1
            continue
        _, count, hits, _ = out
        row = tally.setdefault(dist.value, [0, 0, 0])
        row[0] += 1
        row[1] += count == 2
        row[2] += count == 2 and hits == 2
    print(f"\nbeta=lambda_1+{args.margin}, frac={args.frac}, n in [{args.n_min}, {args.n_max}], "
          f"{skipped} skipped (degenerate top eigenvalue)")
    print(f"{'distribution':<16}{'instances':>10}{'two minima':>12}{'ground state':>14}")
    for dist, (total, pair, good) in tally.items():
        print(f"{dist:<16}{total:>10}{pair:>12}{good:>14}   ({100 * good / max(pair, 1):.0f}%)")


if __name__ == "__main__":
    main()
