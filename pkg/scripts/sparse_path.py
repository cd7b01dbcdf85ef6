"""Reduced-set size and test ARI along the group lasso and reweighted L1 paths."""

import argparse
import warnings

import numpy as np

from ksc.data import SplitSpec, split
from ksc.kernels import KernelSpec, gram
from ksc.metrics import ari
from ksc.model import train
from ksc.sparse import ConvergenceWarning, cluster_weights, sparse_predict, sparsify, zero_threshold
from ksc.synthetic import three_gaussians


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sigma2", type=float, default=0.02)
    args = ap.parse_args()
    warnings.simplefilter("ignore", ConvergenceWarning)

    tr, _, te = split(three_gaussians(600, seed=args.seed), SplitSpec((0.5, 0.2, 0.3), args.seed))
    kernel = KernelSpec("rbf", args.sigma2)
    model = train(tr, kernel, 3)
    omega = gram(kernel, tr.points)
    z = zero_threshold(omega, model.alphas, cluster_weights(model.train_labels))
    print(f"N_tr={len(tr)}  zero threshold={z:.4g}")

    print("group lasso\n  lambda/z   rows   ARI")
    for f in np.logspace(-2, 0, 10):
        red = sparsify(model, "group_lasso", lam=f * z, omega=omega)
        score = ari(sparse_predict(red, te), te.labels) if red.size else float("nan")
        print(f"  {f:8.4f} {red.size:6d} {score:6.3f}")

    print("reweighted L1\n       rho   rows   ARI")
    for rho in (0, 1e-2, 1, 10, 1e2, 1e3, 1e4):
        red = sparsify(model, "reweighted_l1", rho=rho, omega=omega)
        score = ari(sparse_predict(red, te), te.labels) if red.size else float("nan")
        print(f"  {rho:8.0e} {red.size:6d} {score:6.3f}")


if __name__ == "__main__":
    main()
