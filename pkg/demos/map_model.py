"""
Recover a variable-order Markov model from data.

A ternary source whose next-symbol law depends on one past symbol, or on
two when the last symbol was 2, is sampled; the context tree's MAP model
is printed as the sample grows, together with the CTW code length.
"""

import numpy as np

from ctq import ContextTree, Model

PARAMS = {(0,): [0.8, 0.1, 0.1], (1,): [0.1, 0.2, 0.7], (2, 0): [0.1, 0.8, 0.1],
          (2, 1): [0.6, 0.3, 0.1], (2, 2): [0.2, 0.2, 0.6]}
TRUE_MODEL = Model(PARAMS)


def sample(n, seed=0):
    rng = np.random.default_rng(seed)
    cdf = {s: np.cumsum(p) for s, p in PARAMS.items()}
    seq = [0, 0]
    for u in rng.random(n):
        leaf = (seq[-1],) if seq[-1] < 2 else (2, seq[-2])
        seq.append(int(np.searchsorted(cdf[leaf], u, side="right")))
    return seq[2:]


def main():
    seq = sample(20_000)
    tree = ContextTree(3, 2, gamma=0.5)
    done = 0
    print(f"true model: {TRUE_MODEL}")
    for n in (10, 100, 1000, 5000, 20_000):
        tree.extend(seq[done:n])
        done = n
        model = tree.ctm_prune()
        print(f"n={n:>6}  bits/symbol={-tree.ctw_log_prob() / n:.3f}  "
              f"MAP={model}  {'match' if model == TRUE_MODEL else ''}")


if __name__ == "__main__":
    main()
