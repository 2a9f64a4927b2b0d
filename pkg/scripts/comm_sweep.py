"""Measured verification traffic, naive vs optimized ordering, over vocabulary sizes."""

import argparse

import numpy as np

from specdec.compare import CompareBackend
from specdec.perf import comm_cost, comm_sweep_csv
from specdec.protocol import run_step
from specdec.ring import FixedPointConfig


class Fixed:
    def __init__(self, p):
        self.p = p
        self.vocab_size = len(p)

    def next_distribution(self, prefix):
        return self.p


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--vocab", default="8,64,256,1024")
    ap.add_argument("--ell", type=int, default=32)
    ap.add_argument("--chunk-bits", type=int, default=4)
    ap.add_argument("--gamma", type=int, default=4)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cfg = FixedPointConfig(args.ell, 12)
    rows = []
    for V in (int(v) for v in args.vocab.split(",")):
        pub, pri = Fixed(rng.dirichlet(np.ones(V))), Fixed(rng.dirichlet(np.ones(V)))
        for verifier in ("optimized", "naive"):
            variant = f"{verifier}_chunked"
            led = run_step(pub, pri, [], args.gamma, CompareBackend("chunked", args.chunk_bits), 0, cfg,
                           None, verifier).ledger
            assert led.total_bits == comm_cost(V, args.ell, args.gamma, args.chunk_bits, variant)
            rows.append((V, args.ell, args.chunk_bits, variant, led.total_bits))
    print(comm_sweep_csv(rows), end="")


if __name__ == "__main__":
    main()
