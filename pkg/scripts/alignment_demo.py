"""Distil a mismatched draft model toward a bigram target and report the acceptance ratio."""

import argparse

import numpy as np

from specdec.alignment import TrainLog, collect_distillation_set, estimate_acceptance, synthetic_task, train_align


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--vocab", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--top-k", type=int, default=5)
    ap.add_argument("--gamma", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--renormalize", action="store_true")
    args = ap.parse_args()

    task = synthetic_task(vocab_size=args.vocab, seed=args.seed)
    data = collect_distillation_set(task.target, task.prompts * 10, 24,
                                    np.random.default_rng(args.seed + 1), k=args.top_k)
    log = TrainLog()
    aligned = train_align(task.public, data, args.epochs, renormalize=args.renormalize, log=log)
    before = estimate_acceptance(task.target, task.public, task.prompts, args.gamma, 300, args.seed)
    after = estimate_acceptance(task.target, aligned, task.prompts, args.gamma, 300, args.seed)
    print(f"loss   {log.losses[0]:.3f} -> {log.losses[-1]:.3f}")
    print(f"alpha  {before.alpha:.3f} +- {before.stderr:.3f} -> {after.alpha:.3f} +- {after.stderr:.3f}")


if __name__ == "__main__":
    main()
