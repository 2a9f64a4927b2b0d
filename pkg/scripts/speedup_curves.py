"""Speedup against acceptance ratio for several draft lengths, on LAN and WAN."""

import argparse
from pathlib import Path

import numpy as np

from specdec.perf import NETWORKS, DecoderCostProfile, length_profile_csv, length_latency, speedup, speedup_curve_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="curves")
    ap.add_argument("--gammas", default="2,4,8,16")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gammas = [int(g) for g in args.gammas.split(",")]
    alphas = np.round(np.linspace(0.0, 0.95, 20), 4)
    for name, net in NETWORKS.items():
        prof = DecoderCostProfile.from_table2(name, 8)
        # gammas without a measured sampling overhead reuse the gamma=8 figure
        prof.sampling_overhead.update({(name, g): prof.overhead(net, 8) for g in gammas
                                       if (name, g) not in prof.sampling_overhead})
        pts = [speedup(a, g, prof, net) for g in gammas for a in alphas]
        (out / f"speedup_{name}.csv").write_text(speedup_curve_csv(pts))
        (out / f"length_{name}.csv").write_text(
            length_profile_csv((n, length_latency(net, n)) for n in (1, 2, 4, 8, 16, 32)))
        best = max(pts, key=lambda p: p.speedup)
        print(f"{name}: peak {best.speedup:.2f}x at alpha={best.alpha}, gamma={best.gamma}")
        for a in (0.52, 0.7, 0.84):
            print(f"  alpha={a}: gamma=8 speedup {speedup(a, 8, prof, net).speedup:.2f}x")
    print(f"wrote CSVs to {out}/")


if __name__ == "__main__":
    main()
