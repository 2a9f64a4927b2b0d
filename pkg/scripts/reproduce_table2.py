"""Secure-sampling seconds for the four network/gamma cells, naive vs optimized.

One constant (OT work per bit) is fitted on the naive LAN gamma=8 cell; the
other seven cells are predictions.
"""

import argparse

from specdec.perf import comm_cost, comm_rounds, table2_model, table2_predictions


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--csv", action="store_true", help="emit CSV instead of a table")
    args = ap.parse_args()
    model = table2_model()
    rows = table2_predictions(model)
    if args.csv:
        print("network,gamma,variant,reported_seconds,model_seconds,rel_error")
        for r in rows:
            print(f"{r['network']},{r['gamma']},{r['variant']},{r['paper_seconds']},"
                  f"{r['model_seconds']:.3f},{r['rel_error']:.3f}")
        return
    print(f"V={model.V} ell={model.ell} m={model.m} kappa={model.kappa:.3e} s/bit")
    for v in ("naive_chunked", "optimized_chunked"):
        print(f"  {v}: {comm_cost(model.V, model.ell, 8, model.m, v) / 8e6:.1f} MB, "
              f"{comm_rounds(model.ell, model.m, v)} rounds at gamma=8")
    print(f"{'net':>4} {'gamma':>5} {'variant':>6} {'reported':>9} {'model':>8} {'error':>7}")
    for r in rows:
        print(f"{r['network']:>4} {r['gamma']:>5} {r['variant']:>6} {r['paper_seconds']:>9.2f} "
              f"{r['model_seconds']:>8.2f} {r['rel_error']:>+7.1%}")


if __name__ == "__main__":
    main()
