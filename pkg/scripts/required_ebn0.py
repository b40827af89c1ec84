"""Eb/N0 needed for BER 1e-3 with exact and perturbed channel knowledge."""
import argparse
import csv
import sys

from chaoscomm.harness import ExperimentConfig, required_ebn0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=float, default=1e-3)
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3])
    ap.add_argument("--target-errors", type=int, default=400)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["paths", "epsilon", "policy", "required_ebn0_db"])
    for delays in ((0.0, 1.0), (0.0, 1.0, 2.0)):
        for eps in args.epsilons:
            for policy in ("subopt", "mmse"):
                cfg = ExperimentConfig(delays=delays, policy=policy, epsilon=eps, trials=None,
                                       target_errors=args.target_errors, workers=args.workers)
                db = required_ebn0(cfg, args.target, bracket=(4.0, 16.0))
                w.writerow([len(delays), eps, policy, f"{db:.3f}"])
                sys.stdout.flush()


if __name__ == "__main__":
    main()
