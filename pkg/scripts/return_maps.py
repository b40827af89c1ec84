"""Return-map point clouds before and after the matched filter."""
import argparse
from pathlib import Path

from chaoscomm.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--symbols", type=int, default=3000)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cases = {
        "single": ["--delays", "0"],
        "two_path_g09": ["--delays", "0", "1", "--gamma", "0.9"],
    }
    for name, chan in cases.items():
        for stage in ("received", "filtered"):
            cli(["return-map", *chan, "--stage", stage, "--symbols", str(args.symbols),
                 "--out", str(out / f"return_map_{name}_{stage}.csv")])
        cli(["return-map", *chan, "--stage", "filtered", "--symbols", str(args.symbols),
             "--ebn0-point", "20", "--out", str(out / f"return_map_{name}_filtered_20dB.csv")])


if __name__ == "__main__":
    main()
