"""End-to-end experiment driver.

Generates the seeded synthetic corpus, ranks channel pairs, compares the
three architectures at a matched connection budget (with a random-pruning
control), sweeps the training fraction, computes the spike-timing
information table, and writes an interpretability report for a trained TDE
net. Every artifact lands under --out-dir. Pass --quick for a minutes-scale
shakedown with reduced sizes; the default settings reproduce the full
comparison and take tens of minutes on one core.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tdekws.cli import main as cli


def step(name, argv):
    print(f"== {name}: tdekws {' '.join(argv)}")
    t0 = time.perf_counter()
    rc = cli(argv)
    if rc != 0:
        sys.exit(f"step {name!r} failed with exit code {rc}")
    print(f"   done in {time.perf_counter() - t0:.1f}s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quick", action="store_true",
                    help="small corpus, few epochs, one seed")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reps, epochs, seeds, tde_n, lifrec_n = (
        (8, 10, 1, 60, 12) if args.quick else (40, 100, 3, 540, 65)
    )
    corpus = out / "corpus.raster"
    ranked = out / "ranked.csv"

    step("generate", [
        "gen", "--seed", str(args.seed), "--reps", str(reps),
        "--out", str(corpus), "--csv", str(out / "tracks.csv"),
    ])
    step("rank", [
        "rank", "--data", str(corpus), "--out", str(ranked),
        "--plot", str(out / "ranking.png"),
    ])
    step("compare", [
        "compare", "--data", str(corpus), "--tde-sizes", str(tde_n),
        "--seeds", str(seeds), "--epochs", str(epochs),
        "--random-control", "--out-dir", str(out),
    ])
    step("sweep", [
        "sweep", "--data", str(corpus), "--tde-n", str(tde_n),
        "--lifrec-n", str(lifrec_n), "--fractions", "1.0,0.75",
        "--seeds", str(seeds), "--epochs", str(epochs),
        "--out-dir", str(out),
    ])
    step("info", [
        "info", "--data", str(corpus),
        "--delta-ts", "0.015,0.045,0.135,0.405",
        "--out", str(out / "info.csv"), "--plot", str(out / "info.png"),
    ])
    top = out / f"top{tde_n}.csv"
    step("prune", [
        "prune", "--ranked", str(ranked), "--keep", str(tde_n),
        "--out", str(top),
    ])
    run_dir = out / "tde_run"
    step("train", [
        "train", "--data", str(corpus), "--arch", "tde",
        "--ranked", str(top), "--epochs", str(epochs),
        "--out-dir", str(run_dir),
    ])
    step("interpret", [
        "interpret", "--model", str(run_dir / "model.json"),
        "--ranked", str(ranked), "--out", str(out / "interpret.json"),
        "--plot", str(out / "interpret.png"),
    ])
    print(f"all artifacts under {out}/")


if __name__ == "__main__":
    main()
