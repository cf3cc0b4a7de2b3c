"""Write planted-partition stand-ins shaped like Cora and Citeseer.

Class names and shares follow the real datasets so every code path (label order, minority
defaults, reproduce tables) runs end to end. The numbers they produce say nothing about the
real benchmarks.

    python3 scripts/make_synthetic.py --out data-synthetic
    IMBALGAT_DATA_DIR=data-synthetic imbalgat reproduce t1 cora --seeds 1
"""
import argparse
from pathlib import Path

from imbalgat import graphio, synthetic

SHAPES = {
    # name: (nodes, features, average degree)
    "cora": (2708, 1433, 3.9),
    "citeseer": (3312, 3703, 2.7),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data-synthetic")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--scale", type=float, default=1.0, help="shrink node counts for quick runs")
    args = ap.parse_args()
    for name, (nodes, feats, deg) in SHAPES.items():
        names = graphio.TABLE_LABEL_ORDER[name]
        shares = graphio.TABLE_PERCENTAGES[name]
        n = int(nodes * args.scale)
        sizes = [max(25, round(n * s / sum(shares))) for s in shares]
        synthetic.write_dataset(Path(args.out) / name, name, sizes, class_names=names,
                                num_features=feats, avg_degree=deg, seed=args.seed)
        print(f"{name}: {sum(sizes)} nodes, classes {dict(zip(names, sizes))}")


if __name__ == "__main__":
    main()
