"""Time full-batch epochs of GAT and GCN on a dataset directory.

    python3 scripts/time_epochs.py data-synthetic/cora --epochs 20
"""
import argparse
import time

from imbalgat import graphio, trainer
from imbalgat.config import ModelConfig, TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dataset")
    ap.add_argument("--epochs", type=int, default=20)
    args = ap.parse_args()
    ds = graphio.load_dataset(args.dataset)
    minority = graphio.default_minority_classes(ds)
    split = graphio.make_split(ds, minority_classes=minority)
    print(f"{ds.name}: {ds.num_nodes} nodes, {ds.num_slots} CSR slots, {ds.num_features} features")
    for kind in ("gat", "gcn"):
        cfg = TrainConfig(model=ModelConfig(kind), epochs=args.epochs)
        start = time.perf_counter()
        trainer.train(ds, split, cfg, minority, keep_params=False)
        per = (time.perf_counter() - start) / args.epochs
        print(f"{kind}: {per * 1000:.0f} ms/epoch, {per * 300:.0f} s per 300-epoch run")


if __name__ == "__main__":
    main()
