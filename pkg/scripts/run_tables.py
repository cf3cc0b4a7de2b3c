"""Run every published comparison (t1 on both datasets, t4, t5) and print the tables.

    IMBALGAT_DATA_DIR=data python3 scripts/run_tables.py --seeds 5 --out runs/tables
"""
import argparse
import sys

from imbalgat import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="runs/tables")
    ap.add_argument("--dataset", help="directory holding cora/ and citeseer/")
    args = ap.parse_args()
    extra = ["--seeds", str(args.seeds), "--out", args.out]
    if args.dataset:
        extra += ["--dataset", args.dataset]
    # t1 on cora already holds every per-class value t4 needs, but t4/t5 keep their own files
    for argv in (["t1", "cora"], ["t1", "citeseer"], ["t4"], ["t5"]):
        code = cli.main(["reproduce", *argv, *extra])
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
