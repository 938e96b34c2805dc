#!/usr/bin/env python3
"""Export a downloaded OGB link-prediction dataset (e.g. dataset/ogbl_ddi) to the
CSV layout read by `ncsm convert --format ogb-csv`:

    <out>/num-node-list.csv(.gz)
    <out>/edge.csv(.gz)
    <out>/split/{train,valid,valid_neg,test,test_neg}.csv

OGB ships its edge split as torch pickles (split/<type>/{train,valid,test}.pt),
which is why this step needs Python and torch.

usage: ogb_export.py <ogb_dataset_dir> <out_dir>
"""
import os
import shutil
import sys

import torch


def write_pairs(path, pairs):
    pairs = pairs.reshape(-1, 2) if pairs.dim() == 1 else pairs
    with open(path, "w") as f:
        for u, v in pairs.tolist():
            f.write(f"{u},{v}\n")


def main():
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 1
    src, out = sys.argv[1], sys.argv[2]
    os.makedirs(os.path.join(out, "split"), exist_ok=True)

    for name in ("num-node-list.csv", "edge.csv"):
        for suffix in (".gz", ""):
            path = os.path.join(src, "raw", name + suffix)
            if os.path.exists(path):
                shutil.copy(path, os.path.join(out, name + suffix))
                break
        else:
            print(f"missing raw/{name}(.gz) under {src}", file=sys.stderr)
            return 1

    split_root = os.path.join(src, "split")
    kinds = [d for d in os.listdir(split_root) if os.path.isdir(os.path.join(split_root, d))]
    if len(kinds) != 1:
        print(f"expected one split type under {split_root}, found {kinds}", file=sys.stderr)
        return 1
    split_dir = os.path.join(split_root, kinds[0])
    for part in ("train", "valid", "test"):
        d = torch.load(os.path.join(split_dir, f"{part}.pt"), weights_only=False)
        write_pairs(os.path.join(out, "split", f"{part}.csv"), torch.as_tensor(d["edge"]))
        if part != "train":
            write_pairs(os.path.join(out, "split", f"{part}_neg.csv"), torch.as_tensor(d["edge_neg"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
