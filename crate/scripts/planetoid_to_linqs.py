#!/usr/bin/env python3
"""Convert a Planetoid pickle bundle (ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index})
into the tab-separated `<name>.content` / `<name>.cites` layout that `ncsm convert --format linqs`
reads.

Planetoid inserts zero-feature placeholder rows for test indices that have no
content record. Those placeholders are dropped together with their edges, so the
output node count matches the original content file (e.g. 3312 for CiteSeer).

usage: planetoid_to_linqs.py <planetoid_dir> <name> <out_dir> [--gzip]
"""
import gzip
import os
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def load(root, name, part):
    with open(os.path.join(root, f"ind.{name}.{part}"), "rb") as f:
        return pickle.load(f, encoding="latin1")


def main():
    if len(sys.argv) < 4:
        print(__doc__, file=sys.stderr)
        return 1
    root, name, out = sys.argv[1], sys.argv[2], sys.argv[3]
    use_gzip = "--gzip" in sys.argv[4:]
    allx, tx = load(root, name, "allx"), load(root, name, "tx")
    ally, ty = load(root, name, "ally"), load(root, name, "ty")
    graph = load(root, name, "graph")
    with open(os.path.join(root, f"ind.{name}.test.index")) as f:
        test_index = [int(line) for line in f]

    n = len(graph)
    feats = sp.lil_matrix((n, allx.shape[1]))
    labels = np.full(n, -1)
    feats[: allx.shape[0]] = allx
    labels[: ally.shape[0]] = ally.argmax(1)
    present = np.zeros(n, dtype=bool)
    present[: allx.shape[0]] = True
    for row, idx in enumerate(test_index):
        feats[idx] = tx[row]
        labels[idx] = ty[row].argmax()
        present[idx] = True
    feats = feats.tocsr()

    os.makedirs(out, exist_ok=True)
    opener = (lambda p: gzip.open(p + ".gz", "wt")) if use_gzip else (lambda p: open(p, "w"))
    kept = [i for i in range(n) if present[i]]
    with opener(os.path.join(out, f"{name}.content")) as f:
        for i in kept:
            row = feats.getrow(i).toarray().ravel()
            vals = "\t".join("1" if v != 0 else "0" for v in row)
            f.write(f"{i}\t{vals}\tc{labels[i]}\n")
    seen = set()
    with opener(os.path.join(out, f"{name}.cites")) as f:
        for u in sorted(graph):
            for v in graph[u]:
                if not (present[u] and present[v]):
                    continue
                key = (min(u, v), max(u, v))
                if key in seen:
                    continue
                seen.add(key)
                f.write(f"{key[0]}\t{key[1]}\n")
    print(f"{name}: {len(kept)} nodes, {len(seen)} citation pairs (self-loops kept)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
