"""Synthetic keyword-classification tasks for desk-scale runs and tests.

Sentences are filler tokens with a few class-specific keywords planted at
random positions; the label is fully determined by the planted keywords, so
attention has something concrete to find.
"""

from __future__ import annotations

import argparse
import os

import numpy as np


def make_keyword_task(n_train=200, n_dev=50, classes=2, keywords_per_class=3,
                      plants_per_sentence=1, n_fillers=80, min_len=5, max_len=15, seed=7):
    """Two lists of ``label<TAB>tokens`` lines (train, dev)."""
    rng = np.random.default_rng(seed)
    fillers = [f"f{i:02d}" for i in range(n_fillers)]
    keywords = [[f"kw{c}_{j}" for j in range(keywords_per_class)] for c in range(classes)]

    def sentence(label):
        length = int(rng.integers(min_len, max_len + 1))
        toks = [fillers[int(rng.integers(n_fillers))] for _ in range(length)]
        plants = min(plants_per_sentence, length)
        positions = rng.choice(length, size=plants, replace=False)
        for pos in positions:
            toks[int(pos)] = keywords[label][int(rng.integers(keywords_per_class))]
        return f"{label}\t{' '.join(toks)}"

    def split(n):
        return [sentence(i % classes) for i in range(n)]

    return split(n_train), split(n_dev)


def make_pair_task(n_train=120, n_dev=40, n_fillers=40, min_len=4, max_len=8, seed=7):
    """Sentence-pair task: label 1 when both sentences carry the same marker."""
    rng = np.random.default_rng(seed)
    fillers = [f"f{i:02d}" for i in range(n_fillers)]
    markers = ["ma", "mb"]

    def sentence(marker):
        length = int(rng.integers(min_len, max_len + 1))
        toks = [fillers[int(rng.integers(n_fillers))] for _ in range(length)]
        toks[int(rng.integers(length))] = marker
        return " ".join(toks)

    def pair(label):
        first = markers[int(rng.integers(2))]
        second = first if label == 1 else markers[markers.index(first) ^ 1]
        return f"{label}\t{sentence(first)}\t{sentence(second)}"

    def split(n):
        return [pair(i % 2) for i in range(n)]

    return split(n_train), split(n_dev)


def write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv=None):
    parser = argparse.ArgumentParser(description="generate a toy keyword-classification dataset")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--train", type=int, default=200)
    parser.add_argument("--dev", type=int, default=50)
    parser.add_argument("--classes", type=int, default=2)
    parser.add_argument("--keywords-per-class", type=int, default=3)
    parser.add_argument("--plants", type=int, default=1)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--pairs", action="store_true", help="emit a sentence-pair task instead")
    args = parser.parse_args(argv)

    os.makedirs(args.out_dir, exist_ok=True)
    if args.pairs:
        train, dev = make_pair_task(args.train, args.dev, seed=args.seed)
    else:
        train, dev = make_keyword_task(args.train, args.dev, classes=args.classes,
                                       keywords_per_class=args.keywords_per_class,
                                       plants_per_sentence=args.plants, seed=args.seed)
    write_lines(os.path.join(args.out_dir, "train.txt"), train)
    write_lines(os.path.join(args.out_dir, "dev.txt"), dev)
    print(f"wrote {len(train)} train and {len(dev)} dev examples to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
