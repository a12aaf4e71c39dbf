#!/usr/bin/env python3
"""Download the LibSVM multiclass benchmark files into a data directory.

usage: scripts/fetch_datasets.py [DATA_DIR]   (default: ./data)

bz2 archives are decompressed. aloi ships without a test split, so
aloi.scale is shuffled with a fixed seed and split into aloi.tr (98000)
and aloi.t (10000).
"""

import bz2
import random
import sys
import urllib.request
from pathlib import Path

BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/multiclass/"
FILES = [
    "usps.bz2",
    "usps.t.bz2",
    "dna.scale",
    "dna.scale.t",
    "letter.scale",
    "letter.scale.t",
    "satimage.scale",
    "satimage.scale.t",
    "mnist.scale.bz2",
    "mnist.scale.t.bz2",
    "aloi.scale.bz2",
]
ALOI_SEED = 20120101
ALOI_TEST = 10000


def fetch(name: str, out_dir: Path) -> Path:
    target = out_dir / name.removesuffix(".bz2")
    if target.exists():
        print(f"have  {target}")
        return target
    print(f"fetch {BASE + name}")
    with urllib.request.urlopen(BASE + name) as resp:
        raw = resp.read()
    if name.endswith(".bz2"):
        raw = bz2.decompress(raw)
    target.write_bytes(raw)
    return target


def split_aloi(path: Path) -> None:
    train, test = path.with_name("aloi.tr"), path.with_name("aloi.t")
    if train.exists() and test.exists():
        return
    lines = path.read_text().splitlines(keepends=True)
    random.Random(ALOI_SEED).shuffle(lines)
    test.write_text("".join(lines[:ALOI_TEST]))
    train.write_text("".join(lines[ALOI_TEST:]))
    print(f"split {path} -> {train} ({len(lines) - ALOI_TEST}), {test} ({ALOI_TEST})")


def main() -> None:
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in FILES:
        path = fetch(name, out_dir)
        if path.name == "aloi.scale":
            split_aloi(path)


if __name__ == "__main__":
    main()
