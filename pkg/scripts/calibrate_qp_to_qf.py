"""Calibrate the level-to-quality-factor table used for internal references.

The 64 compression levels span a distortion range from transparent to
severe.  This script measures mean reconstruction PSNR across a fixed
synthetic corpus for every quality factor, lays an affine PSNR ramp over
the levels, and picks for each level the factor whose measured PSNR sits
closest to the ramp.  The result is forced monotone (coarser level never
maps to a higher factor) with level 0 pinned to factor 100, then written
as a versioned JSON resource inside the package.

Run from the repository root:

    python3 scripts/calibrate_qp_to_qf.py
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from jrdkit.codec import decode, encode_uniform
from jrdkit.metrics import psnr_arrays
from jrdkit.toydata import make_natural_image

CORPUS_SEEDS = tuple(range(10))
IMAGE_SIZE = 128
OUT = Path(__file__).resolve().parent.parent / "src" / "jrdkit" / "data" / "qp_to_qf_v1.json"


def mean_psnr_by_qf() -> np.ndarray:
    corpus = [make_natural_image(seed, IMAGE_SIZE, IMAGE_SIZE) for seed in CORPUS_SEEDS]
    means = np.zeros(101)
    for qf in range(1, 101):
        vals = []
        for img in corpus:
            recon = decode(encode_uniform(img, qf).data)
            vals.append(psnr_arrays(img.pixels, recon.pixels))
        means[qf] = float(np.mean(vals))
        if qf % 20 == 0:
            print(f"  qf={qf:3d} mean psnr {means[qf]:.2f} dB")
    return means


def build_table(means: np.ndarray) -> list[int]:
    hi = means[100]
    lo = means[1]
    table = []
    for qp in range(64):
        target = hi + (lo - hi) * qp / 63.0
        qf = int(np.argmin(np.abs(means[1:] - target))) + 1
        table.append(qf)
    table[0] = 100
    for qp in range(1, 64):
        table[qp] = min(table[qp], table[qp - 1])
    return table


def main() -> None:
    t0 = time.time()
    print("measuring corpus PSNR over qf 1..100")
    means = mean_psnr_by_qf()
    table = build_table(means)
    assert len(table) == 64
    assert table[0] == 100
    assert all(b <= a for a, b in zip(table, table[1:])), "table must be non-increasing"
    OUT.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema_version": 1,
        "corpus": {"generator": "make_natural_image", "seeds": list(CORPUS_SEEDS), "size": IMAGE_SIZE},
        "qf_by_qp": table,
    }
    OUT.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"wrote {OUT} in {time.time() - t0:.1f}s")
    print("table:", table)


if __name__ == "__main__":
    main()
