"""Regenerate the shipped quasi-cyclic LDPC codes under src/ftnlab/assets/codes/.

Each code has n = 1200 (24 block columns of 50x50 circulants). Information
columns have weight 3 with shifts drawn to avoid length-4 cycles; the parity
part is a block staircase, so H has full row rank and the rate is exact.

    python scripts/make_codes.py
"""

import itertools
from pathlib import Path

import numpy as np

from ftnlab.coding import write_alist

Z = 50
NB = 24
OUT = Path(__file__).resolve().parents[1] / "src" / "ftnlab" / "assets" / "codes"


def _has_4cycle(base):
    mb, nb = base.shape
    for i1, i2 in itertools.combinations(range(mb), 2):
        for j1, j2 in itertools.combinations(range(nb), 2):
            s = base[[i1, i1, i2, i2], [j1, j2, j1, j2]]
            if np.all(s >= 0) and (s[0] - s[1] + s[3] - s[2]) % Z == 0:
                return True
    return False


def base_matrix(mb, seed):
    rng = np.random.default_rng(seed)
    kb = NB - mb
    base = -np.ones((mb, NB), dtype=int)
    for i in range(mb):
        base[i, kb + i] = 0
        if i:
            base[i, kb + i - 1] = 0
    for j in range(kb):
        rows = rng.choice(mb, size=3, replace=False)
        for _ in range(500):
            base[:, j] = -1
            base[rows, j] = rng.integers(0, Z, size=3)
            if not _has_4cycle(base):
                break
        else:
            raise RuntimeError(f"could not place column {j} without 4-cycles")
    return base


def expand(base):
    mb, nb = base.shape
    h = np.zeros((mb * Z, nb * Z), dtype=np.uint8)
    eye = np.eye(Z, dtype=np.uint8)
    for i in range(mb):
        for j in range(nb):
            if base[i, j] >= 0:
                h[i * Z:(i + 1) * Z, j * Z:(j + 1) * Z] = np.roll(eye, base[i, j], axis=1)
    return h


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for mb, name, seed in [(12, "qc_n1200_r12.alist", 12), (6, "qc_n1200_r34.alist", 34)]:
        h = expand(base_matrix(mb, seed))
        write_alist(h, OUT / name)
        print(f"{name}: {h.shape[0]} x {h.shape[1]}, {int(h.sum())} edges")


if __name__ == "__main__":
    main()
