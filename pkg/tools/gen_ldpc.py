#!/usr/bin/env python3
"""Generate the parity-check matrices shipped in chunksdr/data.

Two codes, both rate 1/2, girth >= 6 (no 4-cycles), info columns first:

* ldpc_96_48.alist — (3,6)-regular, random construction, last 48 columns
  invertible over GF(2) so a dense systematic encoder exists.
* ldpc_3060_1530.alist — irregular repeat-accumulate structure: info columns
  of weight 3, parity part a unit lower bidiagonal accumulator, so encoding
  is a cumulative XOR.

Run from the repository root:  python3 tools/gen_ldpc.py
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "chunksdr" / "data"


def has_4cycle(col_rows: list[set]) -> bool:
    seen = set()
    for rows in col_rows:
        for pair in {(a, b) for a in rows for b in rows if a < b}:
            if pair in seen:
                return True
            seen.add(pair)
    return False


def gf2_invertible(mat: np.ndarray) -> bool:
    m = mat.copy() % 2
    n = m.shape[0]
    for col in range(n):
        pivots = np.nonzero(m[col:, col])[0]
        if pivots.size == 0:
            return False
        p = pivots[0] + col
        if p != col:
            m[[col, p]] = m[[p, col]]
        rows = np.nonzero(m[:, col])[0]
        rows = rows[rows != col]
        m[rows] ^= m[col]
    return True


def gen_regular(n: int, m: int, col_wt: int, row_wt: int, seed: int) -> np.ndarray:
    """Random (col_wt,row_wt)-regular binary matrix, no 4-cycles.

    Columns are filled one at a time, drawing rows with remaining capacity
    and rejecting any row pair already used; the whole matrix restarts when
    a column cannot be placed.
    """
    assert n * col_wt == m * row_wt
    rng = np.random.default_rng(seed)
    for restart in range(2000):
        degree = np.zeros(m, dtype=int)
        pair_seen: set[tuple[int, int]] = set()
        col_rows: list[list[int]] = []
        ok = True
        for c in range(n):
            placed = False
            for attempt in range(400):
                avail = np.nonzero(degree < row_wt)[0]
                if avail.size < col_wt:
                    break
                # bias toward under-filled rows to keep regularity achievable
                weight = (row_wt - degree[avail]).astype(float)
                rows = rng.choice(avail, size=col_wt, replace=False, p=weight / weight.sum())
                rows = sorted(int(r) for r in rows)
                pairs = {(a, b) for a in rows for b in rows if a < b}
                if pairs & pair_seen:
                    continue
                pair_seen |= pairs
                degree[rows] += 1
                col_rows.append(rows)
                placed = True
                break
            if not placed:
                ok = False
                break
        if ok and np.all(degree == row_wt):
            h = np.zeros((m, n), dtype=np.uint8)
            for c, rows in enumerate(col_rows):
                h[rows, c] = 1
            return h
    raise RuntimeError("no girth-6 regular graph found")


def permute_for_invertible_tail(h: np.ndarray, seed: int) -> np.ndarray:
    """Reorder columns so the last m columns are invertible over GF(2)."""
    m, n = h.shape
    rng = np.random.default_rng(seed)
    cols = np.arange(n)
    for attempt in range(5000):
        perm = rng.permutation(cols)
        if gf2_invertible(h[:, perm[n - m :]]):
            return h[:, perm]
    raise RuntimeError("no invertible tail found")


def gen_ira(n: int, m: int, col_wt: int, seed: int) -> np.ndarray:
    """Info columns of weight col_wt + accumulator parity tail, girth >= 6."""
    k = n - m
    rng = np.random.default_rng(seed)
    h = np.zeros((m, n), dtype=np.uint8)
    pair_seen: set[tuple[int, int]] = set()
    for c in range(k):
        for attempt in range(1000):
            rows = sorted(rng.choice(m, size=col_wt, replace=False))
            # no adjacent rows (4-cycles through the accumulator) and no
            # repeated row pair across info columns (4-cycles within A)
            if any(b - a == 1 for a, b in zip(rows, rows[1:])):
                continue
            pairs = {(a, b) for a in rows for b in rows if a < b}
            if pairs & pair_seen:
                continue
            pair_seen |= pairs
            h[rows, c] = 1
            break
        else:
            raise RuntimeError(f"column {c}: no row set found")
    for i in range(m):
        h[i, k + i] = 1
        if i + 1 < m:
            h[i + 1, k + i] = 1
    return h


def write_alist(h: np.ndarray, path: Path) -> None:
    m, n = h.shape
    col_rows = [np.nonzero(h[:, c])[0] + 1 for c in range(n)]
    row_cols = [np.nonzero(h[r, :])[0] + 1 for r in range(m)]
    max_col = max(len(x) for x in col_rows)
    max_row = max(len(x) for x in row_cols)
    lines = [f"{n} {m}", f"{max_col} {max_row}"]
    lines.append(" ".join(str(len(x)) for x in col_rows))
    lines.append(" ".join(str(len(x)) for x in row_cols))
    for x in col_rows:
        lines.append(" ".join(map(str, list(x) + [0] * (max_col - len(x)))))
    for x in row_cols:
        lines.append(" ".join(map(str, list(x) + [0] * (max_row - len(x)))))
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({n},{n-m})")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    h96 = permute_for_invertible_tail(gen_regular(96, 48, 3, 6, seed=101), seed=11)
    assert not has_4cycle([set(np.nonzero(h96[:, c])[0]) for c in range(96)])
    write_alist(h96, OUT / "ldpc_96_48.alist")

    h3060 = gen_ira(3060, 1530, 3, seed=202)
    write_alist(h3060, OUT / "ldpc_3060_1530.alist")


if __name__ == "__main__":
    main()
