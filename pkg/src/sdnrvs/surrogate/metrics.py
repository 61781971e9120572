"""Ranking agreement between true and predicted index values."""

import numpy as np


def consistency(real, predicted, chunk: int = 2048) -> float:
    """Percentage of sample pairs ranked the same way by both vectors.

    A pair counts as agreeing when both vectors order it the same way, or
    when it is tied in both.  Work is done in row blocks so memory stays at
    ``O(chunk * H)``.

    Raises
    ------
    ValueError
        If the vectors differ in length or hold fewer than two values.
    """
    a = np.asarray(real, dtype=float).ravel()
    b = np.asarray(predicted, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    H = a.size
    if H < 2:
        raise ValueError("consistency needs at least two samples")
    agree = 0
    for start in range(0, H, chunk):
        stop = min(start + chunk, H)
        sa = np.sign(a[start:stop, None] - a[None, :])
        sb = np.sign(b[start:stop, None] - b[None, :])
        # upper triangle only: column index greater than row index
        rows = np.arange(start, stop)[:, None]
        upper = np.arange(H)[None, :] > rows
        agree += int(np.count_nonzero((sa == sb) & upper))
    return 100.0 * agree / (H * (H - 1) // 2)
