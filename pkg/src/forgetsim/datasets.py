"""Benchmark datasets for the two reference networks.

* z/v/n: 3x3 letter images classified by a single crossbar layer.  Pixels
  are encoded -1 (black) / +1 (white) and a constant -1 is appended as a
  tenth input to realize the bias.  The set is the 3 ideal letters plus
  every single-pixel flip of each (27 noisy images), 30 items total, with
  one-hot targets coded +-1.  No train/test split is made.

* circle: 2-D points in [-1, 1]^2 labeled +1 inside radius 0.5 and -1
  outside radius 0.7; nothing is generated in the annulus between, so the
  classes are cleanly separated.  Drawn by rejection sampling, 100 points
  by default, deterministic per seed.
"""

from __future__ import annotations

import numpy as np

# 1 = white, 0 = black; overridable for alternative glyph choices
ZVN_GRIDS = {
    "z": [[1, 1, 1], [0, 1, 0], [1, 1, 1]],
    "v": [[1, 0, 1], [1, 0, 1], [0, 1, 0]],
    "n": [[1, 0, 1], [1, 1, 1], [1, 0, 1]],
}


def make_zvn(grids: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """The 30-image letter set: (X, T) with X (30, 10) and T (30, 3)."""
    grids = grids if grids is not None else ZVN_GRIDS
    letters = list(grids)
    X, T = [], []
    for idx, letter in enumerate(letters):
        base = np.where(np.asarray(grids[letter]).ravel() > 0, 1.0, -1.0)
        target = -np.ones(len(letters))
        target[idx] = 1.0
        X.append(np.append(base, -1.0))
        T.append(target)
        for flip in range(base.size):
            noisy = base.copy()
            noisy[flip] *= -1.0
            X.append(np.append(noisy, -1.0))
            T.append(target.copy())
    return np.array(X), np.array(T)


def make_circle(n_points: int = 100, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Rejection-sampled circle task: (X, T) with X (n, 2) and T (n, 1)."""
    if n_points <= 0:
        raise ValueError("n_points must be positive")
    rng = np.random.default_rng(seed)
    points, labels = [], []
    while len(points) < n_points:
        p = rng.uniform(-1.0, 1.0, 2)
        r = np.hypot(*p)
        if r <= 0.5 or r >= 0.7:
            points.append(p)
            labels.append(1.0 if r <= 0.5 else -1.0)
    return np.array(points), np.array(labels)[:, None]
