"""Exposedness masks for mapped renditions.

A rendition carried from view i to exposure level j is unreliable
where the source view held no usable signal: near-black pixels cannot
be brightened faithfully and near-white pixels cannot be darkened.
The mask flags the usable pixels so the network can be conditioned on
where to trust its input.
"""

from __future__ import annotations

import numpy as np

DARK_LIMIT = 5
BRIGHT_LIMIT = 250

DIRECTIONS = ((1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2))


def exposedness_mask(source: np.ndarray, direction: tuple[int, int]) -> np.ndarray:
    """Binary (H, W) uint8 mask; 0 marks pixels the exposure change loses.

    Brightening (i < j) loses source pixels at or below DARK_LIMIT,
    darkening (i > j) loses pixels at or above BRIGHT_LIMIT. A pixel
    must survive in every channel to stay usable.
    """
    source = np.asarray(source)
    if source.ndim != 3 or source.shape[2] != 3:
        raise ValueError(f"source must be (H, W, 3), got {source.shape}")
    i, j = direction
    if direction not in DIRECTIONS:
        raise ValueError(f"invalid direction: {direction}")
    if i < j:
        keep = source > DARK_LIMIT
    else:
        keep = source < BRIGHT_LIMIT
    return np.logical_and.reduce(keep, axis=2).astype(np.uint8)
