import numpy as np

from seamcam.masks import DenseMask


def random_dense(rng: np.random.Generator, height: int, width: int, p: float = 0.4) -> DenseMask:
    return DenseMask(height, width, rng.random((height, width)) < p)


def rect_dense(height: int, width: int, y0: int, x0: int, y1: int, x1: int) -> DenseMask:
    bits = np.zeros((height, width), dtype=bool)
    bits[y0:y1, x0:x1] = True
    return DenseMask(height, width, bits)
