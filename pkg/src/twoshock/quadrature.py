"""Deterministic reductions and grid quadrature.

All scalar reductions go through :func:`fixed_sum`, which rounds the exact
sum once (``math.fsum``).  The result therefore does not depend on array
layout, chunking or thread count, which is what makes reports reproducible
bit-for-bit.
"""
import math

import numpy as np


def fixed_sum(a) -> float:
    return math.fsum(np.ravel(a).tolist())


def axial_trapezoid(f, dx1: float) -> float:
    """Trapezoid rule along axis 0 of a cell-centred array; transverse axes averaged.

    The transverse directions are periodic with unit period, so their
    trapezoid rule reduces to the mean.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        f = f[:, None, None]
    n_tr = f.shape[1] * f.shape[2]
    g = f.copy()
    g[0] *= 0.5
    g[-1] *= 0.5
    return fixed_sum(g) * dx1 / n_tr


def l2_norm(f, dx1: float) -> float:
    return math.sqrt(axial_trapezoid(np.square(f), dx1))
