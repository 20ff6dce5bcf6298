"""Rank-correlation metric used to score generalization predictions."""

from __future__ import annotations

import warnings

import numpy as np


class DegenerateRankingWarning(UserWarning):
    """A constant list was scored; tau is 0 by convention."""


def kendall_tau(pred, target) -> float:
    """Kendall's tau-b (tie-corrected) between two equal-length lists.

    Returns 0.0 with a warning when either list is constant, since the
    tie-corrected denominator vanishes there.
    """
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("kendall_tau expects two equal-length 1-D lists")
    n = x.size
    if n < 2:
        raise ValueError("kendall_tau needs at least two entries")
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, k=1)
    prod = sx[iu] * sy[iu]
    concordant = int(np.sum(prod > 0))
    discordant = int(np.sum(prod < 0))
    ties_x = int(np.sum(sx[iu] == 0))
    ties_y = int(np.sum(sy[iu] == 0))
    n0 = n * (n - 1) // 2
    denom = (n0 - ties_x) * (n0 - ties_y)
    if denom <= 0:
        warnings.warn("constant list in kendall_tau; returning 0.0",
                      DegenerateRankingWarning)
        return 0.0
    return (concordant - discordant) / np.sqrt(float(denom))
