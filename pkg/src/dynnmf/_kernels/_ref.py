"""Pure-NumPy reference implementation of the family kernels.

Same contract as the compiled module ``_fast``: given flat float64 arrays
``theta`` (intensities/rates) and ``y`` (observations), return the summed
log-likelihood and, on request, the per-cell score and curvature in theta.
A domain violation yields ``-inf`` (zero likelihood), never an exception;
callers decide whether that is an error or a rejected line-search step.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def poisson_stats(theta: np.ndarray, y: np.ndarray, derivs: bool = False):
    """Poisson cells: loglik (without the -lgamma(y+1) constant), score, curvature.

    loglik = sum(y*log(theta) - theta) with the 0*log(0) = 0 convention;
    score = y/theta - 1; curv = -y/theta**2. Domain violation (theta < 0,
    or theta == 0 with y > 0) returns (-inf, None, None).
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = y > 0.0
    if np.any(theta < 0.0) or np.any(pos & (theta == 0.0)):
        return -np.inf, None, None
    safe = np.where(pos, theta, 1.0)
    ll = float(np.sum(np.where(pos, y * np.log(safe), 0.0)) - theta.sum())
    if not derivs:
        return ll, None, None
    score = np.where(pos, y / safe, 0.0) - 1.0
    curv = -np.where(pos, y / safe**2, 0.0)
    return ll, score, curv


def exponential_stats(theta: np.ndarray, y: np.ndarray, derivs: bool = False):
    """Exponential cells with rate theta: loglik, score, curvature.

    loglik = sum(log(theta) - theta*y); score = 1/theta - y;
    curv = -1/theta**2. Any theta <= 0 returns (-inf, None, None).
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(theta <= 0.0):
        return -np.inf, None, None
    ll = float(np.sum(np.log(theta)) - np.sum(theta * y))
    if not derivs:
        return ll, None, None
    inv = 1.0 / theta
    return ll, inv - y, -(inv**2)
