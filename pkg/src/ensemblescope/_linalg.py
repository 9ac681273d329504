"""Deterministic principal-component extraction shared by layouts and metrics."""

from __future__ import annotations

import numpy as np

_MAX_ITER = 1000
_TOL = 1e-9
_START_SEED = 0x5EED


def principal_components(centered: np.ndarray, n_components: int) -> tuple[np.ndarray, np.ndarray]:
    """Top principal directions of already-centered data.

    Power iteration with deflation on the covariance matrix, at most 1000
    iterations per component or until the direction moves by less than 1e-9.
    Each returned loading vector has non-negative sum (first nonzero entry
    positive when the sum is exactly zero), so signs are reproducible.

    Returns (components, eigenvalues) with components of shape
    (n_components, D).
    """
    n, d = centered.shape
    cov = (centered.T @ centered) / max(n - 1, 1)
    comps = np.zeros((n_components, d))
    eigvals = np.zeros(n_components)
    rng = np.random.RandomState(_START_SEED)
    for k in range(n_components):
        v = rng.standard_normal(d)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            v = np.zeros(d)
            v[0] = 1.0
        else:
            v /= nrm
        for _ in range(_MAX_ITER):
            w = cov @ v
            nrm = np.linalg.norm(w)
            if nrm < 1e-300:
                break  # nothing left: zero covariance in the deflated space
            w /= nrm
            if np.linalg.norm(w - v) < _TOL:
                v = w
                break
            v = w
        lam = float(v @ cov @ v)
        v = _fix_sign(v)
        comps[k] = v
        eigvals[k] = max(lam, 0.0)
        cov = cov - lam * np.outer(v, v)
    return comps, eigvals


def _fix_sign(v: np.ndarray) -> np.ndarray:
    s = float(v.sum())
    if s < 0:
        return -v
    if s == 0:
        nz = np.flatnonzero(v)
        if len(nz) and v[nz[0]] < 0:
            return -v
    return v
