"""NumPy implementations of the inference hot loops.

The compiled backend in ``_ckernels.pyx`` mirrors these functions; the two
must agree within 1e-10 elementwise (checked in tests). Observed labels are
int32 class indices in [0, K) with -1 marking a missing prediction.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

# Coefficients B_2n / (2n) of the asymptotic expansion
# psi(x) ~ ln x - 1/(2x) - sum_n B_2n / (2n x^2n), applied after shifting
# the argument above 10 with the recurrence psi(x) = psi(x+1) - 1/x.
_C1 = 1.0 / 12.0
_C2 = -1.0 / 120.0
_C3 = 1.0 / 252.0
_C4 = -1.0 / 240.0
_C5 = 1.0 / 132.0
_C6 = -691.0 / 32760.0

_SHIFT = 10.0


def digamma(x):
    """Elementwise digamma for positive arguments, good to ~1e-13."""
    arr = np.array(x, dtype=np.float64, copy=True)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("digamma requires finite x > 0")
    acc = np.zeros_like(arr)
    mask = arr < _SHIFT
    while mask.any():
        acc[mask] -= 1.0 / arr[mask]
        arr[mask] += 1.0
        mask = arr < _SHIFT
    w = 1.0 / (arr * arr)
    tail = w * (_C1 + w * (_C2 + w * (_C3 + w * (_C4 + w * (_C5 + w * _C6)))))
    out = acc + np.log(arr) - 0.5 / arr - tail
    return float(out[0]) if scalar else out


def label_mass(qz: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Soft label-given-class counts: out[j,k,l] = sum_i qz[i,k]*[y_ij == l]."""
    n, k = qz.shape
    h = y.shape[1]
    out = np.zeros((h, k, k))
    for j in range(h):
        yj = y[:, j]
        for l in range(k):
            sel = yj == l
            if sel.any():
                out[j, :, l] = qz[sel].sum(axis=0)
    return out


def posterior_step(
    y: np.ndarray, elog_pi: np.ndarray, elog_v: np.ndarray
) -> tuple[np.ndarray, float]:
    """One mean-field posterior update over all instances.

    Returns the row-normalized posteriors and the summed log-normalizers,
    which equals the data, class-prior, and entropy part of the bound when
    the posterior is fresh.
    """
    n, h = y.shape
    k = elog_pi.shape[0]
    scores = np.broadcast_to(elog_pi, (n, k)).copy()
    for j in range(h):
        yj = y[:, j]
        obs = yj >= 0
        if obs.all():
            scores += elog_v[j][:, yj].T
        elif obs.any():
            scores[obs] += elog_v[j][:, yj[obs]].T
    mx = scores.max(axis=1)
    ex = np.exp(scores - mx[:, None])
    denom = ex.sum(axis=1)
    qz = ex / denom[:, None]
    lse = mx + np.log(denom)
    return qz, float(lse.sum())
