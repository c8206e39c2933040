"""Hot time-stepping kernels with numba acceleration and a numpy fallback.

The package's only real inner loops are sequential linear recurrences
(best-response dynamics, VAR forecasting, shock-driven VAR simulation):
each step depends on the previous one, so they cannot be vectorized
across time. The loop bodies are JIT-compiled with numba when available;
set ``ATTNFLOW_NUMBA=0`` to force the pure-numpy path. Both paths share
the same call surface and agree to floating-point roundoff.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("ATTNFLOW_NUMBA", "1").strip().lower()
_want_numba = _env not in ("0", "false", "off", "no")

if _want_numba:
    try:
        from numba import njit
    except ImportError:
        njit = None
else:
    njit = None

USING_NUMBA = njit is not None


def _affine_steps_py(const, pis, history, steps, limit):
    p, k = pis.shape[0], const.shape[0]
    out = np.empty((steps, k))
    hist = history.copy()
    for t in range(steps):
        x = const.copy()
        for lag in range(p):
            x += pis[lag] @ hist[p - 1 - lag]
        out[t] = x
        if p > 1:
            hist[:-1] = hist[1:]
        hist[p - 1] = x
        if np.max(np.abs(x)) > limit:
            return out, t + 1, True
    return out, steps, False


def _affine_steps_noise_py(const, pis, history, shocks):
    p, k = pis.shape[0], const.shape[0]
    steps = shocks.shape[0]
    out = np.empty((steps, k))
    hist = history.copy()
    for t in range(steps):
        x = const + shocks[t]
        for lag in range(p):
            x += pis[lag] @ hist[p - 1 - lag]
        out[t] = x
        if p > 1:
            hist[:-1] = hist[1:]
        hist[p - 1] = x
    return out, steps, False


if USING_NUMBA:

    @njit(cache=True)
    def _affine_steps_nb(const, pis, history, steps, limit):  # pragma: no cover
        p = pis.shape[0]
        k = const.shape[0]
        out = np.empty((steps, k))
        hist = history.copy()
        for t in range(steps):
            peak = 0.0
            for i in range(k):
                acc = const[i]
                for lag in range(p):
                    row = pis[lag, i]
                    h = hist[p - 1 - lag]
                    for j in range(k):
                        acc += row[j] * h[j]
                out[t, i] = acc
            for lag in range(p - 1):
                for j in range(k):
                    hist[lag, j] = hist[lag + 1, j]
            for j in range(k):
                hist[p - 1, j] = out[t, j]
                a = abs(out[t, j])
                if a > peak:
                    peak = a
            if peak > limit:
                return out, t + 1, True
        return out, steps, False

    @njit(cache=True)
    def _affine_steps_noise_nb(const, pis, history, shocks):  # pragma: no cover
        p = pis.shape[0]
        k = const.shape[0]
        steps = shocks.shape[0]
        out = np.empty((steps, k))
        hist = history.copy()
        for t in range(steps):
            for i in range(k):
                acc = const[i] + shocks[t, i]
                for lag in range(p):
                    row = pis[lag, i]
                    h = hist[p - 1 - lag]
                    for j in range(k):
                        acc += row[j] * h[j]
                out[t, i] = acc
            for lag in range(p - 1):
                for j in range(k):
                    hist[lag, j] = hist[lag + 1, j]
            for j in range(k):
                hist[p - 1, j] = out[t, j]
        return out, steps, False

    _affine_steps_impl = _affine_steps_nb
    _affine_steps_noise_impl = _affine_steps_noise_nb
else:
    _affine_steps_impl = _affine_steps_py
    _affine_steps_noise_impl = _affine_steps_noise_py


def _as_f64(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def affine_steps(
    const: np.ndarray,
    pis: np.ndarray,
    history: np.ndarray,
    steps: int,
    limit: float = np.inf,
) -> tuple[np.ndarray, int, bool]:
    """Iterate ``x_t = const + sum_l pis[l] @ x_{t-1-l}`` for ``steps`` steps.

    ``history`` holds the p initial states in chronological order (last row
    is the most recent). Returns ``(path, n_done, diverged)``; iteration
    stops after the first step whose max-abs entry exceeds ``limit``, and
    only the first ``n_done`` rows of ``path`` are meaningful.
    """
    const = _as_f64(const, "const")
    pis = _as_f64(pis, "pis")
    history = _as_f64(history, "history")
    k = const.shape[0]
    if pis.ndim != 3 or pis.shape[1] != k or pis.shape[2] != k:
        raise ValueError(f"pis must have shape (p, {k}, {k}), got {pis.shape}")
    if history.shape != (pis.shape[0], k):
        raise ValueError(
            f"history must have shape ({pis.shape[0]}, {k}), got {history.shape}"
        )
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if steps == 0:
        return np.empty((0, k)), 0, False
    out, n_done, diverged = _affine_steps_impl(
        const, pis, history, steps, float(limit)
    )
    return out, int(n_done), bool(diverged)


def affine_steps_noise(
    const: np.ndarray,
    pis: np.ndarray,
    history: np.ndarray,
    shocks: np.ndarray,
) -> np.ndarray:
    """Like :func:`affine_steps` with an additive shock per step, no limit."""
    const = _as_f64(const, "const")
    pis = _as_f64(pis, "pis")
    history = _as_f64(history, "history")
    shocks = _as_f64(shocks, "shocks")
    k = const.shape[0]
    if shocks.ndim != 2 or shocks.shape[1] != k:
        raise ValueError(f"shocks must have shape (steps, {k}), got {shocks.shape}")
    if shocks.shape[0] == 0:
        return np.empty((0, k))
    out, _, _ = _affine_steps_noise_impl(const, pis, history, shocks)
    return out
