"""Dormand-Prince 5(4) stepping, batched over trajectories.

Only the stepping kernel and the step-size rule live here; the trajectory
loops (landing on radii, escape tests, guard radius) are in :mod:`flow`.
Every row of a batch carries its own step size, so a batch of independent
trajectories advances in lock-step without sharing ``h``.
"""

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
ORDER = 5


def step(f, y, h):
    """One DP5(4) step of the autonomous system y' = f(y).

    ``y`` has shape (B, d) and ``h`` shape (B,).  Returns the fifth-order
    update and the embedded error estimate, both (B, d).
    """
    hb = h[:, None]
    k = [f(y)]
    for i in range(1, 7):
        inc = sum(a * kj for a, kj in zip(A[i], k) if a != 0.0)
        k.append(f(y + hb * inc))
    y_new = y + hb * sum(b * kj for b, kj in zip(B5, k) if b != 0.0)
    err = hb * sum(e * kj for e, kj in zip(E, k) if e != 0.0)
    return y_new, err


def error_ratio(err, y_old, y_new, atol, rtol, rel_mask):
    """Max-norm error relative to tolerance, per row.

    Components with ``rel_mask`` False are controlled against unit scale
    (absolute); the others against their own magnitude.
    """
    mag = np.maximum(np.abs(y_old), np.abs(y_new))
    scale = atol + rtol * np.where(rel_mask, mag, 1.0)
    return np.max(np.abs(err) / scale, axis=1)


def next_step(h, ratio):
    with np.errstate(divide="ignore"):
        factor = SAFETY * ratio ** (-1.0 / ORDER)
    factor = np.where(ratio == 0.0, MAX_FACTOR, factor)
    return h * np.clip(factor, MIN_FACTOR, MAX_FACTOR)


def fixed_steps(f, y0, hs, substeps=1):
    """Integrate with a prescribed step sequence; returns states after each step.

    Used to replay a trajectory's step grid with an augmented state (Jacobi
    frames) or with perturbed initial data, so that finite differences over
    the initial data differentiate one smooth discrete map.
    """
    y = np.atleast_2d(np.asarray(y0, dtype=float))
    out = [y[0].copy()] if y.shape[0] == 1 else [y.copy()]
    for h in hs:
        hh = np.full(y.shape[0], h / substeps)
        for _ in range(substeps):
            y, _ = step(f, y, hh)
        out.append(y[0].copy() if y.shape[0] == 1 else y.copy())
    return np.array(out)
