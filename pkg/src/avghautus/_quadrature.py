"""Composite Simpson weights for uniform grids.

Fourth order on any panel count >= 2: even counts use classic composite
Simpson, odd counts use Simpson on the leading panels plus a 3/8 closing
rule.  A single panel falls back to the trapezoid (only reachable for the
last subinterval of an s-sweep; its absolute contribution is O(dt^3)).
All weights are strictly positive, so weighted sums of PSD matrices stay
PSD.
"""

import numpy as np


def simpson_weights(n_panels: int, dt: float) -> np.ndarray:
    """Quadrature weights for nodes t_0..t_{n_panels} with spacing dt."""
    if n_panels < 0:
        raise ValueError("n_panels must be nonnegative")
    if n_panels == 0:
        return np.zeros(1)
    if n_panels == 1:
        return np.array([0.5, 0.5]) * dt
    w = np.zeros(n_panels + 1)
    if n_panels % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-2:2] = 2.0
        w *= dt / 3.0
    else:
        head = simpson_weights(n_panels - 3, dt)
        w[: n_panels - 2] += head
        w[n_panels - 3 :] += (3.0 * dt / 8.0) * np.array([1.0, 3.0, 3.0, 1.0])
    return w


def integrate_nodes(values: np.ndarray, dt: float) -> np.ndarray | complex:
    """Integrate node samples (first axis = time) by composite Simpson."""
    w = simpson_weights(values.shape[0] - 1, dt)
    return np.tensordot(w, values, axes=(0, 0))
