"""Small dense linear-algebra helpers shared across modules."""

import warnings

import numpy as np
import scipy.linalg

from .errors import NumericalWarning, SingularFinalState


def op_norm(m: np.ndarray) -> float:
    """Operator 2-norm (largest singular value)."""
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def hermitize(g: np.ndarray) -> np.ndarray:
    return 0.5 * (g + g.conj().T)


def eigh_extremes(g: np.ndarray) -> tuple[float, float, np.ndarray]:
    """(lambda_min, lambda_max, unit eigenvector of lambda_min) of Hermitian g."""
    vals, vecs = np.linalg.eigh(hermitize(g))
    return float(vals[0]), float(vals[-1]), vecs[:, 0]


def clamp_psd_floor(lambda_min: float, lambda_max: float, tol_factor: float = 1e-10) -> float:
    """Clamp a tiny negative eigenvalue of a theoretically-PSD matrix to 0.

    Violations within tol_factor * lambda_max are roundoff: clamp with a
    warning.  Anything larger indicates a genuine bug upstream.
    """
    if lambda_min >= 0.0:
        return lambda_min
    floor = -tol_factor * max(abs(lambda_max), 1e-300)
    if lambda_min >= floor:
        warnings.warn(
            f"clamping eigenvalue {lambda_min:.3e} of a PSD matrix to 0",
            NumericalWarning,
            stacklevel=3,
        )
        return 0.0
    raise FloatingPointError(
        f"matrix fails PSD check beyond roundoff: lambda_min={lambda_min:.3e}, "
        f"lambda_max={lambda_max:.3e}"
    )


def pencil_min_eig(g: np.ndarray, f: np.ndarray, singular_tol: float = 1e-13) -> float:
    """Smallest eigenvalue of the Hermitian pencil (g, f) with f positive definite."""
    f = hermitize(f)
    fvals = np.linalg.eigvalsh(f)
    if fvals[0] <= singular_tol * max(fvals[-1], 1e-300):
        raise SingularFinalState(
            f"pencil denominator numerically singular (lambda_min={fvals[0]:.3e})"
        )
    vals = scipy.linalg.eigh(hermitize(g), f, eigvals_only=True)
    return float(vals[0])


def pairwise_singular_extremes(
    steps: np.ndarray, dt: float, stride: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Extremal singular values of U(t_j, t_i) over node pairs i < j.

    Products are accumulated from the per-step propagators, never
    re-integrated.  With stride > 1 only pairs of subsampled nodes are
    reported (the final node is always included).

    Returns (sigma_min, sigma_max, gaps) flat arrays, gaps = t_j - t_i.
    """
    n_steps = steps.shape[0]
    dim = steps.shape[1]
    record = set(range(0, n_steps + 1, stride)) | {n_steps}
    mats = []
    gaps = []
    for i in sorted(record - {n_steps}):
        w = np.eye(dim, dtype=complex)
        for j in range(i + 1, n_steps + 1):
            w = steps[j - 1] @ w
            if j in record:
                mats.append(w.copy())
                gaps.append((j - i) * dt)
    if not mats:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    svals = np.linalg.svd(np.stack(mats), compute_uv=False)
    return svals[:, -1], svals[:, 0], np.asarray(gaps)
