"""Observability and controllability Gramians and their constants.

Quadrature is composite Simpson on the system grid (fourth order,
matching the propagator).  Propagator products are accumulated from the
stored steps, so all Gramians are consistent with the table's cocycle
structure.  Eigen-extremes come from full Hermitian eigendecompositions;
this is a desk-scale toolkit and reliability beats speed.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import clamp_psd_floor, eigh_extremes, hermitize, op_norm, pencil_min_eig
from ._quadrature import simpson_weights
from .errors import MissingControl, MissingObservation
from .evolution import EvolutionTable
from .system import ObservationFamily, SystemSpec, TimeGrid

#: eigenvalue clamp threshold, relative to lambda_max
TOL_EIG = 1e-10


@dataclass(frozen=True)
class GramianReport:
    """Hermitian PSD Gramian with its extremal eigen-data."""

    G: np.ndarray
    lambda_min: float
    lambda_max: float
    v_min: np.ndarray
    kind: str

    @staticmethod
    def from_matrix(g: np.ndarray, kind: str) -> "GramianReport":
        g = hermitize(g)
        lmin, lmax, vmin = eigh_extremes(g)
        lmin = clamp_psd_floor(lmin, lmax, TOL_EIG)
        return GramianReport(G=g, lambda_min=lmin, lambda_max=lmax, v_min=vmin, kind=kind)


def _require_even(grid: TimeGrid) -> None:
    if grid.n_steps % 2:
        raise ValueError("Gramian quadrature requires an even n_steps")


def _c_nodes(sys: SystemSpec) -> np.ndarray:
    if sys.C is None:
        raise MissingObservation("system has no observation family")
    return np.stack([sys.C.at(t) for t in sys.grid.nodes])


def _b_nodes(sys: SystemSpec) -> np.ndarray:
    if sys.B is None:
        raise MissingControl("system has no control family")
    return np.stack([sys.B.at(t) for t in sys.grid.nodes])


def _obs_accumulate(c: np.ndarray, u: EvolutionTable, s: int) -> np.ndarray:
    grid = u.grid
    n = u.dim
    w = simpson_weights(grid.n_steps - s, grid.dt)
    g = np.zeros((n, n), dtype=complex)
    m = np.eye(n, dtype=complex)
    for offset, wl in enumerate(w):
        l = s + offset
        if offset > 0:
            m = u.steps[l - 1] @ m
        e = c[l] @ m
        g += wl * (e.conj().T @ e)
    return g


def observability_gramian(sys: SystemSpec, u: EvolutionTable, s: int = 0) -> GramianReport:
    """G_s = integral over [t_s, tau] of U(t,t_s)* C(t)* C(t) U(t,t_s) dt.

    lambda_min of G_0 is the exact-observability constant kappa_tau of the
    discrete system; v_min is the hardest-to-observe direction.
    """
    _require_even(sys.grid)
    g = _obs_accumulate(_c_nodes(sys), u, s)
    return GramianReport.from_matrix(g, kind="observability-from-s")


def admissibility_sweep(
    sys: SystemSpec, u: EvolutionTable, stride: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(s indices, lambda_min(G_s), lambda_max(G_s)) over starting nodes."""
    _require_even(sys.grid)
    c = _c_nodes(sys)
    idx = list(range(0, sys.grid.n_steps, stride))
    lmins, lmaxs = [], []
    for s in idx:
        vals = np.linalg.eigvalsh(hermitize(_obs_accumulate(c, u, s)))
        lmins.append(float(vals[0]))
        lmaxs.append(float(vals[-1]))
    return np.asarray(idx), np.asarray(lmins), np.asarray(lmaxs)


def admissibility_constant(sys: SystemSpec, u: EvolutionTable, stride: int = 1) -> float:
    """M_tau with M_tau^2 = max over starting nodes s of lambda_max(G_s)."""
    _, _, lmaxs = admissibility_sweep(sys, u, stride=stride)
    return float(np.sqrt(np.max(lmaxs)))


def final_time_constant(sys: SystemSpec, u: EvolutionTable) -> float:
    """Largest kappa with G_0 >= kappa U(tau,0)* U(tau,0) (pencil minimum)."""
    g0 = observability_gramian(sys, u, 0).G
    u_final = u.final()
    f = u_final.conj().T @ u_final
    kappa = pencil_min_eig(g0, f)
    return max(kappa, 0.0) if abs(kappa) < 1e-12 * max(op_norm(g0), 1.0) else kappa


def averaged_output_moment(c: ObservationFamily, grid: TimeGrid) -> np.ndarray:
    """P_bar = (1/tau) integral of C(s)* C(s) ds (Hermitian PSD)."""
    w = simpson_weights(grid.n_steps, grid.dt)
    p = np.zeros((c.state_dim, c.state_dim), dtype=complex)
    for wl, t in zip(w, grid.nodes):
        cl = c.at(t)
        p += wl * (cl.conj().T @ cl)
    return hermitize(p / grid.tau)


def averaged_gramian(sys: SystemSpec, u: EvolutionTable) -> GramianReport:
    """G_avg = integral of U(t,0)* P_bar U(t,0) dt.

    The quadratic form x* G_avg x equals the (1/tau)-scaled double
    integral of |C(s) U(t,0) x|^2 over [0,tau]^2.
    """
    _require_even(sys.grid)
    if sys.C is None:
        raise MissingObservation("system has no observation family")
    grid = sys.grid
    p_bar = averaged_output_moment(sys.C, grid)
    w = simpson_weights(grid.n_steps, grid.dt)
    n = sys.dim
    g = np.zeros((n, n), dtype=complex)
    m = np.eye(n, dtype=complex)
    for l, wl in enumerate(w):
        if l > 0:
            m = u.steps[l - 1] @ m
        g += wl * (m.conj().T @ p_bar @ m)
    return GramianReport.from_matrix(g, kind="averaged")


def _forward_to_final(u: EvolutionTable) -> np.ndarray:
    """Stack V_l = U(tau, t_l), accumulated backward from V_N = I."""
    n_steps = u.grid.n_steps
    v = np.empty((n_steps + 1, u.dim, u.dim), dtype=complex)
    v[n_steps] = np.eye(u.dim)
    for l in range(n_steps - 1, -1, -1):
        v[l] = v[l + 1] @ u.steps[l]
    return v


def controllability_gramian(sys: SystemSpec, u: EvolutionTable, s: int = 0) -> GramianReport:
    """W_s = integral over [t_s, tau] of U(tau,r) B(r) B(r)* U(tau,r)* dr.

    In finite dimension lambda_min(W_0) > 0 is equivalent to exact
    controllability of the discrete system.
    """
    _require_even(sys.grid)
    b = _b_nodes(sys)
    v = _forward_to_final(u)
    grid = sys.grid
    w = simpson_weights(grid.n_steps - s, grid.dt)
    n = sys.dim
    g = np.zeros((n, n), dtype=complex)
    for offset, wl in enumerate(w):
        l = s + offset
        t = v[l] @ b[l]
        g += wl * (t @ t.conj().T)
    return GramianReport.from_matrix(g, kind="controllability")


def duality_defect(sys: SystemSpec, u: EvolutionTable, stride: int = 1) -> float:
    """Max over s of |W_s - G_retro(s)|.

    G_retro(s) is the observation Gramian of the retrograde adjoint
    output z -> B(t)* U(tau,t)* z, built from adjoint-accumulated
    states; W_s is built from forward products.  The two routes compute
    the same object, so the defect is a route-consistency check of the
    control/observation duality.
    """
    _require_even(sys.grid)
    b = _b_nodes(sys)
    grid = sys.grid
    n_steps = grid.n_steps
    n = sys.dim

    v = _forward_to_final(u)
    # retrograde route: Z_l = U(tau, t_l)* accumulated from adjoint steps
    z = np.empty_like(v)
    z[n_steps] = np.eye(n)
    for l in range(n_steps - 1, -1, -1):
        z[l] = u.steps[l].conj().T @ z[l + 1]

    worst = 0.0
    for s in range(0, n_steps, stride):
        w = simpson_weights(n_steps - s, grid.dt)
        w_fwd = np.zeros((n, n), dtype=complex)
        g_retro = np.zeros((n, n), dtype=complex)
        for offset, wl in enumerate(w):
            l = s + offset
            t = v[l] @ b[l]
            w_fwd += wl * (t @ t.conj().T)
            e = b[l].conj().T @ z[l]
            g_retro += wl * (e.conj().T @ e)
        worst = max(worst, op_norm(w_fwd - g_retro))
    return worst
