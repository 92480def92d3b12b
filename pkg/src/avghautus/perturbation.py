"""Transfer of Hautus constants under bounded perturbations.

Everything here works in the toolkit convention x' = -A(t) x.  A
perturbed family is A(t) = A0 + R(t); builders that start from the
opposite generator convention (z' = (G + R) z) negate before
constructing the family, and the Duhamel check below takes the generator
G = -A0 side explicitly so the variation-of-constants identity reads
exactly as derived.

The transfer chain: an autonomous quadratic Hautus test for (A0, C) with
constants (m, M), together with the smallness quantity
mu = 2 M^2 avg |R(s)|^2 < 1, yields the averaged test for the perturbed
family with constants (m, sqrt(2) M) / sqrt(1 - mu).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ._linalg import op_norm, pairwise_singular_extremes
from ._quadrature import simpson_weights
from .errors import IndexOrder, MuTooLarge, NumericalWarning
from .evolution import EvolutionTable, apply
from .system import OperatorFamily, TimeGrid

#: mu above this is reported as a weak transfer (the (1-mu)^-1 inflation bites)
WEAK_TRANSFER = 0.5


def mu(r: OperatorFamily, big_m: float, grid: TimeGrid) -> float:
    """Smallness quantity 2 M^2 (1/tau) int |R(s)|^2 ds (operator norms)."""
    if big_m < 0:
        raise ValueError("need M >= 0")
    w = simpson_weights(grid.n_steps, grid.dt)
    norms_sq = np.array([op_norm(r.at(t)) ** 2 for t in grid.nodes])
    return float(2.0 * big_m**2 * np.dot(w, norms_sq) / grid.tau)


def sup_perturbation_norm(r: OperatorFamily, grid: TimeGrid) -> float:
    return max(op_norm(r.at(t)) for t in grid.nodes)


def transferred_constants(m: float, big_m: float, mu_value: float) -> tuple[float, float]:
    """(m, sqrt(2) M) / sqrt(1 - mu): the perturbed family's AH.2 constants."""
    if mu_value >= 1.0:
        raise MuTooLarge(f"mu = {mu_value:.4g} >= 1; transfer undefined")
    if mu_value >= WEAK_TRANSFER:
        warnings.warn(
            f"mu = {mu_value:.4g} >= {WEAK_TRANSFER}: weak transfer, constants inflate "
            f"by {1.0 / np.sqrt(1.0 - mu_value):.3g}",
            NumericalWarning,
            stacklevel=2,
        )
    scale = 1.0 / np.sqrt(1.0 - mu_value)
    return m * scale, float(np.sqrt(2.0) * big_m * scale)


def duhamel_residual(
    a0: np.ndarray,
    r: OperatorFamily,
    u: EvolutionTable,
    s: int,
    t: int,
    x: np.ndarray,
) -> float:
    """Defect of U(t,s)x - e^{(t-s)G}x = int_s^t e^{(t-r)G} R(r) U(r,s)x dr.

    a0 is the *generator* G of the unperturbed semigroup (z' = G z), so
    the table u must have been built for the toolkit family
    A(t) = -(a0 + R(t)).  The right-hand side uses exact matrix
    exponentials of a0 and composite Simpson in r; the residual decays
    like dt^4 for smooth R.
    """
    if s > t:
        raise IndexOrder(f"need s <= t, got s={s}, t={t}")
    grid = u.grid
    x = np.asarray(x, dtype=complex)
    lhs = apply(u, t, s, x) - expm((grid.nodes[t] - grid.nodes[s]) * np.asarray(a0, dtype=complex)) @ x
    if s == t:
        return float(np.linalg.norm(lhs))
    w = simpson_weights(t - s, grid.dt)
    e_step = expm(grid.dt * np.asarray(a0, dtype=complex))
    # factors e^{(t_t - t_l) a0}, accumulated downward from l = t
    factor = np.eye(u.dim, dtype=complex)
    rhs = np.zeros_like(x)
    states = [x]
    for l in range(s, t):
        states.append(u.steps[l] @ states[-1])
    for offset in range(t - s, -1, -1):
        l = s + offset
        rhs += w[offset] * (factor @ (r.at(grid.nodes[l]) @ states[offset]))
        if offset > 0:
            factor = factor @ e_step
    return float(np.linalg.norm(lhs - rhs))


def quasi_contraction_check(u: EvolutionTable, beta_sup: float, stride: int = 1) -> float:
    """Worst violation of e^{-beta dt} <= sigma(U(t,s)) <= e^{beta dt}.

    Valid for families A0 + R(t) with A0 skew-adjoint and
    beta_sup = sup |R(t)|; returns the largest positive part over node
    pairs of both one-sided violations.
    """
    smin, smax, gaps = pairwise_singular_extremes(u.steps, u.grid.dt, stride=stride)
    if smin.size == 0:
        return 0.0
    upper = smax - np.exp(beta_sup * gaps)
    lower = np.exp(-beta_sup * gaps) - smin
    return float(max(np.max(upper), np.max(lower), 0.0))


def admissibility_transfer(
    k_tau: float, r: OperatorFamily, u: EvolutionTable, grid: TimeGrid | None = None
) -> float:
    """Upper bound K' on the perturbed squared admissibility constant.

    K' = 2 K_tau (1 + int_0^tau |R(r)|^2 G(r)^2 dr) with the measured
    growth factor G(r) = sup_{s <= r} sigma_max(U(r,s)).  k_tau is the
    squared admissibility constant of the unperturbed pair; the measured
    perturbed constant M_tau^2 never exceeds K'.
    """
    if grid is None:
        grid = u.grid
    n_steps = grid.n_steps
    dim = u.dim
    # growth factor per node: walk products forward from every start
    growth = np.zeros(n_steps + 1)
    growth[0] = 1.0
    for s in range(0, n_steps):
        w = np.eye(dim, dtype=complex)
        for j in range(s + 1, n_steps + 1):
            w = u.steps[j - 1] @ w
            growth[j] = max(growth[j], op_norm(w))
    growth = np.maximum(growth, 1.0)  # s = r term: U(r,r) = I
    wq = simpson_weights(n_steps, grid.dt)
    norms_sq = np.array([op_norm(r.at(t)) ** 2 for t in grid.nodes])
    integral = float(np.dot(wq, norms_sq * growth**2))
    return 2.0 * k_tau * (1.0 + integral)


def holder_observation_floor(
    kappa_avg: float, l0: float, alpha: float, tau: float
) -> tuple[float, float, bool]:
    """Floor on the single-operator output energy under Hoelder-varying C.

    For |C(t) - C(s)| <= l0 |t-s|^alpha the averaged inequality with
    constant kappa_avg implies int |C(t) U(t,0) x|^2 dt >=
    (kappa_avg - 2 l0^2 tau^{2 alpha + 2} / ((2 alpha + 1)(alpha + 1)))
    / (2 tau) |x|^2.  Returns (hoelder term, floor, floor > 0).
    """
    if alpha <= 0 or l0 < 0:
        raise ValueError("need alpha > 0 and l0 >= 0")
    hoelder = 2.0 * l0**2 * tau ** (2.0 * alpha + 2.0) / ((2.0 * alpha + 1.0) * (alpha + 1.0))
    floor = (kappa_avg - hoelder) / (2.0 * tau)
    return hoelder, floor, floor > 0.0


@dataclass(frozen=True)
class PerturbationReport:
    beta_sup: float
    mu: float
    m_prime: float | None
    M_prime: float | None
    duhamel_residual: float
    K_adm_transferred: float
    weak_transfer: bool
