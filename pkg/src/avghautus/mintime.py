"""Minimal observation times, Hardy constants and test functions.

Closed-form evaluations are exact up to floating point; optimization-based
quantities (optimal refinement parameter, Hardy supremum, criterion
maximum) use bracketed or grid searches with one local refinement, since
every objective here is smooth and unimodal in practice.  Hypothesis
failures are returned as Infeasible markers naming the violated
condition, never raised: sweep drivers tabulate them.
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.integrate import cumulative_trapezoid

from ._quadrature import simpson_weights
from .errors import BoundaryViolation, NegativeWeight
from .markers import INFINITE, Infeasible, Marker


def tau_star(big_m: float, lip: float) -> float | Infeasible:
    """Minimal certified time 2 pi M / sqrt(1 - 2 L^2 M^2) for skew families."""
    if big_m <= 0:
        raise ValueError("need M > 0")
    if lip < 0:
        raise ValueError("need L >= 0")
    if lip * np.sqrt(2.0) * big_m >= 1.0:
        return Infeasible("lipschitz-bound: need L < 1/(sqrt(2) M)")
    return float(2.0 * np.pi * big_m / np.sqrt(1.0 - 2.0 * lip**2 * big_m**2))


def tau_star_r(big_m: float, lip: float, r: float) -> float | Infeasible:
    """Refined minimal time pi M sqrt(1 + 1/r) / sqrt(1 - M^2 (1+r) L^2)."""
    if r <= 0:
        raise ValueError("need r > 0")
    if lip * big_m * np.sqrt(1.0 + r) >= 1.0:
        return Infeasible("lipschitz-bound: need L < 1/(M sqrt(1+r))")
    return float(
        np.pi * big_m * np.sqrt(1.0 + 1.0 / r) / np.sqrt(1.0 - big_m**2 * (1.0 + r) * lip**2)
    )


def optimal_r(big_m: float, lip: float) -> tuple[float | Marker, float | Infeasible]:
    """(r_opt, minimal refined time) over feasible r.

    For L = 0 the infimum pi M is approached as r -> infinity; the
    INFINITE marker records that the optimum is a limit, with the limit
    value returned.
    """
    if lip == 0.0:
        return INFINITE, float(np.pi * big_m)
    r_bar = 1.0 / (big_m * lip) ** 2 - 1.0
    if r_bar <= 0:
        return INFINITE, Infeasible("lipschitz-bound: need L < 1/M for some feasible r")

    def objective(log_r: float) -> float:
        val = tau_star_r(big_m, lip, float(np.exp(log_r)))
        return val if not isinstance(val, Infeasible) else np.inf

    lo, hi = np.log(r_bar) - 20.0, np.log(r_bar * (1.0 - 1e-12))
    res = scipy.optimize.minimize_scalar(
        objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13}
    )
    r_opt = float(np.exp(res.x))
    return r_opt, float(res.fun)


def sine_test_function(tau: float) -> tuple[Callable, Callable]:
    """First Dirichlet eigenfunction sin(pi t / tau) and its derivative."""

    def phi(t):
        return np.sin(np.pi * t / tau)

    def phi_prime(t):
        return (np.pi / tau) * np.cos(np.pi * t / tau)

    return phi, phi_prime


def kappa_phi(
    phi: Callable,
    phi_prime: Callable,
    big_m: float,
    lip: float,
    tau: float,
    n_quad: int = 4096,
    boundary_tol: float = 1e-9,
) -> float:
    """(1 - 2 L^2 M^2) int |phi|^2 - 2 M^2 int |phi'|^2 by quadrature.

    Positive values certify an averaged-observability floor kappa/m^2.
    phi must vanish at both endpoints.
    """
    t = np.linspace(0.0, tau, n_quad + 1)
    vals = np.asarray([phi(s) for s in t], dtype=float)
    scale = max(np.max(np.abs(vals)), 1.0)
    if abs(vals[0]) > boundary_tol * scale or abs(vals[-1]) > boundary_tol * scale:
        raise BoundaryViolation(
            f"phi(0) = {vals[0]:.3e}, phi(tau) = {vals[-1]:.3e}; need both ~ 0"
        )
    dvals = np.asarray([phi_prime(s) for s in t], dtype=float)
    w = simpson_weights(n_quad, tau / n_quad)
    int_phi2 = float(np.dot(w, vals**2))
    int_dphi2 = float(np.dot(w, dvals**2))
    return (1.0 - 2.0 * lip**2 * big_m**2) * int_phi2 - 2.0 * big_m**2 * int_dphi2


def kappa_phi_sine(big_m: float, lip: float, tau: float) -> float:
    """Closed form of kappa_phi at the sine test function."""
    return (1.0 - 2.0 * lip**2 * big_m**2) * tau / 2.0 - np.pi**2 * big_m**2 / tau


@dataclass(frozen=True)
class HardyResult:
    B: float
    x: float
    y: float


def hardy_B(
    w: Callable,
    v: Callable,
    tau: float,
    grid_resolution: int = 2000,
) -> HardyResult:
    """sup over 0 < x <= y < tau of (int_x^y w) min(int_0^x 1/v, int_y^tau 1/v).

    Grid search over cumulative integrals on a 4x-refined internal grid,
    followed by one local refinement pass around the coarse maximizer.
    The returned value is a lower bound of the true supremum.
    """
    refine = 4
    n_dense = grid_resolution * refine
    t = np.linspace(0.0, tau, n_dense + 1)
    wv = np.asarray([w(s) for s in t], dtype=float)
    vv = np.asarray([v(s) for s in t], dtype=float)
    if np.any(wv < -1e-12 * max(1.0, np.max(np.abs(wv)))):
        raise NegativeWeight("w must be nonnegative on [0, tau]")
    if np.any(vv <= 0.0):
        raise NegativeWeight("v must be strictly positive on [0, tau]")
    cum_w = cumulative_trapezoid(wv, t, initial=0.0)
    cum_inv_v = cumulative_trapezoid(1.0 / vv, t, initial=0.0)
    total_inv_v = cum_inv_v[-1]

    def best_over(idx_x: np.ndarray, idx_y: np.ndarray) -> tuple[float, int, int]:
        wx = cum_w[idx_y][None, :] - cum_w[idx_x][:, None]
        mn = np.minimum(cum_inv_v[idx_x][:, None], total_inv_v - cum_inv_v[idx_y][None, :])
        score = wx * mn
        score[idx_y[None, :] < idx_x[:, None]] = -np.inf
        flat = int(np.argmax(score))
        i, j = divmod(flat, len(idx_y))
        return float(score[i, j]), int(idx_x[i]), int(idx_y[j])

    coarse = np.arange(0, n_dense + 1, refine)
    b0, ix, iy = best_over(coarse, coarse)
    lo_x, hi_x = max(ix - refine, 0), min(ix + refine, n_dense)
    lo_y, hi_y = max(iy - refine, 0), min(iy + refine, n_dense)
    b1, jx, jy = best_over(np.arange(lo_x, hi_x + 1), np.arange(lo_y, hi_y + 1))
    if b1 > b0:
        b0, ix, iy = b1, jx, jy
    return HardyResult(B=max(b0, 0.0), x=float(t[ix]), y=float(t[iy]))


@dataclass(frozen=True)
class GrowthWeight:
    """Weight k^2/(2 K^2 M^2) e^{-2 omega t} - L^2 on [0, tau]."""

    k: float
    K: float
    M: float
    L: float
    omega: float
    tau: float
    positive: bool

    def __call__(self, t):
        return (
            self.k**2 / (2.0 * self.K**2 * self.M**2) * np.exp(-2.0 * self.omega * t)
            - self.L**2
        )


def weight_w(k: float, big_k: float, big_m: float, lip: float, omega: float, tau: float) -> GrowthWeight:
    """The inverse-Hardy weight; positivity holds iff L < k/(sqrt(2) K M e^{omega tau})."""
    if min(k, big_k, big_m) <= 0 or lip < 0 or omega < 0 or tau <= 0:
        raise ValueError("need k, K, M, tau > 0 and L, omega >= 0")
    positive = lip < k / (np.sqrt(2.0) * big_k * big_m * np.exp(omega * tau))
    return GrowthWeight(k=k, K=big_k, M=big_m, L=lip, omega=omega, tau=tau, positive=positive)


def _criterion_first_factor(k, big_k, big_m, lip, omega, x, y):
    # integral of the growth weight over [x, y]; analytic omega -> 0 limit
    c = k**2 / (2.0 * big_k**2 * big_m**2)
    if omega == 0.0:
        expo = c * (y - x)
    else:
        expo = -(c / (2.0 * omega)) * np.exp(-2.0 * omega * x) * np.expm1(-2.0 * omega * (y - x))
    return expo + lip**2 * (x - y)


@dataclass(frozen=True)
class FCriterionResult:
    f_max: float
    x: float
    y: float
    satisfied: bool
    quarter_value: float
    quarter_satisfied: bool


def f_criterion(
    k: float,
    big_k: float,
    big_m: float,
    lip: float,
    omega: float,
    tau: float,
    grid: int = 200,
) -> FCriterionResult:
    """Maximize f(x,y) = (int_x^y w) min(x, tau - y) over the closed triangle.

    f vanishes on the triangle's boundary, so the maximum is interior;
    a 200x200 grid plus one Nelder-Mead polish finds it.  satisfied
    means f_max > 2, the sufficiency threshold; the value at the
    canonical point (tau/4, 3 tau/4) is reported alongside.
    """

    def f(x, y):
        return _criterion_first_factor(k, big_k, big_m, lip, omega, x, y) * np.minimum(
            x, tau - y
        )

    xs = np.linspace(0.0, tau, grid)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    vals = f(gx, gy)
    vals[gy < gx] = -np.inf
    flat = int(np.argmax(vals))
    i, j = divmod(flat, grid)
    x0, y0 = float(gx[i, j]), float(gy[i, j])
    f_best = float(vals[i, j])

    def neg_f(p):
        x, y = p
        if not (0.0 <= x <= y <= tau):
            return 1e300
        return -f(x, y)

    res = scipy.optimize.minimize(neg_f, [x0, y0], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    if -res.fun > f_best:
        f_best, x0, y0 = float(-res.fun), float(res.x[0]), float(res.x[1])
    quarter = float(f(tau / 4.0, 3.0 * tau / 4.0))
    return FCriterionResult(
        f_max=f_best,
        x=x0,
        y=y0,
        satisfied=f_best > 2.0,
        quarter_value=quarter,
        quarter_satisfied=quarter > 2.0,
    )


def tau_double_star(
    k: float, big_k: float, big_m: float, lip: float, omega: float
) -> float | Infeasible:
    """8 sqrt(2) K M / k under the Lipschitz and growth-gap hypotheses."""
    if min(k, big_k, big_m) <= 0:
        raise ValueError("need k, K, M > 0")
    if lip >= k / (2.0 * np.sqrt(2.0) * big_k * big_m):
        return Infeasible("lipschitz-bound: need L < k/(2 sqrt(2) K M)")
    if not 0.0 <= omega <= k / (16.0 * big_k * big_m):
        return Infeasible("growth-gap: need 0 <= beta - alpha <= k/(16 K M)")
    return float(8.0 * np.sqrt(2.0) * big_k * big_m / k)


@dataclass(frozen=True)
class TestFunctionResult:
    """Sine-basis maximizer of int w |phi|^2 / int |phi'|^2, sup-normalized."""

    coefficients: np.ndarray
    rayleigh: float
    kappa: float

    def evaluate(self, t: np.ndarray, tau: float) -> np.ndarray:
        js = np.arange(1, len(self.coefficients) + 1)
        return np.sin(np.outer(np.asarray(t), js) * np.pi / tau) @ self.coefficients


def best_test_function(
    w: Callable, tau: float, basis_size: int = 64, n_quad: int = 2048
) -> TestFunctionResult:
    """Rayleigh-optimal test function in span{sin(j pi t / tau)}.

    Solves the generalized symmetric eigenproblem (weighted mass matrix
    vs. the diagonal stiffness matrix).  kappa = int w |phi|^2 -
    int |phi'|^2 for the sup-normalized maximizer; kappa > 0 iff the
    Rayleigh quotient exceeds 1, which is the constructive inverse-Hardy
    certificate.
    """
    if basis_size < 1:
        raise ValueError("need basis_size >= 1")
    t = np.linspace(0.0, tau, n_quad + 1)
    wq = simpson_weights(n_quad, tau / n_quad)
    wv = np.asarray([w(s) for s in t], dtype=float)
    js = np.arange(1, basis_size + 1)
    sines = np.sin(np.outer(t, js) * np.pi / tau)  # (n_quad+1, basis)
    mass = sines.T @ (sines * (wq * wv)[:, None])
    mass = 0.5 * (mass + mass.T)
    stiff = np.diag((js * np.pi / tau) ** 2 * tau / 2.0)
    vals, vecs = scipy.linalg.eigh(mass, stiff)
    rayleigh = float(vals[-1])
    coeffs = vecs[:, -1]
    sup = float(np.max(np.abs(sines @ coeffs)))
    coeffs = coeffs / sup
    kappa = float(coeffs @ mass @ coeffs - coeffs @ stiff @ coeffs)
    return TestFunctionResult(coefficients=coeffs, rayleigh=rayleigh, kappa=kappa)
