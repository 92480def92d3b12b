"""Time-varying system descriptions and structural-constant estimation.

A system couples a time-dependent generator family A(t) (convention
x'(t) + A(t) x(t) = 0), optional observation C(t) and control B(t)
families, a uniform time grid on [0, tau], and the growth/Lipschitz
constants the minimal-time formulas consume.

All internal linear algebra is carried out over the complex numbers;
real systems are embedded.  Constants are measured on the grid only, so
they inherit the grid's resolution; refining the grid converges for
families continuous in t.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ._linalg import op_norm, pairwise_singular_extremes
from .errors import SingularPropagator, ValidationError

#: relative tolerance for structural (machine-precision) claims such as
#: skew-adjointness
TOL_STRUCT = 1e-10

#: tolerance used when matching a time to a catalog jump point
_JUMP_ATOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition t_j = j * tau / n_steps of the horizon [0, tau]."""

    tau: float
    n_steps: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValidationError("horizon tau must be positive", field="tau")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError("n_steps must be a positive integer", field="n_steps")
        object.__setattr__(self, "nodes", np.linspace(0.0, self.tau, self.n_steps + 1))

    @property
    def dt(self) -> float:
        return self.tau / self.n_steps


def default_n_steps(tau: float, sup_norm: float, cap: int | None = None) -> int:
    """Default step count: keeps the per-step Magnus truncation small."""
    n = max(200, int(np.ceil(40.0 * tau * sup_norm)))
    if n % 2:
        n += 1
    if cap is not None:
        n = min(n, cap if cap % 2 == 0 else cap + 1)
    return n


# ---------------------------------------------------------------------------
# coefficient catalog for base-plus-perturbation families


def sinusoidal_coefficient(amplitude: float, frequency: float = 1.0, phase: float = 0.0):
    def coeff(t: float) -> float:
        return amplitude * np.sin(frequency * t + phase)

    return coeff


def truncated_coefficient(amplitude: float, t0: float):
    """amplitude on [0, t0), 0 after; exactly amplitude/2 at the jump.

    The half-value at the jump makes composite quadrature across a jump
    placed on an even grid node telescope exactly into the two one-sided
    integrals.
    """

    def coeff(t: float) -> float:
        if abs(t - t0) <= _JUMP_ATOL * max(1.0, abs(t0)):
            return 0.5 * amplitude
        return amplitude if t < t0 else 0.0

    return coeff


def piecewise_coefficient(breakpoints: Sequence[float], values: Sequence[float]):
    """Piecewise-constant coefficient; values[i] holds between breakpoints.

    len(values) == len(breakpoints) + 1; jumps take the mean of both
    one-sided values (same convention as truncated_coefficient).
    """
    bp = np.asarray(breakpoints, dtype=float)
    vals = np.asarray(values, dtype=float)
    if bp.ndim != 1 or np.any(np.diff(bp) <= 0):
        raise ValidationError("breakpoints must be strictly increasing", field="breakpoints")
    if len(vals) != len(bp) + 1:
        raise ValidationError(
            "need len(values) == len(breakpoints) + 1", field="values"
        )

    def coeff(t: float) -> float:
        hit = np.nonzero(np.abs(bp - t) <= _JUMP_ATOL * np.maximum(1.0, np.abs(bp)))[0]
        if hit.size:
            i = int(hit[0])
            return 0.5 * (vals[i] + vals[i + 1])
        return float(vals[np.searchsorted(bp, t)])

    return coeff


# ---------------------------------------------------------------------------
# operator / observation / control families


@dataclass(frozen=True)
class OperatorFamily:
    """Total map t -> n x n matrix with structural metadata.

    kind is one of "constant", "perturbed" (base + R(t)), "sampled"
    (linear interpolation between sample matrices) or "coefficient"
    (scalar coefficient times a fixed matrix; the building block of
    perturbed families).
    """

    dim: int
    kind: str
    _eval: Callable[[float], np.ndarray]
    field: str = "complex"
    skew_claimed: bool = False
    base: np.ndarray | None = None
    perturbation: "OperatorFamily | None" = None

    def at(self, t: float) -> np.ndarray:
        m = np.asarray(self._eval(t), dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise ValidationError(
                f"family evaluated to shape {m.shape}, expected {(self.dim, self.dim)}"
            )
        return m

    def at_nodes(self, grid: TimeGrid) -> np.ndarray:
        return np.stack([self.at(t) for t in grid.nodes])

    @staticmethod
    def constant(a0: np.ndarray, skew_claimed: bool | None = None) -> "OperatorFamily":
        a0 = np.asarray(a0, dtype=complex)
        if a0.ndim != 2 or a0.shape[0] != a0.shape[1]:
            raise ValidationError("constant family needs a square matrix", field="A.base")
        if skew_claimed is None:
            skew_claimed = op_norm(a0 + a0.conj().T) <= TOL_STRUCT * max(1.0, op_norm(a0))
        return OperatorFamily(
            dim=a0.shape[0], kind="constant", _eval=lambda t: a0,
            skew_claimed=bool(skew_claimed), base=a0,
        )

    @staticmethod
    def coefficient(matrix: np.ndarray, coeff: Callable[[float], float]) -> "OperatorFamily":
        matrix = np.asarray(matrix, dtype=complex)
        return OperatorFamily(
            dim=matrix.shape[0], kind="coefficient",
            _eval=lambda t: coeff(t) * matrix, base=matrix,
        )

    @staticmethod
    def perturbed(
        base: np.ndarray, r: "OperatorFamily", skew_claimed: bool = False
    ) -> "OperatorFamily":
        base = np.asarray(base, dtype=complex)
        if base.shape != (r.dim, r.dim):
            raise ValidationError("base and perturbation dimensions differ", field="A.base")
        return OperatorFamily(
            dim=r.dim, kind="perturbed", _eval=lambda t: base + r.at(t),
            skew_claimed=skew_claimed, base=base, perturbation=r,
        )

    @staticmethod
    def sampled(times: Sequence[float], matrices: Sequence[np.ndarray]) -> "OperatorFamily":
        times = np.asarray(times, dtype=float)
        mats = np.stack([np.asarray(m, dtype=complex) for m in matrices])
        if np.any(np.diff(times) <= 0):
            raise ValidationError("sample times must be strictly increasing", field="A.samples")
        if len(times) != mats.shape[0]:
            raise ValidationError("one matrix per sample time required", field="A.samples")

        def interp(t: float) -> np.ndarray:
            if t <= times[0]:
                return mats[0]
            if t >= times[-1]:
                return mats[-1]
            j = int(np.searchsorted(times, t))
            w = (t - times[j - 1]) / (times[j] - times[j - 1])
            return (1.0 - w) * mats[j - 1] + w * mats[j]

        return OperatorFamily(dim=mats.shape[1], kind="sampled", _eval=interp)


@dataclass(frozen=True)
class ObservationFamily:
    """Map t -> p x n observation matrix C(t)."""

    out_dim: int
    state_dim: int
    _eval: Callable[[float], np.ndarray]
    kind: str = "constant"

    def at(self, t: float) -> np.ndarray:
        c = np.asarray(self._eval(t), dtype=complex)
        if c.shape != (self.out_dim, self.state_dim):
            raise ValidationError(
                f"C(t) has shape {c.shape}, expected {(self.out_dim, self.state_dim)}"
            )
        return c

    @staticmethod
    def constant(c0: np.ndarray) -> "ObservationFamily":
        c0 = np.atleast_2d(np.asarray(c0, dtype=complex))
        return ObservationFamily(c0.shape[0], c0.shape[1], lambda t: c0)

    @staticmethod
    def truncated(c0: np.ndarray, t0: float) -> "ObservationFamily":
        """C on [0, t0], zero afterwards (half weight exactly at the jump)."""
        c0 = np.atleast_2d(np.asarray(c0, dtype=complex))
        gate = truncated_coefficient(1.0, t0)
        return ObservationFamily(
            c0.shape[0], c0.shape[1], lambda t: gate(t) * c0, kind="truncated"
        )

    @staticmethod
    def time_varying(p: int, n: int, f: Callable[[float], np.ndarray]) -> "ObservationFamily":
        return ObservationFamily(p, n, f, kind="varying")


@dataclass(frozen=True)
class ControlFamily:
    """Map t -> n x q control matrix B(t)."""

    in_dim: int
    state_dim: int
    _eval: Callable[[float], np.ndarray]

    def at(self, t: float) -> np.ndarray:
        b = np.asarray(self._eval(t), dtype=complex)
        if b.shape != (self.state_dim, self.in_dim):
            raise ValidationError(
                f"B(t) has shape {b.shape}, expected {(self.state_dim, self.in_dim)}"
            )
        return b

    @staticmethod
    def constant(b0: np.ndarray) -> "ControlFamily":
        b0 = np.asarray(b0, dtype=complex)
        if b0.ndim == 1:
            b0 = b0[:, None]
        return ControlFamily(b0.shape[1], b0.shape[0], lambda t: b0)

    @staticmethod
    def time_varying(n: int, q: int, f: Callable[[float], np.ndarray]) -> "ControlFamily":
        return ControlFamily(q, n, f)


@dataclass(frozen=True)
class StructuralConstants:
    """Lipschitz bound L and two-sided growth constants (k, K, alpha, beta).

    The growth estimate reads
    k e^{alpha (t-s)} |x| <= |U(t,s) x| <= K e^{beta (t-s)} |x|.
    """

    L: float = 0.0
    k: float = 1.0
    K: float = 1.0
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.L < 0:
            raise ValidationError("L must be nonnegative", field="constants.L")
        if not 0 < self.k <= self.K:
            raise ValidationError("need 0 < k <= K", field="constants.k")
        if self.alpha > self.beta:
            raise ValidationError("need alpha <= beta", field="constants.alpha")

    @property
    def omega(self) -> float:
        """Growth gap beta - alpha (the paper shifts spectra so beta = 0)."""
        return self.beta - self.alpha


@dataclass(frozen=True)
class SystemSpec:
    """A generator family with optional observation/control and a grid."""

    A: OperatorFamily
    grid: TimeGrid
    C: ObservationFamily | None = None
    B: ControlFamily | None = None
    constants: StructuralConstants | None = None

    def __post_init__(self):
        n = self.A.dim
        if self.C is not None and self.C.state_dim != n:
            raise ValidationError("C column count must equal state dimension", field="C.matrix")
        if self.B is not None and self.B.state_dim != n:
            raise ValidationError("B row count must equal state dimension", field="B.matrix")
        if self.A.skew_claimed:
            check_skew(self.A, self.grid)

    @property
    def dim(self) -> int:
        return self.A.dim


def check_skew(a: OperatorFamily, grid: TimeGrid, tol: float = TOL_STRUCT) -> None:
    """Verify |A(t) + A(t)*| <= tol * max(1, |A(t)|) at every grid node."""
    for t in grid.nodes:
        m = a.at(t)
        defect = op_norm(m + m.conj().T)
        if defect > tol * max(1.0, op_norm(m)):
            raise ValidationError(
                f"family claimed skew-adjoint but |A(t)+A(t)*| = {defect:.3e} at t = {t:.6g}",
                field="A",
            )


def sup_operator_norm(a: OperatorFamily, grid: TimeGrid) -> float:
    """max over grid nodes of |A(t)| (the frequency cutoff sigma_max)."""
    return max(op_norm(a.at(t)) for t in grid.nodes)


def averaged_observation(c: ObservationFamily, grid: TimeGrid) -> ObservationFamily:
    """Constant family C_tilde = (1/tau) integral of C(s) ds.

    Feeding this back into the analysis operations covers the averaged
    single-operator reformulation of time-dependent observations.
    """
    from ._quadrature import simpson_weights

    w = simpson_weights(grid.n_steps, grid.dt)
    acc = np.zeros((c.out_dim, c.state_dim), dtype=complex)
    for wl, t in zip(w, grid.nodes):
        acc += wl * c.at(t)
    return ObservationFamily.constant(acc / grid.tau)


def lipschitz_bound(a: OperatorFamily, grid: TimeGrid, max_nodes: int | None = None) -> float:
    """Largest operator norm |A(t_i) - A(t_j)| over all grid node pairs.

    Exact over the node set: candidate pairs are screened by Frobenius
    norm (computable in bulk via a Gram matrix) and only pairs that could
    still beat the current best get a singular value decomposition, since
    |D|_2 <= |D|_F.  max_nodes subsamples the nodes evenly first (both
    endpoints kept), trading exactness for speed on very fine grids.
    """
    mats = a.at_nodes(grid)
    if max_nodes is not None and mats.shape[0] > max_nodes:
        idx = np.unique(np.linspace(0, mats.shape[0] - 1, max_nodes).astype(int))
        mats = mats[idx]
    n_nodes = mats.shape[0]
    if n_nodes < 2:
        return 0.0
    v = mats.reshape(n_nodes, -1)
    sq = np.einsum("ij,ij->i", v.conj(), v).real

    chunk = max(1, int(4_000_000 // max(n_nodes, 1)))

    def fro2_block(i0, i1):
        g = (v[i0:i1].conj() @ v.T).real
        f2 = sq[i0:i1, None] + sq[None, :] - 2.0 * g
        cols = np.arange(n_nodes)[None, :]
        rows = np.arange(i0, i1)[:, None]
        f2[cols <= rows] = -1.0  # keep strict upper triangle only
        return f2

    # pass 1: the largest-Frobenius pair seeds the spectral best
    best_f, seed = -1.0, None
    for i0 in range(0, n_nodes, chunk):
        f2 = fro2_block(i0, min(i0 + chunk, n_nodes))
        flat = int(np.argmax(f2))
        if f2.flat[flat] > best_f:
            best_f = f2.flat[flat]
            seed = (i0 + flat // n_nodes, flat % n_nodes)
    if best_f <= 0.0:
        return 0.0
    best = op_norm(mats[seed[0]] - mats[seed[1]])

    # pass 2: examine remaining candidates in descending Frobenius order
    cand_i, cand_j, cand_f = [], [], []
    for i0 in range(0, n_nodes, chunk):
        f2 = fro2_block(i0, min(i0 + chunk, n_nodes))
        ii, jj = np.nonzero(f2 > best * best)
        cand_i.append(ii + i0)
        cand_j.append(jj)
        cand_f.append(f2[ii, jj])
    ci = np.concatenate(cand_i)
    cj = np.concatenate(cand_j)
    cf = np.concatenate(cand_f)
    order = np.argsort(-cf)
    batch = 4096
    for b0 in range(0, len(order), batch):
        sel = order[b0 : b0 + batch]
        sel = sel[cf[sel] > best * best]
        if sel.size == 0:
            break
        diffs = mats[ci[sel]] - mats[cj[sel]]
        svals = np.linalg.svd(diffs, compute_uv=False)[:, 0]
        best = max(best, float(np.max(svals)))
    return float(best)


def growth_bounds(evolution, stride: int = 1, lipschitz: float = 0.0) -> StructuralConstants:
    """Fit (k, K, alpha, beta) so the two-sided growth bound holds on the grid.

    beta is the largest per-pair exponential rate of sigma_max and K the
    amplitude completing the upper bound; (k, alpha) mirror this below.
    The returned constants satisfy the bound at every examined node pair
    by construction; tightness is best effort.

    Raises SingularPropagator when some U(t_j, t_i) is singular.
    """
    smin, smax, gaps = pairwise_singular_extremes(
        evolution.steps, evolution.grid.dt, stride=stride
    )
    if smin.size == 0:
        return StructuralConstants(L=lipschitz)
    if np.any(smin <= 0.0):
        raise SingularPropagator("a propagator product has sigma_min = 0")
    beta = float(np.max(np.log(smax) / gaps))
    alpha = float(np.min(np.log(smin) / gaps))
    big_k = float(max(1.0, np.max(smax * np.exp(-beta * gaps))))
    small_k = float(min(1.0, np.min(smin * np.exp(-alpha * gaps))))
    return StructuralConstants(L=lipschitz, k=small_k, K=big_k, alpha=alpha, beta=beta)
