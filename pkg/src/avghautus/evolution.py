"""Discrete evolution family U(t,s) for x'(t) + A(t) x(t) = 0.

Each step propagator is a fourth-order Magnus approximation with two
Gauss-Legendre nodes and a scaling-and-squaring matrix exponential
kernel.  For skew-adjoint families the Magnus exponent is skew, so every
step is unitary up to the exponential kernel's accuracy; for families
constant over a step the result is the exact matrix exponential.

U(t_j, t_i) is *defined* as the product of stored steps, so the cocycle
identity U(t,s) = U(t,r) U(r,s) holds on grid nodes by construction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import IndexOrder, StepTooLarge
from .system import OperatorFamily, SystemSpec, TimeGrid

_GL_OFFSET = np.sqrt(3.0) / 6.0
_COMMUTATOR_SAFETY = 1.0


def step_propagator(a: OperatorFamily, t_i: float, t_j: float) -> np.ndarray:
    """Fourth-order propagator of x' = -A(t) x over [t_i, t_j].

    Exponent: (h/2)(B1 + B2) - (sqrt(3)/12) h^2 [B1, B2] with B = -A
    evaluated at the two Gauss-Legendre nodes of the step.
    """
    if not t_j > t_i:
        raise IndexOrder(f"step requires t_i < t_j, got [{t_i}, {t_j}]")
    h = t_j - t_i
    b1 = -a.at(t_i + (0.5 - _GL_OFFSET) * h)
    b2 = -a.at(t_i + (0.5 + _GL_OFFSET) * h)
    omega = 0.5 * h * (b1 + b2)
    correction = -(np.sqrt(3.0) / 12.0) * h * h * (b1 @ b2 - b2 @ b1)
    corr_norm = np.linalg.norm(correction, 2)
    if corr_norm > _COMMUTATOR_SAFETY:
        raise StepTooLarge(
            f"Magnus commutator correction norm {corr_norm:.3e} exceeds "
            f"{_COMMUTATOR_SAFETY}; refine the grid"
        )
    return expm(omega + correction)


@dataclass(frozen=True)
class EvolutionTable:
    """Per-step propagators Phi_j ~ U(t_{j+1}, t_j) on a uniform grid."""

    grid: TimeGrid
    steps: np.ndarray  # (n_steps, n, n)
    direction: str = "forward"

    def __post_init__(self):
        if self.steps.shape[0] != self.grid.n_steps:
            raise ValueError("one step matrix per grid panel required")
        if not np.all(np.isfinite(self.steps.view(float))):
            raise ValueError("step propagators contain non-finite entries")

    @property
    def dim(self) -> int:
        return self.steps.shape[1]

    def matrix(self, j: int, i: int) -> np.ndarray:
        """Dense U(t_j, t_i) = Phi_{j-1} ... Phi_i (identity when i == j)."""
        if i > j:
            raise IndexOrder(f"need i <= j, got i={i}, j={j}")
        u = np.eye(self.dim, dtype=complex)
        for l in range(i, j):
            u = self.steps[l] @ u
        return u

    def final(self) -> np.ndarray:
        return self.matrix(self.grid.n_steps, 0)


def propagate(sys: SystemSpec) -> EvolutionTable:
    """Build the step table for the system's grid."""
    nodes = sys.grid.nodes
    steps = np.stack(
        [step_propagator(sys.A, nodes[j], nodes[j + 1]) for j in range(sys.grid.n_steps)]
    )
    return EvolutionTable(grid=sys.grid, steps=steps)


def apply(u: EvolutionTable, j: int, i: int, x: np.ndarray) -> np.ndarray:
    """U(t_j, t_i) x without forming the product matrix."""
    if i > j:
        raise IndexOrder(f"need i <= j, got i={i}, j={j}")
    y = np.asarray(x, dtype=complex)
    for l in range(i, j):
        y = u.steps[l] @ y
    return y


def retrograde_state(u: EvolutionTable, z_tau: np.ndarray, s: int) -> np.ndarray:
    """U(tau, t_s)* z_tau, the adjoint state solving z' - A(t)* z = 0 backward."""
    z = np.asarray(z_tau, dtype=complex)
    for l in range(u.grid.n_steps - 1, s - 1, -1):
        z = u.steps[l].conj().T @ z
    return z


def save_table(u: EvolutionTable, path: str) -> None:
    """Text dump: header (dim, n_steps, tau, field), then row-major matrices."""
    with open(path, "w") as fh:
        fh.write(f"{u.dim} {u.grid.n_steps} {u.grid.tau!r} complex\n")
        for step in u.steps:
            for row in step:
                fh.write(" ".join(f"{z.real!r} {z.imag!r}" for z in row) + "\n")


def load_table(path: str) -> EvolutionTable:
    with open(path) as fh:
        dim_s, n_steps_s, tau_s, _field = fh.readline().split()
        dim, n_steps, tau = int(dim_s), int(n_steps_s), float(tau_s)
        steps = np.empty((n_steps, dim, dim), dtype=complex)
        for k in range(n_steps):
            for r in range(dim):
                parts = [float(tok) for tok in fh.readline().split()]
                steps[k, r] = np.array(parts[0::2]) + 1j * np.array(parts[1::2])
    return EvolutionTable(grid=TimeGrid(tau=tau, n_steps=n_steps), steps=steps)
