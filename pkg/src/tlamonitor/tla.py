"""Two-level-atom operator algebra and unconditional dynamics.

Basis convention: ordered basis (|g>, |e|), so that a density matrix is

    rho = [[rho_gg, rho_ge],
           [rho_eg, rho_ee]]

and the lowering operator is sigma = |g><e|.  Internal units set the decay
rate Gamma = 1 and measure time in 1/Gamma; the Rabi frequency Omega is
quoted in units of Gamma.

The unconditional master equation is

    drho/dt = L rho = -i(Omega/2)[sigma_x, rho]
              + Gamma (sigma rho sigma^dag - {sigma^dag sigma, rho}/2)

with sigma_x = sigma + sigma^dag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-9

SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)          # |g><e|
SIGMA_DAG = SIGMA.conj().T                                          # |e><g|
SIGMA_X = SIGMA + SIGMA_DAG
PROJ_E = SIGMA_DAG @ SIGMA                                          # |e><e|
GROUND = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


@dataclass(frozen=True)
class SystemParams:
    """Drive and decay of the atom, in internal units (Gamma = 1 typical).

    ``gamma_physical`` is an optional laboratory decay rate in 1/s, carried
    only for labelling emitted files; it never enters the dynamics.
    """

    omega: float
    gamma: float = 1.0
    gamma_physical: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma={self.gamma} violates gamma > 0")
        if self.omega < 0:
            raise ValueError(f"omega={self.omega} violates omega >= 0")


def is_hermitian(rho: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    return bool(np.all(np.abs(rho - rho.conj().T) <= tol))


def assert_density_operator(rho: np.ndarray, tol: float = HERMITICITY_TOL) -> None:
    """Validate a normalized state: Hermitian, unit trace, positive within tol."""
    if rho.shape != (2, 2):
        raise ValueError(f"expected a 2x2 operator, got shape {rho.shape}")
    if not is_hermitian(rho, tol):
        raise ValueError("operator is not Hermitian within tolerance")
    tr = rho.trace()
    if abs(tr.imag) > tol or abs(tr.real - 1.0) > 1e-6:
        raise ValueError(f"trace {tr} is not 1")
    det = np.linalg.det(rho).real
    if det < -tol:
        raise ValueError(f"state is not positive semidefinite (det={det})")
    if rho[0, 0].real < -tol or rho[0, 0].real > 1 + tol:
        raise ValueError("diagonal entry outside [0, 1]")


def liouvillian(rho: np.ndarray, params: SystemParams) -> np.ndarray:
    """L rho: coherent drive at Omega plus radiative damping at Gamma."""
    om, g = params.omega, params.gamma
    comm = SIGMA_X @ rho - rho @ SIGMA_X
    diss = SIGMA @ rho @ SIGMA_DAG - 0.5 * (PROJ_E @ rho + rho @ PROJ_E)
    return -1j * (om / 2.0) * comm + g * diss


def jump_super(rho: np.ndarray) -> np.ndarray:
    """The recycling superoperator J rho = sigma rho sigma^dag."""
    return SIGMA @ rho @ SIGMA_DAG


def h_super(rho: np.ndarray, phase: float) -> np.ndarray:
    """H[e^{-i phase} sigma] rho = A rho + rho A^dag - Tr[...] rho.

    Requires a normalized input; the trace-subtraction term presumes Tr[rho]=1.
    """
    tr = rho.trace()
    if abs(tr - 1.0) > 1e-9:
        raise ValueError(f"h_super requires a normalized state, got trace {tr}")
    a = np.exp(-1j * phase) * SIGMA
    lin = a @ rho + rho @ a.conj().T
    return lin - lin.trace() * rho


def expectations(rho: np.ndarray) -> tuple[float, float, float]:
    """Bloch components (x, y, z) of a normalized state.

    x = Tr[(sigma+sigma^dag) rho], y = -i Tr[(sigma-sigma^dag) rho],
    z = Tr[(2 sigma^dag sigma - 1) rho].
    """
    tr = rho.trace().real
    if tr <= 0:
        raise ValueError(f"expectations requires positive trace, got {tr}")
    x = (rho[0, 1] + rho[1, 0]).real
    y = (-1j * (rho[1, 0] - rho[0, 1])).real
    z = (2.0 * rho[1, 1] - rho.trace()).real
    return float(x), float(y), float(z)


def bloch_to_rho(x: float, y: float, z: float) -> np.ndarray:
    """Inverse of ``expectations`` for a unit-trace state."""
    return 0.5 * np.array(
        [[1.0 - z, x - 1j * y], [x + 1j * y, 1.0 + z]], dtype=complex
    )


def purity(rho: np.ndarray) -> float:
    """Tr[rho^2] of a normalized state; equals (1 + |bloch|^2)/2 for a qubit."""
    tr = rho.trace().real
    if abs(tr - 1.0) > 1e-6:
        raise ValueError(f"purity requires a normalized state, got trace {tr}")
    return float((rho @ rho).trace().real)


def liouvillian_matrix(params: SystemParams) -> np.ndarray:
    """4x4 matrix of L acting on row-major vectorized 2x2 operators."""
    mat = np.zeros((4, 4), dtype=complex)
    for k in range(4):
        basis = np.zeros(4, dtype=complex)
        basis[k] = 1.0
        mat[:, k] = liouvillian(basis.reshape(2, 2), params).reshape(4)
    return mat


def steady_state(params: SystemParams) -> np.ndarray:
    """Unique normalized solution of L rho = 0 for Gamma > 0.

    Solves the trace-constrained linear system (one Liouvillian row replaced
    by the trace condition); the kernel is one-dimensional for Gamma > 0.
    """
    mat = liouvillian_matrix(params)
    a = np.vstack([mat[:3], np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)])
    b = np.array([0.0, 0.0, 0.0, 1.0], dtype=complex)
    rho = np.linalg.solve(a, b).reshape(2, 2)
    rho = 0.5 * (rho + rho.conj().T)
    return rho


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2) Tr|a - b|; for qubits, half the Euclidean Bloch distance."""
    ev = np.linalg.eigvalsh(a - b)
    return float(0.5 * np.sum(np.abs(ev)))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity; for qubits F = Tr[ab] + 2 sqrt(det a det b)."""
    det_a = max(np.linalg.det(a).real, 0.0)
    det_b = max(np.linalg.det(b).real, 0.0)
    return float((a @ b).trace().real + 2.0 * np.sqrt(det_a * det_b))


def euler_master_equation(
    rho0: np.ndarray, params: SystemParams, dt: float, n_steps: int,
    sample_stride: int = 1,
) -> np.ndarray:
    """Dense first-order Euler integration of the master equation.

    Returns states of shape (n_samples, 2, 2) at steps 0, stride, 2*stride, ...
    Used as the unconditional oracle for filter-consistency checks.
    """
    rho = rho0.astype(complex).copy()
    out = [rho.copy()]
    for k in range(n_steps):
        rho = rho + dt * liouvillian(rho, params)
        if (k + 1) % sample_stride == 0:
            out.append(rho.copy())
    return np.array(out)
