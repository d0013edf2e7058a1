"""Full-order solver: implicit-Euler iteration in a fictitious time whose
steady state is the first eigenpair of the generalized problem A U = lam M U.

Each step solves (A + M/dt) U' = (lam + 1/dt) M U with lam the Rayleigh
quotient of the current state, and records every ``snapshot_stride``-th state
as a column of the snapshot matrix.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .fem import rayleigh_quotient
from .linalg import CsrMatrix, combine, csr_quadratic_form, spd_solve, spmv

# renormalize only if the iterate norm leaves this range (overflow guard)
_NORM_FLOOR = 1e-150
_NORM_CEIL = 1e150


@dataclass
class ContinuationConfig:
    """Parameters of the fictitious-time iteration."""

    dt: float = 0.1
    stop_tol: float = 1e-8
    max_steps: int = 100_000
    snapshot_stride: int = 4
    initial_guess: str = "ones"          # "ones" or "random"
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.initial_guess not in ("ones", "random"):
            raise ValueError("initial_guess must be 'ones' or 'random'")


@dataclass(eq=False)
class SnapshotMatrix:
    """States sampled every ``stride`` steps, stored as matrix columns."""

    matrix: np.ndarray
    stride: int

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    def with_stride(self, stride: int) -> "SnapshotMatrix":
        """Subsample to a coarser stride that is a multiple of this one."""
        if stride % self.stride != 0:
            raise ValueError(f"stride {stride} is not a multiple of {self.stride}")
        step = stride // self.stride
        return SnapshotMatrix(self.matrix[:, step - 1::step].copy(), stride)


@dataclass(eq=False)
class SolveTrace:
    """History of one continuation run (shared by full and reduced solvers)."""

    lambda_history: np.ndarray
    final_vector: np.ndarray
    n_steps: int
    wall_time: float
    converged: bool
    warnings: list = field(default_factory=list)

    @property
    def eigenvalue(self) -> float:
        return float(self.lambda_history[-1])


def initial_state(n: int, config: ContinuationConfig) -> np.ndarray:
    if config.initial_guess == "ones":
        return np.ones(n)
    return np.random.default_rng(config.seed).standard_normal(n)


def fom_step(A: CsrMatrix, M: CsrMatrix, U, lam: float, dt: float,
             system: CsrMatrix | None = None, x0=None) -> np.ndarray:
    """One implicit-Euler step: solve (A + M/dt) U' = (lam + 1/dt) M U.

    ``system`` may pass a precomputed A + M/dt so that callers stepping in a
    loop assemble it only once.
    """
    if system is None:
        system = combine(1.0, A, 1.0 / dt, M)
    rhs = (lam + 1.0 / dt) * spmv(M, U)
    return spd_solve(system, rhs, x0=x0)


def run_fom(A: CsrMatrix, M: CsrMatrix, config: ContinuationConfig,
            u0=None) -> tuple[SolveTrace, SnapshotMatrix]:
    """Iterate to the steady state and collect snapshots.

    Stops when ||U_new - U|| / ||U_new|| <= stop_tol (Euclidean coefficient
    norm).  ``u0`` overrides the configured initial guess.  Raises no error
    on hitting max_steps; the returned trace has ``converged=False``.
    """
    n = A.n_rows
    if n < 1:
        raise ValueError("the system has no free degrees of freedom")
    t_start = time.perf_counter()

    U = np.array(u0, dtype=np.float64) if u0 is not None else initial_state(n, config)
    if not np.any(U):
        raise ValueError("initial state is the zero vector")
    U0 = U.copy()

    system = combine(1.0, A, 1.0 / config.dt, M)
    lam_history = []
    snapshots = []
    converged = False
    steps = 0
    for k in range(config.max_steps):
        lam = rayleigh_quotient(A, M, U)
        lam_history.append(lam)
        U_new = fom_step(A, M, U, lam, config.dt, system=system, x0=U)
        steps = k + 1
        if steps % config.snapshot_stride == 0:
            snapshots.append(U_new.copy())
        rel_change = np.linalg.norm(U_new - U) / np.linalg.norm(U_new)
        U = U_new
        norm = np.linalg.norm(U)
        if not _NORM_FLOOR < norm < _NORM_CEIL:
            U = U / norm
        if rel_change <= config.stop_tol:
            converged = True
            break
    lam_history.append(rayleigh_quotient(A, M, U))

    warnings = []
    overlap = abs(csr_quadratic_form_pair(M, U0, U))
    scale = _m_norm(M, U0) * _m_norm(M, U)
    # the computed eigenvector carries ~10*stop_tol of transient leftovers,
    # so orthogonality of the start is only observable down to that floor
    if overlap <= max(1e-14, 100.0 * config.stop_tol) * scale:
        warnings.append("initial guess is numerically M-orthogonal to the "
                        "computed eigenvector; a higher mode may have been reached")
    if U.min() * U.max() < 0 and min(abs(U.min()), abs(U.max())) > 1e-6 * abs(U).max():
        warnings.append("computed eigenvector changes sign; it may belong to a "
                        "higher mode")

    trace = SolveTrace(np.array(lam_history), U, steps,
                       time.perf_counter() - t_start, converged, warnings)
    if snapshots:
        matrix = np.column_stack(snapshots)
    else:
        matrix = np.empty((n, 0))
    return trace, SnapshotMatrix(matrix, config.snapshot_stride)


def csr_quadratic_form_pair(K: CsrMatrix, x, y) -> float:
    """x^T K y."""
    return float(np.dot(np.asarray(x, dtype=np.float64), spmv(K, y)))


def _m_norm(M: CsrMatrix, x) -> float:
    return float(np.sqrt(max(csr_quadratic_form(M, x), 0.0)))


def write_snapshots(snap: SnapshotMatrix, path) -> None:
    """Dump one snapshot column per line, full-precision decimals."""
    with open(path, "w") as fh:
        for col in snap.matrix.T:
            fh.write(" ".join(repr(float(v)) for v in col))
            fh.write("\n")
