"""Galerkin reduction of the time-continuation iteration onto a basis V.

The reduced operators are the dense congruences V^T A V and V^T M V; the
reduced iteration mirrors the full-order one with a dense Cholesky solve
factored once per run, and the final state is lifted back as V U_N.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .continuation import ContinuationConfig, SolveTrace
from .linalg import CsrMatrix, NotSpdError


@dataclass(eq=False)
class ReducedOperators:
    """Dense N x N restrictions of the stiffness and mass operators."""

    a_red: np.ndarray
    m_red: np.ndarray
    basis: np.ndarray        # (n_full, N), orthonormal columns

    @property
    def dim(self) -> int:
        return self.a_red.shape[0]


def reduce(A: CsrMatrix, M: CsrMatrix, V) -> ReducedOperators:
    """Form V^T A V and V^T M V (symmetrized to kill roundoff skew)."""
    V = np.asarray(getattr(V, "V", V), dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != A.n_rows or A.n_rows != M.n_rows:
        raise ValueError("basis shape does not match the operators")
    a_red = V.T @ (A.to_scipy() @ V)
    m_red = V.T @ (M.to_scipy() @ V)
    a_red = 0.5 * (a_red + a_red.T)
    m_red = 0.5 * (m_red + m_red.T)
    return ReducedOperators(a_red, m_red, V)


def run_rom(ops: ReducedOperators, u0, config: ContinuationConfig
            ) -> tuple[SolveTrace, np.ndarray]:
    """Reduced continuation run from the projection of the full-space u0.

    Returns the trace over reduced coefficients plus the lifted final vector.
    The stopping rule is the relative-change criterion of the full-order run,
    applied to the reduced coefficients (the basis is orthonormal, so the
    lifted norms agree).
    """
    if ops.dim < 1:
        raise ValueError("reduced dimension must be >= 1")
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.shape != (ops.basis.shape[0],):
        raise ValueError("u0 must be a full-space vector")
    t_start = time.perf_counter()

    y = ops.basis.T @ u0
    if not np.any(y):
        raise ValueError("initial state projects to zero in the reduced space")
    try:
        system = scipy.linalg.cho_factor(ops.a_red + ops.m_red / config.dt)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(f"reduced system is not SPD: {exc}") from exc

    lam_history = []
    converged = False
    steps = 0
    for k in range(config.max_steps):
        my = ops.m_red @ y
        lam = float(y @ (ops.a_red @ y)) / float(y @ my)
        lam_history.append(lam)
        y_new = scipy.linalg.cho_solve(system, (lam + 1.0 / config.dt) * my)
        steps = k + 1
        rel_change = np.linalg.norm(y_new - y) / np.linalg.norm(y_new)
        y = y_new
        if rel_change <= config.stop_tol:
            converged = True
            break
    lam_history.append(float(y @ (ops.a_red @ y)) / float(y @ (ops.m_red @ y)))
    trace = SolveTrace(np.array(lam_history), y, steps,
                       time.perf_counter() - t_start, converged)
    return trace, ops.basis @ y
