"""Conjugate gradients for the symmetric positive definite solves.

The velocity (Poisson) step and the continuous-multiplier mass projection
both lead to SPD systems; they are solved with Jacobi-preconditioned CG and
warm starts so that the many inner solves of the outer fixed-point
iteration stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass
class CgConfig:
    rel_tol: float = 1e-10
    max_iter: int | None = None          # defaults to 10 * ndof
    preconditioner: str = "diagonal"     # 'diagonal' (Jacobi) or 'none'

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.preconditioner not in ("diagonal", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list          # |b - A x| after 0, 1, ... iterations


class IterationLimitError(RuntimeError):
    """CG failed to reach the tolerance within the iteration budget."""

    def __init__(self, message, residual, iterations, history):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.history = history


def cg_solve(A, b, cfg=None, x0=None):
    """Solve A x = b for SPD A to |b - A x| <= rel_tol * |b|."""
    cfg = cfg or CgConfig()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match vector length {n}")
    max_iter = cfg.max_iter if cfg.max_iter is not None else 10 * n

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CgResult(np.zeros(n), 0, 0.0, [0.0])
    tol = cfg.rel_tol * bnorm

    if cfg.preconditioner == "diagonal":
        d = A.diagonal()
        if np.any(d == 0):
            raise ValueError("zero diagonal entry; Jacobi preconditioner unusable")
        minv = 1.0 / d
    else:
        minv = None

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.copy()
    rnorm = np.linalg.norm(r)
    history = [rnorm]
    if rnorm <= tol:
        return CgResult(x, 0, rnorm, history)

    z = minv * r if minv is not None else r
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rnorm = np.linalg.norm(r)
        history.append(rnorm)
        if rnorm <= tol:
            return CgResult(x, k, rnorm, history)
        z = minv * r if minv is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise IterationLimitError(
        f"CG did not reach tolerance {cfg.rel_tol:g} within {max_iter} iterations "
        f"(last residual {rnorm:.3e})", rnorm, max_iter, history)
