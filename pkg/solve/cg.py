"""
Preconditioned conjugate gradients for the assembled SPD systems.

Dot products go through np.add.reduce on the elementwise product, a fixed
summation order, so identical inputs give identical iterates.
"""

import time
from dataclasses import dataclass, field
from typing import List, Optional

import bittensor as bt
import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded, eigh_tridiagonal

from config.config import appConfig as config
from core.errors import AssemblyError, NonConvergenceError, NotPositiveDefiniteError
from core.protocol import PreconditionerKind
from discretize.assembly import LinearSystem
from discretize.grid import DiscreteField

LOOSE_TOL = 1e-4
RESIDUAL_GROWTH_MAX = 10.0


@dataclass
class SolveReport:
    iterations: int
    final_relative_residual: float
    wall_time: float
    preconditioner: str = PreconditionerKind.NONE.value
    residual_history: List[float] = field(default_factory=list, repr=False)

    def transient_growth(self, stride: int = 10) -> float:
        """Largest ratio of a relative residual to the one `stride` iterations earlier."""
        history = np.asarray(self.residual_history)
        if len(history) <= stride:
            return 0.0

        earlier = history[:-stride]
        later = history[stride:]
        return float(np.max(later / np.where(earlier > 0, earlier, np.inf)))


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.add.reduce(a * b))


class Preconditioner:
    """Symmetric positive operator M^{-1} applied through `apply`."""

    def __init__(self, kind: PreconditionerKind):
        self.kind = PreconditionerKind(kind)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return r.copy()


class JacobiPreconditioner(Preconditioner):

    def __init__(self, diagonal: np.ndarray):
        super().__init__(PreconditionerKind.JACOBI)
        if np.any(diagonal == 0):
            row = int(np.argmax(diagonal == 0))
            raise AssemblyError(f"zero diagonal entry in row {row}", location=row)

        self.inverse_diagonal = 1.0 / diagonal

    def apply(self, r: np.ndarray) -> np.ndarray:
        return self.inverse_diagonal * r


class LinePreconditioner(Preconditioner):
    """Exact solves with the tridiagonal coupling along each vertical grid line."""

    def __init__(self, system: LinearSystem):
        super().__init__(PreconditionerKind.LINE)
        matrix = system.matrix
        line_length = system.grid.shape[-1]

        diagonal = matrix.diagonal()
        if np.any(diagonal == 0):
            row = int(np.argmax(diagonal == 0))
            raise AssemblyError(f"zero diagonal entry in row {row}", location=row)

        upper = matrix.diagonal(k=1).copy()
        # no coupling from the top of one line to the bottom of the next
        upper[line_length - 1::line_length] = 0.0

        banded = np.zeros((2, system.size))
        banded[0, 1:] = upper
        banded[1, :] = diagonal
        self.factor = cholesky_banded(banded, lower=False)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.factor, False), r)


def precondition(system: LinearSystem, kind: PreconditionerKind = PreconditionerKind.LINE) -> Preconditioner:
    kind = PreconditionerKind(kind)
    if kind == PreconditionerKind.NONE:
        return Preconditioner(kind)

    if kind == PreconditionerKind.JACOBI:
        return JacobiPreconditioner(system.matrix.diagonal())

    try:
        return LinePreconditioner(system)
    except LinAlgError as e:
        bt.logging.warning(f"⚠️ Line preconditioner factorization failed ({e}), using Jacobi scaling")
        return JacobiPreconditioner(system.matrix.diagonal())


def cg_solve(system: LinearSystem, tol: Optional[float] = None, max_iter: Optional[int] = None,
             preconditioner: PreconditionerKind = PreconditionerKind.LINE,
             x0: Optional[np.ndarray] = None) -> tuple:
    """Solve A x = f to ||A x - f|| / ||f|| <= tol; returns (DiscreteField, SolveReport)."""
    tol = config.DEFAULT_TOL if tol is None else tol
    max_iter = config.DEFAULT_MAX_ITER if max_iter is None else max_iter
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")

    if tol > LOOSE_TOL:
        bt.logging.warning(f"⚠️ CG tolerance {tol:g} is looser than {LOOSE_TOL:g}; results are not fit for exponent fits")

    start = time.time()
    A = system.matrix
    f = system.rhs
    M = precondition(system, preconditioner) if not isinstance(preconditioner, Preconditioner) else preconditioner

    norm_f = np.sqrt(_dot(f, f))
    if norm_f == 0.0:
        report = SolveReport(0, 0.0, time.time() - start, M.kind.value, [0.0])
        return DiscreteField(system.grid, np.zeros(system.size)), report

    x = np.zeros_like(f) if x0 is None else np.asarray(x0, dtype=float).reshape(-1).copy()
    r = f - A @ x
    relative = np.sqrt(_dot(r, r)) / norm_f
    history = [relative]
    best_x, best_relative = x.copy(), relative

    if relative <= tol:
        return DiscreteField(system.grid, x), SolveReport(0, relative, time.time() - start, M.kind.value, history)

    z = M.apply(r)
    p = z.copy()
    rz = _dot(r, z)

    for iteration in range(1, max_iter + 1):
        Ap = A @ p
        curvature = _dot(p, Ap)
        if curvature <= 0:
            raise NotPositiveDefiniteError(f"p^T A p = {curvature:.3e} at iteration {iteration}")

        alpha = rz / curvature
        x += alpha * p
        r -= alpha * Ap

        relative = np.sqrt(_dot(r, r)) / norm_f
        if relative <= tol:
            # recursive residuals drift; confirm against the true one
            r = f - A @ x
            relative = np.sqrt(_dot(r, r)) / norm_f

        history.append(relative)
        if relative < best_relative:
            best_x, best_relative = x.copy(), relative

        if iteration % config.CG_LOG_EVERY == 0:
            bt.logging.debug(f"🔄 CG iteration {iteration}: relative residual {relative:.3e}")

        if relative <= tol:
            report = SolveReport(iteration, relative, time.time() - start, M.kind.value, history)
            growth = report.transient_growth()
            if growth > RESIDUAL_GROWTH_MAX:
                bt.logging.warning(f"⚠️ CG residual grew {growth:.1f}x within 10 iterations ({M.kind.value})")
            bt.logging.debug(f"✅ CG converged in {iteration} iterations ({M.kind.value}), "
                             f"residual {relative:.3e}, {report.wall_time:.2f}s")
            return DiscreteField(system.grid, x), report

        z = M.apply(r)
        rz_new = _dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p

    raise NonConvergenceError(
        f"CG did not reach {tol:g} in {max_iter} iterations (best {best_relative:.3e})",
        best_iterate=best_x, residual_history=history,
    )


def lanczos_min_ritz(system: LinearSystem, iterations: int = 30, seed: int = 0) -> float:
    """Smallest Ritz value of a short Lanczos run; positive for an SPD matrix."""
    A = system.matrix
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(system.size)
    q /= np.sqrt(_dot(q, q))
    q_previous = np.zeros_like(q)

    alphas, betas = [], []
    beta = 0.0
    for _ in range(min(iterations, system.size)):
        w = A @ q - beta * q_previous
        alpha = _dot(q, w)
        w -= alpha * q
        alphas.append(alpha)

        beta = np.sqrt(_dot(w, w))
        if beta < 1e-14 * abs(alpha):
            break

        betas.append(beta)
        q_previous, q = q, w / beta

    alphas = np.asarray(alphas)
    betas = np.asarray(betas[:len(alphas) - 1])
    ritz = eigh_tridiagonal(alphas, betas, eigvals_only=True, select='i', select_range=(0, 0))
    return float(ritz[0])
