"""Sparse direct solves, Newton iteration and the fixed-step time loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DivergedStateError, InvalidConfigError, NonconvergenceError, SolverError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    output_times: tuple = ()
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_newton_iter: int = 25

    def errors(self):
        out = []
        if not self.dt > 0:
            out.append("time.dt must be > 0")
        if not self.t_end >= 0:
            out.append("time.t_end must be >= 0")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            out.append("solver tolerances must be > 0")
        if int(self.max_newton_iter) != self.max_newton_iter or self.max_newton_iter < 1:
            out.append("solver.max_iter must be a positive integer")
        if self.dt > 0:
            for t in self.output_times:
                if not -1e-9 <= t <= self.t_end + 1e-9:
                    out.append(f"time.output_times: {t!r} outside [0, t_end]")
                elif abs(t / self.dt - round(t / self.dt)) > 1e-9 * max(1.0, t / self.dt):
                    out.append(f"time.output_times: {t!r} is not a multiple of dt")
            ratio = self.t_end / self.dt
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                out.append("time.t_end must be a multiple of dt")
        return out

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def output_steps(self):
        return {int(round(t / self.dt)): t for t in self.output_times}


@dataclass
class State:
    x: np.ndarray
    t: float
    step_index: int


class Factorization:
    """LU factors of a row-equilibrated sparse matrix (COLAMD ordering, SuperLU).

    Rows are scaled to unit max-norm first; the coupled u-p blocks differ by
    many orders of magnitude.
    """

    def __init__(self, A):
        A = sp.csr_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise SolverError(f"matrix is not square: {A.shape}")
        row_max = abs(A).max(axis=1).toarray().ravel()
        col_nnz = np.diff(sp.csc_matrix(A).indptr)
        bad = np.flatnonzero((row_max == 0) | (col_nnz == 0))
        if len(bad):
            raise SolverError(f"structurally singular matrix (empty row/column {int(bad[0])})", pivot=int(bad[0]))
        self.row_scale = 1.0 / row_max
        As = sp.csc_matrix(sp.diags(self.row_scale) @ A)
        try:
            self.lu = spla.splu(As, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"singular matrix: {exc}") from exc
        piv = np.abs(self.lu.U.diagonal())
        tiny = np.flatnonzero(~(piv > 1e-14 * piv.max()))
        if len(tiny):
            col = int(self.lu.perm_c[tiny[0]])
            raise SolverError(f"near-singular pivot at column {col}", pivot=col)

    def solve(self, b):
        return self.lu.solve(self.row_scale * np.asarray(b, dtype=float))


def _check_residual(A, x, b):
    nA = spla.norm(A, np.inf)
    res = np.linalg.norm(A @ x - b, np.inf)
    bound = 1e-10 * (nA * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf))
    if not np.isfinite(res) or res > bound:
        raise SolverError(f"inaccurate solve: residual {res:.3e} exceeds {bound:.3e}")


def sparse_direct_solve(A, b):
    """Solve ``A x = b`` by sparse LU with a backward-error check."""
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    x = Factorization(A).solve(b)
    _check_residual(A, x, b)
    return x


def newton_solve(residual_fn, jacobian_fn, x0, config, linear_solve=None):
    """Full Newton iteration.

    Stops when ``||r|| <= abs_tol`` or ``||r|| <= rel_tol * ||r(x0)||`` (2-norms).
    Returns ``(x, iterations)``; raises :class:`NonconvergenceError` carrying
    the residual history when ``max_newton_iter`` is exhausted.
    """
    solve = linear_solve or (lambda J, r: sparse_direct_solve(J, r) if sp.issparse(J) else np.linalg.solve(np.atleast_2d(J), r))
    x = np.array(x0, dtype=float, copy=True)
    r = np.atleast_1d(residual_fn(x))
    r0 = float(np.linalg.norm(r))
    history = [r0]
    if r0 <= config.abs_tol:
        return x, 0
    for it in range(1, int(config.max_newton_iter) + 1):
        dx = solve(jacobian_fn(x), -r)
        x = x + np.reshape(dx, x.shape)
        r = np.atleast_1d(residual_fn(x))
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if not np.isfinite(rn):
            raise DivergedStateError(f"non-finite residual at Newton iteration {it}")
        if rn <= config.abs_tol or rn <= config.rel_tol * r0:
            return x, it
    raise NonconvergenceError(
        f"Newton did not converge in {config.max_newton_iter} iterations (|r| = {history[-1]:.3e})",
        history=history,
    )


@dataclass
class RunResult:
    initial: State | None = None
    snapshots: list = field(default_factory=list)
    steps: list = field(default_factory=list)  # per-step diagnostics from the problem

    def at(self, t, tol=1e-9):
        for s in self.snapshots:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t = {t!r}")

    @property
    def times(self):
        return [s.t for s in self.snapshots]


def run_time_loop(problem, config, on_step=None):
    """Advance ``problem`` with fixed steps from t = 0 to ``config.t_end``.

    ``problem`` provides ``initial_state()`` and ``step(x_prev, t_new, step)``
    returning ``(x_new, info)``. Snapshots are stored at the scheduled
    output steps; the initial condition is kept in ``result.initial``.
    """
    errs = config.errors()
    if errs:
        raise InvalidConfigError("invalid time/solver settings", errs)
    wanted = config.output_steps()
    x = np.asarray(problem.initial_state(), dtype=float)
    result = RunResult(initial=State(x.copy(), 0.0, 0))
    if 0 in wanted:
        result.snapshots.append(result.initial)
    for n in range(1, config.n_steps + 1):
        t = n * config.dt
        try:
            x, info = problem.step(x, t, n)
        except NonconvergenceError as exc:
            exc.step, exc.time = n, t
            raise NonconvergenceError(f"step {n} (t = {t:g} s): {exc}", exc.history, n, t) from exc
        info = dict(info or {})
        info.update(step=n, t=t)
        result.steps.append(info)
        if on_step is not None:
            on_step(n, t, x, info)
        if n in wanted:
            result.snapshots.append(State(x.copy(), t, n))
    return result
