"""Edge-aware interpolation and smoothing of estimated maps.

A map ``a`` is fit to observations ``a_hat`` on masked pixels while
staying smooth across neighboring pixels that look alike in the guide
image:

    E(a) = sum_x s(x) (a(x) - a_hat(x))^2
         + lambda * sum_{4-neighbor pairs} (a(x) - a(y))^2
                    / (||I(x) - I(y)||^2 + eps)

``s`` is the 0/1 data mask, ``I`` the guide image, and ``eps`` guards
the edge weights against division by zero on flat regions. Minimizing E
is a sparse symmetric positive (semi-)definite linear solve, handled by
conjugate gradients with Jacobi preconditioning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class SolverDivergence(RuntimeError):
    """Raised when CG stops making progress before reaching tolerance."""


@dataclass
class EnergyProblem:
    guide: np.ndarray       # (H, W, 3) image steering the edge weights
    observed: np.ndarray    # (H, W) map values where mask is set
    mask: np.ndarray        # (H, W) bool
    smoothness: float = 1.0
    edge_eps: float = 1e-3

    def __post_init__(self):
        self.guide = np.asarray(self.guide)
        self.observed = np.asarray(self.observed)
        self.mask = np.asarray(self.mask).astype(bool)
        if self.guide.ndim != 3 or self.guide.shape[2] != 3:
            raise ValueError(f"guide must be (H, W, 3), got {self.guide.shape}")
        hw = self.guide.shape[:2]
        if self.observed.shape != hw or self.mask.shape != hw:
            raise ValueError("observed/mask dimensions must match the guide")
        if self.smoothness <= 0.0:
            raise ValueError("smoothness must be positive")
        if self.edge_eps <= 0.0:
            raise ValueError("edge epsilon must be positive")


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix   # symmetric positive (semi-)definite
    rhs: np.ndarray
    shape: tuple[int, int]
    energy_offset: float    # sum of s * a_hat^2, completes the energy value

    def energy(self, x: np.ndarray) -> float:
        """E at ``x`` (flat or (H, W)): x'Ax - 2b'x + offset."""
        v = np.asarray(x, dtype=np.float64).ravel()
        return float(v @ (self.matrix @ v) - 2.0 * (self.rhs @ v) + self.energy_offset)


def build_system(problem: EnergyProblem) -> SparseSystem:
    """Assemble the normal equations ``(S + lambda*L) a = S a_hat``.

    ``S`` is the diagonal data mask and ``L`` the graph Laplacian over
    4-neighbor edges weighted by ``1 / (||dI||^2 + eps)``, each
    undirected edge counted once in the energy.
    """
    if not problem.mask.any():
        raise ValueError("mask selects no pixels; the system is singular")
    height, width = problem.mask.shape
    n = height * width
    guide = problem.guide.astype(np.float64)
    lam = float(problem.smoothness)
    idx = np.arange(n).reshape(height, width)

    rows_list, cols_list, vals_list = [], [], []
    diag = problem.mask.astype(np.float64).ravel()

    for axis in (0, 1):
        if problem.mask.shape[axis] < 2:
            continue
        if axis == 0:
            diff = guide[1:, :] - guide[:-1, :]
            i_idx, j_idx = idx[:-1, :].ravel(), idx[1:, :].ravel()
        else:
            diff = guide[:, 1:] - guide[:, :-1]
            i_idx, j_idx = idx[:, :-1].ravel(), idx[:, 1:].ravel()
        w = lam / ((diff * diff).sum(axis=2).ravel() + problem.edge_eps)
        rows_list += [i_idx, j_idx]
        cols_list += [j_idx, i_idx]
        vals_list += [-w, -w]
        diag += np.bincount(i_idx, weights=w, minlength=n)
        diag += np.bincount(j_idx, weights=w, minlength=n)

    rows = np.concatenate([np.concatenate(rows_list), np.arange(n)]) if rows_list else np.arange(n)
    cols = np.concatenate([np.concatenate(cols_list), np.arange(n)]) if cols_list else np.arange(n)
    vals = np.concatenate([np.concatenate(vals_list), diag]) if vals_list else diag
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    observed = problem.observed.astype(np.float64).ravel()
    s = problem.mask.ravel()
    rhs = np.where(s, observed, 0.0)
    offset = float((observed[s] ** 2).sum())
    return SparseSystem(matrix=matrix, rhs=rhs, shape=(height, width), energy_offset=offset)


@dataclass
class CgResult:
    solution: np.ndarray          # (H, W) float64
    iterations: int
    rel_residual: float
    converged: bool
    energy_trace: list[tuple[int, float]]


# residual recompute (and energy sample) interval; also the window for
# the no-progress divergence check
_RESTART = 50


def solve_cg(system: SparseSystem, tol: float = 1e-6, max_iter: int = 5000) -> CgResult:
    """Jacobi-preconditioned conjugate gradients on the assembled system.

    Stops when ``||Ax - b|| / ||b|| <= tol``; warns and returns the
    current iterate if ``max_iter`` is exhausted; raises
    :class:`SolverDivergence` if the residual stops improving.
    """
    a = system.matrix
    b = system.rhs
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        # all masked observations are exactly zero; x = 0 solves exactly
        x = np.zeros(b.shape, dtype=np.float64)
        return CgResult(x.reshape(system.shape), 0, 0.0, True, [(0, system.energy(x))])
    inv_diag = 1.0 / a.diagonal()
    x = np.full(b.shape, b[b != 0].mean(), dtype=np.float64)
    r = b - a @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    trace = [(0, system.energy(x))]
    rel = float(np.linalg.norm(r)) / b_norm
    if rel <= tol:  # the initial guess already solves the system
        return CgResult(x.reshape(system.shape), 0, rel, True, trace)
    best = rel
    since_best = 0
    k = 0
    while k < max_iter:
        k += 1
        ap = a @ p
        denom = float(p @ ap)
        if denom == 0.0:  # zero search direction: iterate is exact
            rel = float(np.linalg.norm(b - a @ x)) / b_norm
            return CgResult(x.reshape(system.shape), k, rel, True, trace)
        alpha = rz / denom
        x += alpha * p
        if k % _RESTART == 0:
            r = b - a @ x  # periodic recompute sheds accumulated roundoff
            trace.append((k, system.energy(x)))
        else:
            r -= alpha * ap
        rel = float(np.linalg.norm(r)) / b_norm
        if rel <= tol:
            trace.append((k, system.energy(x)))
            return CgResult(x.reshape(system.shape), k, rel, True, trace)
        if rel < best * (1.0 - 1e-12):
            best = rel
            since_best = 0
        else:
            since_best += 1
            if since_best >= _RESTART:
                raise SolverDivergence(
                    f"no residual improvement over {_RESTART} iterations "
                    f"(relative residual {rel:.3e})"
                )
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    warnings.warn(
        f"CG hit max_iter={max_iter} with relative residual {rel:.3e}",
        RuntimeWarning,
        stacklevel=2,
    )
    return CgResult(x.reshape(system.shape), k, rel, False, trace)


def regularize_maps(
    t_map: np.ndarray,
    a_map: np.ndarray,
    mask: np.ndarray,
    guide: np.ndarray,
    smoothness: float = 1.0,
    edge_eps: float = 1e-3,
    tol: float = 1e-6,
    max_iter: int = 5000,
):
    """Smooth/interpolate the transmittance map and each illumination
    channel independently against the same guide; outputs are clamped
    to [0, 1]."""
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise ValueError("empty coverage mask: nothing to interpolate from")
    channels = [np.asarray(t_map)] + [np.asarray(a_map)[:, :, c] for c in range(3)]
    solved = []
    for channel in channels:
        problem = EnergyProblem(
            guide=guide, observed=channel, mask=mask,
            smoothness=smoothness, edge_eps=edge_eps,
        )
        result = solve_cg(build_system(problem), tol=tol, max_iter=max_iter)
        solved.append(np.clip(result.solution, 0.0, 1.0).astype(np.float32))
    return solved[0], np.stack(solved[1:], axis=2)
