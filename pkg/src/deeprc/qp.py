"""Dense convex quadratic programming by a primal active-set method.

Solves

    minimize    0.5 z' P z + q' z
    subject to  G z <= h

for positive semidefinite P.  The method walks a feasible path: at each
working set it solves the equality-constrained subproblem through a
null-space eigendecomposition, takes the longest step that keeps all other
rows feasible, and adds the blocking row.  Directions of zero curvature with
a nonzero reduced gradient are followed as rays to the nearest blocking
constraint, which makes linear slack terms (penalized but unsquared
variables) work without regularization.  Iterates are feasible throughout
and the objective trace is non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class QpResult:
    z: np.ndarray
    objective: float
    iterations: int
    objective_trace: np.ndarray
    active_set: tuple
    multipliers: np.ndarray
    kkt_residual: float


class QpIterationLimit(RuntimeError):
    """Iteration budget exhausted; carries the best feasible iterate found."""

    def __init__(self, result: QpResult):
        super().__init__(
            f"active-set iteration limit reached after {result.iterations} steps "
            f"(kkt residual {result.kkt_residual:.3e})"
        )
        self.result = result


def _objective(P, q, z):
    return 0.5 * float(z @ P @ z) + float(q @ z)


def _null_space_parts(working_rows, n):
    """Free-coordinate mask and reduced null basis of the working rows.

    Rows with a single nonzero entry simply pin one coordinate; they are
    eliminated directly and only the remaining general rows (restricted to the
    free coordinates) need an SVD, which keeps the subproblem small.  Returns
    ``(free, Zf)`` with the null space of the full row set being ``Zf``
    embedded into the free coordinates.
    """
    fixed = np.zeros(n, dtype=bool)
    general = []
    for row in working_rows:
        nz = np.nonzero(row)[0]
        if nz.shape[0] == 1:
            fixed[nz[0]] = True
        elif nz.shape[0] > 1:
            general.append(row)
    free = ~fixed
    n_free = int(free.sum())
    if n_free == 0:
        return free, np.zeros((0, 0))
    if general:
        gen = np.asarray(general)[:, free]
        sv_max_rows = max(gen.shape)
        _, sv, vt = np.linalg.svd(gen)
        tol = sv_max_rows * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
        rank = int(np.count_nonzero(sv > tol))
        zf = vt[rank:].T
    else:
        zf = np.eye(n_free)
    return free, zf


def _direction(P, g, working_rows, n):
    """Step for the equality-constrained subproblem on the working set.

    Returns ``(direction, is_ray)``; direction is None when the current point
    is stationary on the working set.  A ray is a zero-curvature descent
    direction and must be followed to a blocking constraint.
    """
    free, zf = _null_space_parts(working_rows, n)
    if zf.shape[1] == 0:
        return None, False
    p_ff = P[np.ix_(free, free)]
    h_red = zf.T @ p_ff @ zf
    c = zf.T @ g[free]
    eigvals, eigvecs = np.linalg.eigh(0.5 * (h_red + h_red.T))
    curv_tol = 1e-12 * max(eigvals[-1] if eigvals.size else 0.0, 1.0)
    positive = eigvals > curv_tol
    comp = eigvecs.T @ c
    grad_tol = 1e-10 * (1.0 + float(np.linalg.norm(g)))
    ray_comp = comp.copy()
    ray_comp[positive] = 0.0
    if np.linalg.norm(ray_comp) > grad_tol:
        step_free = -zf @ (eigvecs @ ray_comp)
        d = np.zeros(n)
        d[free] = step_free
        return d, True
    if not positive.any():
        return None, False
    newton = np.zeros_like(comp)
    newton[positive] = comp[positive] / eigvals[positive]
    step_free = -zf @ (eigvecs @ newton)
    if np.linalg.norm(step_free) <= 1e-13 * (1.0 + float(np.linalg.norm(g))):
        return None, False
    d = np.zeros(n)
    d[free] = step_free
    return d, False


def _max_step(z, d, G, h, in_working):
    """Longest feasible step along d and the first blocking row, if any."""
    if G.shape[0] == 0:
        return np.inf, None
    Gd = G @ d
    dir_tol = 1e-13 * (1.0 + float(np.max(np.abs(Gd))))
    candidates = np.where(~in_working & (Gd > dir_tol))[0]
    if candidates.shape[0] == 0:
        return np.inf, None
    slack = np.maximum(h[candidates] - G[candidates] @ z, 0.0)
    ratios = slack / Gd[candidates]
    best = int(np.argmin(ratios))
    return float(ratios[best]), int(candidates[best])


def _kkt_residual(P, q, G, h, z, lam):
    grad = P @ z + q + (G.T @ lam if G.shape[0] else 0.0)
    scale_stat = max(1.0, float(np.max(np.abs(P @ z))), float(np.max(np.abs(q))))
    r_stat = float(np.max(np.abs(grad))) / scale_stat
    if G.shape[0]:
        resid = G @ z - h
        scale_feas = max(1.0, float(np.max(np.abs(G @ z))), float(np.max(np.abs(h))))
        r_feas = max(0.0, float(np.max(resid))) / scale_feas
        r_comp = float(np.max(np.abs(lam * resid))) / scale_feas
    else:
        r_feas = r_comp = 0.0
    return max(r_stat, r_feas, r_comp)


def solve_qp(P, q, G=None, h=None, z0=None, tol: float = 1e-8,
             max_iter: int | None = None, initial_active=()) -> QpResult:
    """Solve the inequality-constrained convex QP from a feasible start.

    ``z0`` must satisfy ``G z0 <= h`` (up to rounding); it defaults to the
    origin.  ``initial_active`` seeds the working set with row indices that
    are tight at ``z0`` (rows not actually tight are ignored).  Raises
    :class:`QpIterationLimit` with the best iterate when the iteration budget
    runs out, and ``ValueError`` for an infeasible start or an unbounded ray.
    """
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float).reshape(-1)
    n = q.shape[0]
    P = 0.5 * (P + P.T)
    if G is None:
        G = np.zeros((0, n))
        h = np.zeros(0)
    else:
        G = np.atleast_2d(np.asarray(G, dtype=float))
        h = np.asarray(h, dtype=float).reshape(-1)
    m = G.shape[0]
    z = np.zeros(n) if z0 is None else np.asarray(z0, dtype=float).reshape(-1).copy()
    if m:
        worst = float(np.max(G @ z - h))
        if worst > 1e-9 * (1.0 + float(np.max(np.abs(h)))):
            raise ValueError(f"start point violates constraints by {worst:.3e}")
    if max_iter is None:
        max_iter = 30 * (n + m) + 100

    working: list[int] = []
    in_working = np.zeros(m, dtype=bool)
    for row in initial_active:
        row = int(row)
        tight = abs(float(G[row] @ z - h[row])) <= 1e-9 * (1.0 + abs(float(h[row])))
        if tight and not in_working[row]:
            working.append(row)
            in_working[row] = True
    trace = [_objective(P, q, z)]
    lam_working = np.zeros(0)
    iterations = 0
    optimal = False

    while iterations < max_iter:
        iterations += 1
        g = P @ z + q
        d, is_ray = _direction(P, g, G[working], n)
        if d is None:
            if not working:
                optimal = True
                break
            lam_working, *_ = np.linalg.lstsq(G[working].T, -g, rcond=None)
            j = int(np.argmin(lam_working))
            if lam_working[j] >= -tol * (1.0 + float(np.max(np.abs(lam_working)))):
                optimal = True
                break
            in_working[working[j]] = False
            working.pop(j)
            continue
        alpha_max, blocker = _max_step(z, d, G, h, in_working)
        if is_ray:
            if not np.isfinite(alpha_max):
                raise ValueError("objective is unbounded below along a feasible ray")
            alpha = alpha_max
        else:
            alpha = min(1.0, alpha_max)
        z = z + alpha * d
        trace.append(_objective(P, q, z))
        if blocker is not None and alpha == alpha_max:
            working.append(blocker)
            in_working[blocker] = True

    lam = np.zeros(m)
    if working:
        g = P @ z + q
        lam_working, *_ = np.linalg.lstsq(G[working].T, -g, rcond=None)
        lam[working] = np.maximum(lam_working, 0.0)
    result = QpResult(
        z=z, objective=_objective(P, q, z), iterations=iterations,
        objective_trace=np.asarray(trace), active_set=tuple(working),
        multipliers=lam, kkt_residual=_kkt_residual(P, q, G, h, z, lam),
    )
    if not optimal:
        raise QpIterationLimit(result)
    return result
