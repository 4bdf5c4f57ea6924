"""Rank and representability checks for data of systems with exogenous disturbances.

For an LTI system driven by a known input and an autonomous disturbance
generator, the span of one experiment's Hankel data determines which
trajectories are representable.  With a controllable input pair and a
persistently exciting input, the stacked state-input data matrix has full row
rank when the disturbance generator pair ``(A_d, d0)`` is controllable; when
that pair has Krylov rank ``nu < n_d`` the data matrix is exactly ``n_d - nu``
rank deficient, yet trajectories whose disturbance stays on the ``d0`` orbit
remain representable.  The checks here sample such systems and verify these
statements numerically through SVD ranks and least-squares residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hankel import (DEFAULT_RANK_TOL, block_hankel, is_persistently_exciting,
                     numerical_rank, PersistencyReport)
from .lifting import LiftedSystem


class PersistencyError(ValueError):
    """Raised when data fails the persistency-of-excitation precondition."""

    def __init__(self, report: PersistencyReport):
        super().__init__(
            f"input not persistently exciting of order {report.order}: {report.reason}"
        )
        self.report = report


@dataclass
class LtiDisturbedSystem:
    """Deterministic LTI system with an autonomous observable disturbance.

        x[k+1] = a x[k] + b u[k] + b_d d[k]
        d[k+1] = a_d d[k]
        y[k]   = c x[k] + c_d d[k] + d_f u[k]

    The augmented state is [x; d] with dimension ``n_bar = n_x + n_d``; the
    disturbance block is never driven by the input.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d_f: np.ndarray
    a_d: np.ndarray
    b_d: np.ndarray
    c_d: np.ndarray

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.atleast_2d(np.asarray(self.b, dtype=float))
        self.c = np.atleast_2d(np.asarray(self.c, dtype=float))
        self.d_f = np.atleast_2d(np.asarray(self.d_f, dtype=float))
        a_d = np.asarray(self.a_d, dtype=float)
        a_d = a_d.reshape(0, 0) if a_d.size == 0 else np.atleast_2d(a_d)
        n_d = a_d.shape[0]
        self.a_d = a_d
        self.b_d = np.asarray(self.b_d, dtype=float).reshape(self.a.shape[0], n_d)
        self.c_d = np.asarray(self.c_d, dtype=float).reshape(self.c.shape[0], n_d)

    @property
    def n_x(self) -> int:
        return self.a.shape[0]

    @property
    def n_u(self) -> int:
        return self.b.shape[1]

    @property
    def n_y(self) -> int:
        return self.c.shape[0]

    @property
    def n_d(self) -> int:
        return self.a_d.shape[0]

    @property
    def n_bar(self) -> int:
        return self.n_x + self.n_d

    @property
    def state_matrix(self) -> np.ndarray:
        """Augmented state matrix [[a, b_d], [0, a_d]]."""
        top = np.hstack([self.a, self.b_d])
        bottom = np.hstack([np.zeros((self.n_d, self.n_x)), self.a_d])
        return np.vstack([top, bottom])

    @property
    def input_matrix(self) -> np.ndarray:
        """Augmented input matrix [b; 0]: the disturbance block is undriven."""
        return np.vstack([self.b, np.zeros((self.n_d, self.n_u))])

    @property
    def output_matrix(self) -> np.ndarray:
        return np.hstack([self.c, self.c_d])

    def simulate(self, x0, d0, u_seq):
        """Run the system; returns augmented states (T+1, n_bar) and outputs (T, n_y)."""
        u = np.atleast_2d(np.asarray(u_seq, dtype=float).reshape(len(u_seq), -1))
        xbar = np.concatenate([
            np.asarray(x0, dtype=float).reshape(-1),
            np.asarray(d0, dtype=float).reshape(-1),
        ])
        if xbar.shape[0] != self.n_bar:
            raise ValueError(
                f"initial augmented state has length {xbar.shape[0]}, expected {self.n_bar}"
            )
        A_L, B_L, C_L = self.state_matrix, self.input_matrix, self.output_matrix
        T = len(u)
        states = np.empty((T + 1, self.n_bar))
        outputs = np.empty((T, self.n_y))
        states[0] = xbar
        for t in range(T):
            outputs[t] = C_L @ states[t] + self.d_f @ u[t]
            states[t + 1] = A_L @ states[t] + B_L @ u[t]
        return states, outputs


def augmented_from_lifted(lifted: LiftedSystem) -> LtiDisturbedSystem:
    """View a lifted periodic plant as an LTI system with a constant disturbance.

    The per-period disturbance block becomes the autonomous state with an
    identity generator; the noise channel is dropped (deterministic view).
    """
    mP = lifted.m * lifted.period
    return LtiDisturbedSystem(
        a=lifted.A, b=lifted.B, c=lifted.C, d_f=lifted.D,
        a_d=np.eye(mP), b_d=lifted.F, c_d=lifted.G,
    )


@dataclass
class ControllabilityReport:
    """Rank and column-space basis of a controllability matrix."""

    name: str
    rank: int
    dim: int
    basis: np.ndarray
    singular_values: np.ndarray

    @property
    def is_full(self) -> bool:
        return self.rank == self.dim


def controllability_rank(a, b, rel_tol: float = DEFAULT_RANK_TOL,
                         name: str = "(A, B)") -> ControllabilityReport:
    """Rank of [B, AB, ..., A^(dim-1) B] with an orthonormal column-space basis."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"state matrix must be square, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(
            f"input matrix has {b.shape[0]} rows, expected {a.shape[0]}"
        )
    dim = a.shape[0]
    blocks = []
    cur = b
    for _ in range(dim):
        blocks.append(cur)
        cur = a @ cur
    ctrb = np.hstack(blocks) if blocks else np.zeros((dim, 0))
    u_svd, sv, _ = np.linalg.svd(ctrb, full_matrices=False)
    rank = int(np.count_nonzero(sv > rel_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return ControllabilityReport(name=name, rank=rank, dim=dim,
                                 basis=u_svd[:, :rank].copy(),
                                 singular_values=sv)


@dataclass
class StateInputRankCheck:
    """Measured rank of the stacked state-input data matrix vs expectations."""

    rank: int
    rows: int
    columns: int
    expected_full: int
    expected_relaxed: int | None
    singular_values: np.ndarray
    pe_report: PersistencyReport
    boundary_case: bool = False

    @property
    def deficiency(self) -> int:
        return self.expected_full - self.rank

    @property
    def matches_full(self) -> bool:
        return self.rank == self.expected_full

    @property
    def matches_relaxed(self) -> bool:
        return self.expected_relaxed is not None and self.rank == self.expected_relaxed


def check_state_input_rank(xbar_data, u_data, horizon: int,
                           rel_tol: float = DEFAULT_RANK_TOL,
                           n_x: int | None = None,
                           nu: int | None = None) -> StateInputRankCheck:
    """Rank of [one-block-row Hankel of augmented states; depth-L Hankel of inputs].

    The input must be persistently exciting of order ``horizon + n_bar``
    (raises :class:`PersistencyError` otherwise).  The measured rank is
    compared against the full value ``horizon * n_u + n_bar`` and, when
    ``n_x`` and ``nu`` are given, against ``horizon * n_u + n_x + nu``.
    ``boundary_case`` flags ``nu == n_d``, where the two expectations coincide.
    """
    xbar = np.atleast_2d(np.asarray(xbar_data, dtype=float))
    u = np.atleast_2d(np.asarray(u_data, dtype=float).reshape(len(u_data), -1))
    n_bar = xbar.shape[1]
    n_u = u.shape[1]
    n_cols = len(u) - horizon - n_bar + 1 + n_bar  # N + n_bar columns
    if n_cols < 1:
        raise ValueError(
            f"input trajectory of length {len(u)} too short for horizon {horizon} "
            f"and augmented dimension {n_bar}"
        )
    pe = is_persistently_exciting(u, horizon + n_bar, rel_tol)
    if not pe:
        raise PersistencyError(pe)
    if xbar.shape[0] < n_cols:
        raise ValueError(
            f"need {n_cols} augmented state samples, have {xbar.shape[0]}"
        )
    stacked = np.vstack([
        block_hankel(xbar, 0, 1, n_cols).matrix,
        block_hankel(u, 0, horizon, n_cols).matrix,
    ])
    rank, sv = numerical_rank(stacked, rel_tol)
    expected_full = horizon * n_u + n_bar
    expected_relaxed = None
    boundary = False
    if n_x is not None and nu is not None:
        expected_relaxed = horizon * n_u + n_x + nu
        boundary = nu == n_bar - n_x
    return StateInputRankCheck(rank=rank, rows=stacked.shape[0],
                               columns=n_cols, expected_full=expected_full,
                               expected_relaxed=expected_relaxed,
                               singular_values=sv, pe_report=pe,
                               boundary_case=boundary)


def _relative_residual(matrix, rhs, solution) -> float:
    num = float(np.linalg.norm(matrix @ solution - rhs))
    den = float(np.linalg.norm(rhs))
    return num / den if den > 0 else num


def represent_trajectory(u_data, y_data, target_u, target_y,
                         rel_tol: float = DEFAULT_RANK_TOL):
    """Least-squares coefficients expressing a target trajectory in the data span.

    Stacks depth-L input and output Hankels of the measured data over all
    available columns and solves for ``g`` so the stacked target [inputs;
    outputs] is matched.  Returns ``(g, residual)`` with the residual as a
    relative 2-norm; a genuine trajectory of the data-generating system yields
    a residual at rounding level.
    """
    u = np.atleast_2d(np.asarray(u_data, dtype=float).reshape(len(u_data), -1))
    y = np.atleast_2d(np.asarray(y_data, dtype=float).reshape(len(y_data), -1))
    tu = np.atleast_2d(np.asarray(target_u, dtype=float).reshape(len(target_u), -1))
    ty = np.atleast_2d(np.asarray(target_y, dtype=float).reshape(len(target_y), -1))
    L = tu.shape[0]
    if ty.shape[0] != L:
        raise ValueError(
            f"target input and output lengths differ: {L} vs {ty.shape[0]}"
        )
    if len(u) != len(y):
        raise ValueError(f"data lengths differ: inputs {len(u)}, outputs {len(y)}")
    n_cols = len(u) - L + 1
    if n_cols < 1:
        raise ValueError(
            f"data of length {len(u)} cannot form a depth-{L} Hankel matrix"
        )
    stacked = np.vstack([
        block_hankel(u, 0, L, n_cols).matrix,
        block_hankel(y, 0, L, n_cols).matrix,
    ])
    rhs = np.concatenate([tu.ravel(), ty.ravel()])
    g, *_ = np.linalg.lstsq(stacked, rhs, rcond=rel_tol)
    return g, _relative_residual(stacked, rhs, g)


def verify_state_representation(xbar_data, u_data, target_state, target_u,
                                rel_tol: float = DEFAULT_RANK_TOL):
    """Least-squares match of a target (initial augmented state, input window).

    Solves [one-block-row Hankel of states; depth-L Hankel of inputs] g =
    [target state; stacked target inputs] and returns ``(g, residual)``.
    """
    xbar = np.atleast_2d(np.asarray(xbar_data, dtype=float))
    u = np.atleast_2d(np.asarray(u_data, dtype=float).reshape(len(u_data), -1))
    tu = np.atleast_2d(np.asarray(target_u, dtype=float).reshape(len(target_u), -1))
    ts = np.asarray(target_state, dtype=float).reshape(-1)
    L = tu.shape[0]
    n_cols = len(u) - L + 1
    if n_cols < 1:
        raise ValueError(
            f"data of length {len(u)} cannot form a depth-{L} Hankel matrix"
        )
    if xbar.shape[0] < n_cols:
        raise ValueError(f"need {n_cols} state samples, have {xbar.shape[0]}")
    if ts.shape[0] != xbar.shape[1]:
        raise ValueError(
            f"target state has length {ts.shape[0]}, expected {xbar.shape[1]}"
        )
    stacked = np.vstack([
        block_hankel(xbar, 0, 1, n_cols).matrix,
        block_hankel(u, 0, L, n_cols).matrix,
    ])
    rhs = np.concatenate([ts, tu.ravel()])
    g, *_ = np.linalg.lstsq(stacked, rhs, rcond=rel_tol)
    return g, _relative_residual(stacked, rhs, g)


# -- random test-system construction ---------------------------------------


def _random_orthogonal(rng, n):
    if n == 0:
        return np.zeros((0, 0))
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _scale_spectral_radius(a, rng, low=0.5, high=0.95):
    radius = max(abs(np.linalg.eigvals(a))) if a.size else 0.0
    if radius == 0.0:
        return a
    return a * (rng.uniform(low, high) / radius)


def random_controllable_pair(rng, n_x, n_u):
    """Random stable (a, b) with a well-conditioned controllability matrix."""
    while True:
        a = _scale_spectral_radius(rng.standard_normal((n_x, n_x)), rng)
        b = rng.standard_normal((n_x, n_u))
        report = controllability_rank(a, b)
        sv = report.singular_values
        if report.is_full and sv[-1] > 1e-6 * sv[0]:
            return a, b


def random_disturbance_generator(rng, n_d, nu):
    """Random (a_d, d0) whose controllability matrix has rank exactly nu.

    Built from an orthogonal similarity of a block-diagonal generator: a
    nu-dimensional orthogonal block reached by d0 and an unreachable
    remainder.  Orthogonal blocks keep the disturbance orbit well conditioned.
    """
    if not 1 <= nu <= n_d:
        raise ValueError(f"nu must lie in [1, {n_d}], got {nu}")
    while True:
        q = _random_orthogonal(rng, n_d)
        reach = _random_orthogonal(rng, nu)
        rest = 0.8 * _random_orthogonal(rng, n_d - nu)
        a_d = np.zeros((n_d, n_d))
        a_d[:nu, :nu] = reach
        a_d[nu:, nu:] = rest
        a_d = q @ a_d @ q.T
        v = rng.standard_normal(nu)
        d0 = q @ np.concatenate([v / np.linalg.norm(v), np.zeros(n_d - nu)])
        report = controllability_rank(a_d, d0)
        sv = report.singular_values
        if report.rank == nu and sv[nu - 1] > 1e-6 * sv[0]:
            return a_d, d0


def random_disturbed_system(rng, n_x, n_u, n_y, n_d, nu):
    """Random disturbed LTI system with prescribed disturbance Krylov rank."""
    a, b = random_controllable_pair(rng, n_x, n_u)
    if n_d > 0:
        a_d, d0 = random_disturbance_generator(rng, n_d, nu)
    else:
        a_d, d0 = np.zeros((0, 0)), np.zeros(0)
    system = LtiDisturbedSystem(
        a=a, b=b, c=rng.standard_normal((n_y, n_x)),
        d_f=rng.standard_normal((n_y, n_u)),
        a_d=a_d, b_d=rng.standard_normal((n_x, n_d)),
        c_d=rng.standard_normal((n_y, n_d)),
    )
    return system, d0


# -- verification suites ----------------------------------------------------


@dataclass
class SuiteCase:
    """One verified instance in a suite run."""

    label: str
    measured: float
    expected: float
    passed: bool
    detail: str = ""


def _pe_input(rng, length, n_u):
    return rng.standard_normal((length, n_u))


def full_rank_suite(n_cases: int = 20, seed: int = 0,
                    rel_tol: float = DEFAULT_RANK_TOL) -> list[SuiteCase]:
    """Sampled check: controllable disturbance generators give full row rank."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    cases = []
    for idx in range(n_cases):
        n_x = int(rng.integers(2, 5))
        n_u = int(rng.integers(1, 3))
        n_d = int(rng.integers(1, 4))
        horizon = int(rng.integers(2, 6))
        system, d0 = random_disturbed_system(rng, n_x, n_u, 2, n_d, nu=n_d)
        n_bar = system.n_bar
        length = (horizon + n_bar) * n_u + 40 + horizon + n_bar - 1
        u = _pe_input(rng, length, n_u)
        states, _ = system.simulate(rng.standard_normal(n_x), d0, u)
        check = check_state_input_rank(states[:-1], u, horizon, rel_tol,
                                       n_x=n_x, nu=n_d)
        cases.append(SuiteCase(
            label=f"full-rank case {idx}: n_x={n_x} n_u={n_u} n_d={n_d} L={horizon}",
            measured=check.rank, expected=check.expected_full,
            passed=check.matches_full,
            detail=f"rows={check.rows} columns={check.columns}",
        ))
    return cases


def rank_deficiency_suite(n_cases: int = 20, seed: int = 0,
                          rel_tol: float = DEFAULT_RANK_TOL,
                          residual_tol: float = 1e-8) -> list[SuiteCase]:
    """Sampled check: Krylov rank nu < n_d gives deficiency n_d - nu exactly,
    while fresh trajectories on the same disturbance orbit stay representable."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2,)))
    cases = []
    for idx in range(n_cases):
        n_x = int(rng.integers(2, 5))
        n_u = int(rng.integers(1, 3))
        n_d = int(rng.integers(2, 5))
        nu = int(rng.integers(1, n_d))
        horizon = int(rng.integers(2, 6))
        system, d0 = random_disturbed_system(rng, n_x, n_u, 2, n_d, nu=nu)
        n_bar = system.n_bar
        length = (horizon + n_bar) * n_u + 40 + horizon + n_bar - 1
        u = _pe_input(rng, length, n_u)
        states, outputs = system.simulate(rng.standard_normal(n_x), d0, u)
        check = check_state_input_rank(states[:-1], u, horizon, rel_tol,
                                       n_x=n_x, nu=nu)
        cases.append(SuiteCase(
            label=f"deficiency case {idx}: n_d={n_d} nu={nu} L={horizon}",
            measured=check.rank, expected=check.expected_relaxed,
            passed=check.matches_relaxed,
            detail=f"deficiency={check.deficiency} (expected {n_d - nu})",
        ))
        # fresh trajectory with the disturbance shifted along its own orbit
        shift = int(rng.integers(0, n_d + 2))
        d_fresh = np.linalg.matrix_power(system.a_d, shift) @ d0
        u_fresh = _pe_input(rng, horizon, n_u)
        _, y_fresh = system.simulate(rng.standard_normal(n_x), d_fresh, u_fresh)
        _, residual = represent_trajectory(u, outputs, u_fresh, y_fresh, rel_tol)
        cases.append(SuiteCase(
            label=f"representability case {idx}: n_d={n_d} nu={nu} L={horizon}",
            measured=residual, expected=residual_tol,
            passed=residual <= residual_tol,
            detail=f"relative residual {residual:.3e}",
        ))
    return cases


def classic_suite(n_cases: int = 20, seed: int = 0,
                  rel_tol: float = DEFAULT_RANK_TOL) -> list[SuiteCase]:
    """Regression to the disturbance-free setting: full rank L*n_u + n_x."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(3,)))
    cases = []
    for idx in range(n_cases):
        n_x = int(rng.integers(2, 5))
        n_u = int(rng.integers(1, 3))
        horizon = int(rng.integers(2, 6))
        system, d0 = random_disturbed_system(rng, n_x, n_u, 2, n_d=0, nu=0)
        length = (horizon + n_x) * n_u + 40 + horizon + n_x - 1
        u = _pe_input(rng, length, n_u)
        states, _ = system.simulate(rng.standard_normal(n_x), d0, u)
        check = check_state_input_rank(states[:-1], u, horizon, rel_tol)
        cases.append(SuiteCase(
            label=f"classic case {idx}: n_x={n_x} n_u={n_u} L={horizon}",
            measured=check.rank, expected=check.expected_full,
            passed=check.matches_full,
        ))
    return cases
