"""Receding-horizon control over the data-driven predictor.

The optimal control problem minimizes a quadratic output/input cost over the
predictor's affine map, with hard box constraints on the inputs and output
constraints softened through nonnegative per-entry slacks carrying an L1
penalty.  Two controllers share this machinery: the per-period controller
operating on lifted signals (applying either the whole first period plan or
only its first sample) and a baseline operating directly on raw per-sample
signals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hankel import DEFAULT_RANK_TOL
from .predictor import DataBuffer, PredictorModel, fit_predictor
from .qp import QpResult, solve_qp

POLICIES = ("full-period", "first-sample")


def _as_weight(value, dim, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(dim)
    if arr.shape != (dim, dim):
        raise ValueError(f"{name} must be scalar or {dim}x{dim}, got shape {arr.shape}")
    return arr.copy()


def _as_bound(value, dim, name):
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"{name} must be scalar or length {dim}, got shape {arr.shape}")
    return arr.copy()


@dataclass
class OcpConfig:
    """Weights, bounds and window lengths of the optimal control problem.

    ``Q`` and ``R`` weight one predicted output block and one input block
    (scalars expand to scaled identities).  Bounds are per entry of a block
    and may be None for unbounded; input bounds are enforced exactly while
    output bounds are softened with slack penalized at ``slack_penalty`` per
    unit of violation.
    """

    dim_u: int
    dim_y: int
    horizon: int
    past_window: int
    Q: np.ndarray = 1.0
    R: np.ndarray = 1.0
    u_min: np.ndarray | None = None
    u_max: np.ndarray | None = None
    y_min: np.ndarray | None = None
    y_max: np.ndarray | None = None
    slack_penalty: float | None = None

    def __post_init__(self):
        if self.horizon < 1 or self.past_window < 1:
            raise ValueError(
                f"horizon and past_window must be >= 1, got {self.horizon}, {self.past_window}"
            )
        self.Q = _as_weight(self.Q, self.dim_y, "Q")
        self.R = _as_weight(self.R, self.dim_u, "R")
        eig_q = np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T))
        eig_r = np.linalg.eigvalsh(0.5 * (self.R + self.R.T))
        tol = 1e-10 * max(1.0, eig_q.max(initial=0.0), eig_r.max(initial=0.0))
        if eig_q.min() < -tol:
            raise ValueError(f"Q must be positive semidefinite; smallest eigenvalue {eig_q.min():.3e}")
        if eig_r.min() <= tol:
            raise ValueError(f"R must be positive definite; smallest eigenvalue {eig_r.min():.3e}")
        self.u_min = _as_bound(self.u_min, self.dim_u, "u_min")
        self.u_max = _as_bound(self.u_max, self.dim_u, "u_max")
        self.y_min = _as_bound(self.y_min, self.dim_y, "y_min")
        self.y_max = _as_bound(self.y_max, self.dim_y, "y_max")
        for lo, hi, name in ((self.u_min, self.u_max, "input"),
                             (self.y_min, self.y_max, "output")):
            if lo is not None and hi is not None and np.any(lo > hi):
                raise ValueError(f"{name} bounds are not ordered")
        if self.slack_penalty is None:
            self.slack_penalty = 1e4 * max(float(np.max(np.diag(self.Q))), 1.0)
        if self.slack_penalty <= 0:
            raise ValueError(f"slack_penalty must be positive, got {self.slack_penalty}")

    @property
    def has_output_bounds(self) -> bool:
        return self.y_min is not None or self.y_max is not None


@dataclass
class ControlDecision:
    """Outcome of one optimal control solve."""

    u_plan: np.ndarray
    predicted_outputs: np.ndarray
    slack: np.ndarray
    objective: float
    iterations: int
    qp_result: QpResult = field(repr=False, default=None)


def solve_ocp(model: PredictorModel, past_window, cfg: OcpConfig,
              u_start=None) -> ControlDecision:
    """Solve the horizon problem for the given model and past window."""
    u_past, y_past = past_window
    gamma_free = model.free_response(u_past, y_past)
    return solve_ocp_affine(model.Gamma, gamma_free, cfg, u_start=u_start)


def solve_ocp_affine(Gamma, gamma_free, cfg: OcpConfig,
                     u_start=None) -> ControlDecision:
    """Solve the horizon problem for an explicit affine predictor.

    minimize  ||Gamma u + gamma||_Qbar^2 + ||u||_Rbar^2 + rho * sum(s)
    s.t.      u within input box, Gamma u + gamma within [y_min - s, y_max + s],
              s >= 0

    The input box is hard; the returned plan is clipped onto it so bound-active
    entries sit exactly at the bound.  ``u_start`` seeds the solver (a previous
    plan warm-starts the active set in receding-horizon use).
    """
    f, du, dy = cfg.horizon, cfg.dim_u, cfg.dim_y
    Gamma = np.asarray(Gamma, dtype=float)
    gamma_free = np.asarray(gamma_free, dtype=float).reshape(-1)
    n_u = f * du
    n_y = f * dy
    if Gamma.shape != (n_y, n_u):
        raise ValueError(f"predictor map has shape {Gamma.shape}, expected {(n_y, n_u)}")

    q_bar = np.kron(np.eye(f), 0.5 * (cfg.Q + cfg.Q.T))
    r_bar = np.kron(np.eye(f), 0.5 * (cfg.R + cfg.R.T))
    soft = cfg.has_output_bounds
    n_s = n_y if soft else 0

    P = np.zeros((n_u + n_s, n_u + n_s))
    P[:n_u, :n_u] = 2.0 * (Gamma.T @ q_bar @ Gamma + r_bar)
    q_vec = np.zeros(n_u + n_s)
    q_vec[:n_u] = 2.0 * Gamma.T @ (q_bar @ gamma_free)
    if soft:
        q_vec[n_u:] = cfg.slack_penalty
    const = float(gamma_free @ q_bar @ gamma_free)

    rows, rhs = [], []
    lb = np.tile(cfg.u_min, f) if cfg.u_min is not None else None
    ub = np.tile(cfg.u_max, f) if cfg.u_max is not None else None
    eye_u = np.eye(n_u)
    offsets = {}
    if ub is not None:
        offsets["ub"] = sum(r.shape[0] for r in rows)
        rows.append(np.hstack([eye_u, np.zeros((n_u, n_s))]))
        rhs.append(ub)
    if lb is not None:
        offsets["lb"] = sum(r.shape[0] for r in rows)
        rows.append(np.hstack([-eye_u, np.zeros((n_u, n_s))]))
        rhs.append(-lb)
    if soft:
        eye_s = np.eye(n_s)
        offsets["s"] = sum(r.shape[0] for r in rows)
        rows.append(np.hstack([np.zeros((n_s, n_u)), -eye_s]))
        rhs.append(np.zeros(n_s))
        if cfg.y_max is not None:
            offsets["yup"] = sum(r.shape[0] for r in rows)
            ymax = np.tile(cfg.y_max, f)
            rows.append(np.hstack([Gamma, -eye_s]))
            rhs.append(ymax - gamma_free)
        if cfg.y_min is not None:
            offsets["ylo"] = sum(r.shape[0] for r in rows)
            ymin = np.tile(cfg.y_min, f)
            rows.append(np.hstack([-Gamma, -eye_s]))
            rhs.append(gamma_free - ymin)
    G = np.vstack(rows) if rows else None
    h = np.concatenate(rhs) if rows else None

    # feasible start: the provided start (or zero) clipped onto the box;
    # slacks start at exactly the violation they must cover.  Every tight row
    # (input bound, slack bound, or binding output row) seeds the working set.
    initial_active = []
    u0 = np.zeros(n_u) if u_start is None else \
        np.asarray(u_start, dtype=float).reshape(-1).copy()
    if lb is not None:
        u0 = np.maximum(u0, lb)
        initial_active.extend((offsets["lb"] + i) for i in np.nonzero(u0 == lb)[0])
    if ub is not None:
        u0 = np.minimum(u0, ub)
        initial_active.extend((offsets["ub"] + i) for i in np.nonzero(u0 == ub)[0])
    z0 = u0
    if soft:
        y0 = Gamma @ u0 + gamma_free
        over = y0 - np.tile(cfg.y_max, f) if cfg.y_max is not None else \
            np.full(n_s, -np.inf)
        under = np.tile(cfg.y_min, f) - y0 if cfg.y_min is not None else \
            np.full(n_s, -np.inf)
        s0 = np.maximum(0.0, np.maximum(over, under))
        z0 = np.concatenate([u0, s0])
        for i in range(n_s):
            if s0[i] == 0.0:
                initial_active.append(offsets["s"] + i)
            elif over[i] >= under[i]:
                initial_active.append(offsets["yup"] + i)
            else:
                initial_active.append(offsets["ylo"] + i)

    result = solve_qp(P, q_vec, G, h, z0=z0, initial_active=initial_active)

    u_opt = result.z[:n_u]
    if lb is not None:
        u_opt = np.maximum(u_opt, lb)
    if ub is not None:
        u_opt = np.minimum(u_opt, ub)
    slack = np.maximum(result.z[n_u:], 0.0) if soft else np.zeros(0)
    predicted = (Gamma @ u_opt + gamma_free).reshape(f, dy)
    objective = (float(u_opt @ (P[:n_u, :n_u] @ u_opt)) * 0.5
                 + float(q_vec[:n_u] @ u_opt) + const
                 + (cfg.slack_penalty * float(slack.sum()) if soft else 0.0))
    return ControlDecision(
        u_plan=u_opt.reshape(f, du), predicted_outputs=predicted,
        slack=slack, objective=objective, iterations=result.iterations,
        qp_result=result,
    )


def iteration_cost(y_block, u_block, Q, R) -> float:
    """Quadratic per-iteration cost of one stacked output and input block."""
    y = np.asarray(y_block, dtype=float).reshape(-1)
    u = np.asarray(u_block, dtype=float).reshape(-1)
    Qm = _as_weight(Q, y.shape[0], "Q")
    Rm = _as_weight(R, u.shape[0], "R")
    return float(y @ Qm @ y) + float(u @ Rm @ u)


class DeePRCController:
    """Per-period data-driven controller for a P-periodic plant.

    Works on lifted signals: one data sample is a whole period.  Under the
    ``full-period`` policy the controller refits its predictor once per period
    and applies the entire first planned period.  Under ``first-sample`` it
    decides every raw sample: since the lifted description repeats only at
    anchors P apart, the raw history is re-read through the anchor of the
    current sample, which maintains P per-anchor data views round-robin.
    """

    def __init__(self, period: int, n_inputs: int, n_outputs: int,
                 cfg: OcpConfig, policy: str = "full-period",
                 rank_tol: float = DEFAULT_RANK_TOL,
                 max_columns: int | None = None):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}, expected one of {POLICIES}")
        if cfg.dim_u != n_inputs * period or cfg.dim_y != n_outputs * period:
            raise ValueError(
                f"config block dimensions ({cfg.dim_u}, {cfg.dim_y}) do not match "
                f"lifted dimensions ({n_inputs * period}, {n_outputs * period})"
            )
        self.period = period
        self.n_inputs = n_inputs
        self.n_outputs = n_outputs
        self.cfg = cfg
        self.policy = policy
        self.rank_tol = rank_tol
        self.max_columns = max_columns
        self._raw_u: list[np.ndarray] = []
        self._raw_y: list[np.ndarray] = []
        # full-period: one buffer anchored at sample 0; first-sample: one
        # buffer per anchor residue, fed round-robin as periods complete
        self._anchor_buffers: dict[int, DataBuffer] = {}
        self.last_decision: ControlDecision | None = None
        self.last_model: PredictorModel | None = None

    @property
    def samples_seen(self) -> int:
        return len(self._raw_u)

    @property
    def _current_anchor(self) -> int:
        return len(self._raw_u) % self.period if self.policy == "first-sample" else 0

    @property
    def data_columns(self) -> int:
        """Columns available to the predictor on the current data view."""
        buffer = self._anchor_buffers.get(self._current_anchor)
        return buffer.n_columns if buffer is not None else 0

    def ingest(self, u_raw, y_raw) -> None:
        """Record measured raw samples (open-loop data or applied decisions)."""
        u_raw = np.atleast_2d(np.asarray(u_raw, dtype=float).reshape(-1, self.n_inputs))
        y_raw = np.atleast_2d(np.asarray(y_raw, dtype=float).reshape(-1, self.n_outputs))
        if u_raw.shape[0] != y_raw.shape[0]:
            raise ValueError(
                f"sample counts differ: inputs {u_raw.shape[0]}, outputs {y_raw.shape[0]}"
            )
        P = self.period
        for u, y in zip(u_raw, y_raw):
            self._raw_u.append(u)
            self._raw_y.append(y)
            k = len(self._raw_u)
            if k < P:
                continue
            anchor = k % P
            if self.policy == "full-period" and anchor != 0:
                continue
            buffer = self._anchor_buffers.get(anchor)
            if buffer is None:
                buffer = DataBuffer(
                    self.n_inputs * P, self.n_outputs * P,
                    self.cfg.past_window, self.cfg.horizon,
                    start_index=anchor, max_columns=self.max_columns,
                )
                self._anchor_buffers[anchor] = buffer
            buffer.append(np.concatenate(self._raw_u[k - P:k]),
                          np.concatenate(self._raw_y[k - P:k]))

    def plan(self) -> ControlDecision:
        """Refit the predictor on the current data view and solve the horizon problem."""
        buffer = self._anchor_buffers.get(self._current_anchor)
        if buffer is None or buffer.n_columns < 1:
            raise ValueError("not enough data to fit the predictor; ingest more samples")
        model = fit_predictor(buffer, rel_tol=self.rank_tol)
        decision = solve_ocp(model, buffer.past_window_data(), self.cfg)
        self.last_model = model
        self.last_decision = decision
        return decision

    def step(self, apply_fn) -> np.ndarray:
        """Plan, apply per policy through ``apply_fn``, and record the result.

        ``apply_fn`` receives the raw input samples to apply, shape (T, r),
        and must return the measured outputs, shape (T, l).  Returns the
        applied samples.
        """
        decision = self.plan()
        first_block = decision.u_plan[0].reshape(self.period, self.n_inputs)
        if self.policy == "full-period":
            u_apply = first_block
        else:
            u_apply = first_block[:1]
        y_meas = np.atleast_2d(np.asarray(apply_fn(u_apply), dtype=float))
        self.ingest(u_apply, y_meas)
        return u_apply


class CLDeePCController:
    """Baseline controller operating on raw per-sample signals.

    Uses the same predictor and horizon machinery with window lengths matched
    to the per-period controller (``past_window * P`` past samples and
    ``horizon * P`` future samples) and applies the first computed sample of
    every plan.
    """

    def __init__(self, period: int, n_inputs: int, n_outputs: int,
                 cfg: OcpConfig, rank_tol: float = DEFAULT_RANK_TOL,
                 max_columns: int | None = None):
        if cfg.dim_u != n_inputs or cfg.dim_y != n_outputs:
            raise ValueError(
                f"config block dimensions ({cfg.dim_u}, {cfg.dim_y}) do not match "
                f"raw dimensions ({n_inputs}, {n_outputs})"
            )
        self.period = period
        self.n_inputs = n_inputs
        self.n_outputs = n_outputs
        self.cfg = cfg
        self.rank_tol = rank_tol
        self._buffer = DataBuffer(n_inputs, n_outputs, cfg.past_window,
                                  cfg.horizon, max_columns=max_columns)
        self.last_decision: ControlDecision | None = None
        self.last_model: PredictorModel | None = None

    @property
    def samples_seen(self) -> int:
        return self._buffer.length

    @property
    def data_columns(self) -> int:
        return self._buffer.n_columns

    def ingest(self, u_raw, y_raw) -> None:
        u_raw = np.atleast_2d(np.asarray(u_raw, dtype=float).reshape(-1, self.n_inputs))
        y_raw = np.atleast_2d(np.asarray(y_raw, dtype=float).reshape(-1, self.n_outputs))
        self._buffer.extend(u_raw, y_raw)

    def plan(self) -> ControlDecision:
        if self._buffer.n_columns < 1:
            raise ValueError("not enough data to fit the predictor; ingest more samples")
        model = fit_predictor(self._buffer, rel_tol=self.rank_tol)
        decision = solve_ocp(model, self._buffer.past_window_data(), self.cfg)
        self.last_model = model
        self.last_decision = decision
        return decision

    def step(self, apply_fn) -> np.ndarray:
        """Plan, apply the first sample through ``apply_fn``, record, return it."""
        decision = self.plan()
        u_apply = decision.u_plan[0].reshape(1, self.n_inputs)
        y_meas = np.atleast_2d(np.asarray(apply_fn(u_apply), dtype=float))
        self.ingest(u_apply, y_meas)
        return u_apply
