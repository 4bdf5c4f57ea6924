"""Chained one-step data-driven output predictor with instrumental weighting.

The predictor regresses the next output block on a window of ``p`` past
inputs, the current input, and ``p`` past outputs.  The stacked data matrix Z
of those regressors doubles as the instrumental variable: the one-step map is
obtained from the normal equations ``(Z Z^T) G = rhs`` and predictions are
``y_hat = Y_next Z^T g``.  Multi-step predictions chain the one-step map f
times, feeding each prediction back into the next step's past-output window.
Because every step is linear, the chain collapses into an affine map

    y_hat(stacked) = Gamma * u_future(stacked) + gamma(past window)

whose block lower-triangular ``Gamma`` feeds the optimal control problem.

The normal equations are solved through a rank-revealing eigendecomposition
truncated at the configured tolerance.  On noise-free data ``Z Z^T`` is
structurally singular (the output rows add only as many independent
directions as the state and disturbance provide), yet predictions are
invariant over the solution set for any query consistent with the data, so
the truncated solve returns the exact predictor.  Callers that require full
rank can pass ``strict=True`` to turn deficiency into an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hankel import DEFAULT_RANK_TOL


class RankDeficientDataError(ValueError):
    """Raised in strict mode when the instrument Gram matrix loses rank."""

    def __init__(self, rank, rows, singular_values):
        super().__init__(
            f"instrument matrix has numerical rank {rank}, below full row rank "
            f"{rows}; data is not informative enough for a unique predictor"
        )
        self.rank = rank
        self.rows = rows
        self.singular_values = singular_values


class DataBuffer:
    """Input-output history feeding the predictor's data matrices.

    Samples may be lifted per-period vectors or raw per-sample vectors; the
    buffer only sees their dimensions.  The instrument needs windows of
    ``past_window + 1`` inputs and ``past_window`` outputs per column, so a
    history of T samples provides ``T - past_window`` columns.  The Gram
    matrices ``Z Z^T`` and ``Z Y_next^T`` are accumulated incrementally on
    append, which reproduces a full refit at every step without rebuilding Z.
    ``max_columns`` enables a sliding window by evicting the oldest columns.
    """

    def __init__(self, dim_u: int, dim_y: int, past_window: int, horizon: int,
                 start_index: int = 0, max_columns: int | None = None):
        if past_window < 1:
            raise ValueError(f"past_window must be >= 1, got {past_window}")
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.dim_u = dim_u
        self.dim_y = dim_y
        self.past_window = past_window
        self.horizon = horizon
        self.start_index = start_index
        self.max_columns = max_columns
        self._u: list[np.ndarray] = []
        self._y: list[np.ndarray] = []
        z = self.instrument_rows
        self._gram = np.zeros((z, z))
        self._cross = np.zeros((z, dim_y))
        self._first_column = 0

    @property
    def instrument_rows(self) -> int:
        return (self.past_window + 1) * self.dim_u + self.past_window * self.dim_y

    @property
    def length(self) -> int:
        return len(self._u)

    @property
    def n_columns(self) -> int:
        """Number of complete data columns currently accumulated."""
        return max(self.length - self.past_window, 0) - self._first_column

    @property
    def prediction_index(self) -> int:
        """Index of the first future sample relative to the data start."""
        return self.start_index + self.length

    def append(self, u, y) -> None:
        u = np.asarray(u, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if u.shape[0] != self.dim_u:
            raise ValueError(f"input sample has length {u.shape[0]}, expected {self.dim_u}")
        if y.shape[0] != self.dim_y:
            raise ValueError(f"output sample has length {y.shape[0]}, expected {self.dim_y}")
        self._u.append(u)
        self._y.append(y)
        col = self.length - 1 - self.past_window
        if col >= 0:
            z = self._column(col)
            self._gram += np.outer(z, z)
            self._cross += np.outer(z, self._y[col + self.past_window])
        if self.max_columns is not None:
            while self.n_columns > self.max_columns:
                z = self._column(self._first_column)
                self._gram -= np.outer(z, z)
                self._cross -= np.outer(z, self._y[self._first_column + self.past_window])
                self._first_column += 1

    def extend(self, u_seq, y_seq) -> None:
        u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
        y_seq = np.atleast_2d(np.asarray(y_seq, dtype=float))
        if u_seq.shape[0] != y_seq.shape[0]:
            raise ValueError(
                f"sequence lengths differ: inputs {u_seq.shape[0]}, outputs {y_seq.shape[0]}"
            )
        for u, y in zip(u_seq, y_seq):
            self.append(u, y)

    def _column(self, c: int) -> np.ndarray:
        p = self.past_window
        parts = [self._u[c + t] for t in range(p + 1)]
        parts += [self._y[c + t] for t in range(p)]
        return np.concatenate(parts)

    def gram(self):
        """Accumulated (Z Z^T, Z Y_next^T)."""
        return self._gram.copy(), self._cross.copy()

    def instrument(self) -> np.ndarray:
        """Materialized instrument matrix Z with one column per data window."""
        if self.n_columns < 1:
            raise ValueError(
                f"buffer with {self.length} samples has no complete window; "
                f"need at least {self.past_window + 1} samples"
            )
        cols = [self._column(c)
                for c in range(self._first_column, self._first_column + self.n_columns)]
        return np.column_stack(cols)

    def next_outputs(self) -> np.ndarray:
        """Targets matrix: the output following each instrument column."""
        p = self.past_window
        cols = [self._y[c + p]
                for c in range(self._first_column, self._first_column + self.n_columns)]
        return np.column_stack(cols)

    def past_window_data(self):
        """Most recent p inputs and outputs, newest last: ((p, du), (p, dy))."""
        p = self.past_window
        if self.length < p:
            raise ValueError(f"buffer holds {self.length} samples, need {p} for the past window")
        return np.array(self._u[-p:]), np.array(self._y[-p:])


def build_instrument(buffer: DataBuffer) -> np.ndarray:
    """Stacked past-input / current-input / past-output data matrix."""
    return buffer.instrument()


@dataclass
class PredictorModel:
    """Fitted multi-step predictor: one-step map plus its chained affine form.

    ``theta_past_u``, ``theta_cur_u`` and ``theta_past_y`` partition the
    one-step regression matrix by regressor group.  ``Gamma`` maps stacked
    future inputs to stacked predicted outputs and ``past_map`` maps the
    stacked past window [u_past; y_past]; together they reproduce the chained
    recursion exactly.
    """

    past_window: int
    horizon: int
    dim_u: int
    dim_y: int
    theta_past_u: np.ndarray
    theta_cur_u: np.ndarray
    theta_past_y: np.ndarray
    Gamma: np.ndarray
    past_map: np.ndarray
    rank: int
    singular_values: np.ndarray
    deficient: bool
    _gram_eig: tuple = field(repr=False, default=None)
    _cross: np.ndarray = field(repr=False, default=None)

    def free_response(self, u_past, y_past) -> np.ndarray:
        """Predicted stacked outputs for zero future inputs."""
        u_past, y_past = self._check_past(u_past, y_past)
        return self.past_map @ np.concatenate([u_past.ravel(), y_past.ravel()])

    def predict(self, u_past, y_past, u_future) -> np.ndarray:
        """Affine-map prediction; returns (horizon, dim_y)."""
        u_future = np.asarray(u_future, dtype=float).reshape(self.horizon, self.dim_u)
        flat = self.Gamma @ u_future.ravel() + self.free_response(u_past, y_past)
        return flat.reshape(self.horizon, self.dim_y)

    def predict_recursive(self, u_past, y_past, u_future) -> np.ndarray:
        """Step-by-step chained prediction (reference path for the affine map)."""
        u_past, y_past = self._check_past(u_past, y_past)
        u_future = np.asarray(u_future, dtype=float).reshape(self.horizon, self.dim_u)
        u_hist = list(u_past)
        y_hist = list(y_past)
        out = np.empty((self.horizon, self.dim_y))
        p = self.past_window
        for c in range(self.horizon):
            u_win = np.concatenate(u_hist[-p:])
            y_win = np.concatenate(y_hist[-p:])
            y_hat = (self.theta_past_u @ u_win + self.theta_cur_u @ u_future[c]
                     + self.theta_past_y @ y_win)
            out[c] = y_hat
            u_hist.append(u_future[c])
            y_hist.append(y_hat)
        return out

    def solution_matrix(self, u_past, y_past, u_future) -> np.ndarray:
        """Normal-equation coefficient matrix G for a concrete prediction.

        Column c solves ``(Z Z^T) g_c = query_c`` in the least-squares sense,
        where the queries follow the chained recursion with predictions filling
        later past-output windows; ``Y_next Z^T g_c`` then equals column c of
        :meth:`predict`.
        """
        u_past, y_past = self._check_past(u_past, y_past)
        u_future = np.asarray(u_future, dtype=float).reshape(self.horizon, self.dim_u)
        eigvals, eigvecs, keep = self._gram_eig
        u_hist = list(u_past)
        y_hist = list(y_past)
        p = self.past_window
        cols = []
        for c in range(self.horizon):
            query = np.concatenate(
                u_hist[-p:] + [u_future[c]] + y_hist[-p:])
            g = eigvecs[:, keep] @ ((eigvecs[:, keep].T @ query) / eigvals[keep])
            cols.append(g)
            y_hat = (self.theta_past_u @ np.concatenate(u_hist[-p:])
                     + self.theta_cur_u @ u_future[c]
                     + self.theta_past_y @ np.concatenate(y_hist[-p:]))
            u_hist.append(u_future[c])
            y_hist.append(y_hat)
        return np.column_stack(cols)

    def _check_past(self, u_past, y_past):
        u_past = np.asarray(u_past, dtype=float).reshape(self.past_window, self.dim_u)
        y_past = np.asarray(y_past, dtype=float).reshape(self.past_window, self.dim_y)
        return u_past, y_past


def _propagate_chain(theta_pu, theta_cu, theta_py, p, f, du, dy):
    """Collapse the prediction recursion into (Gamma, past_map).

    Every window entry is represented by its coefficient matrix over the
    stacked variables [u_future; u_past; y_past]; predicted outputs re-enter
    later windows through their own coefficients.
    """
    width = f * du + p * du + p * dy

    def u_coeff(t):
        c = np.zeros((du, width))
        if t < 0:
            off = f * du + (p + t) * du
        else:
            off = t * du
        c[:, off:off + du] = np.eye(du)
        return c

    def y_meas_coeff(t):
        c = np.zeros((dy, width))
        off = f * du + p * du + (p + t) * dy
        c[:, off:off + dy] = np.eye(dy)
        return c

    predicted = {}
    rows = []
    for step in range(f):
        u_win = np.vstack([u_coeff(t) for t in range(step - p, step)])
        y_win = np.vstack([
            predicted[t] if t >= 0 else y_meas_coeff(t)
            for t in range(step - p, step)
        ])
        coeff = theta_pu @ u_win + theta_cu @ u_coeff(step) + theta_py @ y_win
        predicted[step] = coeff
        rows.append(coeff)
    full = np.vstack(rows)
    return full[:, :f * du].copy(), full[:, f * du:].copy()


def _fit_from_gram(gram, cross, past_window, horizon, dim_u, dim_y,
                   rel_tol, strict) -> PredictorModel:
    rows = gram.shape[0]
    eigvals, eigvecs = np.linalg.eigh(gram)
    eigvals = np.clip(eigvals, 0.0, None)
    sv = np.sqrt(eigvals[::-1])
    top = sv[0] if sv.size else 0.0
    keep = eigvals > (rel_tol * top) ** 2 if top > 0 else np.zeros_like(eigvals, bool)
    rank = int(np.count_nonzero(keep))
    deficient = rank < rows
    if deficient and strict:
        raise RankDeficientDataError(rank, rows, sv)
    if rank == 0:
        raise ValueError("instrument matrix is numerically zero; no data to fit")

    # theta^T = pinv(gram) @ cross, restricted to the retained eigenspace
    basis = eigvecs[:, keep]
    theta = (basis @ ((basis.T @ cross) / eigvals[keep, None])).T

    p, f, du, dy = past_window, horizon, dim_u, dim_y
    theta_pu = theta[:, :p * du]
    theta_cu = theta[:, p * du:(p + 1) * du]
    theta_py = theta[:, (p + 1) * du:]
    gamma_map, past_map = _propagate_chain(theta_pu, theta_cu, theta_py, p, f, du, dy)
    return PredictorModel(
        past_window=p, horizon=f, dim_u=du, dim_y=dy,
        theta_past_u=theta_pu, theta_cur_u=theta_cu, theta_past_y=theta_py,
        Gamma=gamma_map, past_map=past_map,
        rank=rank, singular_values=sv, deficient=deficient,
        _gram_eig=(eigvals, eigvecs, keep), _cross=cross,
    )


def fit_predictor(buffer: DataBuffer, rel_tol: float = DEFAULT_RANK_TOL,
                  strict: bool = False) -> PredictorModel:
    """Fit the chained predictor from the buffer's accumulated data.

    Solves the normal equations through an eigendecomposition of the Gram
    matrix truncated at ``rel_tol`` (applied to the singular values of the
    instrument).  ``strict=True`` raises :class:`RankDeficientDataError`
    instead of truncating when the Gram matrix is rank deficient.
    """
    if buffer.n_columns < 1:
        raise ValueError(
            f"buffer with {buffer.length} samples has no complete window; "
            f"need at least {buffer.past_window + 1} samples"
        )
    gram, cross = buffer.gram()
    return _fit_from_gram(gram, cross, buffer.past_window, buffer.horizon,
                          buffer.dim_u, buffer.dim_y, rel_tol, strict)


def fit_from_data_matrices(instrument: np.ndarray, next_outputs: np.ndarray,
                           past_window: int, horizon: int, dim_u: int, dim_y: int,
                           rel_tol: float = DEFAULT_RANK_TOL,
                           strict: bool = False) -> PredictorModel:
    """Fit directly from an explicit instrument matrix and its targets."""
    return _fit_from_gram(instrument @ instrument.T, instrument @ next_outputs.T,
                          past_window, horizon, dim_u, dim_y, rel_tol, strict)
