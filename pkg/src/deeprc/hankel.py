"""Block-Hankel data matrices, numerical rank, and persistency of excitation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Default relative singular-value threshold for rank decisions.  Rank tests
#: drive the verification suites, so the threshold must tolerate 64-bit
#: rounding across the largest augmented states handled here.
DEFAULT_RANK_TOL = 1e-8


@dataclass
class BlockHankel:
    """Block-Hankel matrix built from a vector sequence.

    ``matrix`` has ``block_rows`` stacked blocks of ``block_dim`` rows each and
    ``columns`` columns; block (a, b) holds the source sample at position
    ``start + a + b``, so blocks are constant along anti-diagonals.
    """

    start: int
    block_rows: int
    columns: int
    block_dim: int
    matrix: np.ndarray


def _as_samples(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def block_hankel(data, start: int, block_rows: int, columns: int) -> BlockHankel:
    """Assemble the block-Hankel matrix of a sequence of q-vectors.

    ``data`` is indexed from zero; the matrix uses samples ``start`` through
    ``start + columns + block_rows - 2``.
    """
    arr = _as_samples(data)
    if block_rows < 1 or columns < 1:
        raise ValueError(
            f"block_rows and columns must be positive, got {block_rows}, {columns}"
        )
    needed = start + columns + block_rows - 1
    if start < 0 or arr.shape[0] < needed:
        raise ValueError(
            f"insufficient data: need samples up to index {needed - 1}, "
            f"have {arr.shape[0]}"
        )
    q = arr.shape[1]
    mat = np.empty((q * block_rows, columns))
    for a in range(block_rows):
        # columns b pick samples start+a+b; one slice per block row
        mat[a * q:(a + 1) * q, :] = arr[start + a:start + a + columns].T
    return BlockHankel(start=start, block_rows=block_rows, columns=columns,
                       block_dim=q, matrix=mat)


def numerical_rank(matrix, rel_tol: float = DEFAULT_RANK_TOL):
    """Rank of a matrix by singular-value thresholding.

    Returns ``(rank, singular_values)`` where the rank counts singular values
    above ``rel_tol`` times the largest one.  The full spectrum is returned for
    diagnostics.
    """
    if rel_tol <= 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    arr = np.asarray(matrix, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot compute the rank of an empty matrix")
    sv = np.linalg.svd(arr, compute_uv=False)
    rank = int(np.count_nonzero(sv > rel_tol * sv[0]))
    return rank, sv


@dataclass
class PersistencyReport:
    """Outcome of a persistency-of-excitation check; truthy iff exciting."""

    exciting: bool
    order: int
    required_rank: int
    rank: int
    columns: int
    singular_values: np.ndarray
    reason: str

    def __bool__(self) -> bool:
        return self.exciting


def is_persistently_exciting(signal, order: int,
                             rel_tol: float = DEFAULT_RANK_TOL) -> PersistencyReport:
    """Check whether a signal is persistently exciting of the given order.

    The depth-``order`` block-Hankel matrix is built over the widest window the
    data permits and must have full row rank.  Degenerate lengths yield a
    non-exciting report with the reason instead of an error.
    """
    arr = _as_samples(signal)
    q = arr.shape[1]
    required = q * order
    columns = arr.shape[0] - order + 1
    if columns < required:
        return PersistencyReport(
            exciting=False, order=order, required_rank=required,
            rank=0, columns=max(columns, 0), singular_values=np.array([]),
            reason=(
                f"signal of length {arr.shape[0]} admits {max(columns, 0)} Hankel "
                f"columns, fewer than the {required} needed for order {order}"
            ),
        )
    hank = block_hankel(arr, 0, order, columns)
    rank, sv = numerical_rank(hank.matrix, rel_tol)
    exciting = rank == required
    reason = "" if exciting else (
        f"Hankel rank {rank} below full row rank {required}"
    )
    return PersistencyReport(exciting=exciting, order=order, required_rank=required,
                             rank=rank, columns=columns, singular_values=sv,
                             reason=reason)
