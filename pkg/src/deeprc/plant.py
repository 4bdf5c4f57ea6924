"""Periodic linear plant in innovation form and its structural matrices.

The signal-generating model is

    x[k+1] = A_k x[k] + B_k u[k] + F_k d[k] + K_k e[k]
    y[k]   = C_k x[k] + D_k u[k] + G_k d[k] + e[k]

where every matrix family repeats with period P.  Two parameterizations are
supported: an affine modulation ``M_k = M_base + cos(2*pi*k/P) * M_mod`` (the
form used by the bundled case study) and an explicit table of P matrices per
family.  All index arithmetic reduces k modulo P with a non-negative residue,
so negative time indices are valid and periodicity holds bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FAMILIES = ("A", "B", "C", "D", "K", "F", "G")
SIGNAL_KINDS = ("input", "disturbance", "noise")

# family feeding the state / output equation for each signal kind; the noise
# feedthrough is the identity, not a stored family
_STATE_FAMILY = {"input": "B", "disturbance": "F", "noise": "K"}
_OUTPUT_FAMILY = {"input": "D", "disturbance": "G"}


@dataclass
class TrajectoryLog:
    """Aligned record of one simulated run.

    Row ``t`` of every array belongs to time index ``start_index + t``; the
    state reached after the final step is kept separately in ``final_state``.
    """

    start_index: int
    x: np.ndarray
    u: np.ndarray
    d: np.ndarray
    e: np.ndarray
    y: np.ndarray
    final_state: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]


class LptvPlant:
    """P-periodic plant with matrix families A, B, C, D, K, F, G.

    The default constructor takes one ``(base, modulation)`` pair per family
    and schedules them with ``cos(2*pi*k/P)``.  Use :meth:`from_period_tables`
    for a general periodic plant given as P explicit matrices per family.
    F and G may be omitted for a plant without a disturbance channel (m = 0).
    """

    def __init__(self, period, *, A, B, C, D, K, F=None, G=None):
        pairs = {"A": A, "B": B, "C": C, "D": D, "K": K, "F": F, "G": G}
        tables = {}
        for fam, pair in pairs.items():
            if pair is None:
                tables[fam] = None
                continue
            base, mod = (np.asarray(p, dtype=float) for p in pair)
            if base.shape != mod.shape:
                raise ValueError(
                    f"family {fam}: base shape {base.shape} does not match "
                    f"modulation shape {mod.shape}"
                )
            mu = [math.cos(2.0 * math.pi * k / period) for k in range(period)]
            tables[fam] = np.stack([base + mu_k * mod for mu_k in mu])
        self._init_from_tables(period, tables)

    @classmethod
    def from_period_tables(cls, period, *, A, B, C, D, K, F=None, G=None):
        """Build a plant from P explicit matrices per family, shape (P, rows, cols)."""
        obj = cls.__new__(cls)
        tables = {}
        for fam, table in (("A", A), ("B", B), ("C", C), ("D", D),
                           ("K", K), ("F", F), ("G", G)):
            if table is None:
                tables[fam] = None
                continue
            arr = np.asarray(table, dtype=float)
            if arr.ndim != 3 or arr.shape[0] != period:
                raise ValueError(
                    f"family {fam}: expected {period} stacked matrices, "
                    f"got array of shape {arr.shape}"
                )
            tables[fam] = arr
        obj._init_from_tables(period, tables)
        return obj

    def _init_from_tables(self, period, tables):
        if not isinstance(period, (int, np.integer)) or period < 1:
            raise ValueError(f"period must be a positive integer, got {period!r}")
        self.period = int(period)

        n = tables["A"].shape[1]
        r = tables["B"].shape[2]
        l = tables["C"].shape[1]
        if tables["F"] is None:
            tables["F"] = np.zeros((self.period, n, 0))
        if tables["G"] is None:
            tables["G"] = np.zeros((self.period, l, 0))
        m = tables["F"].shape[2]
        self.n, self.r, self.l, self.m = n, r, l, m

        expected = {
            "A": (n, n), "B": (n, r), "C": (l, n), "D": (l, r),
            "K": (n, l), "F": (n, m), "G": (l, m),
        }
        for fam in FAMILIES:
            got = tables[fam].shape[1:]
            if got != expected[fam]:
                raise ValueError(
                    f"family {fam}: expected shape {expected[fam]}, got {got}"
                )
        self._tables = tables

    # -- periodic matrix access ------------------------------------------

    def matrix_at(self, family, k):
        """Matrix of the given family at time index k (any integer)."""
        if family not in FAMILIES:
            raise ValueError(f"unknown matrix family {family!r}")
        return self._tables[family][k % self.period].copy()

    def _mat(self, family, k):
        return self._tables[family][k % self.period]

    # -- simulation -------------------------------------------------------

    def step(self, x, u, d, e, k):
        """One step of the plant at time k; returns (x_next, y)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        d = np.asarray(d, dtype=float).reshape(-1)
        e = np.asarray(e, dtype=float).reshape(-1)
        for name, vec, dim in (("state x", x, self.n), ("input u", u, self.r),
                               ("disturbance d", d, self.m), ("noise e", e, self.l)):
            if vec.shape[0] != dim:
                raise ValueError(f"{name} has length {vec.shape[0]}, expected {dim}")
        return self._step(x, u, d, e, k)

    def _step(self, x, u, d, e, k):
        i = k % self.period
        t = self._tables
        x_next = t["A"][i] @ x + t["B"][i] @ u + t["F"][i] @ d + t["K"][i] @ e
        y = t["C"][i] @ x + t["D"][i] @ u + t["G"][i] @ d + e
        return x_next, y

    def simulate(self, x0, k0, inputs, disturbances, noise):
        """Iterate the plant from x0 at time k0 and log all signals."""
        u = np.atleast_2d(np.asarray(inputs, dtype=float).reshape(len(inputs), -1))
        d = np.atleast_2d(np.asarray(disturbances, dtype=float).reshape(len(disturbances), -1))
        e = np.atleast_2d(np.asarray(noise, dtype=float).reshape(len(noise), -1))
        if not (len(u) == len(d) == len(e)):
            raise ValueError(
                f"signal lengths differ: inputs {len(u)}, "
                f"disturbances {len(d)}, noise {len(e)}"
            )
        if len(u) < 1:
            raise ValueError("simulate needs at least one sample")
        x = np.asarray(x0, dtype=float).reshape(-1)
        if x.shape[0] != self.n:
            raise ValueError(f"state x has length {x.shape[0]}, expected {self.n}")

        T = len(u)
        xs = np.empty((T, self.n))
        ys = np.empty((T, self.l))
        for t in range(T):
            xs[t] = x
            x, y = self._step(x, u[t], d[t], e[t], k0 + t)
            ys[t] = y
        return TrajectoryLog(start_index=k0, x=xs, u=u.copy(), d=d.copy(),
                             e=e.copy(), y=ys, final_state=x)

    # -- periodic structural matrices --------------------------------------

    def monodromy(self, k1, k2):
        """State transition product A_{k2-1} ... A_{k1}; identity for k2 == k1."""
        if k2 < k1:
            raise ValueError(f"k2 must be >= k1, got k1={k1}, k2={k2}")
        phi = np.eye(self.n)
        for t in range(k1, k2):
            phi = self._mat("A", t) @ phi
        return phi

    def markov(self, kind, k1, k2):
        """Impulse-response block from the given channel at k1 to the output at k2.

        For k2 == k1 this is the feedthrough (D, G, or the identity for the
        noise channel); for k2 > k1 it is C_{k2} * Phi_{k1+1}^{k2} * (B|F|K)_{k1}.
        """
        self._check_kind(kind)
        if k2 < k1:
            raise ValueError(f"k2 must be >= k1, got k1={k1}, k2={k2}")
        if k2 == k1:
            if kind == "noise":
                return np.eye(self.l)
            return self.matrix_at(_OUTPUT_FAMILY[kind], k1)
        bfam = self._mat(_STATE_FAMILY[kind], k1)
        return self._mat("C", k2) @ self.monodromy(k1 + 1, k2) @ bfam

    def toeplitz_markov(self, kind, k1, k2):
        """Block lower-triangular matrix of Markov parameters over [k1, k2]."""
        self._check_kind(kind)
        if k2 < k1:
            raise ValueError(f"k2 must be >= k1, got k1={k1}, k2={k2}")
        T = k2 - k1 + 1
        q = self._kind_dim(kind)
        out = np.zeros((self.l * T, q * T))
        for j in range(T):
            for i in range(j, T):
                out[i * self.l:(i + 1) * self.l, j * q:(j + 1) * q] = \
                    self.markov(kind, k1 + j, k1 + i)
        return out

    def reversed_ctrb(self, kind, k1, k2):
        """Reversed extended controllability matrix of the channel over [k1, k2].

        Block j (0-based) equals Phi_{k1+j+1}^{k2+1} * (B|F|K)_{k1+j}, so the
        product with stacked channel samples over [k1, k2] gives their
        contribution to the state at k2 + 1.
        """
        self._check_kind(kind)
        if k2 < k1:
            raise ValueError(f"k2 must be >= k1, got k1={k1}, k2={k2}")
        T = k2 - k1 + 1
        q = self._kind_dim(kind)
        fam = _STATE_FAMILY[kind]
        out = np.empty((self.n, q * T))
        phi = np.eye(self.n)
        for t in range(k2, k1 - 1, -1):
            j = t - k1
            out[:, j * q:(j + 1) * q] = phi @ self._mat(fam, t)
            phi = phi @ self._mat("A", t)
        return out

    def extended_obsv(self, k1, k2):
        """Extended observability matrix over [k1, k2]: block i is C_{k1+i} Phi_{k1}^{k1+i}."""
        if k2 < k1:
            raise ValueError(f"k2 must be >= k1, got k1={k1}, k2={k2}")
        T = k2 - k1 + 1
        out = np.empty((self.l * T, self.n))
        phi = np.eye(self.n)
        for i, t in enumerate(range(k1, k2 + 1)):
            out[i * self.l:(i + 1) * self.l, :] = self._mat("C", t) @ phi
            phi = self._mat("A", t) @ phi
        return out

    def _check_kind(self, kind):
        if kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {kind!r}, expected one of {SIGNAL_KINDS}")

    def _kind_dim(self, kind):
        return {"input": self.r, "disturbance": self.m, "noise": self.l}[kind]

    # -- configuration ------------------------------------------------------

    @classmethod
    def from_config(cls, config):
        """Build a plant from a configuration mapping.

        Accepts either the plant section directly or a full configuration with
        a ``"plant"`` key.  Each family entry is ``{"base": ..., "modulation":
        ...}`` (affine scheduling) or ``{"table": [...]}`` with P matrices in
        row-major nested lists.
        """
        if "plant" in config:
            config = config["plant"]
        period = config["period"]
        matrices = config["matrices"]
        kwargs = {}
        any_table = any("table" in matrices.get(f, {}) for f in FAMILIES if f in matrices)
        if any_table:
            for fam in FAMILIES:
                if fam not in matrices:
                    kwargs[fam] = None
                    continue
                entry = matrices[fam]
                if "table" in entry:
                    kwargs[fam] = np.asarray(entry["table"], dtype=float)
                else:
                    base = np.asarray(entry["base"], dtype=float)
                    mod = np.asarray(entry["modulation"], dtype=float)
                    mu = [math.cos(2.0 * math.pi * k / period) for k in range(period)]
                    kwargs[fam] = np.stack([base + mu_k * mod for mu_k in mu])
            return cls.from_period_tables(period, **kwargs)
        for fam in FAMILIES:
            if fam not in matrices:
                kwargs[fam] = None
            else:
                entry = matrices[fam]
                kwargs[fam] = (entry["base"], entry["modulation"])
        return cls(period, **kwargs)

    @classmethod
    def from_config_file(cls, path):
        with open(Path(path), "r", encoding="utf-8") as fh:
            return cls.from_config(json.load(fh))
