"""Lifting of a P-periodic plant to a time-invariant per-period model.

Stacking the P samples of one period into single vectors turns the periodic
plant into an LTI system over a period index j:

    X[j+1] = A X[j] + B U[j] + F D[j] + K E[j]
    Y[j]   = C X[j] + D U[j] + G D[j] + H E[j]

with X[j] the plant state at the period boundary.  Since a P-periodic
disturbance is constant in lifted form, the lifted model can be augmented
with the disturbance as an extra constant state block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant import LptvPlant


@dataclass
class LiftedSystem:
    """Per-period LTI matrices of a periodic plant, anchored at time k0."""

    anchor: int
    period: int
    n: int
    r: int
    l: int
    m: int
    A: np.ndarray
    B: np.ndarray
    F: np.ndarray
    K: np.ndarray
    C: np.ndarray
    D: np.ndarray
    G: np.ndarray
    H: np.ndarray

    def step(self, x, u, d, e):
        """One lifted iteration; u, d, e are stacked period vectors."""
        x_next = self.A @ x + self.B @ u + self.F @ d + self.K @ e
        y = self.C @ x + self.D @ u + self.G @ d + self.H @ e
        return x_next, y


@dataclass
class AugmentedLiftedSystem:
    """Lifted model with the constant per-period disturbance as extra states.

    The state is [x; d_block]; the disturbance block evolves as an identity
    (a periodic disturbance repeats every period) and is uncontrollable.
    """

    period: int
    n: int
    r: int
    l: int
    m: int
    state_matrix: np.ndarray
    input_matrix: np.ndarray
    noise_matrix: np.ndarray
    output_matrix: np.ndarray
    feedthrough: np.ndarray
    noise_feedthrough: np.ndarray

    @property
    def n_aug(self) -> int:
        return self.n + self.m * self.period

    def step(self, x_aug, u, e):
        x_next = self.state_matrix @ x_aug + self.input_matrix @ u + self.noise_matrix @ e
        y = self.output_matrix @ x_aug + self.feedthrough @ u + self.noise_feedthrough @ e
        return x_next, y


def lift_system(plant: LptvPlant, k0: int) -> LiftedSystem:
    """Lifted LTI representation of the plant with anchor time k0."""
    P = plant.period
    return LiftedSystem(
        anchor=k0,
        period=P,
        n=plant.n, r=plant.r, l=plant.l, m=plant.m,
        A=plant.monodromy(k0, k0 + P),
        B=plant.reversed_ctrb("input", k0, k0 + P - 1),
        F=plant.reversed_ctrb("disturbance", k0, k0 + P - 1),
        K=plant.reversed_ctrb("noise", k0, k0 + P - 1),
        C=plant.extended_obsv(k0, k0 + P - 1),
        D=plant.toeplitz_markov("input", k0, k0 + P - 1),
        G=plant.toeplitz_markov("disturbance", k0, k0 + P - 1),
        H=plant.toeplitz_markov("noise", k0, k0 + P - 1),
    )


def augment(lifted: LiftedSystem) -> AugmentedLiftedSystem:
    """Append the constant lifted disturbance to the state of a lifted model."""
    n, mP = lifted.n, lifted.m * lifted.period
    rP, lP = lifted.r * lifted.period, lifted.l * lifted.period
    state = np.zeros((n + mP, n + mP))
    state[:n, :n] = lifted.A
    state[:n, n:] = lifted.F
    state[n:, n:] = np.eye(mP)
    return AugmentedLiftedSystem(
        period=lifted.period,
        n=n, r=lifted.r, l=lifted.l, m=lifted.m,
        state_matrix=state,
        input_matrix=np.vstack([lifted.B, np.zeros((mP, rP))]),
        noise_matrix=np.vstack([lifted.K, np.zeros((mP, lP))]),
        output_matrix=np.hstack([lifted.C, lifted.G]),
        feedthrough=lifted.D.copy(),
        noise_feedthrough=lifted.H.copy(),
    )


def lift_signal(samples, period: int, start_index: int = 0) -> np.ndarray:
    """Group consecutive per-sample vectors into stacked per-period vectors.

    ``samples[0]`` is taken to lie at time ``start_index``; the length must be
    a positive multiple of the period (partial periods are rejected rather
    than padded).  Returns an array of shape (J, q * period).
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    T = arr.shape[0]
    if T == 0 or T % period != 0:
        raise ValueError(
            f"signal length {T} is not a positive multiple of the period {period}"
        )
    return arr.reshape(T // period, period * arr.shape[1])


def unlift_signal(lifted, period: int) -> np.ndarray:
    """Inverse of :func:`lift_signal`: unstack per-period vectors into samples."""
    arr = np.atleast_2d(np.asarray(lifted, dtype=float))
    if arr.shape[1] % period != 0:
        raise ValueError(
            f"lifted vector length {arr.shape[1]} is not divisible by the period {period}"
        )
    q = arr.shape[1] // period
    return arr.reshape(arr.shape[0] * period, q)
