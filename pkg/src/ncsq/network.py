"""Packet dropout channels and the mean-square stability test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, DimensionTooLarge, Reducible

MSS_MAX_DIM = 40


def _check_prob(name, value):
    if not 0.0 <= value <= 1.0:
        raise ConfigInvalid(f"{name} must lie in [0, 1], got {value}")
    return float(value)


@dataclass(frozen=True)
class IIDDropout:
    p_d: float

    def __post_init__(self):
        object.__setattr__(self, "p_d", _check_prob("p_d", self.p_d))

    @property
    def mean_dropout_rate(self) -> float:
        return self.p_d


@dataclass(frozen=True)
class TwoStateDropout:
    """Gilbert-Elliott style channel; state 1 is the good state, state 2 the bad one.

    Within a step the dropout is drawn from the current state's probability
    before the state transitions through row ``xi`` of ``P``.
    """

    P: np.ndarray
    p_d1: float
    p_d2: float

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.shape != (2, 2):
            raise ConfigInvalid("P must be 2x2")
        if np.any(P < 0) or np.any(P > 1) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-12):
            raise ConfigInvalid("P must be row-stochastic")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "p_d1", _check_prob("p_d1", self.p_d1))
        object.__setattr__(self, "p_d2", _check_prob("p_d2", self.p_d2))

    @property
    def p_d(self) -> tuple[float, float]:
        return (self.p_d1, self.p_d2)

    @property
    def irreducible(self) -> bool:
        return self.P[0, 1] > 0 and self.P[1, 0] > 0

    @property
    def mean_dropout_rate(self) -> float:
        pi1, pi2 = stationary_distribution(self.P)
        return pi1 * self.p_d1 + pi2 * self.p_d2


def stationary_distribution(P) -> tuple[float, float]:
    P = np.asarray(P, dtype=float)
    p12, p21 = P[0, 1], P[1, 0]
    if p12 <= 0 or p21 <= 0:
        raise Reducible("transition matrix is reducible; no unique stationary distribution")
    pi1 = p21 / (p12 + p21)
    return float(pi1), float(p12 / (p12 + p21))


def initial_state(model, rng, start: int | None = None) -> int:
    """Markov state at k = 0: ``start`` if given, otherwise a stationary draw."""
    if isinstance(model, IIDDropout):
        return 1
    if start is not None:
        if start not in (1, 2):
            raise ConfigInvalid("network state must be 1 or 2")
        return start
    pi1, _ = stationary_distribution(model.P)
    return 1 if rng.random() < pi1 else 2


def step_channel(model, xi: int, rng) -> tuple[int, int]:
    """Advance one step; returns (next state, dropout bit for the current step)."""
    if isinstance(model, IIDDropout):
        return 1, int(rng.random() < model.p_d)
    u_drop, u_move = rng.random(2)
    d = int(u_drop < model.p_d[xi - 1])
    nxt = 1 if u_move < model.P[xi - 1, 0] else 2
    return nxt, d


def simulate_channel(model, steps: int, rng, start: int | None = None):
    """Draw (xi(k), d(k)) for k = 0..steps-1.

    Consumes the generator exactly as repeated ``step_channel`` calls would.
    """
    xi0 = initial_state(model, rng, start)
    if isinstance(model, IIDDropout):
        d = (rng.random(steps) < model.p_d).astype(np.int8)
        return np.ones(steps, dtype=np.int8), d
    u = rng.random((steps, 2))
    drop = u[:, 0]
    stay1 = u[:, 1] < model.P[0, 0]
    stay2 = u[:, 1] >= model.P[1, 0]
    xi = np.empty(steps, dtype=np.int8)
    s = xi0
    for k in range(steps):
        xi[k] = s
        if s == 1:
            s = 1 if stay1[k] else 2
        else:
            s = 2 if stay2[k] else 1
    pd = np.where(xi == 1, model.p_d1, model.p_d2)
    d = (drop < pd).astype(np.int8)
    return xi, d


def psi_matrix(Abar0, Abar1, p_d: float, max_dim: int = MSS_MAX_DIM) -> np.ndarray:
    n = Abar0.shape[0]
    if Abar0.shape != (n, n) or Abar1.shape != (n, n):
        raise ValueError("Abar0 and Abar1 must be square and of equal size")
    if n > max_dim:
        raise DimensionTooLarge(f"aggregated dimension {n} exceeds cap {max_dim}")
    return (1 - p_d) * np.kron(Abar0, Abar0) + p_d * np.kron(Abar1, Abar1)


def mss_spectral_radius(Abar0, Abar1, p_d: float, max_dim: int = MSS_MAX_DIM) -> float:
    """Spectral radius of the second-moment operator; the loop is MSS iff it is < 1."""
    Psi = psi_matrix(Abar0, Abar1, p_d, max_dim)
    return float(np.max(np.abs(np.linalg.eigvals(Psi))))


def is_mss(Abar0, Abar1, p_d: float) -> bool:
    return mss_spectral_radius(Abar0, Abar1, p_d) < 1
