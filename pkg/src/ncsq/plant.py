"""Plant, actuator buffer and their aggregation into a jump-linear system.

The aggregated state is Theta(k) = [x(k); b(k-1)] and evolves as

    Theta(k+1) = Abar(d(k)) Theta(k) + Bbar w(k)

where d(k) = 1 marks a dropped packet.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AggregatedModel:
    Abar0: np.ndarray
    Abar1: np.ndarray
    Bbar: np.ndarray
    Mshift: np.ndarray
    e1: np.ndarray

    @property
    def n(self) -> int:
        return self.Abar0.shape[0]


def shift_matrix(N: int) -> np.ndarray:
    """Upper-shift matrix that advances the buffer by one slot on a dropout."""
    return np.eye(N, k=1)


def spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def build_augmented(plant, K, N: int) -> AggregatedModel:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    p = plant.p
    if K.shape != (N, p):
        raise ValueError(f"K must be {N}x{p}, got {K.shape}")
    M = shift_matrix(N)
    e1 = np.zeros(N)
    e1[0] = 1.0
    B1 = plant.B1.reshape(-1, 1)

    Abar0 = np.zeros((p + N, p + N))
    Abar0[:p, :p] = plant.A - B1 @ K[:1, :]
    Abar0[p:, :p] = -K

    Abar1 = np.zeros((p + N, p + N))
    Abar1[:p, :p] = plant.A
    Abar1[:p, p:] = B1 @ (e1 @ M).reshape(1, -1)
    Abar1[p:, p:] = M

    Bbar = np.concatenate([plant.B2, np.zeros(N)])
    return AggregatedModel(Abar0=Abar0, Abar1=Abar1, Bbar=Bbar, Mshift=M, e1=e1)


def buffer_update(b_prev, u_new, d: int) -> np.ndarray:
    """Overwrite the buffer on reception, shift it up (zero-filling) on a dropout."""
    if d not in (0, 1):
        raise ValueError("d must be 0 or 1")
    if d == 0:
        return np.array(u_new, dtype=float)
    b_prev = np.asarray(b_prev, dtype=float)
    out = np.zeros_like(b_prev)
    out[:-1] = b_prev[1:]
    return out


def plant_step(x, u: float, w: float, plant) -> np.ndarray:
    return plant.A @ x + plant.B1 * u + plant.B2 * w


def aggregated_step(model: AggregatedModel, theta, d: int, w: float) -> np.ndarray:
    Abar = model.Abar1 if d else model.Abar0
    return Abar @ theta + model.Bbar * w
