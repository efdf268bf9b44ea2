"""Unconstrained packetized predictive controller synthesis.

The controller minimizes, for the current state x, the finite-horizon cost

    J(u, x) = ||x'(N)||_X^2 + sum_{l<N} ||x'(l)||_Q^2 + R u'(l)^2

whose terminal weight X solves the discrete algebraic Riccati equation.
Expanding the predictions gives J = const + u'Wu + 2x'Fu and the optimal
horizon u = -Kx with K = W^{-1} F'.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigInvalid, NonConvergent, NotControllable, SingularW, SynthesisFailed

DARE_TOL = 1e-10
DARE_MAX_ITER = 100_000
DARE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Plant:
    """x(k+1) = A x(k) + B1 u(k) + B2 w(k), with w ~ N(0, sigma2_w)."""

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    sigma2_w: float = 1.0
    check_controllable: bool = field(default=True, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B1 = np.asarray(self.B1, dtype=float).reshape(-1)
        B2 = np.asarray(self.B2, dtype=float).reshape(-1)
        p = A.shape[0]
        if A.shape != (p, p):
            raise ConfigInvalid(f"A must be square, got {A.shape}")
        if B1.shape != (p,) or B2.shape != (p,):
            raise ConfigInvalid(f"B1 and B2 must have length {p}")
        if not self.sigma2_w >= 0:
            raise ConfigInvalid("sigma2_w must be nonnegative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B1", B1)
        object.__setattr__(self, "B2", B2)
        object.__setattr__(self, "sigma2_w", float(self.sigma2_w))
        if self.check_controllable and controllability_rank(A, B1) < p:
            raise NotControllable("(A, B1) is not controllable")

    @property
    def p(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class CostWeights:
    Q: np.ndarray
    R: float
    N: int

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ConfigInvalid("Q must be square")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise ConfigInvalid("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-12 * max(1.0, np.abs(Q).max()):
            raise ConfigInvalid("Q must be positive semidefinite")
        if not self.R > 0:
            raise ConfigInvalid("R must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigInvalid("horizon N must be a positive integer")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "N", int(self.N))


@dataclass(frozen=True)
class ControllerSynthesis:
    X: np.ndarray
    Phi: np.ndarray
    Upsilon: np.ndarray
    W: np.ndarray
    F: np.ndarray
    K: np.ndarray
    Qbar: np.ndarray
    Rbar: np.ndarray


def controllability_rank(A, B1) -> int:
    A = np.atleast_2d(A)
    p = A.shape[0]
    cols = [np.asarray(B1, dtype=float).reshape(-1)]
    for _ in range(p - 1):
        cols.append(A @ cols[-1])
    s = np.linalg.svd(np.column_stack(cols), compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > p * np.finfo(float).eps * s[0]))


def dare_residual(A, B1, Q, R, X) -> float:
    """Frobenius norm of X - (A'XA + Q - A'XB1 (R + B1'XB1)^-1 B1'XA)."""
    b = np.asarray(B1, dtype=float).reshape(-1, 1)
    XB = X @ b
    rhs = A.T @ X @ A + Q - (A.T @ XB) @ (XB.T @ A) / (R + (b.T @ XB).item())
    return float(np.linalg.norm(X - rhs))


def solve_dare(A, B1, Q, R, tol=DARE_TOL, max_iter=DARE_MAX_ITER) -> np.ndarray:
    """Solve the scalar-input DARE by iterating the Riccati recursion from X = Q."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    b = np.asarray(B1, dtype=float).reshape(-1, 1)
    R = float(R)
    X = Q.copy()
    for _ in range(max_iter):
        XB = X @ b
        AtXB = A.T @ XB
        with np.errstate(over="ignore", invalid="ignore"):
            X_new = A.T @ X @ A + Q - (AtXB @ AtXB.T) / (R + (b.T @ XB).item())
        X_new = 0.5 * (X_new + X_new.T)
        if not np.all(np.isfinite(X_new)):
            break
        step = np.linalg.norm(X_new - X)
        X = X_new
        if step <= tol:
            if dare_residual(A, b, Q, R, X) <= DARE_RESIDUAL_TOL:
                return X
            break
    raise NonConvergent("Riccati iteration did not converge; is (A, B1) stabilizable?")


def prediction_matrices(A, B1, N: int):
    """Stacked predictions x'(1..N) = Upsilon x + Phi u.

    Returns (Phi, Upsilon) of shapes (N*p, N) and (N*p, p).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(B1, dtype=float).reshape(-1)
    p = A.shape[0]
    powers = [np.eye(p)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    Phi = np.zeros((N * p, N))
    for i in range(N):
        for j in range(i + 1):
            Phi[i * p:(i + 1) * p, j] = powers[i - j] @ b
    Upsilon = np.vstack(powers[1:])
    return Phi, Upsilon


def weighting_matrices(Q, X, R, N: int):
    """Qbar = blockdiag(Q, ..., Q, X) with N blocks, Rbar = R I_N."""
    Qbar = scipy.linalg.block_diag(*([Q] * (N - 1) + [X]))
    return Qbar, float(R) * np.eye(N)


def cost_matrices(Phi, Upsilon, Q, X, R):
    """W = Rbar + Phi' Qbar Phi and F = Upsilon' Qbar Phi."""
    N = Phi.shape[1]
    Qbar, Rbar = weighting_matrices(Q, X, R, N)
    W = Rbar + Phi.T @ Qbar @ Phi
    W = 0.5 * (W + W.T)
    F = Upsilon.T @ Qbar @ Phi
    return W, F


def feedback_gain(W, F) -> np.ndarray:
    """K solving W K = F' via a Cholesky factorization of W."""
    try:
        factor = scipy.linalg.cho_factor(W)
    except np.linalg.LinAlgError as exc:
        raise SingularW("W is not numerically positive definite") from exc
    if np.linalg.cond(W) > 1 / np.finfo(float).eps:
        raise SingularW("W is numerically singular")
    return scipy.linalg.cho_solve(factor, F.T)


def synthesize(plant: Plant, weights: CostWeights) -> ControllerSynthesis:
    """Precompute everything the controller needs; fails if the ideal loop is unstable."""
    from .plant import build_augmented, spectral_radius

    if weights.Q.shape != plant.A.shape:
        raise ConfigInvalid("Q must match the plant dimension")
    X = solve_dare(plant.A, plant.B1, weights.Q, weights.R)
    Phi, Upsilon = prediction_matrices(plant.A, plant.B1, weights.N)
    W, F = cost_matrices(Phi, Upsilon, weights.Q, X, weights.R)
    K = feedback_gain(W, F)
    Qbar, Rbar = weighting_matrices(weights.Q, X, weights.R, weights.N)
    syn = ControllerSynthesis(X=X, Phi=Phi, Upsilon=Upsilon, W=W, F=F, K=K, Qbar=Qbar, Rbar=Rbar)
    rho = spectral_radius(build_augmented(plant, K, weights.N).Abar0)
    if not rho < 1:
        raise SynthesisFailed(f"no-dropout closed loop has spectral radius {rho:.6g} >= 1")
    return syn


def ppc_cost(u, x, plant: Plant, weights: CostWeights, X) -> float:
    """Horizon cost J(u, x) evaluated by rolling the nominal model forward."""
    xp = np.asarray(x, dtype=float).copy()
    total = 0.0
    for ul in np.asarray(u, dtype=float):
        total += xp @ weights.Q @ xp + weights.R * ul * ul
        xp = plant.A @ xp + plant.B1 * ul
    return float(total + xp @ X @ xp)
