"""Stationary second moments of the unquantized networked loop.

For i.i.d. dropouts with probability p the aggregated covariance satisfies

    Q = A_m Q A_m' + p(1-p) A_d Q A_d' + s2 Bbar Bbar'

with A_m = p Abar1 + (1-p) Abar0 the mean dynamics and A_d = Abar1 - Abar0.
For the two-state channel the per-state moments Q_j are coupled through
the transition matrix and summed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergent, NotMSS, SingularSystem
from .network import mss_spectral_radius, stationary_distribution

TOL = 1e-10
MAX_ITER = 1_000_000
PSD_CLIP = 1e-10


@dataclass(frozen=True)
class StationaryStats:
    Q_Theta: np.ndarray
    Q_u: np.ndarray
    calA: np.ndarray | tuple
    calAtilde: np.ndarray

    def Q_x(self, p: int) -> np.ndarray:
        return self.Q_Theta[:p, :p]

    def Q_b(self, p: int) -> np.ndarray:
        return self.Q_Theta[p:, p:]


def mean_dynamics(Abar0, Abar1, p_d):
    return p_d * Abar1 + (1 - p_d) * Abar0


def psd_repair(Q) -> np.ndarray:
    """Symmetrize and zero out eigenvalues below the clip threshold."""
    Q = 0.5 * (Q + Q.T)
    w, V = np.linalg.eigh(Q)
    if w.min() >= 0:
        return Q
    scale = max(1.0, np.abs(w).max())
    if w.min() < -PSD_CLIP * scale:
        raise NotMSS(f"covariance has eigenvalue {w.min():.3g}; not positive semidefinite")
    w = np.clip(w, 0, None)
    Q = (V * w) @ V.T
    return 0.5 * (Q + Q.T)


def moment_operator(Q, Abar0, Abar1, p_d):
    calA = mean_dynamics(Abar0, Abar1, p_d)
    calAt = Abar1 - Abar0
    return calA @ Q @ calA.T + p_d * (1 - p_d) * (calAt @ Q @ calAt.T)


def single_state_residual(Q, Abar0, Abar1, Bbar, p_d, sigma2_w) -> float:
    rhs = moment_operator(Q, Abar0, Abar1, p_d) + sigma2_w * np.outer(Bbar, Bbar)
    return float(np.linalg.norm(Q - rhs))


def _iterate(update, Q0, tol, max_iter):
    Q = Q0
    for _ in range(max_iter):
        Q_new = update(Q)
        if not np.all(np.isfinite(Q_new)):
            raise NonConvergent("covariance iteration diverged")
        change = np.linalg.norm(Q_new - Q)
        Q = Q_new
        if change <= tol * max(np.linalg.norm(Q), np.finfo(float).tiny):
            return Q
    raise NonConvergent(f"covariance iteration did not converge in {max_iter} steps")


def stationary_cov_single(Abar0, Abar1, Bbar, p_d, sigma2_w, tol=TOL, max_iter=MAX_ITER,
                          check_mss=True) -> np.ndarray:
    """Fixed-point iteration for the stationary aggregated covariance."""
    Abar0 = np.atleast_2d(Abar0)
    Abar1 = np.atleast_2d(Abar1)
    Bbar = np.atleast_1d(np.asarray(Bbar, dtype=float))
    if check_mss:
        rho = mss_spectral_radius(Abar0, Abar1, p_d)
        if not rho < 1:
            raise NotMSS(f"rho(Psi) = {rho:.6g} >= 1")
    calA = mean_dynamics(Abar0, Abar1, p_d)
    calAt = Abar1 - Abar0
    c = p_d * (1 - p_d)
    BB = sigma2_w * np.outer(Bbar, Bbar)

    def update(Q):
        Q = calA @ Q @ calA.T + c * (calAt @ Q @ calAt.T) + BB
        return 0.5 * (Q + Q.T)

    return psd_repair(_iterate(update, BB.copy(), tol, max_iter))


def stationary_cov_single_closedform(Abar0, Abar1, Bbar, p_d, sigma2_w) -> np.ndarray:
    """Solve the vectorized linear system for the same fixed point directly."""
    Abar0 = np.atleast_2d(Abar0)
    Abar1 = np.atleast_2d(Abar1)
    Bbar = np.atleast_1d(np.asarray(Bbar, dtype=float))
    n = Abar0.shape[0]
    calA = mean_dynamics(Abar0, Abar1, p_d)
    calAt = Abar1 - Abar0
    L = np.eye(n * n) - np.kron(calA, calA) - p_d * (1 - p_d) * np.kron(calAt, calAt)
    # vec() stacks columns, so vec(A Q A') = (A kron A) vec(Q) holds in Fortran order
    rhs = sigma2_w * np.outer(Bbar, Bbar).reshape(-1, order="F")
    if np.linalg.cond(L) > 1 / np.finfo(float).eps:
        raise SingularSystem("lifted operator has an eigenvalue at 1")
    Q = np.linalg.solve(L, rhs).reshape(n, n, order="F")
    return psd_repair(Q)


def two_state_operator(Qs, calAs, P, p_d=None, Atilde=None):
    """One sweep of the coupled per-state recursion (without noise)."""
    out = []
    for j in range(2):
        S = P[0, j] * Qs[0] + P[1, j] * Qs[1]
        Qj = calAs[j] @ S @ calAs[j].T
        if p_d is not None:
            Qj = Qj + p_d[j] * (1 - p_d[j]) * (Atilde @ S @ Atilde.T)
        out.append(Qj)
    return out


def stationary_cov_two_state(Abar0, Abar1, Bbar, P, p_d1, p_d2, sigma2_w, tol=TOL,
                             max_iter=MAX_ITER, dropout_variance=False):
    """Stationary covariance under the two-state channel.

    Iterates Q_j = sum_i P[i, j] A_j Q_i A_j' + pi_j s2 Bbar Bbar' with
    A_j the state-conditional mean dynamics and returns sum_j Q_j.
    The default omits the per-state dropout variance term, which the
    single-state recursion carries; ``dropout_variance=True`` adds
    p_j(1-p_j) Atilde S_j Atilde' and gives the exact second moment.
    """
    P = np.asarray(P, dtype=float)
    pi = stationary_distribution(P)
    Bbar = np.atleast_1d(np.asarray(Bbar, dtype=float))
    p_d = (p_d1, p_d2)
    calAs = [mean_dynamics(Abar0, Abar1, p) for p in p_d]
    Atilde = Abar1 - Abar0
    BB = sigma2_w * np.outer(Bbar, Bbar)
    Qs = [pi[0] * BB, pi[1] * BB]
    for _ in range(max_iter):
        new = two_state_operator(Qs, calAs, P, p_d if dropout_variance else None, Atilde)
        new = [0.5 * (q + q.T) + pi[j] * BB for j, q in enumerate(new)]
        total = new[0] + new[1]
        if not np.all(np.isfinite(total)):
            raise NonConvergent("two-state covariance iteration diverged")
        change = np.linalg.norm(new[0] - Qs[0]) + np.linalg.norm(new[1] - Qs[1])
        Qs = new
        if change <= tol * np.linalg.norm(total):
            return psd_repair(total), (Qs[0], Qs[1])
    raise NonConvergent("two-state covariance iteration did not converge")


def two_state_residual(Qs, Abar0, Abar1, Bbar, P, p_d1, p_d2, sigma2_w, dropout_variance=False):
    P = np.asarray(P, dtype=float)
    pi = stationary_distribution(P)
    p_d = (p_d1, p_d2)
    calAs = [mean_dynamics(Abar0, Abar1, p) for p in p_d]
    BB = sigma2_w * np.outer(Bbar, Bbar)
    rhs = two_state_operator(Qs, calAs, P, p_d if dropout_variance else None, Abar1 - Abar0)
    res = sum(np.linalg.norm(Qs[j] - rhs[j] - pi[j] * BB) for j in range(2))
    return float(res / np.linalg.norm(Qs[0] + Qs[1]))


def control_covariance(Q_Theta, K, p: int, N: int | None = None) -> np.ndarray:
    """Covariance of u = -K x from the leading state block of Q_Theta."""
    K = np.atleast_2d(K)
    if N is not None and Q_Theta.shape != (p + N, p + N):
        raise ValueError("Q_Theta must be (p+N)x(p+N)")
    Qu = K @ Q_Theta[:p, :p] @ K.T
    return psd_repair(Qu)


def single_state_stats(model, K, p_d, sigma2_w, closed_form=False) -> StationaryStats:
    solver = stationary_cov_single_closedform if closed_form else stationary_cov_single
    if closed_form:
        rho = mss_spectral_radius(model.Abar0, model.Abar1, p_d)
        if not rho < 1:
            raise NotMSS(f"rho(Psi) = {rho:.6g} >= 1")
    Q = solver(model.Abar0, model.Abar1, model.Bbar, p_d, sigma2_w)
    p = K.shape[1]
    return StationaryStats(Q_Theta=Q, Q_u=control_covariance(Q, K, p),
                           calA=mean_dynamics(model.Abar0, model.Abar1, p_d),
                           calAtilde=model.Abar1 - model.Abar0)


def two_state_stats(model, K, channel, sigma2_w, dropout_variance=False) -> StationaryStats:
    Q, _ = stationary_cov_two_state(model.Abar0, model.Abar1, model.Bbar, channel.P,
                                    channel.p_d1, channel.p_d2, sigma2_w,
                                    dropout_variance=dropout_variance)
    p = K.shape[1]
    calAs = tuple(mean_dynamics(model.Abar0, model.Abar1, pd) for pd in channel.p_d)
    return StationaryStats(Q_Theta=Q, Q_u=control_covariance(Q, K, p), calA=calAs,
                           calAtilde=model.Abar1 - model.Abar0)
