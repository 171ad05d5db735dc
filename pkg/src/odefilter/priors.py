"""Gauss-Markov process priors and their exact one-step transitions.

The solver models the IVP solution and its first ``q`` derivatives as a
``q``-times integrated Brownian motion (IBM) or integrated
Ornstein-Uhlenbeck process (IOUP).  Both are linear SDEs with a companion
drift matrix, so the state mean and covariance propagate over a step ``h``
through a closed-form matrix pair ``(A(h), Q(h))``:

    m(t + h) = A(h) m(t),        P(t + h) = A(h) P(t) A(h)^T + Q(h).

This module builds the continuous-time model (drift ``F``, diffusion ``L``)
and the discrete pair, exposes a quadrature-based oracle used to
cross-check the closed forms, and extends the model to coupled output
dimensions via Kronecker products.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

__all__ = [
    "IBM",
    "IOUP",
    "DimensionMismatch",
    "MultiDimDrift",
    "NonConvergence",
    "PriorSpec",
    "TransitionModel",
    "companion_matrix",
    "ibm_transition",
    "ioup_transition",
    "kron_extend",
    "transition_oracle",
]

IBM = "ibm"
IOUP = "ioup"

#: Hard cap on the number of series orders summed for the IOUP covariance.
MAX_SERIES_TERMS = 1000


class NonConvergence(RuntimeError):
    """IOUP covariance series did not converge (theta*h far too large)."""


class DimensionMismatch(ValueError):
    """Kronecker factor matrices disagree in size."""


@dataclasses.dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters of the Gauss-Markov prior.

    ``q`` is the number of modeled derivatives, ``kind`` selects IBM
    (``theta`` must be 0) or IOUP (``theta`` > 0), and ``sigma`` scales the
    driving Brownian motion.
    """

    q: int
    kind: str = IBM
    theta: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.q < 0:
            raise ValueError(f"q must be a non-negative integer, got {self.q}")
        if self.kind not in (IBM, IOUP):
            raise ValueError(f"kind must be {IBM!r} or {IOUP!r}, got {self.kind!r}")
        if self.kind == IBM and self.theta != 0.0:
            raise ValueError("IBM prior requires theta = 0")
        if self.kind == IOUP and not self.theta > 0.0:
            raise ValueError("IOUP prior requires theta > 0")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")

    def drift_matrix(self) -> np.ndarray:
        """Companion drift F of the prior SDE."""
        a = [0.0] * self.q + [-self.theta]
        return companion_matrix(self.q, a)

    def diffusion_vector(self) -> np.ndarray:
        """Diffusion column L: sigma acts on the top derivative only."""
        L = np.zeros(self.q + 1)
        L[self.q] = 1.0
        return L

    def transition(self, h: float, tol: float = 1e-12) -> "TransitionModel":
        """Closed-form (A, Q) for a step of size h."""
        if self.kind == IBM:
            return ibm_transition(self.q, self.sigma, h)
        return ioup_transition(self.q, self.theta, self.sigma, h, tol)

    def with_sigma(self, sigma: float) -> "PriorSpec":
        return dataclasses.replace(self, sigma=sigma)


@dataclasses.dataclass(frozen=True)
class TransitionModel:
    """Discrete-time transition pair (A, Q) for a fixed step size h."""

    h: float
    A: np.ndarray
    Q: np.ndarray


@dataclasses.dataclass(frozen=True)
class MultiDimDrift:
    """Kronecker-coupled drift/diffusion for dependent output dimensions."""

    Kx: np.ndarray
    Keps: np.ndarray
    F_big: np.ndarray
    L_big: np.ndarray


def companion_matrix(q: int, a: Sequence[float]) -> np.ndarray:
    """Companion matrix: ones on the superdiagonal, ``a`` as last row."""
    if q < 0:
        raise ValueError("q must be non-negative")
    a = np.asarray(a, dtype=float)
    if a.shape != (q + 1,):
        raise ValueError(f"a must have length q+1 = {q + 1}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("a must be finite")
    F = np.zeros((q + 1, q + 1))
    for i in range(q):
        F[i, i + 1] = 1.0
    F[q, :] = a
    return F


def ibm_transition(q: int, sigma: float, h: float) -> TransitionModel:
    """Exact (A, Q) for the q-times integrated Brownian motion.

    A is the Taylor/Pascal matrix; Q has the polynomial closed form
    ``Q_ij = sigma^2 h^(2q+1-i-j) / ((2q+1-i-j) (q-i)! (q-j)!)``.
    """
    _check_step(sigma, h)
    n = q + 1
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            A[i, j] = h ** (j - i) / math.factorial(j - i)
    Q = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * q + 1 - i - j
            Q[i, j] = sigma**2 * h**k / (k * math.factorial(q - i) * math.factorial(q - j))
    return TransitionModel(h=h, A=A, Q=Q)


def ioup_transition(
    q: int, theta: float, sigma: float, h: float, tol: float = 1e-12
) -> TransitionModel:
    """(A, Q) for the q-times integrated Ornstein-Uhlenbeck process.

    A matches the IBM form except in its last column, which carries the
    exponential decay of the top derivative; it is evaluated through the
    tail of the exponential series (cancellation-free for small theta*h).
    Q is summed from its convergent double series, truncated once the
    order increments fall below ``tol`` relative to the partial sum.

    Raises NonConvergence if more than ``MAX_SERIES_TERMS`` orders would be
    needed, which signals theta*h far outside the regime the model is
    meant for.
    """
    if not theta > 0.0:
        raise ValueError("IOUP requires theta > 0 (use ibm_transition for theta = 0)")
    if not 0.0 < tol <= 1e-8:
        raise ValueError("tol must lie in (0, 1e-8]")
    _check_step(sigma, h)
    n = q + 1
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n - 1):
            A[i, j] = h ** (j - i) / math.factorial(j - i)
    for i in range(n):
        A[i, q] = _exp_series_tail(q - i, -theta * h) / (-theta) ** (q - i)
    Q = _ioup_covariance_series(q, theta, sigma, h, tol)
    return TransitionModel(h=h, A=A, Q=Q)


def transition_oracle(
    F: np.ndarray, L: np.ndarray, sigma: float, h: float, nodes: int = 50
) -> TransitionModel:
    """Numerical (A, Q) straight from the SDE definition; test oracle only.

    A = expm(h F), and Q integrates expm(F(h-tau)) sigma^2 L L^T
    expm(F(h-tau))^T over [0, h] with Gauss-Legendre quadrature.  The
    default 50 nodes are exact for the polynomial IBM integrand up to
    q = 4 and converged for IOUP at the tested theta*h <= 5.  This path is
    deliberately independent of the closed forms above.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError("F must be square")
    L = np.asarray(L, dtype=float)
    if L.ndim == 1:
        L = L[:, None]
    if L.shape[0] != F.shape[0]:
        raise ValueError("L must conform with F")
    A = _expm(h * F)
    x, w = np.polynomial.legendre.leggauss(nodes)
    taus = 0.5 * h * (x + 1.0)
    weights = 0.5 * h * w
    S = sigma**2 * (L @ L.T)
    E = _expm(F[None, :, :] * (h - taus)[:, None, None])
    Q = np.einsum("k,kij,jl,kml->im", weights, E, S, E)
    return TransitionModel(h=h, A=A, Q=0.5 * (Q + Q.T))


def kron_extend(Kx: np.ndarray, Keps: np.ndarray, prior: PriorSpec) -> MultiDimDrift:
    """Couple d output dimensions through Kronecker products.

    Returns the enlarged drift ``Kx (x) F`` and diffusion ``Keps (x) L``;
    identity factors reproduce d independent copies of the scalar model.
    """
    Kx = np.asarray(Kx, dtype=float)
    Keps = np.asarray(Keps, dtype=float)
    for name, K in (("Kx", Kx), ("Keps", Keps)):
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise DimensionMismatch(f"{name} must be square, got shape {K.shape}")
    if Kx.shape != Keps.shape:
        raise DimensionMismatch(
            f"Kx and Keps must have the same size, got {Kx.shape} and {Keps.shape}"
        )
    F = prior.drift_matrix()
    L = prior.diffusion_vector()[:, None]
    return MultiDimDrift(Kx=Kx, Keps=Keps, F_big=np.kron(Kx, F), L_big=np.kron(Keps, L))


def _check_step(sigma: float, h: float) -> None:
    if not h > 0.0:
        raise ValueError("h must be positive")
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")


def _exp_series_tail(m: int, z: float) -> float:
    """sum_{k>=m} z^k / k!, accurate for both small and large |z|.

    For |z| <= 1 the tail is summed directly (its leading term dominates,
    so no cancellation); for larger |z| the complement exp(z) minus the
    degree-(m-1) partial sum is cheaper and stable.
    """
    if abs(z) <= 1.0:
        term = z**m / math.factorial(m)
        total = term
        k = m
        while abs(term) > 1e-20 * (abs(total) + 1e-300) and k < m + 60:
            k += 1
            term *= z / k
            total += term
        return total
    partial = sum(z**k / math.factorial(k) for k in range(m))
    return math.exp(z) - partial


def _ioup_covariance_series(q: int, theta: float, sigma: float, h: float, tol: float) -> np.ndarray:
    """Sum the IOUP process-noise double series, grouped by total order."""
    n = q + 1
    Q = np.zeros((n, n))
    previous_norm = math.inf
    quiet_orders = 0
    for s in range(MAX_SERIES_TERMS):
        M = np.zeros((n, n))
        try:
            for i in range(n):
                for j in range(n):
                    inner = 0.0
                    for u in range(s + 1):
                        v = s - u
                        inner += 1.0 / (
                            (2 * q + 1 - i - j + s)
                            * math.factorial(q - i + u)
                            * math.factorial(q - j + v)
                        )
                    M[i, j] = sigma**2 * (-theta * h) ** s * h ** (2 * q + 1 - i - j) * inner
        except OverflowError:
            raise NonConvergence(
                f"IOUP covariance series overflowed at order {s} (theta*h = {theta * h:g})"
            ) from None
        if not np.all(np.isfinite(M)):
            raise NonConvergence(
                f"IOUP covariance series overflowed at order {s} (theta*h = {theta * h:g})"
            )
        Q += M
        norm = float(np.linalg.norm(M))
        # Converged once two consecutive orders are negligible and decaying.
        if norm < 0.5 * tol * np.linalg.norm(Q) and norm <= previous_norm:
            quiet_orders += 1
            if quiet_orders >= 2:
                return 0.5 * (Q + Q.T)
        else:
            quiet_orders = 0
        previous_norm = norm
    raise NonConvergence(
        f"IOUP covariance series needs more than {MAX_SERIES_TERMS} orders "
        f"(theta*h = {theta * h:g})"
    )


def _expm(M: np.ndarray) -> np.ndarray:
    """Matrix exponential of a (stack of) small matrices.

    Scaling-and-squaring with a degree-12 Taylor polynomial; after scaling
    the 1-norm below 0.25 the truncation error is ~1e-18 relative, ample
    for the (q+1)-sized companion matrices this module handles.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    norm = float(np.max(np.sum(np.abs(M), axis=-2))) if M.size else 0.0
    squarings = max(0, math.ceil(math.log2(norm / 0.25))) if norm > 0.25 else 0
    X = M / 2.0**squarings
    eye = np.broadcast_to(np.eye(n), M.shape).copy()
    result = eye.copy()
    term = eye
    for k in range(1, 13):
        term = term @ X / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result
