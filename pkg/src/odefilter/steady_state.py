"""Steady states of the q = 1 covariance/gain recursion.

For q = 1 the covariance recursion decouples from the data and follows a
discrete algebraic Riccati equation.  Its velocity block and the gains
converge to unique attractive fixed points with closed forms in
(h, sigma, R); the position variance has no fixed point (that state is
undetectable) and is deliberately excluded.  ``dare_orbit`` iterates the
exact recursion as a numerical oracle, and ``verify_order_bounds``
measures the h-orders of the maximal covariance/gain quantities against
the predicted exponents for a power-law noise model R = K_R h^p.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from . import filtering
from .noise import PowerLawNoise, ZeroNoise
from .priors import ibm_transition

__all__ = [
    "InsufficientGrid",
    "ORDER_BOUND_QUANTITIES",
    "OrderBoundFit",
    "SteadyState",
    "closed_form",
    "dare_orbit",
    "orbit_limit",
    "predicted_exponent",
    "verify_order_bounds",
]


class InsufficientGrid(ValueError):
    """The step-size grid is too small or too narrow for a slope fit."""


@dataclasses.dataclass(frozen=True)
class SteadyState:
    """Fixed point of the q = 1 covariance/gain recursion."""

    P11_pred: float
    P11: float
    P01_pred: float
    P01: float
    beta0: float
    beta1: float
    h: float
    sigma: float
    R: float

    def as_tuple(self) -> np.ndarray:
        return np.array(
            [self.P11_pred, self.P11, self.P01_pred, self.P01, self.beta0, self.beta1]
        )


def closed_form(h: float, sigma: float, R: float) -> SteadyState:
    """Evaluate the closed-form steady states.

    With s = sigma^2 h and root = sqrt(4 sigma^2 R h + sigma^4 h^2):

        P11_pred = (s + root) / 2
        P11      = (s + root) R / (s + root + 2R)
        P01_pred = (s^2 + (2R + s) root + 4 R s) h / (2 (s + root))
        P01      = R root h / (s + root)
        beta0    = root h / (s + root)
        beta1    = (s + root) / (s + root + 2R)
    """
    if not (h > 0.0 and sigma > 0.0):
        raise ValueError("h and sigma must be positive")
    if not R >= 0.0:
        raise ValueError("R must be non-negative")
    s = sigma**2 * h
    root = math.sqrt(4.0 * sigma**2 * R * h + sigma**4 * h**2)
    return SteadyState(
        P11_pred=0.5 * (s + root),
        P11=(s + root) * R / (s + root + 2.0 * R),
        P01_pred=(s**2 + (2.0 * R + s) * root + 4.0 * R * s) / (2.0 * (s + root)) * h,
        P01=R * root / (s + root) * h,
        beta0=root / (s + root) * h,
        beta1=(s + root) / (s + root + 2.0 * R),
        h=h,
        sigma=sigma,
        R=R,
    )


def dare_orbit(
    h: float, sigma: float, R: float, P0: np.ndarray, n_steps: int
) -> list:
    """Iterate the exact q = 1 covariance recursion from P0.

    Returns ``n_steps`` triples (P_pred, P, beta); the orbit is exactly
    the covariance sequence a solve produces, because the same predict
    and update routines run underneath.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    tm = ibm_transition(1, sigma, h)
    P = np.array(P0, dtype=float)
    if P.shape != (2, 2):
        raise ValueError("P0 must be a 2x2 matrix")
    orbit = []
    for _ in range(n_steps):
        P_pred = filtering.predict_covariance(P, tm)
        beta = filtering.gain(P_pred, R)
        P, _ = filtering.update_covariance(P_pred, R)
        orbit.append((P_pred, P.copy(), beta))
    return orbit


def orbit_limit(
    h: float,
    sigma: float,
    R: float,
    P0: Optional[np.ndarray] = None,
    tol: float = 1e-13,
    max_steps: int = 200_000,
) -> SteadyState:
    """Run dare_orbit until the six tracked quantities settle below tol."""
    tm = ibm_transition(1, sigma, h)
    P = np.zeros((2, 2)) if P0 is None else np.array(P0, dtype=float)
    previous = None
    for _ in range(max_steps):
        P_pred = filtering.predict_covariance(P, tm)
        beta = filtering.gain(P_pred, R)
        P, _ = filtering.update_covariance(P_pred, R)
        current = np.array(
            [P_pred[1, 1], P[1, 1], P_pred[0, 1], P[0, 1], beta[0], beta[1]]
        )
        if previous is not None and np.max(np.abs(current - previous)) < tol:
            return SteadyState(*current, h=h, sigma=sigma, R=R)
        previous = current
    raise RuntimeError(f"orbit did not settle within {max_steps} iterations")


ORDER_BOUND_QUANTITIES = ("P11_pred", "P11", "abs_P01", "abs_beta0", "one_minus_beta1")


def predicted_exponent(quantity: str, p: float) -> float:
    """Predicted h-order of the maximal quantity under R = K_R h^p."""
    if quantity == "P11_pred":
        return min(1.0, (p + 1.0) / 2.0)
    if quantity == "P11":
        return max(p, (p + 1.0) / 2.0)
    if quantity == "abs_P01":
        return p + 1.0
    if quantity == "abs_beta0":
        return 1.0
    if quantity == "one_minus_beta1":
        return max(p - 1.0, 0.0)
    raise KeyError(f"unknown quantity {quantity!r}")


@dataclasses.dataclass
class OrderBoundFit:
    """Measured h-order of one maximal covariance/gain quantity."""

    quantity: str
    predicted: float
    fitted: Optional[float]
    exact_zero: bool
    h_values: np.ndarray
    max_values: np.ndarray


def verify_order_bounds(
    h_grid: Sequence[float],
    sigma: float,
    p: float,
    K_R: float,
    T: float = 1.0,
    drop_largest: int = 1,
) -> list:
    """Fit the h-orders of max-over-mesh covariance/gain quantities.

    For each h the recursion runs T/h steps from a zero start, the five
    bounded quantities are maximized over the mesh, and a log-log line is
    fitted over the grid (the largest ``drop_largest`` steps are excluded
    as pre-asymptotic).  Quantities that vanish identically (R = 0) are
    flagged exact_zero instead of fitted.
    """
    hs = np.asarray(list(h_grid), dtype=float)
    if len(hs) < 4:
        raise InsufficientGrid("need at least 4 step sizes")
    if np.any(np.diff(hs) >= 0.0):
        raise InsufficientGrid("step sizes must be strictly decreasing")
    if hs[0] / hs[-1] < 100.0:
        raise InsufficientGrid("step sizes must span at least 2 decades")
    noise = ZeroNoise() if math.isinf(p) else PowerLawNoise(K_R=K_R, p=p)
    maxima = np.empty((len(hs), len(ORDER_BOUND_QUANTITIES)))
    for row, h in enumerate(hs):
        orbit = dare_orbit(h, sigma, noise.evaluate(h), np.zeros((2, 2)), round(T / h))
        maxima[row] = [
            max(t[0][1, 1] for t in orbit),
            max(t[1][1, 1] for t in orbit),
            max(abs(t[1][0, 1]) for t in orbit),
            max(abs(t[2][0]) for t in orbit),
            max(abs(1.0 - t[2][1]) for t in orbit),
        ]
    fits = []
    keep = slice(drop_largest, None)
    for col, quantity in enumerate(ORDER_BOUND_QUANTITIES):
        values = maxima[:, col]
        if np.all(values == 0.0):
            fitted = None
            exact_zero = True
        elif np.any(values[keep] <= 0.0):
            fitted = None
            exact_zero = False
        else:
            fitted = float(np.polyfit(np.log(hs[keep]), np.log(values[keep]), 1)[0])
            exact_zero = False
        fits.append(
            OrderBoundFit(
                quantity=quantity,
                predicted=predicted_exponent(quantity, p),
                fitted=fitted,
                exact_zero=exact_zero,
                h_values=hs,
                max_values=values,
            )
        )
    return fits
