"""Error, misalignment, and calibration metrics over trajectories.

Errors are measured against closed-form solutions; derivative rows come
from composing the problem's total-derivative maps with the solution.
The weighted norm ``sum_i h^i ||row i||`` makes the per-derivative errors
commensurable (each derivative estimate is one order of h worse).
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np

from .filtering import Trajectory
from .problems import IVProblem, MissingDerivative  # noqa: F401  (re-exported error)

__all__ = [
    "CredibleWidth",
    "DegenerateFit",
    "ErrorSeries",
    "MissingExact",
    "OrderFit",
    "credible_width",
    "fit_order",
    "global_error",
    "h_norm",
    "loglog_slope",
    "misalignment",
]


class MissingExact(ValueError):
    """The problem has no closed-form solution to compare against."""


class DegenerateFit(ValueError):
    """The error values span less than a decade; a slope would be noise."""


@dataclasses.dataclass
class ErrorSeries:
    """Per-mesh-point truncation errors over all modeled derivatives."""

    times: np.ndarray
    eps: np.ndarray  # (N+1, q+1, d): m^(i)(t) - x^(i)(t)
    max_eps0: float
    h_norm_series: np.ndarray

    def eps0_norms(self) -> np.ndarray:
        return np.linalg.norm(self.eps[:, 0, :], axis=1)


def global_error(traj: Trajectory, problem: IVProblem) -> ErrorSeries:
    """Errors m^(i)(nh) - x^(i)(nh) along the whole mesh, t = 0 included."""
    if problem.exact is None:
        raise MissingExact(f"problem {problem.name!r} has no exact solution")
    q = traj.q
    derivative_maps = [problem.derivative(i) for i in range(q + 1)]
    times = traj.times()
    means = traj.means()
    eps = np.empty_like(means)
    for n, t in enumerate(times):
        x = np.asarray(problem.exact(t), dtype=float)
        truth = np.stack([derivative_maps[i](x) for i in range(q + 1)])
        eps[n] = means[n] - truth
    eps0 = np.linalg.norm(eps[:, 0, :], axis=1)
    h_norms = np.array([h_norm(e, traj.h) for e in eps])
    return ErrorSeries(
        times=times, eps=eps, max_eps0=float(eps0.max()), h_norm_series=h_norms
    )


def h_norm(eps: np.ndarray, h: float) -> float:
    """sum_i h^i ||row i|| over the derivative stack."""
    if not h > 0.0:
        raise ValueError("h must be positive")
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    weights = h ** np.arange(eps.shape[0], dtype=float)
    return float(np.sum(weights * np.linalg.norm(eps, axis=1)))


def misalignment(traj: Trajectory, problem: IVProblem, i: int) -> np.ndarray:
    """||m^(i)(nh) - g_i(m^(0)(nh))|| along the mesh.

    The i-th state misalignment: how far the filter's derivative estimate
    sits from the derivative the ODE implies at the current solution
    estimate.  Identically zero for i = 0.
    """
    g_i = problem.derivative(i)
    means = traj.means()
    out = np.empty(len(means))
    for n, m in enumerate(means):
        out[n] = np.linalg.norm(m[i] - np.asarray(g_i(m[0]), dtype=float))
    return out


@dataclasses.dataclass
class CredibleWidth:
    """Posterior standard deviations sqrt(P00) and calibration ratios."""

    times: np.ndarray
    widths: np.ndarray  # (N+1, d)
    ratios: Optional[np.ndarray]  # (N+1, d): |eps0| / width, 0/0 -> 1

    def max_width(self) -> float:
        return float(np.linalg.norm(self.widths, axis=1).max())


def credible_width(traj: Trajectory, problem: Optional[IVProblem] = None) -> CredibleWidth:
    """Width series of the posterior on the solution value.

    Ratios |eps0| / sqrt(P00) per dimension are included when a problem
    with an exact solution is supplied (0/0 counts as 1, the calibrated
    value of an exactly pinned state).
    """
    times = traj.times()
    covs = traj.covariances()
    widths = np.sqrt(covs[:, :, 0, 0])
    ratios = None
    if problem is not None:
        if problem.exact is None:
            raise MissingExact(f"problem {problem.name!r} has no exact solution")
        means = traj.means()
        abs_eps0 = np.abs(
            means[:, 0, :] - np.stack([np.asarray(problem.exact(t)) for t in times])
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = abs_eps0 / widths
        ratios[(abs_eps0 == 0.0) & (widths == 0.0)] = 1.0
    return CredibleWidth(times=times, widths=widths, ratios=ratios)


@dataclasses.dataclass
class OrderFit:
    """Least-squares line through (log h, log error): slope = empirical order."""

    h_values: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    r_squared: float


def fit_order(
    h_values: Sequence[float], errors: Sequence[float], drop_largest: int = 1
) -> OrderFit:
    """Empirical convergence order from an (h, error) sweep.

    The ``drop_largest`` coarsest steps are excluded (pre-asymptotic
    transients bend the line there).  Raises DegenerateFit when the kept
    errors span less than a decade, and ValueError on non-positive errors
    or fewer than 3 kept points.
    """
    hs = np.asarray(list(h_values), dtype=float)
    errs = np.asarray(list(errors), dtype=float)
    if hs.shape != errs.shape or hs.ndim != 1:
        raise ValueError("h_values and errors must be 1-d and the same length")
    order = np.argsort(hs)[::-1]
    hs, errs = hs[order], errs[order]
    hs, errs = hs[drop_largest:], errs[drop_largest:]
    if len(hs) < 3:
        raise ValueError("need at least 3 points after dropping")
    if np.any(errs <= 0.0):
        raise ValueError("errors must be positive (flag exact zeros before fitting)")
    if errs.max() / errs.min() < 10.0:
        raise DegenerateFit(
            f"errors span only a factor {errs.max() / errs.min():.3g}; "
            "less than one decade"
        )
    slope, intercept = np.polyfit(np.log10(hs), np.log10(errs), 1)
    predicted = slope * np.log10(hs) + intercept
    resid = np.log10(errs) - predicted
    total = np.log10(errs) - np.log10(errs).mean()
    r_squared = 1.0 - float(resid @ resid) / float(total @ total)
    return OrderFit(
        h_values=hs,
        errors=errs,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
    )


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Plain least-squares slope of log y against log x (no guards)."""
    return float(np.polyfit(np.log(np.asarray(xs)), np.log(np.asarray(ys)), 1)[0])
