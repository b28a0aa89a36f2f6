"""Numeric Legendre transform of the log moment generating function.

The rate I(x) = sup_t (t x - Lambda(t)) is computed by solving the
stationarity condition Lambda'(t) = x with a safeguarded Newton iteration.
Lambda' and Lambda'' come from quadrature of tilted moments, never from
differencing Lambda, so the iteration sees smooth derivatives.  A table
type caches (x, I, t*) on a log-spaced grid with cubic interpolation for
the many-query callers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .density import PerturbedDensity
from .errors import Divergent, DomainError, NoConvergence, NoRoot
from .quadrature import log_integral, log_moment_integrals, mass_window

_MEAN_ATTR = "_ratefn_mean"
_NEWTON_CAP = 200
# Wide enough that every diagnostic point of interest solves; Weibull k=3
# at x=20 already needs a tilt near 1.2e3.
_BRACKET_LIMIT = 1e4


def _tilted_ell(model: PerturbedDensity, t: float):
    def ell(xs: np.ndarray) -> np.ndarray:
        return t * xs + model.log_c + model._log_kernel(xs)

    return ell


def _tilted_stats(model: PerturbedDensity, t: float) -> tuple[float, float, float]:
    """(Lambda(t), Lambda'(t), Lambda''(t)) by shared-window quadrature."""
    ell = _tilted_ell(model, t)
    lo, hi, peak = mass_window(ell, 0.0, 8.0)
    lam, mean, second = log_moment_integrals(ell, lo, hi, peak_hint=peak)
    var = second - mean * mean
    if var <= 0.0:
        raise NoConvergence(f"tilted variance {var:g} not positive at t={t:g}")
    return lam, mean, var


def log_mgf(model: PerturbedDensity, t: float) -> float:
    """Lambda(t) = log E exp(tX) by peak-shifted adaptive quadrature.

    Raises Divergent when the tilted integrand refuses to decay under
    window doubling, which is how a linear-exponent model at t >= 1
    announces an infinite MGF.
    """
    ell = _tilted_ell(model, float(t))
    lo, hi, peak = mass_window(ell, 0.0, 8.0)
    return log_integral(ell, lo, hi, peak_hint=peak)


def model_mean(model: PerturbedDensity) -> float:
    """EX by quadrature, cached on the model instance."""
    cached = getattr(model, _MEAN_ATTR, None)
    if cached is None:
        _, cached, _ = _tilted_stats(model, 0.0)
        object.__setattr__(model, _MEAN_ATTR, cached)
    return cached


def _solve_tilt(model: PerturbedDensity, x: float,
                t_guess: float | None = None) -> tuple[float, float]:
    """Solve Lambda'(t) = x; returns (t*, Lambda(t*)).

    Safeguarded Newton: the bracket [t_lo, t_hi] is maintained from the
    monotonicity of Lambda', Newton steps landing outside it are replaced
    by bisection.  A Divergent evaluation during bracketing caps the
    upper end instead of aborting, so linear-exponent models still solve
    for means reachable below the divergence threshold.
    """
    tol = 1e-8 * max(1.0, abs(x))
    ex = model_mean(model)
    if abs(x - ex) <= tol:
        return 0.0, 0.0

    stats_cache: dict[float, tuple[float, float, float]] = {}

    def stats(t: float) -> tuple[float, float, float]:
        if t not in stats_cache:
            stats_cache[t] = _tilted_stats(model, t)
        return stats_cache[t]

    # Bracket the root of Lambda'(t) - x.
    if x > ex:
        t_lo, f_lo = 0.0, ex - x
        t_hi = abs(t_guess) if t_guess else 0.25
        hard_hi = math.inf
        while True:
            if t_hi >= hard_hi:
                t_hi = 0.5 * (t_lo + hard_hi)
            try:
                _, mean, _ = stats(t_hi)
            except Divergent:
                hard_hi = t_hi
                continue
            if mean >= x:
                f_hi = mean - x
                break
            t_lo, f_lo = t_hi, mean - x
            if math.isinf(hard_hi):
                if t_hi >= _BRACKET_LIMIT:
                    raise NoRoot(
                        f"no tilt with mean {x:g} found for t up to {_BRACKET_LIMIT:g}"
                    )
                t_hi *= 2.0
            else:
                if hard_hi - t_lo < 1e-13 * max(1.0, hard_hi):
                    raise NoRoot(
                        f"tilted mean stays below {x:g} up to the MGF divergence point"
                    )
                t_hi = 0.5 * (t_lo + hard_hi)
    else:
        t_hi, f_hi = 0.0, ex - x
        t_lo = -(abs(t_guess) if t_guess else 0.25)
        while True:
            _, mean, _ = stats(t_lo)
            if mean <= x:
                f_lo = mean - x
                break
            t_hi, f_hi = t_lo, mean - x
            if t_lo <= -_BRACKET_LIMIT:
                raise NoRoot(f"no tilt with mean {x:g} found for t down to -{_BRACKET_LIMIT:g}")
            t_lo *= 2.0

    t = t_lo + (t_hi - t_lo) * f_lo / (f_lo - f_hi) if f_lo != f_hi else 0.5 * (t_lo + t_hi)
    for _ in range(_NEWTON_CAP):
        lam, mean, var = stats(t)
        resid = mean - x
        if abs(resid) <= tol:
            return t, lam
        if resid > 0.0:
            t_hi = t
        else:
            t_lo = t
        step = resid / var
        t_new = t - step
        if not (t_lo < t_new < t_hi):
            t_new = 0.5 * (t_lo + t_hi)
        t = t_new
    raise NoConvergence(f"tilt solve for mean {x:g} stalled at residual {resid:g}")


def cramer_rate(model: PerturbedDensity, x: float,
                t_guess: float | None = None) -> tuple[float, float]:
    """(I(x), t*(x)) with |Lambda'(t*) - x| <= 1e-8 max(1, x)."""
    x = float(x)
    if x <= 0.0:
        raise DomainError("rate is defined only above the support infimum 0")
    t_star, lam = _solve_tilt(model, x, t_guess)
    if t_star == 0.0:
        return 0.0, 0.0
    value = t_star * x - lam
    if value < 0.0:
        if value < -1e-10 * max(1.0, abs(lam)):
            raise NoConvergence(f"negative rate {value:g} at x={x:g}")
        value = 0.0
    return value, t_star


def extended_ldp_log_prob(model: PerturbedDensity, n: int, a: float) -> float:
    """First-order log-probability -n I(a) for the mean exceeding a."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if a < model_mean(model):
        raise DomainError("level a must not sit below the mean")
    value, _ = cramer_rate(model, a)
    return -n * value


def tail_equivalence(model: PerturbedDensity, x: float) -> float:
    """Diagnostic ratio (-log P(X > x)) / I(x); approaches 1 far in the tail."""
    value, _ = cramer_rate(model, x)
    if value <= 0.0:
        raise DomainError("tail equivalence needs x strictly above the mean")
    return -model.log_tail(x) / value


@dataclass
class CramerRate:
    """Tabulated rate function on [EX, x_max] with cubic interpolation.

    Nodes are log-spaced from 1.05 EX upward; the exact anchor
    (EX, 0, 0) is prepended so queries just above the mean interpolate
    correctly.  Lookups are pure; extension re-tabulates and is single
    writer.
    """

    model: PerturbedDensity
    ex: float
    x: np.ndarray
    I: np.ndarray
    t_star: np.ndarray
    _rate_spline: CubicSpline = field(repr=False)
    _tilt_spline: PchipInterpolator = field(repr=False)

    @classmethod
    def build(cls, model: PerturbedDensity, x_max: float,
              points: int = 128) -> "CramerRate":
        ex = model_mean(model)
        lo = 1.05 * ex
        if x_max <= lo * 1.01:
            raise DomainError("x_max must sit clearly above 1.05 EX")
        if points < 8:
            raise DomainError("table needs at least 8 nodes")
        grid = np.geomspace(lo, x_max, points)
        rates = np.empty(points)
        tilts = np.empty(points)
        guess = None
        for i, xv in enumerate(grid):
            rates[i], tilts[i] = cramer_rate(model, float(xv), t_guess=guess)
            guess = tilts[i]
        xs = np.concatenate([[ex], grid])
        Is = np.concatenate([[0.0], rates])
        ts = np.concatenate([[0.0], tilts])
        table = cls(
            model=model,
            ex=ex,
            x=xs,
            I=Is,
            t_star=ts,
            _rate_spline=CubicSpline(xs, Is),
            _tilt_spline=PchipInterpolator(xs, ts),
        )
        table.validate()
        return table

    def validate(self) -> None:
        slopes = np.diff(self.I) / np.diff(self.x)
        if np.any(np.diff(slopes) < -1e-8):
            raise NoConvergence("rate table lost convexity")
        if np.any(self.I < 0.0):
            raise NoConvergence("rate table produced a negative rate")
        if np.any(np.diff(self.t_star) < 0.0):
            raise NoConvergence("tilt column is not nondecreasing")

    def ensure_cover(self, x: float) -> None:
        """Extend the table when a query lands beyond the last node."""
        if x <= self.x[-1]:
            return
        old_span = math.log(self.x[-1] / self.x[1])
        new_span = math.log(1.05 * x / self.x[1])
        points = max(self.x.size - 1, math.ceil((self.x.size - 1) * new_span / old_span))
        fresh = CramerRate.build(self.model, 1.05 * x, points=points)
        self.x = fresh.x
        self.I = fresh.I
        self.t_star = fresh.t_star
        self._rate_spline = fresh._rate_spline
        self._tilt_spline = fresh._tilt_spline

    def rate_at(self, x) -> np.ndarray | float:
        arr = np.asarray(x, dtype=float)
        self.ensure_cover(float(arr.max()))
        if np.any(arr < self.ex):
            raise DomainError("table covers only x >= EX; call cramer_rate below the mean")
        out = self._rate_spline(arr)
        return float(out) if np.isscalar(x) else out

    def t_star_at(self, x) -> np.ndarray | float:
        arr = np.asarray(x, dtype=float)
        self.ensure_cover(float(arr.max()))
        if np.any(arr < self.ex):
            raise DomainError("table covers only x >= EX; call cramer_rate below the mean")
        out = self._tilt_spline(arr)
        return float(out) if np.isscalar(x) else out

    def duality_residuals(self) -> tuple[float, float]:
        """(max value residual, max gradient residual) over the log nodes.

        Value residual: |t* x - Lambda(t*) - I| / max(1, I) with Lambda
        freshly integrated.  Gradient residual: |Lambda'(t*) - x| / max(1, x).
        """
        value_worst = 0.0
        grad_worst = 0.0
        for xv, rate, tilt in zip(self.x[1:], self.I[1:], self.t_star[1:]):
            lam, mean, _ = _tilted_stats(self.model, float(tilt))
            value_worst = max(value_worst,
                              abs(tilt * xv - lam - rate) / max(1.0, abs(rate)))
            grad_worst = max(grad_worst, abs(mean - xv) / max(1.0, abs(xv)))
        return value_worst, grad_worst

    def derivative_residual(self) -> float:
        """max |dI/dx - t*| / max(1, t*) over interior nodes, with dI/dx
        taken from the cubic interpolant."""
        xs = self.x[1:-1]
        deriv = self._rate_spline.derivative()(xs)
        ref = self.t_star[1:-1]
        return float(np.max(np.abs(deriv - ref) / np.maximum(1.0, np.abs(ref))))

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(["x", "I", "t_star"])
        for xv, rate, tilt in zip(self.x, self.I, self.t_star):
            writer.writerow([f"{xv:.17g}", f"{rate:.17g}", f"{tilt:.17g}"])
