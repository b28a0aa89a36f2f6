"""Step-distribution models: densities c * exp(-(g + q)) on (0, inf).

The exponent g is superlinear and convex (power x**beta, pure exponential
exp(x), Weibull-type x**k - (k-1) log x, or a tabulated curve); q is an
optional bounded perturbation controlled by an envelope M with
|q| <= M and M(x) <= N * log g(x) beyond a threshold y0.

Two numerical themes run through the module:

* every integral is computed with a peak shift so exponents of order 1e4
  never overflow, and
* differences of g at nearby points (the "gap" family) are computed by
  series or expm1/log1p forms rather than naive subtraction, because the
  admissibility checks evaluate them at points where the naive form loses
  every significant digit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidModel, NonIntegrable, OutOfSupport
from .quadrature import GridInverseCdf, log_integral, log_moment_integrals, mass_window

Array = np.ndarray

# Bump in g beyond its minimum at which the support is truncated; the mass
# beyond the cap is below exp(-100) of the total and is checked at build time.
SUPPORT_CAP_RISE = 100.0

_SERIES_TERMS = 12
_SERIES_SWITCH = 0.01


class ExponentModel:
    """Base class for the convex exponent g.

    Subclasses provide vectorised ``g``/``dg``/``d2g``, a stable ``log_g``,
    a stable finite difference ``gap`` and high-order derivatives for the
    band-gap series.  ``increase_threshold`` is the point beyond which g is
    increasing.
    """

    kind: str = "abstract"

    @property
    def increase_threshold(self) -> float:
        raise NotImplementedError

    def g(self, x: Array) -> Array:
        raise NotImplementedError

    def dg(self, x: Array) -> Array:
        raise NotImplementedError

    def d2g(self, x: Array) -> Array:
        raise NotImplementedError

    def log_g(self, x: Array) -> Array:
        """log(g(x)) computed without forming g when g would overflow."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(self.g(x))

    def derivative(self, order: int, x: float) -> float:
        """d^order g / dx^order at a scalar point, for the series expansions."""
        raise NotImplementedError

    def gap(self, x: float, delta: float) -> float:
        """g(x + delta) - g(x), stable for |delta| << x."""
        raise NotImplementedError

    def _gap_series_scale(self, x: float, delta: float) -> float:
        """Dimensionless smallness measure deciding series vs direct."""
        return abs(delta) / x

    def band_gaps(self, a: float, eps: float, n: int) -> tuple[float, float]:
        """Return (F1 - n g(a), F2 - n g(a)) for the two band-exit profiles

            F1 = g(a+eps) + (n-1) g(a - eps/(n-1))
            F2 = g(a-eps) + (n-1) g(a + eps/(n-1))

        Both differences vanish to first order in eps, so for small eps/a
        they are evaluated by a Taylor series in eps using exact higher
        derivatives; otherwise by pairs of stable single gaps.
        """
        if eps == 0.0:
            return 0.0, 0.0
        m = n - 1
        if self._gap_series_scale(a, eps) < _SERIES_SWITCH:
            gap1 = 0.0
            gap2 = 0.0
            eps_pow = eps
            factorial = 1.0
            for j in range(2, _SERIES_TERMS + 1):
                eps_pow *= eps
                factorial *= j
                dj = self.derivative(j, a)
                if dj == 0.0:
                    continue
                term = dj * eps_pow / factorial
                sgn = -1.0 if j % 2 else 1.0
                mpow = float(m) ** (j - 1)
                gap1 += term * (1.0 + sgn / mpow)
                gap2 += term * (sgn + 1.0 / mpow)
                if abs(term) < 1e-18 * max(abs(gap1), abs(gap2)):
                    break
            return gap1, gap2
        gap1 = self.gap(a, eps) + m * self.gap(a, -eps / m)
        gap2 = self.gap(a, -eps) + m * self.gap(a, eps / m)
        return gap1, gap2

    def validate(self) -> None:
        """Probe convexity, monotone growth beyond the threshold, and record
        whether the superlinearity witness g(x)/x increasing holds."""
        X = self.increase_threshold
        lo = max(X, 1e-6)
        grid = np.linspace(lo + 1e-9, X + 50.0, 4001)
        if np.any(self.d2g(grid) < -1e-9):
            raise InvalidModel(f"{self.kind} exponent fails the convexity probe")
        if np.any(self.dg(grid[1:]) <= 0.0):
            raise InvalidModel(
                f"{self.kind} exponent is not increasing beyond its threshold"
            )
        probes = np.array([1e2, 1e3, 1e4])
        ratio = self.log_g(probes) - np.log(probes)
        self.superlinear = bool(np.all(np.diff(ratio) > 0.0))


class PowerExponent(ExponentModel):
    """g(x) = x**beta with beta >= 1.

    beta = 1 (pure exponential step) sits on the boundary of the theory and
    is admitted for reference runs; ``superlinear`` is then False and the
    moment-transform guard refuses arguments t >= 1.
    """

    kind = "power"

    def __init__(self, beta: float):
        if not beta >= 1.0:
            raise InvalidModel("power exponent requires beta >= 1")
        self.beta = float(beta)
        self.validate()

    @property
    def increase_threshold(self) -> float:
        return 0.0

    def g(self, x: Array) -> Array:
        return np.asarray(x, dtype=float) ** self.beta

    def dg(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return self.beta * x ** (self.beta - 1.0)

    def d2g(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if self.beta == 1.0:
            return np.zeros_like(x)
        return self.beta * (self.beta - 1.0) * x ** (self.beta - 2.0)

    def log_g(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.beta * np.log(x)

    def derivative(self, order: int, x: float) -> float:
        coef = 1.0
        for i in range(order):
            coef *= self.beta - i
        if coef == 0.0:
            return 0.0
        return coef * x ** (self.beta - order)

    def gap(self, x: float, delta: float) -> float:
        if x + delta <= 0.0:
            raise OutOfSupport("gap endpoint left the support")
        return x**self.beta * math.expm1(self.beta * math.log1p(delta / x))

    def __repr__(self) -> str:
        return f"PowerExponent(beta={self.beta})"


class ExpExponent(ExponentModel):
    """g(x) = exp(x)."""

    kind = "exp"

    def __init__(self):
        self.validate()

    @property
    def increase_threshold(self) -> float:
        return 0.0

    def g(self, x: Array) -> Array:
        return np.exp(np.asarray(x, dtype=float))

    def dg(self, x: Array) -> Array:
        return np.exp(np.asarray(x, dtype=float))

    def d2g(self, x: Array) -> Array:
        return np.exp(np.asarray(x, dtype=float))

    def log_g(self, x: Array) -> Array:
        return np.asarray(x, dtype=float)

    def derivative(self, order: int, x: float) -> float:
        return math.exp(x)

    def _gap_series_scale(self, x: float, delta: float) -> float:
        # The natural expansion variable is delta itself, not delta/x.
        return abs(delta)

    def gap(self, x: float, delta: float) -> float:
        return math.exp(x) * math.expm1(delta)

    def __repr__(self) -> str:
        return "ExpExponent()"


class WeibullExponent(ExponentModel):
    """g(x) = x**k - (k-1) log x with k > 2.

    With normalisation c = k this is the Weibull(k) step density; g is
    convex on all of (0, inf) and increasing beyond ((k-1)/k)**(1/k).
    """

    kind = "weibull"

    def __init__(self, k: float):
        if not k > 2.0:
            raise InvalidModel("weibull exponent requires k > 2")
        self.k = float(k)
        self.validate()

    @property
    def increase_threshold(self) -> float:
        return ((self.k - 1.0) / self.k) ** (1.0 / self.k)

    def g(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return x**self.k - (self.k - 1.0) * np.log(x)

    def dg(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return self.k * x ** (self.k - 1.0) - (self.k - 1.0) / x

    def d2g(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return self.k * (self.k - 1.0) * x ** (self.k - 2.0) + (self.k - 1.0) / x**2

    def log_g(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        t = self.k * np.log(x)
        small = t < 700.0
        out = np.empty_like(t)
        with np.errstate(divide="ignore", over="ignore"):
            out[small] = np.log(self.g(x[small]))
        # Beyond overflow the log correction is below double precision.
        out[~small] = t[~small]
        return out

    def derivative(self, order: int, x: float) -> float:
        coef = 1.0
        for i in range(order):
            coef *= self.k - i
        power_part = coef * x ** (self.k - order) if coef != 0.0 else 0.0
        sgn = -1.0 if order % 2 else 1.0
        log_part = (self.k - 1.0) * sgn * math.factorial(order - 1) / x**order
        return power_part + log_part

    def gap(self, x: float, delta: float) -> float:
        if x + delta <= 0.0:
            raise OutOfSupport("gap endpoint left the support")
        lr = math.log1p(delta / x)
        return x**self.k * math.expm1(self.k * lr) - (self.k - 1.0) * lr

    def __repr__(self) -> str:
        return f"WeibullExponent(k={self.k})"


class TabulatedExponent(ExponentModel):
    """Exponent given on a user grid; derivatives by central differences.

    Values between nodes come from monotone cubic interpolation.  The series
    machinery only has second-order information here, so extreme small-gap
    regimes are outside this kind's remit; the validation probes still hold
    it to the same convexity standard.
    """

    kind = "tabulated"

    def __init__(self, x: Array, gvals: Array):
        x = np.asarray(x, dtype=float)
        gvals = np.asarray(gvals, dtype=float)
        if x.ndim != 1 or x.size < 8 or np.any(np.diff(x) <= 0.0):
            raise InvalidModel("tabulated exponent needs an increasing grid of >= 8 points")
        if np.any(x <= 0.0):
            raise InvalidModel("tabulated grid must lie in (0, inf)")
        self.x_grid = x
        self.g_grid = gvals
        self._interp = PchipInterpolator(x, gvals, extrapolate=True)
        dg = np.gradient(gvals, x)
        d2g = np.gradient(dg, x)
        self._dinterp = PchipInterpolator(x, dg, extrapolate=True)
        self._d2interp = lambda xs: np.interp(xs, x, d2g)
        # Increase threshold: first node from which g never decreases again.
        dec = np.flatnonzero(np.diff(gvals) < 0.0)
        self._X = float(x[dec[-1] + 1]) if dec.size else float(x[0])
        self.validate()

    def validate(self) -> None:
        d2 = np.gradient(np.gradient(self.g_grid, self.x_grid), self.x_grid)
        scale = max(1.0, float(np.max(np.abs(self.g_grid))))
        mask = self.x_grid >= self._X
        if np.any(d2[mask] < -1e-6 * scale):
            raise InvalidModel("tabulated exponent fails the convexity probe")
        tail = self.g_grid[self.x_grid >= self._X]
        if np.any(np.diff(tail) < 0.0):
            raise InvalidModel("tabulated exponent decreases beyond its threshold")
        xs = self.x_grid
        ratio = self.g_grid / xs
        self.superlinear = bool(ratio[-1] > ratio[len(ratio) // 2])

    @property
    def increase_threshold(self) -> float:
        return self._X

    def g(self, x: Array) -> Array:
        return np.asarray(self._interp(np.asarray(x, dtype=float)), dtype=float)

    def dg(self, x: Array) -> Array:
        return np.asarray(self._dinterp(np.asarray(x, dtype=float)), dtype=float)

    def d2g(self, x: Array) -> Array:
        return np.asarray(self._d2interp(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, order: int, x: float) -> float:
        if order == 1:
            return float(self.dg(np.array([x]))[0])
        if order == 2:
            return float(self.d2g(np.array([x]))[0])
        return 0.0

    def _gap_series_scale(self, x: float, delta: float) -> float:
        # Direct differences are fine down to the grid spacing.
        h = float(np.min(np.diff(self.x_grid)))
        return _SERIES_SWITCH * (2.0 if abs(delta) > 1e-3 * h else 0.5)

    def gap(self, x: float, delta: float) -> float:
        h = float(np.min(np.diff(self.x_grid)))
        if abs(delta) > 1e-3 * h:
            return float(self.g(np.array([x + delta]))[0] - self.g(np.array([x]))[0])
        d1 = self.derivative(1, x)
        d2 = self.derivative(2, x)
        return d1 * delta + 0.5 * d2 * delta * delta

    def __repr__(self) -> str:
        return f"TabulatedExponent(points={self.x_grid.size})"


@dataclass
class Perturbation:
    """Bounded exponent perturbation q with envelope M, scale N, threshold y0.

    Contract: |q(x)| <= M(x) everywhere and M(x) <= N log g(x) for x >= y0.
    Both are spot-checked on probe grids when a density is built.
    """

    q: Callable[[Array], Array]
    M: Callable[[Array], Array]
    N: float
    y0: float
    name: str = "custom"


def _solve_log_g_level(exponent: ExponentModel, level: float) -> float:
    """Smallest x beyond the increase threshold with log g(x) >= level."""
    lo = max(exponent.increase_threshold, 1e-6)
    hi = max(2.0 * lo, 1.0)
    for _ in range(200):
        if float(exponent.log_g(np.array([hi]))[0]) >= level:
            break
        hi *= 2.0
    else:
        raise InvalidModel("log g never reaches the requested level")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if float(exponent.log_g(np.array([mid]))[0]) >= level:
            hi = mid
        else:
            lo = mid
    return hi


def sin_perturbation(exponent: ExponentModel, lam: float = 0.5) -> Perturbation:
    """Reference oscillatory perturbation q = lam * sin(x) * min(1, log g)+.

    The envelope is M(x) = clip(log g(x), 0, 1): the raw min(1, log g) dips
    negative where g < 1, which no valid envelope may do, so it is clamped
    at zero (q vanishes there too).  N = 1 and y0 solves log g = 1, making
    M <= N log g automatic beyond y0.
    """
    if not -1.0 <= lam <= 1.0:
        raise InvalidModel("sin perturbation requires |lambda| <= 1")

    def M(x: Array) -> Array:
        return np.clip(exponent.log_g(np.asarray(x, dtype=float)), 0.0, 1.0)

    def q(x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return lam * np.sin(x) * M(x)

    y0 = _solve_log_g_level(exponent, 1.0)
    return Perturbation(q=q, M=M, N=1.0, y0=y0, name=f"sin(lambda={lam:g})")


def almost_log_concave_perturbation(exponent: ExponentModel) -> Perturbation:
    """q = -log(1 + sin(x)**2 / 2): density c(x) exp(-g) with c in [1, 3/2]."""
    bound = math.log(1.5)

    def q(x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return -np.log1p(0.5 * np.sin(x) ** 2)

    def M(x: Array) -> Array:
        return np.full_like(np.asarray(x, dtype=float), bound)

    y0 = _solve_log_g_level(exponent, bound)
    return Perturbation(q=q, M=M, N=1.0, y0=y0, name="almost-log-concave")


def _tabulated_perturbation(exponent: ExponentModel, x: Array, qvals: Array) -> Perturbation:
    interp = PchipInterpolator(x, qvals, extrapolate=False)
    bound = float(np.max(np.abs(qvals))) + 1e-12

    def q(xs: Array) -> Array:
        xs = np.asarray(xs, dtype=float)
        out = np.asarray(interp(xs), dtype=float)
        return np.where(np.isnan(out), 0.0, out)

    def M(xs: Array) -> Array:
        return np.full_like(np.asarray(xs, dtype=float), bound)

    y0 = _solve_log_g_level(exponent, bound)
    return Perturbation(q=q, M=M, N=1.0, y0=y0, name="tabulated")


@dataclass
class PerturbedDensity:
    """Normalised density c * exp(-(g + q)) on (0, support_cap].

    Instances are immutable after construction and safe to share across
    threads; anything random takes an explicit seed.
    """

    exponent: ExponentModel
    perturbation: Perturbation | None = None
    label: str = ""
    c: float = field(init=False, default=float("nan"))
    log_c: float = field(init=False, default=float("nan"))
    support_cap: float = field(init=False, default=float("nan"))
    mean: float = field(init=False, default=float("nan"))
    variance: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        if not self.label:
            base = repr(self.exponent)
            self.label = base if self.perturbation is None else f"{base}+{self.perturbation.name}"
        self._validate_perturbation()
        self._normalize()

    # -- structure ---------------------------------------------------------

    @property
    def is_pure(self) -> bool:
        return self.perturbation is None

    def q(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if self.perturbation is None:
            return np.zeros_like(x)
        return np.asarray(self.perturbation.q(x), dtype=float)

    def exponent_value(self, x: Array) -> Array:
        """g(x) + q(x)."""
        return self.exponent.g(x) + self.q(x)

    def _log_kernel(self, x: Array) -> Array:
        """log of the unnormalised density, -inf off the support."""
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, -np.inf)
        pos = x > 0.0
        if np.any(pos):
            out[pos] = -self.exponent_value(x[pos])
        return out

    def _validate_perturbation(self) -> None:
        from .errors import EnvelopeViolated

        p = self.perturbation
        if p is None:
            return
        if not p.N > 0.0:
            raise InvalidModel("envelope scale N must be positive")
        X = self.exponent.increase_threshold
        probes = np.linspace(max(1e-6, X / 10.0), X + 50.0, 4001)
        qv = np.asarray(p.q(probes), dtype=float)
        Mv = np.asarray(p.M(probes), dtype=float)
        if np.any(np.abs(qv) > Mv + 1e-9):
            raise EnvelopeViolated("|q| exceeds its envelope M on the probe grid")
        if np.any(Mv < -1e-12):
            raise EnvelopeViolated("envelope M must be nonnegative")
        beyond = probes >= p.y0
        cap = p.N * self.exponent.log_g(probes[beyond])
        if np.any(Mv[beyond] > cap + 1e-9):
            raise EnvelopeViolated("M exceeds N log g beyond y0")

    # -- normalisation -----------------------------------------------------

    def _normalize(self) -> None:
        exp_model = self.exponent
        X = exp_model.increase_threshold
        probe = np.linspace(max(1e-9, X * 1e-3), max(4.0 * (X + 1.0), 8.0), 4097)
        gvals = exp_model.g(probe)
        mode_g = float(np.min(gvals))
        target = mode_g + SUPPORT_CAP_RISE
        hi = float(probe[-1])
        while float(exp_model.g(np.array([hi]))[0]) < target:
            hi *= 2.0
            if hi > 1e12:
                raise NonIntegrable("exponent never rises enough to truncate the support")
        lo = float(probe[np.argmin(gvals)])
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if float(exp_model.g(np.array([mid]))[0]) >= target:
                hi = mid
            else:
                lo = mid
        self.support_cap = hi

        mass, mean, second = log_moment_integrals(self._log_kernel, 0.0, self.support_cap)
        self.log_c = -mass
        self.c = math.exp(self.log_c)
        self.mean = mean
        self.variance = max(second - mean * mean, 0.0)
        self._check_tail(mass)
        self._table = GridInverseCdf.build(self._log_kernel, 0.0, self.support_cap)

    def _check_tail(self, log_mass: float) -> None:
        cap = self.support_cap
        t1 = log_integral(self._log_kernel, cap, 2.0 * cap)
        t2 = log_integral(self._log_kernel, 2.0 * cap, 4.0 * cap)
        if not (t1 - log_mass < math.log(1e-12)):
            raise NonIntegrable("truncated tail mass is not negligible")
        if not (t2 < t1):
            raise NonIntegrable("tail mass fails to decrease under cap doubling")

    # -- evaluation --------------------------------------------------------

    def log_density(self, x: Array) -> Array:
        """log of the density at x > 0; raises OutOfSupport otherwise."""
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise OutOfSupport("density support is (0, inf)")
        return self.log_c - self.exponent_value(x)

    def pdf(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0.0
        out[pos] = np.exp(self.log_c - self.exponent_value(x[pos]))
        return out

    def cdf(self, x: Array) -> Array:
        """Quadrature-table CDF (exact to the table tolerance)."""
        return self._table.cdf_at(x)

    def log_tail(self, x: float) -> float:
        """log P(X > x); shift-stabilised so deep tails stay finite.

        The integration window tracks x instead of stopping at the
        sampling cap, so tails far beyond the table (where the mass is
        e.g. exp(-8000)) still come back accurate.
        """
        if x <= 0.0:
            return 0.0
        _, hi, peak = mass_window(self._log_kernel, x, max(2.0 * x, x + 8.0))
        return self.log_c + log_integral(self._log_kernel, x, hi, peak_hint=peak)

    # -- sampling ----------------------------------------------------------

    def sample(self, size: int, seed: int) -> Array:
        """Draw ``size`` i.i.d. steps; deterministic for a given seed.

        The pure Weibull kind uses the exact inverse transform
        (-log U)**(1/k); everything else inverts the tabulated cumulative.
        """
        rng = np.random.default_rng(seed)
        if self.is_pure and isinstance(self.exponent, WeibullExponent):
            u = rng.random(size)
            u[u == 0.0] = 0.5**53
            return (-np.log(u)) ** (1.0 / self.exponent.k)
        return self._table.sample(rng, size)

    def inverse_cdf_table(self) -> GridInverseCdf:
        return self._table


# -- construction helpers ---------------------------------------------------


def pure_density(exponent: ExponentModel) -> PerturbedDensity:
    return PerturbedDensity(exponent=exponent)


def sin_perturbed_density(exponent: ExponentModel, lam: float = 0.5) -> PerturbedDensity:
    return PerturbedDensity(exponent=exponent, perturbation=sin_perturbation(exponent, lam))


def almost_log_concave_density(exponent: ExponentModel) -> PerturbedDensity:
    return PerturbedDensity(
        exponent=exponent, perturbation=almost_log_concave_perturbation(exponent)
    )


def load_tabulated_csv(path: str) -> tuple[TabulatedExponent, Perturbation | None]:
    """Read a (x, g[, q]) CSV into a tabulated exponent and optional q."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] < 2:
        raise InvalidModel("tabulated CSV needs at least columns x,g")
    exponent = TabulatedExponent(data[:, 0], data[:, 1])
    pert = None
    if data.shape[1] >= 3 and np.any(data[:, 2] != 0.0):
        pert = _tabulated_perturbation(exponent, data[:, 0], data[:, 2])
    return exponent, pert


def model_from_spec(spec: dict) -> PerturbedDensity:
    """Build a density from its JSON record.

    Recognised keys: kind ("power" | "exp" | "weibull" | "tabulated"),
    beta / k / path for the exponent, perturbation ("none" | "sin") and
    lambda for the optional oscillation.
    """
    kind = spec.get("kind")
    file_pert: Perturbation | None = None
    if kind == "power":
        exponent: ExponentModel = PowerExponent(float(spec["beta"]))
    elif kind == "exp":
        exponent = ExpExponent()
    elif kind == "weibull":
        exponent = WeibullExponent(float(spec["k"]))
    elif kind == "tabulated":
        exponent, file_pert = load_tabulated_csv(str(spec["path"]))
    else:
        raise InvalidModel(f"unknown model kind {kind!r}")

    pert_name = spec.get("perturbation", "none")
    if pert_name == "none":
        # A q column in a tabulated file is part of the model itself.
        return PerturbedDensity(exponent=exponent, perturbation=file_pert)
    if pert_name == "sin":
        lam = float(spec.get("lambda", 0.5))
        return PerturbedDensity(exponent=exponent, perturbation=sin_perturbation(exponent, lam))
    raise InvalidModel(f"unknown perturbation {pert_name!r}")


def parse_model(text: str) -> PerturbedDensity:
    """Parse a compact model string such as

        power:beta=2
        weibull:k=3,perturbation=sin,lambda=0.5
        exp
        tabulated:path=steps.csv

    or a JSON object string with the same keys.
    """
    text = text.strip()
    if text.startswith("{"):
        return model_from_spec(json.loads(text))
    if ":" in text:
        kind, _, rest = text.partition(":")
        spec: dict = {"kind": kind.strip()}
        for item in rest.split(","):
            if not item.strip():
                continue
            key, _, value = item.partition("=")
            key = key.strip()
            value = value.strip()
            if key in ("beta", "k", "lambda"):
                spec[key] = float(value)
            else:
                spec[key] = value
    else:
        spec = {"kind": text}
    return model_from_spec(spec)
