"""Variational band-exit analysis for the sum event {S_n >= n a}.

Given the band I = (a-eps, a+eps)^n, the cheapest way for one step to leave
the band while the sum stays at n a is to park a single coordinate at a
band edge and spread the compensation evenly over the rest:

    high exit: one step at a+eps, the others at a - eps/(n-1)
    low  exit: one step at a-eps, the others at a + eps/(n-1)

For convex exponents these closed forms are the exact constrained infima;
``brute_force_infimum`` re-derives them by direct search so the closed
forms can be checked rather than trusted.  The module also builds the
piecewise-linear-then-convex minorant used to push the lower probability
bound through a bounded perturbation, and evaluates both certified
probability bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import ExponentModel, PerturbedDensity, Perturbation, _solve_log_g_level
from .errors import DomainError, EnvelopeViolated, NoConvergence, ThresholdNotFound

Array = np.ndarray

REGIONS = ("C", "AcapC", "BcapC", "IccC")


@dataclass(frozen=True)
class BandEvent:
    """Sum-level a with band halfwidth eps for an n-step walk.

    eps = 0 is admitted as the degenerate band (all exit profiles collapse
    onto n g(a)); sampling operations require eps > 0.
    """

    n: int
    a: float
    eps: float

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("band events need at least two steps")
        if not self.a > 0.0:
            raise DomainError("band centre must be positive")
        if not 0.0 <= self.eps < self.a:
            raise DomainError("band halfwidth must satisfy 0 <= eps < a")


@dataclass(frozen=True)
class LocalizationBounds:
    """Closed-form exit infima and the derived gap quantities.

    escape_gap is the barrier the walk must pay to leave the band while
    keeping its sum; reciprocal_gap is g(a + 1/g(a)) - g(a), the exponent
    increment over one reciprocal cell, and volume_correction is n times
    it (the pure-convex cell-volume term of the lower bound).
    """

    high_exit: float
    low_exit: float
    escape_infimum: float
    sum_infimum: float
    escape_gap: float
    reciprocal_gap: float
    volume_correction: float


def _check_compensation(ev: BandEvent) -> None:
    if ev.a - ev.eps / (ev.n - 1) <= 0.0:
        raise DomainError("compensated step a - eps/(n-1) must stay positive")


def closed_form_bounds(exponent: ExponentModel, ev: BandEvent) -> LocalizationBounds:
    """Evaluate both exit profiles and the gap quantities for (n, a, eps).

    All differences of nearby exponent values go through the stable gap
    machinery, so the results keep full precision even when eps/a is at
    the 1e-16 scale that sequence plans reach.
    """
    if ev.a <= exponent.increase_threshold:
        raise DomainError("band centre must lie beyond the increase threshold")
    _check_compensation(ev)
    n, a, eps = ev.n, ev.a, ev.eps
    ga = float(exponent.g(np.array([a]))[0])
    if ga <= 0.0:
        raise DomainError("exponent must be positive at the band centre")
    gap1, gap2 = exponent.band_gaps(a, eps, n)
    sum_inf = n * ga
    high = sum_inf + gap1
    low = sum_inf + gap2
    recip = exponent.gap(a, 1.0 / ga)
    return LocalizationBounds(
        high_exit=high,
        low_exit=low,
        escape_infimum=min(high, low),
        sum_infimum=sum_inf,
        escape_gap=min(gap1, gap2),
        reciprocal_gap=recip,
        volume_correction=n * recip,
    )


def exit_profile(exponent: ExponentModel, ev: BandEvent, k: int) -> float:
    """Objective value with k steps at a+eps and n-k equal compensating steps.

    Increasing in k for convex exponents; k = 1 reproduces the high exit.
    """
    n, a, eps = ev.n, ev.a, ev.eps
    if not 1 <= k <= n - 1:
        raise DomainError("profile index k must lie in 1..n-1")
    compensated = a - k * eps / (n - k)
    if compensated <= 0.0:
        raise DomainError("compensated step must stay positive")
    g_hi = float(exponent.g(np.array([a + eps]))[0])
    g_lo = float(exponent.g(np.array([compensated]))[0])
    return k * g_hi + (n - k) * g_lo


# -- brute-force oracle ------------------------------------------------------

_BASE_AXIS = {2: 257, 3: 81, 4: 33, 5: 17, 6: 11, 7: 9, 8: 7}


def _min1d(fn, lo: float, hi: float, coarse: int = 65) -> tuple[float, float]:
    """Minimise a smooth scalar function on [lo, hi]: dense grid, golden
    polish around the best node, explicit endpoint checks."""
    if hi <= lo:
        return lo, float(fn(np.array([lo]))[0])
    xs = np.linspace(lo, hi, coarse)
    vals = np.asarray(fn(xs), dtype=float)
    i = int(np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, coarse - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = float(fn(np.array([c]))[0])
    fd = float(fn(np.array([d]))[0])
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = float(fn(np.array([c]))[0])
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = float(fn(np.array([d]))[0])
    x_best = 0.5 * (a + b)
    candidates = [x_best, lo, hi]
    cand_vals = np.asarray(fn(np.array(candidates)), dtype=float)
    j = int(np.argmin(cand_vals))
    return candidates[j], float(cand_vals[j])


def _coarse_candidates(w, ev: BandEvent, region: str, lo: float, hi: float,
                       axis_points: int, keep: int) -> list[np.ndarray]:
    """Grid the n-1 free coordinates, complete the last coordinate optimally
    over its feasible interval, and return the best few full points."""
    n, a, eps = ev.n, ev.a, ev.eps
    floor = n * a
    axis = np.linspace(lo, hi, axis_points)
    w_axis = np.asarray(w(axis), dtype=float)

    # Completion grid for the last coordinate, with running minima from the
    # right so "min over u >= threshold" is a table lookup.
    if region == "BcapC":
        u_hi = a - eps
        ugrid = np.linspace(lo, u_hi, 4097)
    else:
        u_hi = hi
        ugrid = np.linspace(lo, hi, 8193)
    w_u = np.asarray(w(ugrid), dtype=float)
    suffix_min = np.minimum.accumulate(w_u[::-1])[::-1]
    suffix_arg = np.zeros(ugrid.size, dtype=int)
    best = ugrid.size - 1
    for idx in range(ugrid.size - 1, -1, -1):
        if w_u[idx] <= w_u[best]:
            best = idx
        suffix_arg[idx] = best

    shape = (axis_points,) * (n - 1)
    sum_w = np.zeros(shape)
    sum_x = np.zeros(shape)
    for dim in range(n - 1):
        view = [1] * (n - 1)
        view[dim] = axis_points
        sum_w = sum_w + w_axis.reshape(view)
        sum_x = sum_x + axis.reshape(view)
    sum_w = sum_w.ravel()
    sum_x = sum_x.ravel()

    d_lo = floor - sum_x
    np.clip(d_lo, lo, None, out=d_lo)
    if region == "AcapC":
        np.clip(d_lo, a + eps, None, out=d_lo)
    feasible = d_lo <= u_hi
    if not np.any(feasible):
        return []
    d_lo = d_lo[feasible]
    sum_w = sum_w[feasible]
    sum_x = sum_x[feasible]

    idx = np.searchsorted(ugrid, d_lo, side="left")
    np.clip(idx, 0, ugrid.size - 1, out=idx)
    grid_min = suffix_min[idx]
    exact_lo = np.asarray(w(d_lo), dtype=float)
    completion = np.minimum(grid_min, exact_lo)
    total = sum_w + completion

    order = np.argsort(total, kind="stable")[: keep * 4]
    free_idx = np.array(np.unravel_index(np.flatnonzero(feasible)[order], shape)).T
    out = []
    seen = set()
    for row, flat in zip(free_idx, order):
        point = np.empty(ev.n)
        point[: ev.n - 1] = axis[row]
        if exact_lo[flat] <= grid_min[flat]:
            point[-1] = d_lo[flat]
        else:
            point[-1] = ugrid[suffix_arg[idx[flat]]]
        key = tuple(np.round(np.sort(point[: ev.n - 1]), 6)) + (round(float(point[-1]), 6),)
        if key in seen:
            continue
        seen.add(key)
        out.append(point)
        if len(out) >= keep:
            break
    return out


def _descend(w, ev: BandEvent, region: str, x0: np.ndarray, lo: float, hi: float,
             coarse: int) -> float:
    """Polish a feasible point with sum-preserving pair moves plus single
    coordinate moves.  Pair moves travel along the active sum constraint
    (where single-coordinate steps are blocked); single moves let the point
    leave the constraint when the unconstrained minimiser is interior."""
    n, a, eps = ev.n, ev.a, ev.eps
    floor = n * a
    lb = np.full(n, lo)
    ub = np.full(n, hi)
    if region == "AcapC":
        lb[-1] = a + eps
    elif region == "BcapC":
        ub[-1] = a - eps
    x = np.clip(x0, lb, ub)
    deficit = floor - x.sum()
    if deficit > 0.0:
        # Restore feasibility by topping up the most spacious coordinate.
        room = ub - x
        j = int(np.argmax(room))
        x[j] = min(ub[j], x[j] + deficit)
        if x.sum() < floor - 1e-9:
            return math.inf

    def value(vec: np.ndarray) -> float:
        return float(np.sum(w(vec)))

    f = value(x)
    for _ in range(200):
        f_start = f
        for i in range(n):
            for j in range(i + 1, n):
                t_lo = max(lb[i] - x[i], x[j] - ub[j])
                t_hi = min(ub[i] - x[i], x[j] - lb[j])
                if t_hi <= t_lo:
                    continue
                xi, xj = x[i], x[j]

                def pair_obj(t: Array) -> Array:
                    return w(xi + t) + w(xj - t)

                t_best, f_pair = _min1d(pair_obj, t_lo, t_hi, coarse)
                base = float(w(np.array([xi]))[0] + w(np.array([xj]))[0])
                if f_pair < base - 1e-15 * (1.0 + abs(base)):
                    x[i] = xi + t_best
                    x[j] = xj - t_best
                    f += f_pair - base
        for i in range(n):
            rest = x.sum() - x[i]
            u_lo = max(lb[i], floor - rest)
            u_hi = ub[i]
            if u_hi <= u_lo:
                continue
            xi = x[i]
            u_best, f_new = _min1d(lambda u: w(u), u_lo, u_hi, coarse)
            base = float(w(np.array([xi]))[0])
            if f_new < base - 1e-15 * (1.0 + abs(base)):
                x[i] = u_best
                f += f_new - base
        f = value(x)
        if f_start - f <= 1e-12 * (1.0 + abs(f)):
            break
    return f


def _search_region(model: PerturbedDensity, ev: BandEvent, region: str,
                   level: int) -> float:
    n, a, eps = ev.n, ev.a, ev.eps
    exponent = model.exponent

    def w(x):
        x = np.asarray(x, dtype=float)
        return exponent.g(x) + model.q(x)

    lo = min(1e-3, 0.5 * (a - eps)) if eps > 0.0 else min(1e-3, 0.5 * a)
    hi = a + n * eps + 5.0
    base = _BASE_AXIS[n]
    axis_points = (base - 1) * (2**level) + 1
    coarse_1d = 65 * (2 ** min(level, 2))
    keep = 6

    starts = _coarse_candidates(w, ev, region, lo, hi, axis_points, keep)
    if region == "C":
        starts.append(np.full(n, a))
    if not starts:
        raise DomainError(f"region {region} is empty for {ev}")
    best = math.inf
    for x0 in starts:
        best = min(best, _descend(w, ev, region, x0, lo, hi, coarse_1d))
    return best


def brute_force_infimum(model: PerturbedDensity, ev: BandEvent, region: str,
                        tol: float = 1e-5, max_refine: int = 8) -> float:
    """Directly search the constrained infimum of sum(g + q) over a region.

    Regions: "C" (sum >= n a), "AcapC" (C and some step >= a+eps), "BcapC"
    (C and some step <= a-eps), "IccC" (C and some step outside the open
    band; the min of the previous two).  By exchangeability the exit
    constraint is pinned to the last coordinate.

    The value is certified by re-running at halved grid spacing until two
    consecutive resolutions agree to ``tol`` relative; failure to stabilise
    within ``max_refine`` refinements raises NoConvergence.
    """
    if region not in REGIONS:
        raise DomainError(f"unknown region {region!r}")
    if ev.n > 8:
        raise DomainError("brute-force search is limited to n <= 8")
    _check_compensation(ev)
    if region == "IccC":
        va = brute_force_infimum(model, ev, "AcapC", tol, max_refine)
        vb = brute_force_infimum(model, ev, "BcapC", tol, max_refine)
        return min(va, vb)

    prev = _search_region(model, ev, region, 0)
    for level in range(1, max_refine + 1):
        cur = _search_region(model, ev, region, min(level, 3))
        if abs(cur - prev) <= tol * max(abs(cur), 1e-12):
            return min(cur, prev)
        prev = min(cur, prev)
    raise NoConvergence(f"region {region} value did not stabilise under refinement")


# -- convex minorant ---------------------------------------------------------


@dataclass
class PiecewiseMinorant:
    """Convex minorant h of g - M: tangent line up to the knot, then
    g - N log g.

    Thresholds: convex_from is where g - N log g turns increasing and
    convex, envelope_from caps M by N log g(envelope_from) on everything
    below it, and knot is where the tangent is taken (slope strictly more
    than twice the slope at envelope_from, g > 2N).
    """

    exponent: ExponentModel
    N: float
    convex_from: float
    envelope_from: float
    knot: float
    knot_value: float
    knot_slope: float

    def log_adjusted(self, x: Array) -> Array:
        """g(x) - N log g(x)."""
        x = np.asarray(x, dtype=float)
        return self.exponent.g(x) - self.N * self.exponent.log_g(x)

    def tangent(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return self.knot_value + self.knot_slope * (x - self.knot)

    def value(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return np.where(x < self.knot, self.tangent(x), self.log_adjusted(x))

    __call__ = value


def convex_minorant(
    exponent: ExponentModel,
    perturbation: Perturbation | None = None,
    N: float | None = None,
    search_hi: float = 1e6,
    grid_points: int = 200_001,
) -> PiecewiseMinorant:
    """Construct the glued minorant for an envelope (M, N, y0).

    With ``perturbation=None`` the envelope is M = 0 and ``N`` acts as a
    surrogate scale (useful to confirm h hugs g when nothing is perturbed).
    The construction is validated numerically: h must stay below g - M on a
    probe grid, otherwise the envelope threshold is advanced and the glue
    retried.
    """
    if perturbation is not None:
        M = perturbation.M
        N = perturbation.N
        y0 = perturbation.y0
    else:
        if N is None:
            raise DomainError("a surrogate N is required when no perturbation is given")

        def M(x: Array) -> Array:
            return np.zeros_like(np.asarray(x, dtype=float))

        y0 = _solve_log_g_level(exponent, 0.0)

    X = exponent.increase_threshold
    lo = max(1e-6, X * 1e-2, X / 10.0) if X > 0 else 1e-6
    grid = np.geomspace(lo, search_hi, grid_points)
    with np.errstate(over="ignore", invalid="ignore"):
        g = exponent.g(grid)
        dg = exponent.dg(grid)
        log_g = exponent.log_g(grid)
        r_prime = dg * (1.0 - N / g)

    ok1 = (g > N) & (dg > 0.0) & (r_prime > 0.0)
    idx1 = np.flatnonzero(ok1)
    if idx1.size == 0:
        raise ThresholdNotFound("no point where g - N log g turns convex increasing")
    i1 = int(idx1[0])

    Mv = np.asarray(M(grid), dtype=float)
    prefix_max = np.maximum.accumulate(Mv)

    start2 = max(i1, int(np.searchsorted(grid, y0)))
    i2 = None
    for trial in range(64):
        cand = None
        for i in range(start2, grid.size):
            if prefix_max[i] <= N * log_g[i] + 1e-12:
                cand = i
                break
        if cand is None:
            raise ThresholdNotFound("no envelope threshold found in the search range")
        i2 = cand
        slope2 = float(dg[i2])
        ok3 = (dg > 2.0 * slope2) & (g > 2.0 * N)
        idx3 = np.flatnonzero(ok3[i2 + 1 :])
        if idx3.size == 0:
            raise ThresholdNotFound("no knot with doubled slope in the search range")
        i3 = i2 + 1 + int(idx3[0])

        y3 = float(grid[i3])
        knot_value = float(g[i3] - N * log_g[i3])
        knot_slope = float(dg[i3] * (1.0 - N / g[i3]))
        minorant = PiecewiseMinorant(
            exponent=exponent,
            N=N,
            convex_from=float(grid[i1]),
            envelope_from=float(grid[i2]),
            knot=y3,
            knot_value=knot_value,
            knot_slope=knot_slope,
        )
        probe = np.geomspace(lo, min(search_hi, 3.0 * y3), 10_001)
        gap = exponent.g(probe) - np.asarray(M(probe), dtype=float) - minorant.value(probe)
        scale = np.maximum(1.0, np.abs(exponent.g(probe)))
        if np.all(gap >= -1e-9 * scale):
            return minorant
        start2 = i2 + max(1, grid.size // 1000)
    raise EnvelopeViolated("could not certify h <= g - M within the search range")


# -- certified probability bounds -------------------------------------------


def escape_rate_sandwich(model: PerturbedDensity, ev: BandEvent) -> tuple[float, float]:
    """Bracket the perturbed escape rate by the unperturbed closed form:

        I_pure - n N log g(a+eps)  <=  I_{g+q}  <=  n (N+1) g(a + eps/(n-1))

    For a pure model both ends collapse onto the closed form.
    """
    bounds = closed_form_bounds(model.exponent, ev)
    if model.is_pure:
        return bounds.escape_infimum, bounds.escape_infimum
    n, a, eps = ev.n, ev.a, ev.eps
    N = model.perturbation.N
    log_g_hi = float(model.exponent.log_g(np.array([a + eps]))[0])
    lo = bounds.escape_infimum - n * N * log_g_hi
    hi = n * (N + 1.0) * float(model.exponent.g(np.array([a + eps / (n - 1)]))[0])
    return lo, hi


def log_prob_exceed_lower(model: PerturbedDensity, ev: BandEvent) -> float:
    """Certified lower bound on log P(S_n >= n a).

    Pure models pay the pure-convex volume correction n (g(a + 1/g(a)) -
    g(a)); perturbed models replace the rate n g(a) by n h(a) from the
    convex minorant and add the envelope inflation n N (log g(a) +
    log g(a + 1/g(a))).  Requires a beyond the increase threshold, and
    beyond the minorant knot in the perturbed case.
    """
    exponent = model.exponent
    n, a = ev.n, ev.a
    ga = float(exponent.g(np.array([a]))[0])
    if ga <= 0.0:
        raise DomainError("exponent must be positive at the sum level")
    log_ga = float(exponent.log_g(np.array([a]))[0])
    recip = exponent.gap(a, 1.0 / ga)
    if model.is_pure:
        if a <= exponent.increase_threshold:
            raise DomainError("sum level must exceed the increase threshold")
        rate = n * ga
        correction = n * recip
    else:
        minorant = convex_minorant(exponent, model.perturbation)
        if a <= max(exponent.increase_threshold, minorant.knot):
            raise DomainError(
                "perturbed lower bound needs the sum level beyond the minorant knot"
            )
        N = model.perturbation.N
        log_g_shifted = log_ga + math.log1p(recip / ga)
        rate = n * float(minorant.value(np.array([a]))[0])
        correction = n * recip + n * N * log_ga + n * N * log_g_shifted
    return n * model.log_c - rate - correction - n * log_ga


def log_prob_escape_upper(model: PerturbedDensity, ev: BandEvent) -> float:
    """Certified upper bound on log P(some step leaves the band, S_n >= n a).

    Uses exp(-I + n log I) evaluated at the certified lower end of the
    escape-rate sandwich; that map is decreasing in I beyond I = n, which
    the precondition enforces, so the substitution preserves the bound.
    Perturbed models pay an extra n log 2.
    """
    n = ev.n
    i_lo, _ = escape_rate_sandwich(model, ev)
    if not i_lo > max(float(n), 1.0):
        raise DomainError("escape rate too small for the tail bound (needs I > n)")
    extra = 0.0 if model.is_pure else n * math.log(2.0)
    return n * model.log_c - i_lo + n * math.log(i_lo) + math.log(n + 1.0) + extra
