"""Conditional sampling and rare-event estimation for band events.

Two complementary machines: exponential-tilt importance sampling for
probabilities under the exceedance conditioning (sum at least n a), and a
fixed-sum Gibbs sampler for the exact conditional law given the sum.  All
weight arithmetic stays in log space; unconditional probabilities far
below double-underflow are still reported through their logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .density import PerturbedDensity
from .errors import DegenerateWeights, DomainError, NoConvergence
from .quadrature import GridInverseCdf, mass_window
from .ratefn import cramer_rate, log_mgf, model_mean

METHODS = ("TiltedIS", "FixedSumGibbs", "Rejection")


@dataclass(frozen=True)
class SumAtLeast:
    total: float


@dataclass(frozen=True)
class SumEquals:
    total: float

    rel_tol = 1e-9


@dataclass(frozen=True, eq=False)
class ConditionedSample:
    """One conditioned n-vector with its importance log-weight.

    Exact-conditional methods carry log_weight 0.
    """

    values: np.ndarray
    log_weight: float
    method: str
    constraint: SumAtLeast | SumEquals

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        if np.any(self.values <= 0.0):
            raise DomainError("sample coordinates must be positive")
        total = float(self.values.sum())
        if isinstance(self.constraint, SumAtLeast):
            if total < self.constraint.total:
                raise DomainError("sum fell below the exceedance constraint")
        else:
            if abs(total - self.constraint.total) > SumEquals.rel_tol * self.constraint.total:
                raise DomainError("sum drifted from the fixed-sum constraint")


@dataclass(frozen=True)
class LocalizationEstimate:
    p_hat: float
    std_err: float
    n_eff: float
    replications: int

    def __post_init__(self):
        lo = self.p_hat - 3.0 * self.std_err
        hi = self.p_hat + 3.0 * self.std_err
        if not (-0.05 <= lo and hi <= 1.05):
            raise NoConvergence(
                f"estimate {self.p_hat:.4g} +- {self.std_err:.4g} fails the sanity band"
            )
        if self.n_eff > self.replications * (1.0 + 1e-12):
            raise NoConvergence("effective sample size exceeds the replication count")


@dataclass(frozen=True)
class ImportanceResult:
    """Raw tilted-IS output: exceedance and band-cap probabilities plus the
    conditional estimate.  Probabilities deeper than double underflow stay
    available through the log fields."""

    log_p_c: float
    p_c: float
    p_c_std_err: float
    log_p_band_and_c: float
    p_band_and_c: float
    p_band_and_c_std_err: float
    conditional: LocalizationEstimate
    tilt: float
    log_mgf_at_tilt: float
    trials: int


def tilt_for_mean(model: PerturbedDensity, a: float) -> float:
    """Tilt t with tilted mean a; zero at the model mean."""
    if a < model_mean(model):
        raise DomainError("tilt target must not sit below the mean")
    _, tilt = cramer_rate(model, a)
    return tilt


def tilted_table(model: PerturbedDensity, t: float,
                 points: int = 4097) -> GridInverseCdf:
    """Inverse-CDF table of the tilted density; t=0 gives the plain law."""

    def ell(xs: np.ndarray) -> np.ndarray:
        return t * xs + model.log_c + model._log_kernel(xs)

    lo, hi, _ = mass_window(ell, 0.0, 8.0)
    return GridInverseCdf.build(ell, lo, hi, points=points)


def importance_estimate(model: PerturbedDensity, n: int, a: float, eps: float,
                        trials: int, seed: int) -> ImportanceResult:
    """Tilted-IS estimates of P(C), P(I and C), and P(I | C).

    Draws i.i.d. n-vectors from the law tilted to mean a (plain law when a
    sits below the mean, in which case every weight is exactly one), with
    weights exp(n Lambda(t) - t S).  Band membership uses strict
    inequalities.  Deterministic for a given seed.
    """
    if trials < 1000:
        raise DomainError("importance sampling needs at least 1000 trials")
    if n < 1 or a <= 0.0 or eps < 0.0:
        raise DomainError("need n >= 1, a > 0, eps >= 0")
    t = tilt_for_mean(model, a) if a > model_mean(model) else 0.0
    lam = log_mgf(model, t)
    table = tilted_table(model, t)
    rng = np.random.default_rng(seed)
    draws = table.ppf(rng.random((trials, n)))
    sums = draws.sum(axis=1)
    log_w = n * lam - t * sums

    in_c = sums > n * a
    in_band = ((draws > a - eps) & (draws < a + eps)).all(axis=1) & in_c

    if not np.any(in_c):
        raise DegenerateWeights("no draw satisfied the exceedance event")
    log_trials = math.log(trials)
    log_m1_c = float(logsumexp(log_w[in_c])) - log_trials
    log_m1_band = (float(logsumexp(log_w[in_band])) - log_trials
                   if np.any(in_band) else -math.inf)

    # Shift by the exceedance mean so the per-draw weight terms are O(1).
    shifted = np.exp(log_w - log_m1_c)
    c_terms = np.where(in_c, shifted, 0.0)
    band_terms = np.where(in_band, shifted, 0.0)

    n_eff = float(c_terms.sum() ** 2 / (c_terms**2).sum())
    if n_eff < 30.0:
        raise DegenerateWeights(
            f"effective sample size {n_eff:.1f} below 30; widen the budget"
        )

    p_c = math.exp(log_m1_c)
    p_c_se = p_c * float(np.sqrt(np.mean((c_terms - 1.0) ** 2) / trials))
    ratio = math.exp(log_m1_band - log_m1_c)
    p_band = math.exp(log_m1_band)
    band_mean = float(np.mean(band_terms))
    p_band_se = p_c * float(np.sqrt(np.mean((band_terms - band_mean) ** 2) / trials))
    # Delta-method error for the ratio estimator sum(b) / sum(c).
    ratio_se = float(np.sqrt(np.mean((band_terms - ratio * c_terms) ** 2) / trials))

    conditional = LocalizationEstimate(
        p_hat=ratio,
        std_err=min(ratio_se, 1.0),
        n_eff=min(n_eff, float(trials)),
        replications=trials,
    )
    return ImportanceResult(
        log_p_c=log_m1_c,
        p_c=p_c,
        p_c_std_err=p_c_se,
        log_p_band_and_c=log_m1_band,
        p_band_and_c=p_band,
        p_band_and_c_std_err=p_band_se,
        conditional=conditional,
        tilt=t,
        log_mgf_at_tilt=lam,
        trials=trials,
    )


def pair_conditional_table(model: PerturbedDensity, s: float,
                           points: int = 512) -> GridInverseCdf:
    """Inverse-CDF table for the one-dimensional conditional density
    proportional to p(u) p(s-u) on (0, s)."""

    def ell(us: np.ndarray) -> np.ndarray:
        return model._log_kernel(us) + model._log_kernel(s - us)

    return GridInverseCdf.build(ell, 0.0, s, points=points)


def gibbs_fixed_sum(model: PerturbedDensity, n: int, s_total: float,
                    sweeps: int, seed: int,
                    burn_in: int = 100) -> list[ConditionedSample]:
    """Fixed-sum Gibbs chain started at the all-equal point.

    Each sweep resamples n random pairs: the pair sum s is redistributed
    by drawing one coordinate from the conditional p(u) p(s-u) on (0, s).
    The total is invariant by construction; states are recorded once per
    post-burn-in sweep.
    """
    if n < 2:
        raise DomainError("fixed-sum Gibbs needs n >= 2")
    if s_total <= 0.0:
        raise DomainError("total must be positive")
    if sweeps < 1:
        raise DomainError("need at least one recorded sweep")
    rng = np.random.default_rng(seed)
    x = np.full(n, s_total / n)
    constraint = SumEquals(s_total)
    out: list[ConditionedSample] = []
    for sweep in range(burn_in + sweeps):
        for _ in range(n):
            i, j = rng.choice(n, size=2, replace=False)
            s = x[i] + x[j]
            u = float(pair_conditional_table(model, s).ppf(rng.random()))
            u = min(max(u, 1e-300), s - 1e-300)
            x[i] = u
            x[j] = s - u
        if sweep >= burn_in:
            out.append(ConditionedSample(
                values=x.copy(),
                log_weight=0.0,
                method="FixedSumGibbs",
                constraint=constraint,
            ))
    return out


def _batch_means_std_err(indicators: np.ndarray) -> tuple[float, float]:
    """(std_err, n_eff) for a correlated 0/1 sequence via batch means."""
    m = indicators.size
    batches = max(int(math.isqrt(m)), 2)
    size = m // batches
    used = batches * size
    means = indicators[:used].reshape(batches, size).mean(axis=1)
    se = float(means.std(ddof=1)) / math.sqrt(batches)
    p = float(indicators.mean())
    if se == 0.0:
        return 0.0, float(m)
    n_eff = min(p * (1.0 - p) / se**2 if 0.0 < p < 1.0 else float(m), float(m))
    return se, max(n_eff, 1.0)


def estimate_localization(model: PerturbedDensity, n: int, a: float, eps: float,
                          method: str, budget: int, seed: int) -> LocalizationEstimate:
    """P(all coordinates strictly inside (a-eps, a+eps) | conditioning).

    TiltedIS conditions on the sum exceeding n a; FixedSumGibbs conditions
    on the sum equal to n a (the boundary case) with batch-means errors.
    """
    if method == "TiltedIS":
        return importance_estimate(model, n, a, eps, budget, seed).conditional
    if method == "FixedSumGibbs":
        states = gibbs_fixed_sum(model, n, n * a, sweeps=budget, seed=seed)
        lo, hi = a - eps, a + eps
        flags = np.array(
            [float(np.all((s.values > lo) & (s.values < hi))) for s in states]
        )
        se, n_eff = _batch_means_std_err(flags)
        return LocalizationEstimate(
            p_hat=float(flags.mean()),
            std_err=se,
            n_eff=n_eff,
            replications=flags.size,
        )
    raise DomainError(f"unknown method {method!r}; choices: TiltedIS, FixedSumGibbs")
