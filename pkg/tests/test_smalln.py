"""Exact two- and three-step probabilities against independent references.

Frozen values come from 50-digit arithmetic reductions to one-dimensional
integrals with closed-form survival inside; the pure-exponential cases use
the gamma-sum closed form evaluated inline.
"""

import math

import pytest

from stretchwalk.density import (
    PowerExponent,
    WeibullExponent,
    pure_density,
    sin_perturbed_density,
)
from stretchwalk.errors import DomainError
from stretchwalk.smalln import (
    exact_localization,
    exact_log_prob_band,
    exact_log_prob_escape,
    exact_log_prob_exceed,
)


def test_power2_two_steps_frozen():
    model = pure_density(PowerExponent(2.0))
    got = exact_log_prob_exceed(model, 2, 3.0)
    assert got == pytest.approx(-19.350474589141342, abs=5e-7)


def test_weibull_two_steps_frozen():
    model = pure_density(WeibullExponent(3.0))
    got = exact_log_prob_exceed(model, 2, 2.0)
    assert got == pytest.approx(-14.174818945145753, abs=5e-7)


def test_weibull_two_step_band_frozen():
    model = pure_density(WeibullExponent(3.0))
    got = exact_log_prob_band(model, 2, 2.0, 0.4)
    assert got == pytest.approx(-14.253901761628991, abs=5e-7)
    loc = exact_localization(model, 2, 2.0, 0.4)
    assert loc == pytest.approx(0.92396340187688121, rel=1e-6)


def test_weibull_three_steps_frozen():
    model = pure_density(WeibullExponent(3.0))
    got = exact_log_prob_exceed(model, 3, 1.6)
    assert got == pytest.approx(-9.1797924714977, abs=2e-6)
    band = exact_log_prob_band(model, 3, 1.6, 0.35)
    assert band == pytest.approx(-9.66778712942558, abs=2e-6)
    loc = exact_localization(model, 3, 1.6, 0.35)
    assert loc == pytest.approx(0.613856152297897, rel=1e-5)


def test_perturbed_two_steps_frozen():
    model = sin_perturbed_density(PowerExponent(2.0))
    got = exact_log_prob_exceed(model, 2, 2.5)
    assert got == pytest.approx(-14.0566958637202, abs=5e-6)


def test_pure_exponential_matches_gamma_sums():
    # beta = 1 steps are Exp(1), so S_n is Gamma(n, 1) and the tail is the
    # truncated exponential series evaluated exactly.
    model = pure_density(PowerExponent(1.0))
    for n, a in ((2, 3.0), (3, 2.0), (2, 0.4), (3, 4.0)):
        s = n * a
        tail = sum(s**j / math.factorial(j) for j in range(n))
        want = -s + math.log(tail)
        got = exact_log_prob_exceed(model, n, a)
        assert got == pytest.approx(want, abs=5e-6)


def test_band_plus_escape_reassembles_exceed():
    model = pure_density(WeibullExponent(3.0))
    n, a, eps = 3, 1.6, 0.35
    total = math.exp(exact_log_prob_band(model, n, a, eps)) + math.exp(
        exact_log_prob_escape(model, n, a, eps)
    )
    assert total == pytest.approx(math.exp(exact_log_prob_exceed(model, n, a)), rel=1e-9)


def test_localization_monotone_in_band_width():
    model = pure_density(WeibullExponent(3.0))
    values = [exact_localization(model, 2, 2.0, eps) for eps in (0.2, 0.3, 0.4)]
    assert values[0] < values[1] < values[2]


def test_localization_bounded_by_one():
    model = pure_density(PowerExponent(2.0))
    assert 0.0 < exact_localization(model, 2, 2.5, 0.6) <= 1.0


def test_rejects_large_n():
    model = pure_density(PowerExponent(2.0))
    with pytest.raises(DomainError):
        exact_log_prob_exceed(model, 5, 2.0)


def test_band_requires_positive_width():
    model = pure_density(PowerExponent(2.0))
    with pytest.raises(DomainError):
        exact_log_prob_band(model, 2, 2.0, 0.0)
    with pytest.raises(DomainError):
        exact_log_prob_band(model, 2, 0.3, 0.5)


def test_deep_level_returns_minus_inf():
    model = pure_density(PowerExponent(2.0))
    assert exact_log_prob_exceed(model, 2, model.support_cap * 2.0) == -math.inf
