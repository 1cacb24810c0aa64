"""Oracle tests for the Kumaraswamy / stretched / rectified distributions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hardkuma import autodiff as ad
from hardkuma import distribution as dist
from hardkuma.distribution import (DomainError, HardKumaSample, KumaParams,
                                   StretchBounds)

FIG_BOUNDS = StretchBounds(-0.1, 1.1)
SHAPE_GRID = [0.3, 0.5, 1.0, 2.0, 5.0]

# Frozen from independent closed-form evaluation; the coarse ~1e-5-rounded
# versions of the two masses are asserted separately below.
P0_HALF_HALF = 0.15659922610588795
P1_HALF_HALF = 0.20633199520108822


def test_pdf_uniform_special_case():
    assert dist.kuma_pdf(0.5, KumaParams(1, 1)) == pytest.approx(1.0)


def test_pdf_closed_form_value():
    # a b k^(a-1) (1-k^a)^(b-1) at k=0.25, a=b=2 evaluated independently
    expected = 2 * 2 * 0.25 * (1 - 0.25 ** 2) ** 1
    assert expected == pytest.approx(0.9375)
    assert dist.kuma_pdf(0.25, KumaParams(2, 2)) == pytest.approx(expected,
                                                                  rel=1e-12)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_pdf_integrates_to_one(a, b):
    params = KumaParams(a, b)
    mass = oracles.graded_unit_mass(lambda k: dist.kuma_pdf(k, params))
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_pdf_domain_errors():
    with pytest.raises(DomainError):
        dist.kuma_pdf(0.0, KumaParams(1, 1))
    with pytest.raises(DomainError):
        dist.kuma_pdf(1.0, KumaParams(1, 1))


def test_cdf_boundaries_and_value():
    params = KumaParams(2, 2)
    assert dist.kuma_cdf(0.0, params) == 0.0
    assert dist.kuma_cdf(1.0, params) == 1.0
    assert dist.kuma_cdf(0.5, params) == pytest.approx(1 - 0.75 ** 2, rel=1e-12)
    with pytest.raises(DomainError):
        dist.kuma_cdf(-0.01, params)


def test_icdf_uniform_case_and_closed_form():
    assert dist.kuma_icdf(0.5, KumaParams(1, 1)) == pytest.approx(0.5)
    # (1 - (1-0.19)^2)^2 = (1 - 0.6561)^2 = 0.3439^2
    assert dist.kuma_icdf(0.19, KumaParams(0.5, 0.5)) == pytest.approx(
        0.3439 ** 2, rel=1e-10)
    with pytest.raises(DomainError):
        dist.kuma_icdf(0.0, KumaParams(1, 1))
    with pytest.raises(DomainError):
        dist.kuma_icdf(1.0, KumaParams(1, 1))


def test_cdf_icdf_roundtrip_grid():
    u = np.linspace(0.001, 0.999, 999)
    for a in SHAPE_GRID:
        for b in SHAPE_GRID:
            params = KumaParams(a, b)
            back = dist.kuma_cdf(dist.kuma_icdf(u, params), params)
            assert np.max(np.abs(back - u)) < 1e-9, (a, b)


def test_cdf_strictly_increasing_on_grid():
    # strictly increasing wherever float64 has not saturated the tail to 1.0
    k = np.linspace(0.0, 1.0, 1000)
    for a in SHAPE_GRID:
        for b in SHAPE_GRID:
            values = dist.kuma_cdf(k, KumaParams(a, b))
            assert np.all(np.diff(values) >= 0.0), (a, b)
            live = values < 1.0 - 1e-12
            assert np.all(np.diff(values[live]) > 0.0), (a, b)


def test_icdf_sampling_matches_cdf_kolmogorov_smirnov():
    rng = np.random.default_rng(123)
    u = rng.random(10 ** 6) * (1 - 2e-12) + 1e-12
    params = KumaParams(0.5, 2.0)
    samples = np.sort(dist.kuma_icdf(u, params))
    ecdf = np.arange(1, samples.size + 1) / samples.size
    ks = np.max(np.abs(dist.kuma_cdf(samples, params) - ecdf))
    assert ks < 0.002


def test_stretched_cdf_boundaries_and_figure_value():
    params = KumaParams(0.5, 0.5)
    assert dist.stretched_cdf(FIG_BOUNDS.l, params, FIG_BOUNDS) == 0.0
    assert dist.stretched_cdf(FIG_BOUNDS.r, params, FIG_BOUNDS) == 1.0
    mid = dist.stretched_cdf(0.0, params, FIG_BOUNDS)
    assert mid == pytest.approx(dist.kuma_cdf(0.1 / 1.2, params), rel=1e-12)
    assert mid == pytest.approx(P0_HALF_HALF, rel=1e-12)
    with pytest.raises(DomainError):
        dist.stretched_cdf(FIG_BOUNDS.r + 0.01, params, FIG_BOUNDS)


def test_point_masses_closed_form():
    params = KumaParams(0.5, 0.5)
    p0 = dist.prob_zero(params, FIG_BOUNDS)
    p1 = dist.prob_one(params, FIG_BOUNDS)
    assert p0 == pytest.approx(P0_HALF_HALF, rel=1e-12)
    assert p1 == pytest.approx(P1_HALF_HALF, rel=1e-12)
    # the spec-sheet approximations are good to ~5e-6
    assert p0 == pytest.approx(0.156603, abs=1e-5)
    assert p1 == pytest.approx(0.206333, abs=1e-5)


def test_point_masses_degenerate_limits():
    params = KumaParams(0.7, 1.3)
    assert dist.prob_zero(params, StretchBounds(-1e-12, 1.1)) < 1e-8
    assert dist.prob_one(params, StretchBounds(-0.1, 1.0 + 1e-12)) < 1e-8


def test_prob_one_increases_as_b_decreases():
    for a in [0.5, 1.0, 2.0]:
        values = [dist.prob_one(KumaParams(a, b), FIG_BOUNDS)
                  for b in [5.0, 2.0, 1.0, 0.5, 0.3]]
        assert np.all(np.diff(values) > 0.0)


@pytest.mark.parametrize("a", SHAPE_GRID)
@pytest.mark.parametrize("b", SHAPE_GRID)
def test_mass_partition(a, b):
    params = KumaParams(a, b)
    p0 = dist.prob_zero(params, FIG_BOUNDS)
    p1 = dist.prob_one(params, FIG_BOUNDS)
    pc = dist.prob_continuous(params, FIG_BOUNDS)
    assert p0 + p1 + pc == pytest.approx(1.0, abs=1e-12)
    interior = oracles.gauss_mass(
        lambda t: dist.stretched_pdf(t, params, FIG_BOUNDS), 0.0, 1.0,
        panels=200, order=40)
    assert p0 + p1 + interior == pytest.approx(1.0, abs=1e-6)


def test_log_density_points_and_total_mass():
    params = KumaParams(0.5, 0.5)
    assert dist.hardkuma_log_density(0.0, params, FIG_BOUNDS) == pytest.approx(
        math.log(P0_HALF_HALF), rel=1e-12)
    assert dist.hardkuma_log_density(1.0, params, FIG_BOUNDS) == pytest.approx(
        math.log(P1_HALF_HALF), rel=1e-12)
    interior = oracles.gauss_mass(
        lambda h: np.exp(dist.hardkuma_log_density(h, params, FIG_BOUNDS)),
        0.0, 1.0, panels=200, order=40)
    total = (interior + dist.prob_zero(params, FIG_BOUNDS)
             + dist.prob_one(params, FIG_BOUNDS))
    assert total == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        dist.hardkuma_log_density(1.5, params, FIG_BOUNDS)


def test_log_density_near_uniform_limit():
    params = KumaParams(1.0, 1.0)
    bounds = StretchBounds(-1e-6, 1.0 + 1e-6)
    h = np.linspace(0.05, 0.95, 19)
    values = dist.hardkuma_log_density(h, params, bounds)
    assert np.max(np.abs(values)) < 1e-5


def test_sample_rectification_exact_zero():
    params = KumaParams(0.5, 0.5)
    # u below the zero-mass quantile lands in t < 0 and clamps to exact 0.0
    u = 0.5 * dist.prob_zero(params, FIG_BOUNDS)
    smp = dist.sample(u, params, FIG_BOUNDS)
    assert smp.t < 0.0
    assert smp.h == 0.0


def test_sample_chain_closed_forms():
    params = KumaParams(1.0, 1.0)
    u = dist.kuma_cdf(0.5, params)
    smp = dist.sample(u, params, FIG_BOUNDS)
    assert smp.k == pytest.approx(0.5, rel=1e-12)
    assert smp.t == pytest.approx(-0.1 + 1.2 * 0.5, rel=1e-12)
    assert smp.h == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (2.0, 1.0), (0.3, 5.0)])
def test_monte_carlo_masses_and_mean(a, b):
    params = KumaParams(a, b)
    n = 10 ** 6
    rng = np.random.default_rng([17, int(a * 10), int(b * 10)])
    u = rng.random(n) * (1 - 2e-12) + 1e-12
    smp = dist.sample(u, params, FIG_BOUNDS)
    p0, p1 = dist.prob_zero(params, FIG_BOUNDS), dist.prob_one(params, FIG_BOUNDS)
    assert abs(np.mean(smp.h == 0.0) - p0) < 3 * oracles.binomial_se(p0, n)
    assert abs(np.mean(smp.h == 1.0) - p1) < 3 * oracles.binomial_se(p1, n)
    # E[h] = p1 + integral of h over the continuous interior
    interior = oracles.gauss_mass(
        lambda t: t * dist.stretched_pdf(t, params, FIG_BOUNDS), 0.0, 1.0,
        panels=200, order=40)
    assert abs(np.mean(smp.h) - (p1 + interior)) < 3 * oracles.mean_se(smp.h)


def test_sample_path_gradients_match_finite_differences():
    bounds = FIG_BOUNDS
    rng = np.random.default_rng(5)
    a0 = rng.uniform(0.5, 2.0, (3, 4))
    b0 = rng.uniform(0.5, 2.0, (3, 4))

    def stretch_values(u_arr):
        params = KumaParams(a0, b0)
        return np.asarray(dist.sample(u_arr, params, bounds).t)

    # resample draws landing within 2e-3 of a rectifier kink; the 1e-5 FD
    # perturbations of (a, b) then cannot cross one
    u = rng.random((3, 4)) * 0.9 + 0.05
    for _ in range(100):
        t = stretch_values(u)
        bad = (np.abs(t) < 2e-3) | (np.abs(t - 1.0) < 2e-3)
        if not np.any(bad):
            break
        u[bad] = rng.random(int(np.sum(bad))) * 0.9 + 0.05
    else:
        pytest.fail("could not find kink-free draws")

    def mean_gate(a_arr, b_arr):
        graph = ad.Graph()
        a = graph.parameter("a", a_arr)
        b = graph.parameter("b", b_arr)
        return float(ad.mean(dist.sample_node(u, a, b, bounds).h).data)

    graph = ad.Graph()
    a = graph.parameter("a", a0)
    b = graph.parameter("b", b0)
    loss = ad.mean(dist.sample_node(u, a, b, bounds).h)
    grads = ad.backward(graph, loss)
    fd_a = oracles.central_difference(lambda x: mean_gate(x, b0), a0)
    fd_b = oracles.central_difference(lambda x: mean_gate(a0, x), b0)
    oracles.assert_close_grads(grads["a"], fd_a, 1e-4, "sample-path a")
    oracles.assert_close_grads(grads["b"], fd_b, 1e-4, "sample-path b")


def test_prob_zero_node_matches_plain_and_gradients():
    rng = np.random.default_rng(9)
    a0 = rng.uniform(0.4, 3.0, (2, 3))
    b0 = rng.uniform(0.4, 3.0, (2, 3))
    graph = ad.Graph()
    a = graph.parameter("a", a0)
    b = graph.parameter("b", b0)
    p0 = dist.prob_zero_node(a, b, FIG_BOUNDS)
    p1 = dist.prob_one_node(a, b, FIG_BOUNDS)
    assert np.allclose(p0.data, dist.prob_zero(KumaParams(a0, b0), FIG_BOUNDS),
                       rtol=1e-10)
    assert np.allclose(p1.data, dist.prob_one(KumaParams(a0, b0), FIG_BOUNDS),
                       rtol=1e-10)
    loss = ad.mean(p0) + ad.mean(p1)
    grads = ad.backward(graph, loss)

    def value(a_arr, b_arr):
        return float(np.mean(dist.prob_zero(KumaParams(a_arr, b_arr), FIG_BOUNDS))
                     + np.mean(dist.prob_one(KumaParams(a_arr, b_arr), FIG_BOUNDS)))

    fd_a = oracles.central_difference(lambda x: value(x, b0), a0)
    fd_b = oracles.central_difference(lambda x: value(a0, x), b0)
    oracles.assert_close_grads(grads["a"], fd_a, 1e-4, "prob-node a")
    oracles.assert_close_grads(grads["b"], fd_b, 1e-4, "prob-node b")


def test_lgamma_against_stdlib():
    xs = np.linspace(0.5, 20.0, 391)
    ours = dist.lgamma(xs)
    ref = np.array([math.lgamma(x) for x in xs])
    assert np.max(np.abs(ours - ref)) < 1e-10
    # recurrence branch below 0.5
    for x in (0.05, 0.2, 0.49):
        assert dist.lgamma(x) == pytest.approx(math.lgamma(x), abs=1e-10)
    with pytest.raises(DomainError):
        dist.lgamma(0.0)


def test_kuma_mean_analytic_cases():
    assert dist.kuma_mean(KumaParams(1, 1)) == pytest.approx(0.5, rel=1e-10)
    # E[K] for Kuma(2, 1): density 2k on (0,1) integrates k*2k dk = 2/3
    assert dist.kuma_mean(KumaParams(2, 1)) == pytest.approx(2.0 / 3.0,
                                                             rel=1e-10)


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (2.0, 3.0), (5.0, 0.3)])
def test_kuma_mean_monte_carlo(a, b):
    params = KumaParams(a, b)
    n = 10 ** 6
    rng = np.random.default_rng([23, int(a * 10), int(b * 10)])
    k = dist.kuma_icdf(rng.random(n) * (1 - 2e-12) + 1e-12, params)
    assert abs(np.mean(k) - dist.kuma_mean(params)) < 3 * oracles.mean_se(k)


def test_deterministic_gate_dominant_zero_mass():
    # b large, a small: nearly all mass collapses to the zero atom
    params = KumaParams(0.3, 20.0)
    assert dist.prob_zero(params, FIG_BOUNDS) > 0.7
    assert dist.deterministic_gate(params, FIG_BOUNDS) == 0.0


def test_deterministic_gate_continuous_branch():
    params = KumaParams(0.5, 0.5)
    p0, p1 = P0_HALF_HALF, P1_HALF_HALF
    assert 1.0 - p0 - p1 > max(p0, p1)  # continuous branch dominates
    expected = np.clip(-0.1 + 1.2 * dist.kuma_mean(params), 0.0, 1.0)
    gate = dist.deterministic_gate(params, FIG_BOUNDS)
    assert gate == pytest.approx(float(expected), rel=1e-12)
    raw = dist.deterministic_gate(params, FIG_BOUNDS, raw_mean=True)
    assert raw == pytest.approx(float(dist.kuma_mean(params)), rel=1e-12)


def test_deterministic_gate_tie_order():
    # uniform base, stretch (-2, 3): p0 and p1 are the identical float 0.4
    # and both beat the continuous mass 0.2, so the fixed order picks 0
    params = KumaParams(1.0, 1.0)
    wide = StretchBounds(-2.0, 3.0)
    p0 = dist.prob_zero(params, wide)
    p1 = dist.prob_one(params, wide)
    assert p0 == p1  # bit-exact tie by construction
    assert p0 > 1.0 - p0 - p1
    assert dist.deterministic_gate(params, wide) == 0.0


def test_param_validation():
    with pytest.raises(DomainError):
        KumaParams(0.0, 1.0)
    with pytest.raises(DomainError):
        KumaParams(1.0, -2.0)
    with pytest.raises(DomainError):
        StretchBounds(1.1, -0.1)


@settings(max_examples=60, deadline=None)
@given(u=st.floats(0.001, 0.999),
       a=st.floats(0.3, 5.0), b=st.floats(0.3, 5.0))
def test_roundtrip_property(u, a, b):
    params = KumaParams(a, b)
    assert dist.kuma_cdf(dist.kuma_icdf(u, params), params) == pytest.approx(
        u, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.3, 5.0), b=st.floats(0.3, 5.0))
def test_gate_sample_range_property(a, b):
    params = KumaParams(a, b)
    rng = np.random.default_rng(0)
    smp = dist.sample(rng.random(64) * 0.998 + 0.001, params, FIG_BOUNDS)
    assert isinstance(smp, HardKumaSample)
    assert np.all(smp.h >= 0.0) and np.all(smp.h <= 1.0)
    assert np.all((smp.t >= FIG_BOUNDS.l) & (smp.t <= FIG_BOUNDS.r))
