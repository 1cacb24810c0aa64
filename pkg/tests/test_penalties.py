"""Expected-penalty closed forms, the multiplier controller, and total loss."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hardkuma import autodiff as ad
from hardkuma import distribution as dist
from hardkuma import penalties
from hardkuma.distribution import KumaParams, StretchBounds
from hardkuma.penalties import LagrangianState

BOUNDS = StretchBounds(-0.1, 1.1)
P0_HALF_HALF = dist.prob_zero(KumaParams(0.5, 0.5), BOUNDS)


def _node(values):
    return ad.Graph().constant(np.asarray(values, dtype=np.float64))


def test_expected_l0_two_positions():
    value = penalties.expected_l0(_node([P0_HALF_HALF, P0_HALF_HALF]))
    assert value.item() == pytest.approx(2 * (1 - P0_HALF_HALF), rel=1e-12)
    # the spec-sheet rounding of the same number
    assert value.item() == pytest.approx(1.686794, abs=2e-5)


def test_expected_l0_degenerate_vectors():
    assert penalties.expected_l0(_node([1.0, 1.0, 1.0])).item() == 0.0
    assert penalties.expected_l0(_node([0.0] * 5)).item() == 5.0
    assert penalties.expected_l0(_node([0.0] * 5),
                                 normalize=True).item() == 1.0
    with pytest.raises(ValueError, match="empty"):
        penalties.expected_l0(_node(np.zeros(0)))


def test_expected_fused_lasso_two_positions():
    p = P0_HALF_HALF
    value = penalties.expected_fused_lasso(_node([p, p]))
    assert value.item() == pytest.approx(2 * p * (1 - p), rel=1e-12)
    assert value.item() == pytest.approx(0.264155, abs=2e-5)


def test_expected_fused_lasso_degenerate_vectors():
    assert penalties.expected_fused_lasso(_node([0.0] * 4)).item() == 0.0
    assert penalties.expected_fused_lasso(_node([1.0] * 4)).item() == 0.0
    alternating = [0.0, 1.0] * 3
    value = penalties.expected_fused_lasso(_node(alternating))
    assert value.item() == float(len(alternating) - 1)
    with pytest.raises(ValueError, match="two positions"):
        penalties.expected_fused_lasso(_node([0.5]))


def test_penalties_match_monte_carlo_counts():
    rng = np.random.default_rng(77)
    n_samples = 10 ** 6
    for trial in range(3):
        n = int(rng.integers(2, 9))
        a = rng.uniform(0.3, 3.0, n)
        b = rng.uniform(0.3, 3.0, n)
        params = KumaParams(a, b)
        p0 = dist.prob_zero(params, BOUNDS)
        u = rng.random((n_samples, n)) * (1 - 2e-12) + 1e-12
        gates = dist.sample(u, params, BOUNDS).h
        nonzero = gates != 0.0
        l0_counts = np.sum(nonzero, axis=1)
        exp_l0 = penalties.expected_l0(_node(p0)).item()
        assert abs(np.mean(l0_counts) - exp_l0) < 3 * oracles.mean_se(
            l0_counts.astype(float))
        transitions = np.sum(nonzero[:, 1:] != nonzero[:, :-1], axis=1)
        exp_fused = penalties.expected_fused_lasso(_node(p0)).item()
        assert abs(np.mean(transitions) - exp_fused) < 3 * oracles.mean_se(
            transitions.astype(float))


def test_penalty_bounds_and_gradient_flow():
    rng = np.random.default_rng(5)
    a0 = rng.uniform(0.4, 3.0, 6)
    b0 = rng.uniform(0.4, 3.0, 6)

    def build(g, bound_a, bound_b):
        p0 = dist.prob_zero_node(bound_a, bound_b, BOUNDS)
        return penalties.expected_l0(p0, normalize=True), \
            penalties.expected_fused_lasso(p0, normalize=True)

    graph = ad.Graph()
    ta, tb = graph.parameter("a", a0), graph.parameter("b", b0)
    l0, fused = build(graph, ta, tb)
    assert 0.0 <= l0.item() <= 1.0
    assert 0.0 <= fused.item() <= 1.0
    grads = ad.backward(graph, l0 + fused)

    def value(a_arr, b_arr):
        g = ad.Graph()
        l0v, fv = build(g, g.parameter("a", a_arr), g.parameter("b", b_arr))
        return float((l0v + fv).data)

    fd = oracles.central_difference(lambda x: value(x, b0), a0)
    oracles.assert_close_grads(grads["a"], fd, 1e-4, "penalty grads")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12))
def test_penalty_range_properties(probs):
    n = len(probs)
    l0 = penalties.expected_l0(_node(probs)).item()
    fused = penalties.expected_fused_lasso(_node(probs)).item()
    assert -1e-12 <= l0 <= n + 1e-12
    assert -1e-12 <= fused <= (n - 1) + 1e-12


def test_dependent_reduces_to_independent_form():
    probs = np.array([0.3, 0.8, 0.1, 0.55])
    graph = ad.Graph()
    steps = [graph.constant(np.asarray([p])) for p in probs]
    dep = penalties.expected_l0_dependent(steps)
    ind = penalties.expected_l0(graph.constant(probs))
    assert np.allclose(dep.data, ind.data)
    with pytest.raises(ValueError, match="empty"):
        penalties.expected_l0_dependent([])


def test_dependent_extreme_params_near_zero():
    # huge b, tiny a: the zero atom swallows nearly all mass
    p0 = dist.prob_zero(KumaParams(0.05, 50.0), BOUNDS)
    graph = ad.Graph()
    value = penalties.expected_l0_dependent([graph.constant(p0)] * 3)
    assert value.item() < 1e-3


def test_lagrangian_step_noop_when_satisfied():
    state = LagrangianState(lambdas=np.array([0.5]), targets=np.array([0.3]),
                            lambda_lr=1.0, beta=0.0)
    state.step(np.array([0.3]))
    assert state.lambdas[0] == 0.5


def test_lagrangian_single_ascent_step():
    state = LagrangianState(lambdas=np.zeros(1), targets=np.array([0.3]),
                            lambda_lr=1.0, beta=0.0)
    state.step(np.array([0.5]))
    assert state.lambdas[0] == pytest.approx(0.2, abs=1e-15)


def test_lagrangian_beta_zero_is_plain_ascent():
    rng = np.random.default_rng(3)
    state = LagrangianState(lambdas=rng.normal(size=2),
                            targets=np.array([0.2, 0.4]),
                            lambda_lr=0.7, beta=0.0)
    before = state.lambdas.copy()
    observed = np.array([0.35, 0.1])
    state.step(observed)
    assert np.allclose(state.lambdas - before,
                       0.7 * (observed - state.targets), atol=1e-15)


def test_lagrangian_nonneg_clip():
    state = LagrangianState(lambdas=np.zeros(1), targets=np.array([0.9]),
                            lambda_lr=1.0, beta=0.0, nonneg=True)
    state.step(np.array([0.1]))
    assert state.lambdas[0] == 0.0


def test_lagrangian_validation():
    with pytest.raises(ValueError, match="length"):
        LagrangianState(lambdas=np.zeros(2), targets=np.zeros(1))
    state = LagrangianState(lambdas=np.zeros(1), targets=np.zeros(1))
    with pytest.raises(ValueError, match="shape"):
        state.step(np.zeros(3))


def test_lagrangian_quadratic_toy_convergence():
    # min_x x^2 subject to x = 0.3 by alternating descent/ascent
    state = LagrangianState(lambdas=np.zeros(1), targets=np.array([0.3]),
                            lambda_lr=0.05, beta=0.9)
    x = 0.0
    lr = 0.05
    for _ in range(10 ** 4):
        x -= lr * (2.0 * x + state.lambdas[0])
        state.step(np.array([x]))
    assert abs(x - 0.3) < 1e-3
    assert state.lambdas[0] == pytest.approx(-0.6, abs=5e-3)


def test_total_loss_identity_with_zero_lambda():
    graph = ad.Graph()
    task = graph.constant(1.7)
    pen = graph.constant(0.4)
    state = LagrangianState(lambdas=np.zeros(1), targets=np.array([0.3]))
    assert penalties.total_loss(task, [pen], state).item() == 1.7


def test_total_loss_arithmetic():
    graph = ad.Graph()
    task = graph.constant(1.0)
    pen = graph.constant(0.4)
    state = LagrangianState(lambdas=np.array([1.0]), targets=np.array([0.3]))
    total = penalties.total_loss(task, [pen], state)
    assert total.item() == pytest.approx(1.1, abs=1e-15)
    with pytest.raises(ValueError, match="penalties"):
        penalties.total_loss(task, [pen, pen], state)


def test_total_loss_gradient_is_task_plus_lambda_penalty():
    rng = np.random.default_rng(11)
    a0 = rng.uniform(0.5, 2.0, 4)
    b0 = rng.uniform(0.5, 2.0, 4)
    lam = 0.8
    state = LagrangianState(lambdas=np.array([lam]), targets=np.array([0.3]))

    def build(g, ta, tb):
        p0 = dist.prob_zero_node(ta, tb, BOUNDS)
        task = ad.mean(ta * ta) + ad.mean(tb)
        pen = penalties.expected_l0(p0, normalize=True)
        return penalties.total_loss(task, [pen], state)

    graph = ad.Graph()
    ta, tb = graph.parameter("a", a0), graph.parameter("b", b0)
    grads = ad.backward(graph, build(graph, ta, tb))

    def value(a_arr, b_arr):
        g = ad.Graph()
        return float(build(g, g.parameter("a", a_arr),
                           g.parameter("b", b_arr)).data)

    fd_a = oracles.central_difference(lambda x: value(x, b0), a0)
    fd_b = oracles.central_difference(lambda x: value(a0, x), b0)
    oracles.assert_close_grads(grads["a"], fd_a, 1e-4, "total a")
    oracles.assert_close_grads(grads["b"], fd_b, 1e-4, "total b")
