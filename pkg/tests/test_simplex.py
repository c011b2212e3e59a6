import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segnash import InvalidArgument, project_simplex, project_simplex_support, solve_mixing_weights, supergradient_ascent

vectors = st.lists(st.floats(-10, 10), min_size=1, max_size=8).map(np.array)


def on_simplex(x):
    return (x >= 0).all() and abs(x.sum() - 1) <= 1e-12


def test_projection_examples():
    v = np.array([0.2, 0.3, 0.5])
    assert np.allclose(project_simplex(v), v, atol=1e-12)
    assert np.allclose(project_simplex([0.5, 0.9]), [0.3, 0.7], atol=1e-12)
    assert np.allclose(project_simplex([2, -1]), [1, 0], atol=1e-12)
    with pytest.raises(InvalidArgument):
        project_simplex([])


def test_support_projection_examples():
    v = np.array([0.5, 0.9, 7.0])
    assert np.allclose(project_simplex_support(v, [0, 1]), [0.3, 0.7, 0.0], atol=1e-12)
    assert np.array_equal(project_simplex_support(v, [0]), [1.0, 0.0, 0.0])
    assert np.allclose(project_simplex_support(v, [0, 1, 2]), project_simplex(v), atol=1e-15)
    with pytest.raises(InvalidArgument):
        project_simplex_support(v, [])


def net_2d(res=1e-4):
    t = np.linspace(0, 1, int(round(1 / res)) + 1)
    return np.column_stack([t, 1 - t])


@pytest.mark.parametrize("v", [[0.5, 0.9], [2, -1]])
def test_projection_against_dense_net(v):
    net = net_2d()
    best = net[np.argmin(np.linalg.norm(net - v, axis=1))]
    assert np.allclose(project_simplex(v), best, atol=1e-4)


@settings(max_examples=300, deadline=None)
@given(vectors)
def test_projection_invariants(v):
    x = project_simplex(v)
    assert on_simplex(x)
    assert np.allclose(project_simplex(x), x, atol=1e-12)
    # optimality: v - x is constant on the support and no larger elsewhere
    d = v - x
    s = x > 0
    assert np.ptp(d[s]) <= 1e-9
    assert (d[~s] <= d[s].max() + 1e-9).all()


def test_r1_ascent():
    tr = supergradient_ascent(lambda lam: (3.0, np.array([3.0])), [1.0], 10)
    assert all(np.array_equal(l, [1.0]) for l in tr.iterates)
    assert tr.best_value == 3.0


def test_concave_ascent():
    c = np.array([0.3, 0.7])
    tr = supergradient_ascent(lambda lam: (-np.sum((lam - c) ** 2), -2 * (lam - c)), [0.5, 0.5], 200)
    assert len(tr.iterates) == 201
    assert np.abs(tr.best - c).max() <= 1e-2
    assert tr.best_index == int(np.argmax(tr.values))


def test_zero_gradient_stops():
    tr = supergradient_ascent(lambda lam: (1.0, np.zeros(2)), [0.5, 0.5], 50)
    assert len(tr.iterates) == 1


def test_stagnation_stops():
    tr = supergradient_ascent(lambda lam: (1.0, np.array([1.0, 0.0])), [0.5, 0.5], 500, stagnation=(25, 1e-6))
    assert len(tr.iterates) == 26


def test_oracle_failure_retry():
    calls = []

    def oracle(lam):
        calls.append(lam)
        if len(calls) == 2:
            raise RuntimeError("stall")
        return -abs(lam[0] - 0.2), np.array([-np.sign(lam[0] - 0.2), np.sign(lam[0] - 0.2)])

    tr = supergradient_ascent(oracle, [0.5, 0.5], 5)
    assert len(tr.iterates) == 6
    # the retried iterate sits halfway back
    assert np.allclose(tr.iterates[1], 0.5 * (calls[1] + tr.iterates[0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_ascent_stays_on_simplex(seed, r):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(r, r))
    c = rng.dirichlet(np.ones(r))
    oracle = lambda lam: (-np.sum((A @ (lam - c)) ** 2), -2 * A.T @ A @ (lam - c))
    tr = supergradient_ascent(oracle, rng.dirichlet(np.ones(r)), 30)
    assert all(on_simplex(l) for l in tr.iterates)


def test_mixing_examples():
    M = np.array([[6.0], [4.0]])
    w, res = solve_mixing_weights(M, 5.0)
    assert np.array_equal(w, [1.0]) and res == pytest.approx(np.sqrt(2))
    w, res = solve_mixing_weights(np.array([[6.0, 4.0], [4.0, 6.0]]), 5.0)
    assert np.allclose(w, [0.5, 0.5]) and res < 1e-12
    with pytest.raises(InvalidArgument):
        solve_mixing_weights(np.array([[np.nan]]), 1.0)


def simplex_net(k, res):
    m = int(round(1 / res))
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        t = np.arange(m + 1) / m
        return np.column_stack([t, 1 - t])
    a, b = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    keep = a + b <= m
    a, b = a[keep] / m, b[keep] / m
    return np.column_stack([a, b, 1 - a - b])


def test_mixing_against_dense_net():
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = rng.uniform(1, 10, (4, 3))
        target = rng.uniform(1, 10)
        _, res = solve_mixing_weights(M, target)
        net = simplex_net(3, 1e-3)
        ref = np.linalg.norm(target - net @ M.T, axis=1).min()
        assert res <= ref + 1e-3


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 6))
def test_mixing_beats_random_points(seed, s, k):
    rng = np.random.default_rng(seed)
    M = rng.uniform(0, 10, (s, k))
    target = rng.uniform(0.5, 10)
    w, res = solve_mixing_weights(M, target)
    assert on_simplex(w)
    assert res == pytest.approx(np.linalg.norm(target - M @ w), abs=1e-12)
    W = rng.dirichlet(np.ones(k), 1000)
    assert res <= np.linalg.norm(target - W @ M.T, axis=1).min() + 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_mixing_large_k_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    M = rng.uniform(0, 10, (3, 6))
    _, exact = solve_mixing_weights(M, 4.0)
    _, pg = solve_mixing_weights(M, 4.0, exhaustive_max=1)
    assert pg <= exact + 1e-6
