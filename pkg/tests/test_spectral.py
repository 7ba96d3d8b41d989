import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mosaic.spectral import (
    Agent,
    DegenerateEigenvalueError,
    DegenerateNetworkError,
    LayeredNetwork,
    Status,
    algebraic_connectivity,
    build_weights,
    lambda2_edge_gradient,
    lambda2_position_gradient,
    lambda2_values,
    laplacian,
    make_network,
    network_lambda2,
    network_spectrum,
    relabel,
)

from oracles import brute_lambda2, brute_weights, fd_edge, fd_position


def complete(n, w=1.0):
    W = np.full((n, n), w)
    np.fill_diagonal(W, 0)
    return W


@st.composite
def weight_matrices(draw, n_min=2, n_max=6):
    n = draw(st.integers(n_min, n_max))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.05, 2.0, (n, n)) * (rng.random((n, n)) < draw(st.floats(0.3, 1.0)))
    W = np.triu(W, 1)
    return W + W.T


@st.composite
def networks(draw, n_min=2, n_max=6):
    n = draw(st.integers(n_min, n_max))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    pos = rng.uniform(0, 6, (n, 2))
    return make_network(pos, comm_radius=draw(st.floats(2.0, 8.0)), decay=draw(st.floats(0.0, 1.0)))


# --- build_weights ----------------------------------------------------------


def test_coincident_agents_weight_one():
    net = make_network([(1, 1), (1, 1)], decay=3.7)
    assert build_weights(net)[0, 1] == 1.0


def test_beyond_radius_zero():
    net = make_network([(0, 0), (10.5, 0)], comm_radius=10.0)
    assert build_weights(net)[0, 1] == 0.0


def test_weight_value():
    net = make_network([(0, 0), (2, 0)], comm_radius=10.0, decay=0.5)
    assert build_weights(net)[0, 1] == pytest.approx(0.367879, abs=1e-6)


def test_inactive_agents_have_zero_weights():
    net = make_network([(0, 0), (1, 0), (2, 0)]).with_status([1], Status.QUARANTINED)
    W = build_weights(net)
    assert W.shape == (3, 3)
    assert not W[1].any() and not W[:, 1].any()
    assert W[0, 2] > 0


def test_spoofed_weights_only_when_perceived():
    net = make_network([(0, 0), (1, 0)]).with_status([1], Status.SPOOFED)
    assert build_weights(net)[0, 1] == 0
    assert build_weights(net, perceived=True)[0, 1] > 0


@given(networks())
def test_weights_symmetric_nonnegative(net):
    W = build_weights(net)
    assert np.array_equal(W, W.T)
    assert (W >= 0).all() and not np.diag(W).any()
    ref = brute_weights([a.position for a in net.agents], [True] * net.n, net.comm_radius, net.decay)
    np.testing.assert_allclose(W, ref, rtol=1e-14, atol=0)


# --- laplacian --------------------------------------------------------------


def test_laplacian_single_edge():
    np.testing.assert_array_equal(laplacian([[0, 0.7], [0.7, 0]]), [[0.7, -0.7], [-0.7, 0.7]])


def test_laplacian_empty_and_triangle():
    assert not laplacian(np.zeros((3, 3))).any()
    L = laplacian(complete(3))
    np.testing.assert_array_equal(np.diag(L), [2, 2, 2])
    assert (L[~np.eye(3, dtype=bool)] == -1).all()


@pytest.mark.parametrize("W", [[[0, 1], [2, 0]], [[0, -1], [-1, 0]]])
def test_laplacian_rejects_bad_input(W):
    with pytest.raises(ValueError):
        laplacian(W)


@given(weight_matrices(n_max=8))
def test_laplacian_properties(W):
    L = laplacian(W)
    n = len(W)
    assert np.abs(L.sum(axis=1)).max() <= 1e-12 * n * max(W.max(), 1e-300)
    assert np.array_equal(L, L.T)
    vals = np.linalg.eigvalsh(L)
    assert abs(vals[0]) <= 1e-9
    res = algebraic_connectivity(L)
    assert 0 <= res.lambda2 <= vals[-1] + 1e-9 <= 2 * W.sum(axis=1).max() + 1e-9


# --- algebraic_connectivity -------------------------------------------------


def test_k4():
    assert algebraic_connectivity(laplacian(complete(4))).lambda2 == pytest.approx(4.0, abs=1e-9)


def test_disconnected():
    W = np.zeros((4, 4))
    W[0, 1] = W[1, 0] = W[2, 3] = W[3, 2] = 1
    res = algebraic_connectivity(laplacian(W))
    assert res.lambda2 == 0.0
    assert abs(res.fiedler.sum()) <= 1e-9


def test_path_p3():
    # characteristic polynomial of the P3 Laplacian: lambda^3 - 4 lambda^2 + 3 lambda
    roots = np.sort(np.roots([1, -4, 3, 0]).real)
    assert roots[1] == pytest.approx(1.0)
    W = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], float)
    assert algebraic_connectivity(laplacian(W)).lambda2 == pytest.approx(roots[1], abs=1e-9)


def test_degenerate_network():
    with pytest.raises(DegenerateNetworkError, match="degenerate network"):
        algebraic_connectivity(np.zeros((1, 1)))


@settings(max_examples=200)
@given(weight_matrices())
def test_spectral_result_invariants(W):
    L = laplacian(W)
    res = algebraic_connectivity(L)
    v = res.fiedler
    assert abs(np.linalg.norm(v) - 1) <= 1e-9
    assert abs(v.sum()) <= 1e-9
    assert np.linalg.norm(L @ v - res.lambda2 * v) <= 1e-8
    assert res.eigengap >= 0
    assert abs(res.lambda2 - brute_lambda2(W)) <= 1e-8
    connected = _connected(W)
    assert (res.lambda2 > 0) == connected


def _connected(W):
    seen, todo = {0}, [0]
    while todo:
        i = todo.pop()
        for j in np.flatnonzero(W[i] > 0):
            if j not in seen:
                seen.add(j)
                todo.append(j)
    return len(seen) == len(W)


def test_fiedler_tie_breaking_deterministic():
    # K4: lambda2 = 4 with multiplicity 3
    res = algebraic_connectivity(laplacian(complete(4)))
    again = algebraic_connectivity(laplacian(complete(4)))
    np.testing.assert_array_equal(res.fiedler, again.fiedler)
    first = res.fiedler[np.flatnonzero(np.abs(res.fiedler) > 1e-12)[0]]
    assert first > 0
    assert res.eigengap == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=100)
@given(weight_matrices(n_max=8), st.data())
def test_interlacing(W, data):
    lam = algebraic_connectivity(laplacian(W)).lambda2
    edges = list(zip(*np.nonzero(np.triu(W, 1))))
    for i, j in edges:
        V = W.copy()
        V[i, j] = V[j, i] = 0
        assert algebraic_connectivity(laplacian(V)).lambda2 <= lam + 1e-9


@given(weight_matrices(), st.randoms(use_true_random=False))
def test_permutation_invariance(W, rnd):
    perm = list(range(len(W)))
    rnd.shuffle(perm)
    P = W[np.ix_(perm, perm)]
    a = algebraic_connectivity(laplacian(W)).lambda2
    b = algebraic_connectivity(laplacian(P)).lambda2
    assert a == pytest.approx(b, abs=1e-9)


def test_batch_values_match():
    rng = np.random.default_rng(3)
    stack = []
    for _ in range(20):
        W = np.triu(rng.uniform(0, 1, (5, 5)) * (rng.random((5, 5)) < 0.5), 1)
        stack.append(laplacian(W + W.T))
    batch = lambda2_values(np.array(stack))
    single = [algebraic_connectivity(L).lambda2 for L in stack]
    np.testing.assert_allclose(batch, single, atol=1e-12)


def test_network_lambda2_uses_active_subgraph():
    net = make_network([(0, 0), (1, 0), (50, 50)])
    assert network_lambda2(net) == 0.0
    healed = net.with_status([2], Status.QUARANTINED)
    assert network_lambda2(healed) == pytest.approx(2 * math.exp(-0.5), abs=1e-12)
    assert network_spectrum(healed).ids == (0, 1)


# --- gradients --------------------------------------------------------------


def test_edge_gradient_two_nodes():
    w = 0.8
    res = algebraic_connectivity(laplacian([[0, w], [w, 0]]))
    # analytic: lambda2 = 2w, d(lambda2)/dw = 2
    assert res.lambda2 == pytest.approx(2 * w)
    np.testing.assert_allclose(np.abs(res.fiedler), [1 / math.sqrt(2)] * 2)
    assert lambda2_edge_gradient(res, 0, 1) == pytest.approx(2.0)
    assert lambda2_edge_gradient(res, 1, 1) == 0.0


def test_edge_gradient_degenerate():
    res = algebraic_connectivity(laplacian(complete(4)))
    with pytest.raises(DegenerateEigenvalueError):
        lambda2_edge_gradient(res, 0, 1)


def test_edge_gradient_matches_fd_on_random_graph():
    rng = np.random.default_rng(11)
    W = np.triu(rng.uniform(0.2, 1.5, (5, 5)), 1)
    W = W + W.T
    W[0, 3] = W[3, 0] = W[1, 4] = W[4, 1] = 0
    res = algebraic_connectivity(laplacian(W))
    assert res.eigengap > 1e-3
    for i, j in zip(*np.nonzero(np.triu(W, 1))):
        fd = fd_edge(W, i, j)
        assert abs(lambda2_edge_gradient(res, i, j) - fd) <= 1e-4 * abs(fd)


def test_position_gradient_isolated_agent():
    net = make_network([(0, 0), (1, 0), (40, 40)])
    res = network_spectrum(net.with_status([], Status.ACTIVE))
    assert not lambda2_position_gradient(net, res, 2).any()


def test_position_gradient_points_toward_partner():
    net = make_network([(0, 0), (3, 0)], decay=0.4)
    g = lambda2_position_gradient(net, network_spectrum(net), 0)
    # lambda2 = 2 exp(-a d); d(lambda2)/dx0 = 2 a exp(-a d) along +x
    assert g[0] == pytest.approx(2 * 0.4 * math.exp(-1.2))
    assert g[1] == pytest.approx(0.0)


def test_position_gradient_coincident_agents():
    net = make_network([(0, 0), (0, 0), (2, 0)])
    res = network_spectrum(net)
    g = lambda2_position_gradient(net, res, 0)
    assert np.all(np.isfinite(g))


def test_position_gradient_matches_fd():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 10:
        pos = rng.uniform(0, 5, (5, 2))
        net = make_network(pos, comm_radius=6.0, decay=0.3)
        res = network_spectrum(net)
        if res.lambda2 == 0 or res.eigengap <= 1e-3:
            continue
        for k in range(5):
            fd = fd_position(pos.tolist(), [True] * 5, 6.0, 0.3, k)
            g = lambda2_position_gradient(net, res, k)
            assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)
        checked += 1


def test_relabel_keeps_lambda2():
    net = make_network([(0, 0), (1, 2), (3, 1), (2, 4)], layers=[0, 0, 1, 1])
    moved = relabel(net, {0: 1, 1: 0})
    assert network_lambda2(moved) == pytest.approx(network_lambda2(net), abs=1e-12)


def test_agent_validation():
    with pytest.raises(ValueError):
        Agent(0, 0, (float("nan"), 0))
    with pytest.raises(ValueError):
        Agent(0, 0, (0, 0), max_step=-1)
    with pytest.raises(ValueError):
        LayeredNetwork((Agent(0, 0, (0, 0)), Agent(0, 0, (1, 0))), 1, 1.0, 0.0)
    with pytest.raises(ValueError):
        LayeredNetwork((Agent(0, 2, (0, 0)),), 2, 1.0, 0.0)
