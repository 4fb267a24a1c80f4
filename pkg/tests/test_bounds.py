import math

import numpy as np
import pytest

from syncnet.bounds import (chi_cdf, coupling_bounds, non_sync_probability_bound,
                            scalar_bounds, vector_bounds)
from syncnet.coupling import LINEAR, SIN, TANH
from syncnet.dynamics import ScalarNetwork, VectorNetwork, simulate, suggest_dt
from syncnet.graph import Topology, gen_erdos_renyi, gen_ring

PAIR = Topology.from_edges(2, [(0, 1)])
# median of chi with 4 degrees of freedom and the Monte Carlo tail mass above it
# (10^6 standard normal 4-vectors), from tests/oracles/derive_values.py
CHI4_MEDIAN = 1.8321282651695876
CHI4_MC_TAIL = 0.500547


def test_two_node_hand_values():
    b = scalar_bounds(ScalarNetwork(PAIR, [0.0, 2.0], 1.0, 1.0, TANH))
    assert b.k_l_lower == pytest.approx(1.0, abs=1e-12)
    assert b.k_u_upper == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert (b.d_max, b.lambda2, b.f_max, b.g) == (1.0, pytest.approx(2.0), 1.0, 0.5)
    assert b.certified


def test_unbounded_coupling_gives_zero():
    b = scalar_bounds(ScalarNetwork(PAIR, [0.0, 2.0], 1.0, 1.0, LINEAR))
    assert (b.k_l_lower, b.k_u_upper) == (0.0, 0.0)
    d = b.to_dict()
    assert d["f_max"] == "inf" and d["k_u_upper_note"].startswith("0")


def test_zero_disagreement():
    b = scalar_bounds(ScalarNetwork(gen_ring(6, 2), np.full(6, 3.0), 1.0, 1.0, TANH))
    assert (b.k_l_lower, b.k_u_upper) == (0.0, 0.0)
    q = np.tile(np.eye(2), (4, 1, 1))
    v = vector_bounds(VectorNetwork(gen_ring(4, 2), np.ones((4, 2)), q, 1.0, TANH))
    assert (v.k_l_lower, v.k_u_upper) == (0.0, 0.0)


def test_uncertified_flag():
    assert not scalar_bounds(ScalarNetwork(PAIR, [0.0, 2.0], 1.0, 1.0, SIN)).certified


def test_disconnected_rejected():
    net = ScalarNetwork(Topology.from_edges(3, [(0, 1)]), [0.0, 1.0, 2.0], 1.0, 1.0, TANH)
    with pytest.raises(ValueError):
        scalar_bounds(net)


def test_vector_with_one_component_matches_scalar():
    rng = np.random.default_rng(0)
    topo = gen_erdos_renyi(7, 0.5, 1)
    c = rng.uniform(0.5, 2.0, 7)
    omega = rng.normal(size=7)
    s = scalar_bounds(ScalarNetwork(topo, omega, c, 1.0, TANH))
    v = vector_bounds(VectorNetwork(topo, omega[:, None], c[:, None, None], 1.0, TANH))
    assert v.k_l_lower == pytest.approx(s.k_l_lower, rel=1e-12)
    assert v.k_u_upper == pytest.approx(s.k_u_upper, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_vector_dichotomy_by_simulation(seed):
    rng = np.random.default_rng(seed)
    topo = gen_ring(4, 2)
    a = rng.standard_normal((4, 4, 2))
    q = np.einsum("iml,imk->ilk", a, a)
    net = VectorNetwork(topo, rng.normal(0, 2, (4, 2)), q, 1.0, TANH,
                        theta0=rng.uniform(-1, 1, (4, 2)))
    b = coupling_bounds(net)
    hi = net.replace(K=1.5 * b.k_u_upper)
    lo = net.replace(K=0.5 * b.k_l_lower)
    assert simulate(hi, 40.0, suggest_dt(hi, 0.01)).synchronized
    assert not simulate(lo, 40.0, suggest_dt(lo, 0.01)).synchronized


class TestNonSyncBound:
    def test_limits(self):
        topo = gen_ring(8, 2)
        assert non_sync_probability_bound(topo, TANH, 0.0, 1.0) == 1.0
        assert non_sync_probability_bound(topo, TANH, 1e4, 1.0) < 1e-12
        assert non_sync_probability_bound(topo, LINEAR, 0.5, 1.0) == 0.0

    def test_median_threshold(self):
        # ring(4, 2) has lambda2 = 2, so K f_max lambda2 / 2 = K with unit scale
        p = non_sync_probability_bound(gen_ring(4, 2), TANH, CHI4_MEDIAN, 1.0)
        assert p == pytest.approx(0.5, abs=1e-12)
        assert p == pytest.approx(CHI4_MC_TAIL, abs=0.01)

    def test_monotone_in_k(self):
        topo = gen_ring(10, 4)
        vals = [non_sync_probability_bound(topo, TANH, k, 0.7) for k in np.linspace(0, 5, 20)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_errors(self):
        with pytest.raises(ValueError):
            non_sync_probability_bound(gen_ring(4, 2), TANH, -1.0, 1.0)
        with pytest.raises(ValueError):
            non_sync_probability_bound(gen_ring(4, 2), TANH, 1.0, 0.0)


def test_chi_cdf_against_closed_forms():
    z = np.linspace(0, 4, 9)
    assert np.allclose(chi_cdf(z, 2), 1 - np.exp(-z ** 2 / 2), atol=1e-14)
    assert np.allclose(chi_cdf(z, 1), [math.erf(v / math.sqrt(2)) for v in z], atol=1e-14)
