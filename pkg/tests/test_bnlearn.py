import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnoprisk.aggregate import ExtractedDatabase
from bnoprisk.bnlearn import (
    CycleError,
    DagStructure,
    DiscreteBayesNet,
    Discretization,
    all_dags,
    discretize,
    joint,
    learn_cpts,
    learn_structure,
    log_likelihood,
    marginal,
    score,
)


def sample_net(net, n_records, g):
    """Ancestral sampling; returns 1-based states."""
    out = np.zeros((n_records, net.structure.n_nodes), dtype=np.int64)
    for i in net.structure.topological_order():
        ps = net.structure.parents(i)
        cpt = net.cpts[i]
        probs = cpt[tuple(out[:, p] for p in ps)] if ps else np.broadcast_to(cpt, (n_records, net.n_states))
        u = g.random(n_records)[:, None]
        out[:, i] = np.minimum((u > np.cumsum(probs, axis=1)).sum(axis=1), net.n_states - 1)
    return out + 1


def random_net(g, n_nodes=3, n_states=5, alpha=0.5):
    dags = all_dags(n_nodes)
    dag = dags[g.integers(len(dags))]
    cpts = []
    for i in range(n_nodes):
        k = len(dag.parents(i))
        cpts.append(g.dirichlet(np.full(n_states, alpha), size=n_states**k).reshape((n_states,) * (k + 1)))
    return DiscreteBayesNet(dag, cpts, n_states)


# -- discretization -----------------------------------------------------------

def test_bin_rule():
    db = ExtractedDatabase(1, np.array([[0.0], [10.0], [24.0], [50.0]]))
    states, disc = discretize(db)
    np.testing.assert_array_equal(states[:, 0], [1, 1, 3, 5])
    assert disc.bin_widths[0] == 10.0


def test_maximum_maps_to_top_state(rng):
    x = rng.exponential(7.0, size=(30, 3))
    states, _ = discretize(ExtractedDatabase(5, x))
    assert np.all(states[x.argmax(axis=0), range(3)] == 5)
    assert states.min() >= 1 and states.max() <= 5


def test_uniform_values_fill_bins_evenly():
    x = np.random.default_rng(8).uniform(0, 1, size=(10_000, 1))
    states, _ = discretize(ExtractedDatabase(1, x))
    freq = np.bincount(states[:, 0], minlength=6)[1:] / 10_000
    np.testing.assert_allclose(freq, 0.2, atol=0.02)


def test_all_zero_process_rejected():
    with pytest.raises(ValueError, match="degenerate process"):
        discretize(ExtractedDatabase(1, np.array([[1.0, 0.0], [2.0, 0.0]])))


# -- structures ---------------------------------------------------------------

def test_cycle_rejected():
    with pytest.raises(CycleError):
        DagStructure(3, frozenset({(0, 1), (1, 2), (2, 0)}))
    with pytest.raises(ValueError):
        DagStructure(2, frozenset({(0, 0)}))


@pytest.mark.parametrize("n,count", [(1, 1), (2, 3), (3, 25), (4, 543)])
def test_number_of_labeled_dags(n, count):
    dags = all_dags(n)
    assert len(dags) == count
    assert len(set(dags)) == count


# -- score --------------------------------------------------------------------

def test_score_prefers_empty_graph_on_independent_columns():
    wins = 0
    single_edges = [DagStructure(3, frozenset({e})) for e in itertools.permutations(range(3), 2)]
    for seed in range(100):
        s = np.random.default_rng(seed).integers(1, 6, size=(10_000, 3))
        empty = score(DagStructure(3), s)
        wins += all(empty > score(d, s) for d in single_edges)
    assert wins >= 99


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.integers(2, 200))
def test_adding_an_edge_never_lowers_likelihood(seed, r):
    g = np.random.default_rng(seed)
    s = g.integers(1, 6, size=(r, 3))
    for dag in all_dags(3):
        for a, b in itertools.permutations(range(3), 2):
            if (a, b) in dag.edges or (b, a) in dag.edges:
                continue
            try:
                bigger = DagStructure(3, dag.edges | {(a, b)})
            except CycleError:
                continue
            assert log_likelihood(bigger, s) >= log_likelihood(dag, s) - 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), perm=st.permutations([1, 2, 3, 4, 5]))
def test_score_invariant_under_state_relabeling(seed, perm):
    g = np.random.default_rng(seed)
    s = g.integers(1, 6, size=(80, 3))
    relabeled = s.copy()
    relabeled[:, 1] = np.asarray(perm)[s[:, 1] - 1]
    for dag in all_dags(3):
        assert score(dag, s) == pytest.approx(score(dag, relabeled), rel=1e-12)


def test_score_of_known_table():
    # one node, counts (2, 2, 0, 0, 0) over R = 4: LL = 4 ln(1/2), penalty 4 * ln(4)/2
    s = np.array([[1], [1], [2], [2]])
    assert score(DagStructure(1), s) == pytest.approx(4 * np.log(0.5) - 2 * np.log(4))


# -- structure learning -------------------------------------------------------

def test_independent_columns_learn_empty_graph():
    empties = 0
    for seed in range(20):
        s = np.random.default_rng(1000 + seed).integers(1, 6, size=(10_000, 3))
        empties += len(learn_structure(s)) == 0
    assert empties >= 19


def test_greedy_matches_exhaustive_score():
    for seed in range(40):
        g = np.random.default_rng(seed)
        s = sample_net(random_net(g), int(g.integers(50, 500)), g)
        greedy = learn_structure(s, "greedy")
        full = learn_structure(s, "exhaustive")
        assert score(greedy, s) == pytest.approx(score(full, s), rel=1e-12)


def test_strong_dependence_detected():
    g = np.random.default_rng(4)
    a = g.integers(1, 6, size=2000)
    b = np.where(g.random(2000) < 0.9, a, g.integers(1, 6, size=2000))
    s = np.column_stack([a, b, g.integers(1, 6, size=2000)])
    dag = learn_structure(s)
    assert len(dag) == 1 and next(iter(dag.edges)) in {(0, 1), (1, 0)}


def test_exhaustive_capped():
    s = np.ones((10, 5), dtype=int)
    with pytest.raises(ValueError, match="exhaustive search capped at 4 nodes"):
        learn_structure(s, "exhaustive")


def test_learn_structure_needs_two_records():
    with pytest.raises(ValueError):
        learn_structure(np.array([[1, 2, 3]]))


def test_exhaustive_tie_prefers_fewer_edges():
    # constant data: every structure has LL 0, so the penalty decides
    s = np.ones((10, 3), dtype=int)
    assert learn_structure(s, "exhaustive") == DagStructure(3)


# -- parameters ---------------------------------------------------------------

def test_smoothed_single_node():
    net = learn_cpts(DagStructure(1), np.full((8, 1), 3))
    np.testing.assert_allclose(net.cpts[0], [1 / 13, 1 / 13, 9 / 13, 1 / 13, 1 / 13], rtol=1e-15)


def test_empty_structure_cpts_are_smoothed_frequencies(rng):
    s = rng.integers(1, 6, size=(40, 3))
    net = learn_cpts(DagStructure(3), s)
    for i in range(3):
        counts = np.bincount(s[:, i], minlength=6)[1:]
        np.testing.assert_allclose(net.cpts[i], (counts + 1) / (40 + 5), rtol=1e-14)


def test_edge_cpt_hand_counts():
    a = [1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]
    b = [1, 1, 2, 5, 2, 2, 2, 3, 5, 5, 5, 5]
    net = learn_cpts(DagStructure(2, frozenset({(0, 1)})), np.column_stack([a, b]))
    np.testing.assert_allclose(net.cpts[0], np.array([5, 5, 5, 1, 1]) / 17)
    expected = np.array([
        [3, 2, 1, 1, 2],
        [1, 4, 2, 1, 1],
        [1, 1, 1, 1, 5],
    ]) / 9
    np.testing.assert_allclose(net.cpts[1][:3], expected)
    np.testing.assert_allclose(net.cpts[1][3:], 0.2)


def test_cpts_normalized_and_positive(rng):
    s = rng.integers(1, 6, size=(20, 3))
    for dag in all_dags(3):
        net = learn_cpts(dag, s)
        for cpt in net.cpts:
            assert np.all(cpt > 0)
            np.testing.assert_allclose(cpt.sum(axis=-1), 1.0, atol=1e-12)


# -- inference ----------------------------------------------------------------

def chain_net():
    return DiscreteBayesNet(
        DagStructure(3, frozenset({(0, 1), (1, 2)})),
        [np.array([0.3, 0.7]), np.array([[0.9, 0.1], [0.2, 0.8]]), np.array([[0.6, 0.4], [0.5, 0.5]])],
        n_states=2,
    )


def test_chain_joint_spot_values():
    p = joint(chain_net())
    assert p[0, 1, 1] == pytest.approx(0.3 * 0.1 * 0.5, abs=1e-15)
    assert p[1, 1, 0] == pytest.approx(0.7 * 0.8 * 0.5, abs=1e-15)
    assert p[0, 0, 0] == pytest.approx(0.3 * 0.9 * 0.6, abs=1e-15)


def test_chain_marginal_hand_summation():
    m = marginal(chain_net(), 2, Discretization(2, np.array([1.0, 1.0, 4.0])))
    np.testing.assert_allclose(m.mass, [0.541, 0.459], atol=1e-12)
    assert m.bin_width == 2.0 and m.order == 1


def test_joint_of_empty_graph_is_product(rng):
    s = rng.integers(1, 6, size=(30, 3))
    net = learn_cpts(DagStructure(3), s)
    p = joint(net)
    assert p.shape == (5, 5, 5)
    np.testing.assert_allclose(p, np.einsum("i,j,k->ijk", *net.cpts), rtol=1e-14)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)
    disc = Discretization(5, np.ones(3))
    for i in range(3):
        np.testing.assert_allclose(marginal(net, i, disc).mass, net.cpts[i], rtol=1e-13)


@pytest.mark.parametrize("seed", range(10))
def test_marginal_is_joint_summed(seed):
    g = np.random.default_rng(seed)
    net = learn_cpts(random_net(g).structure, g.integers(1, 6, size=(50, 3)))
    p = joint(net)
    disc = Discretization(5, np.array([5.0, 10.0, 20.0]))
    for i in range(3):
        m = marginal(net, i, disc)
        other = tuple(ax for ax in range(3) if ax != i)
        np.testing.assert_allclose(m.mass, p.sum(axis=other), atol=1e-12)
        assert m.mass.sum() == pytest.approx(1.0, abs=1e-9)
        assert m.bin_width == disc.bin_widths[i]


def test_joint_size_limit():
    net = learn_cpts(DagStructure(9), np.ones((3, 9), dtype=int))
    with pytest.raises(ValueError, match="exceeds exact-enumeration limit"):
        joint(net)


@pytest.mark.parametrize("edges", [frozenset(), frozenset({(0, 1)})])
def test_parameter_recovery(edges):
    g = np.random.default_rng(77)
    dag = DagStructure(3, edges)
    true = DiscreteBayesNet(dag, [
        g.dirichlet(np.ones(5), size=5 ** len(dag.parents(i))).reshape((5,) * (len(dag.parents(i)) + 1))
        for i in range(3)
    ])
    s = sample_net(true, 10_000, g)
    learned = learn_cpts(dag, s)
    tv = 0.5 * np.abs(joint(learned) - joint(true)).sum()
    assert tv <= 0.05
