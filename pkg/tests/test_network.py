import itertools
import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdnrvs.errors import CaseFormatError, DimensionError, EnumerationTruncated, TopologyError
from sdnrvs.network import (Branch, Bus, Network, bfs_tree, check_alpha, chordless_loops,
                            count_spanning_trees, cycle_masks, enumerate_radial, is_connected,
                            is_radial, load_network, loop_from_edges, network_from_dict,
                            network_to_dict, opened_ids, random_radial, save_network)
from sdnrvs.synthetic import line_network, random_meshed_network, ring_network


def as_graph(net, alpha=None):
    alpha = net.all_closed() if alpha is None else alpha
    g = nx.MultiGraph()
    g.add_nodes_from(range(net.n_bus))
    for k in np.flatnonzero(alpha):
        g.add_edge(int(net.f[k]), int(net.t[k]))
    return g


def brute_radial(net):
    """Every opened set of size L whose removal leaves a tree."""
    out = []
    for opened in itertools.combinations(range(net.n_branch), net.n_redundant):
        alpha = net.with_open(opened)
        if nx.is_tree(as_graph(net, alpha)):
            out.append(opened)
    return out


class TestValidation:
    def test_two_substations_rejected(self):
        buses = (Bus(0, "substation"), Bus(1, "substation"))
        with pytest.raises(CaseFormatError):
            Network(buses, (Branch(0, 0, 1, 1.0, -1.0),))

    def test_self_loop_rejected(self):
        buses = (Bus(0, "substation"), Bus(1))
        with pytest.raises(CaseFormatError):
            Network(buses, (Branch(0, 0, 1, 1.0, -1.0), Branch(1, 1, 1, 1.0, -1.0)))

    def test_disconnected_rejected(self):
        buses = (Bus(0, "substation"), Bus(1), Bus(2))
        with pytest.raises(TopologyError):
            Network(buses, (Branch(0, 0, 1, 1.0, -1.0),))

    def test_noncontiguous_ids_rejected(self):
        with pytest.raises(CaseFormatError):
            Network((Bus(0, "substation"), Bus(2)), (Branch(0, 0, 1, 1.0, -1.0),))

    def test_alpha_length_checked(self, ring4):
        with pytest.raises(DimensionError):
            check_alpha(ring4, np.ones(3, bool))


class TestRadiality:
    def test_ring_with_one_open_is_radial(self, ring4):
        assert is_radial(ring4, ring4.with_open([2]))
        assert not is_radial(ring4, ring4.all_closed())

    def test_two_open_in_ring_is_disconnected(self, ring4):
        alpha = ring4.with_open([0, 2])
        assert not is_connected(ring4, alpha)
        assert not is_radial(ring4, alpha)

    def test_matches_networkx_on_33_bus(self, ieee33):
        rng = np.random.default_rng(3)
        for _ in range(200):
            opened = rng.choice(ieee33.n_branch, size=5, replace=False)
            alpha = ieee33.with_open(opened)
            assert is_radial(ieee33, alpha) == nx.is_tree(as_graph(ieee33, alpha))

    def test_bfs_tree_raises_on_disconnected(self, ring4):
        with pytest.raises(TopologyError):
            bfs_tree(ring4, ring4.with_open([0, 2]))


class TestLoops:
    def test_fundamental_loops_are_simple_cycles(self, ieee33):
        loops = chordless_loops(ieee33)
        assert len(loops) == ieee33.n_redundant
        for lp in loops:
            n = len(lp.buses)
            assert len(set(lp.buses)) == n
            for k, e in enumerate(lp.branches):
                assert {int(ieee33.f[e]), int(ieee33.t[e])} == {lp.buses[k], lp.buses[(k + 1) % n]}

    def test_loops_are_independent(self, ieee123):
        loops = chordless_loops(ieee123)
        inc = np.zeros((len(loops), ieee123.n_branch))
        for r, lp in enumerate(loops):
            inc[r, list(lp.branches)] = 1
        assert np.linalg.matrix_rank(inc) == ieee123.n_redundant

    def test_loop_from_edges_roundtrip(self, ieee33):
        for lp in chordless_loops(ieee33):
            again = loop_from_edges(ieee33, lp.branches)
            assert set(again.branches) == set(lp.branches)
            assert set(again.buses) == set(lp.buses)

    def test_loop_from_edges_rejects_path(self, ieee33):
        with pytest.raises(TopologyError):
            loop_from_edges(ieee33, [0, 1, 2])

    def test_ring_has_single_loop(self, ring4):
        (lp,) = chordless_loops(ring4)
        assert sorted(lp.branches) == [0, 1, 2, 3]
        assert lp.buses[0] == 0


class TestEnumeration:
    def test_ring_gives_one_config_per_branch(self, ring4):
        got = [opened_ids(a) for a in enumerate_radial(ring4)]
        assert got == [(0,), (1,), (2,), (3,)]

    def test_tree_yields_itself(self):
        net = line_network(5)
        got = list(enumerate_radial(net))
        assert len(got) == 1 and got[0].all()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(4, 9), st.integers(1, 3), st.integers(0, 10_000))
    def test_matches_brute_force(self, n, loops, seed):
        net = random_meshed_network(n, loops, np.random.default_rng(seed))
        got = sorted(opened_ids(a) for a in enumerate_radial(net))
        assert got == brute_radial(net)

    def test_counts_agree_with_matrix_tree_theorem(self, ieee33):
        assert count_spanning_trees(ieee33) == int(round(nx.number_of_spanning_trees(as_graph(ieee33))))

    def test_every_yield_radial_and_unique(self, ieee33):
        seen = set()
        for alpha in itertools.islice(enumerate_radial(ieee33), 3000):
            assert is_radial(ieee33, alpha)
            seen.add(opened_ids(alpha))
        assert len(seen) == 3000

    def test_lexicographic_order(self, ieee33):
        first = [opened_ids(a) for a in itertools.islice(enumerate_radial(ieee33), 500)]
        assert first == sorted(first)

    def test_cap_raises_with_count(self, ieee33):
        with pytest.raises(EnumerationTruncated) as info:
            for _ in enumerate_radial(ieee33, cap=10):
                pass
        assert info.value.count == 10

    def test_non_switchable_branch_never_opened(self, ring4):
        branches = list(ring4.branches)
        branches[1] = Branch(1, 1, 2, 1.0, -10.0, switchable=False)
        net = Network(ring4.buses, tuple(branches))
        got = [opened_ids(a) for a in enumerate_radial(net)]
        assert got == [(0,), (2,), (3,)]

    def test_cycle_masks_zero_for_bridges(self):
        net = line_network(4)
        assert not cycle_masks(net).any()


class TestRandomRadial:
    def test_is_radial_and_respects_switchability(self, ring4):
        branches = list(ring4.branches)
        branches[0] = Branch(0, 0, 1, 1.0, -10.0, switchable=False)
        net = Network(ring4.buses, tuple(branches))
        rng = np.random.default_rng(0)
        for _ in range(20):
            alpha = random_radial(net, rng)
            assert is_radial(net, alpha) and alpha[0]

    def test_reaches_every_configuration_of_a_ring(self, ring4):
        rng = np.random.default_rng(1)
        seen = {opened_ids(random_radial(ring4, rng)) for _ in range(200)}
        assert seen == {(0,), (1,), (2,), (3,)}


class TestCaseFiles:
    def test_roundtrip(self, tmp_path, ieee33):
        path = tmp_path / "case.json"
        save_network(ieee33, path)
        again = load_network(path)
        assert again == ieee33
        assert np.array_equal(again.g, ieee33.g)

    def test_bundled_name(self):
        assert load_network("ieee33").n_bus == 33

    def test_bundled_sizes(self, ieee33, ieee123):
        assert (ieee33.n_bus, ieee33.n_branch) == (33, 37)
        assert (ieee123.n_bus, ieee123.n_branch) == (123, 126)

    def test_malformed_json_names_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n "buses": [\n')
        with pytest.raises(CaseFormatError, match="line"):
            load_network(path)

    def test_missing_field(self):
        with pytest.raises(CaseFormatError):
            network_from_dict({"buses": [{"id": 0}], "branches": [{"id": 0, "from": 0}]})

    def test_optional_fields_survive(self):
        net = ring_network(3)
        doc = json.loads(json.dumps(network_to_dict(net)))
        assert network_from_dict(doc).buses[0].p_max == 10.0


class TestDocumentedExamples:
    def test_line_is_radial(self):
        net = line_network(3)
        assert is_radial(net, net.all_closed())

    def test_ieee33_all_closed_and_ties_open(self, ieee33, ieee33_base_alpha):
        assert not is_radial(ieee33, ieee33.all_closed())
        assert ieee33_base_alpha.sum() == 32
        assert is_radial(ieee33, ieee33_base_alpha)
        assert nx.is_tree(as_graph(ieee33, ieee33_base_alpha))

    def test_tree_has_no_loops(self):
        assert chordless_loops(line_network(6)) == []

    def test_each_loop_has_one_non_tree_branch(self, ieee33):
        _, _, parent_branch = bfs_tree(ieee33)
        tree = {int(k) for k in parent_branch if k >= 0}
        loops = chordless_loops(ieee33)
        chords = [[e for e in lp.branches if e not in tree] for lp in loops]
        assert all(len(c) == 1 for c in chords)
        assert len({c[0] for c in chords}) == 5
        for lp in loops:
            sub = nx.Graph([(int(ieee33.f[e]), int(ieee33.t[e])) for e in lp.branches])
            assert len(nx.cycle_basis(sub)) == 1 and all(d == 2 for _, d in sub.degree)
