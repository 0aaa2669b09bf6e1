import itertools
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal

from csnet.multicast import (
    Edge,
    NetworkGraph,
    Quantizer,
    RankDeficientError,
    brute_force_min_cut,
    butterfly,
    depth1,
    gf_field,
    injection_nodes_for,
    load_graph,
    max_flow,
    min_cut,
    multicast_rate_table,
    named_topology,
    pack_symbols,
    parse_graph,
    receiver_decode,
    rlnc_session,
    sdcic_multicast_roundtrip,
    symbols_per_value,
    unpack_symbols,
)
from csnet.sdc import SchemeKind, rate_table, sdcic_roundtrip, select_active_sources
from csnet.source_model import make_ensemble
from csnet.utils import derive_rng

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_dags(max_nodes: int = 5, max_edges: int = 8):
    """Every DAG on 2..max_nodes nodes with at most max_edges unit edges, up to relabelling.

    Any DAG has a topological labelling, so forward edges u < v cover them all.
    """
    for size in range(2, max_nodes + 1):
        forward = list(itertools.combinations(range(size), 2))
        for count in range(min(max_edges, len(forward)) + 1):
            for chosen in itertools.combinations(forward, count):
                yield size, tuple(Edge(u, v) for u, v in chosen)


def decodes_everywhere(g: NetworkGraph, q: int, seed: int) -> bool:
    packets = derive_rng(seed, "payload").integers(0, 2**q, size=(2, 4))
    collected = rlnc_session(g, packets, q, seed)
    try:
        for receiver in g.receivers:
            receiver_decode(collected[receiver], 2)
    except RankDeficientError:
        return False
    return True


class TestNetworkGraph(unittest.TestCase):
    def test_cycle_is_rejected(self):
        with self.assertRaises(ValueError):
            NetworkGraph(nodes=(0, 1, 2), edges=(Edge(0, 1), Edge(1, 2), Edge(2, 1)), sources=(0,), receivers=(2,))

    def test_capacity_must_be_positive(self):
        with self.assertRaises(ValueError):
            NetworkGraph(nodes=(0, 1), edges=(Edge(0, 1, 0),), sources=(0,), receivers=(1,))

    def test_topological_order(self):
        order = butterfly().topological_order()

        for edge in butterfly().edges:
            self.assertLess(order.index(edge.u), order.index(edge.v))

    def test_graph_file_matches_builtin_butterfly(self):
        g = load_graph(CONFIGS / "butterfly.graph")

        self.assertEqual(set(g.edges), set(butterfly().edges))
        self.assertEqual(g.sources, (0, 1))
        self.assertEqual(g.receivers, (4, 5))

    def test_parse_graph_capacities_and_errors(self):
        g = parse_graph("sources: 0\nreceivers: 2\n0 1 3  # wide\n1 2\n")

        self.assertEqual(g.edges, (Edge(0, 1, 3), Edge(1, 2, 1)))
        with self.assertRaises(ValueError):
            parse_graph("0 1\n")
        with self.assertRaises(ValueError):
            parse_graph("sinks: 1\nsources: 0\nreceivers: 1\n0 1\n")

    def test_named_topologies(self):
        self.assertEqual(len(named_topology("depth1:3").sources), 3)
        self.assertEqual(len(named_topology("depth1", n=5).sources), 5)
        self.assertEqual(named_topology("butterfly").receivers, (4, 5))
        with self.assertRaises(ValueError):
            named_topology("ring")


class TestMinCut(unittest.TestCase):
    def test_butterfly(self):
        g = butterfly()

        for receiver in g.receivers:
            self.assertEqual(min_cut(g, {0, 1}, receiver), 2)
            self.assertEqual(brute_force_min_cut(g, {0, 1}, receiver), 2)

    def test_depth1_counts_active_sources(self):
        g = depth1(6)

        self.assertEqual(min_cut(g, set(range(6)), 6), 6)
        self.assertEqual(min_cut(g, {1, 4}, 6), 2)

    def test_unreachable_receiver(self):
        g = NetworkGraph(nodes=(0, 1, 2), edges=(Edge(0, 1),), sources=(0,), receivers=(2,))

        self.assertEqual(min_cut(g, {0}, 2), 0)

    def test_flow_matches_brute_force_on_every_small_dag(self):
        # Arrange
        mismatches = []
        checked = 0

        for size, edges in small_dags():
            receiver = size - 1
            for sources in ((0,), (0, 1)):
                if receiver in sources:
                    continue
                g = NetworkGraph(nodes=tuple(range(size)), edges=edges, sources=sources, receivers=(receiver,))

                # Act
                flow = max_flow(g, set(sources), receiver)
                expected = brute_force_min_cut(g, set(sources), receiver)

                # Assert
                checked += 1
                if flow.value != expected:
                    mismatches.append((size, edges, sources, flow.value, expected))
                into_receiver = sum(f for edge, f in zip(g.edges, flow.edge_flows) if edge.v == receiver)
                self.assertEqual(into_receiver, flow.value)

        self.assertEqual(mismatches, [])
        # 2 + 8 + 64 + 1013 graphs, the two-node ones with a single source set
        self.assertEqual(checked, 2 + 2 * (8 + 64 + 1013))

    def test_flow_matches_brute_force_with_capacities(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            # Arrange
            nodes = tuple(range(7))
            edges = tuple(
                Edge(u, v, int(rng.integers(1, 4)))
                for u in range(7)
                for v in range(u + 1, 7)
                if rng.random() < 0.35
            )
            g = NetworkGraph(nodes=nodes, edges=edges, sources=(0, 1), receivers=(6,))

            # Act
            flow = max_flow(g, {0, 1}, 6)

            # Assert
            self.assertEqual(flow.value, brute_force_min_cut(g, {0, 1}, 6))
            for edge, carried in zip(g.edges, flow.edge_flows):
                self.assertLessEqual(carried, edge.capacity)


class TestNetworkCoding(unittest.TestCase):
    def test_field_axioms_on_random_elements(self):
        GF = gf_field(8)
        a, b, c = GF.Random(3, seed=1), GF.Random(3, seed=2), GF.Random(3, low=1, seed=3)

        assert_array_equal((a * b) * c, a * (b * c))
        assert_array_equal(a * (b + c), a * b + a * c)
        assert_array_equal(c * c**-1, GF.Ones(3))

    def test_receivers_recover_payloads(self):
        # Arrange
        g = butterfly()
        packets = np.array([[1, 2, 3, 250], [7, 0, 255, 9]])
        decoded_seeds = 0

        for seed in range(10):
            # Act
            collected = rlnc_session(g, packets, 8, seed=seed)
            if not decodes_everywhere(g, 8, seed):
                continue
            decoded_seeds += 1

            # Assert
            for receiver in g.receivers:
                self.assertEqual(len(collected[receiver]), 2)
                decoded = receiver_decode(collected[receiver], 2)
                assert_array_equal(decoded.view(np.ndarray), packets)
        self.assertGreaterEqual(decoded_seeds, 8)

    def test_butterfly_invertibility_at_q8(self):
        successes = sum(decodes_everywhere(butterfly(), 8, seed) for seed in range(1000))

        self.assertGreaterEqual(successes, 990)

    def test_small_field_loses_rank_more_often(self):
        wide = sum(decodes_everywhere(butterfly(), 8, seed) for seed in range(300))
        binary = sum(decodes_everywhere(butterfly(), 1, seed) for seed in range(300))

        self.assertLess(binary, wide - 100)

    def test_insufficient_cut_warns_and_fails_decode(self):
        g = NetworkGraph(nodes=(0, 1), edges=(Edge(0, 1),), sources=(0,), receivers=(1,))

        with self.assertLogs("csnet.multicast", level="WARNING"):
            collected = rlnc_session(g, np.array([[1], [2]]), 8, seed=0, injection_nodes=[0, 0])

        with self.assertRaises(RankDeficientError) as context:
            receiver_decode(collected[1], 2)
        self.assertLessEqual(context.exception.rank, 1)
        self.assertEqual(context.exception.required, 2)


class TestQuantizer(unittest.TestCase):
    def test_round_trip_error_is_half_a_step(self):
        quantizer = Quantizer(bound=10.0)
        values = np.linspace(-10.0, 10.0, 1001)

        restored = quantizer.decode(quantizer.encode(values))

        self.assertLessEqual(float(np.max(np.abs(restored - values))), quantizer.step / 2 + 1e-12)

    def test_out_of_range_values_are_clipped(self):
        quantizer = Quantizer(bound=1.0, bits=4)

        assert_array_equal(quantizer.encode([-5.0, 5.0]), [0, 15])

    def test_symbol_packing(self):
        self.assertEqual(symbols_per_value(8), 2)
        self.assertEqual(symbols_per_value(3), 6)
        assert_array_equal(pack_symbols([0x1234], 8), [0x34, 0x12])
        assert_array_equal(unpack_symbols([0x34, 0x12], 8), [0x1234])
        assert_array_equal(unpack_symbols(pack_symbols([0, 65535, 4097], 3), 3), [0, 65535, 4097])


class TestSdcicMulticast(unittest.TestCase):
    def test_butterfly_round_trips(self):
        # Arrange
        ens = make_ensemble(2, 1, 4, "fixed_k", seed=1)
        g = butterfly()

        # Act
        outcomes = []
        for trial in range(200):
            active = select_active_sources(ens, 2, "bernoulli_gamma", seed=trial)
            outcomes.append(sdcic_multicast_roundtrip(ens, g, active, trial, seed=trial))

        # Assert
        for index, receiver in enumerate(g.receivers):
            reports = [reports[index] for reports in outcomes]
            self.assertTrue(all(report.receiver == receiver for report in reports))
            self.assertGreaterEqual(np.mean([report.success for report in reports]), 0.9)
            self.assertTrue(all(report.extras["min_cut"] == 2 for report in reports))

    def test_depth1_keeps_source_indices(self):
        ens = make_ensemble(6, 1, 2, "fixed_k", seed=2)
        active = select_active_sources(ens, 3, "bernoulli_gamma", seed=3)

        self.assertEqual(injection_nodes_for(depth1(6), ens, active), list(active.indices))
        self.assertEqual(injection_nodes_for(butterfly(), ens, select_active_sources(ens, 2, "lowest_entropy")), [0, 1])

    def test_rate_table_matches_tree(self):
        ens = make_ensemble(10, 2, 4, "fixed_k", seed=1)

        multicast = multicast_rate_table(ens, 6)
        tree = rate_table(ens, 6)

        self.assertEqual([r.min_cut_rate for r in multicast], [r.min_cut_rate for r in tree])
        decoders = {r.scheme: r.extras["decoder"] for r in multicast}
        self.assertIn("network decoding", decoders[SchemeKind.SDCIC])

    def test_depth1_reduces_to_the_tree(self):
        # Arrange
        ens = make_ensemble(128, 4, 4, "fixed_k", seed=1)
        g = depth1(128)
        disagreements = []

        for trial in range(100):
            active = select_active_sources(ens, 42, "bernoulli_gamma", seed=trial)

            # Act
            tree = sdcic_roundtrip(ens, active, trial, seed=trial, rip_samples=0)
            (network,) = sdcic_multicast_roundtrip(ens, g, active, trial, seed=trial, rip_samples=0)

            # Assert
            self.assertEqual(network.extras["rank"], 42)
            if tree.success != network.success:
                disagreements.append(trial)
        self.assertEqual(disagreements, [])

    def test_cut_below_m_fails(self):
        # Arrange
        ens = make_ensemble(2, 1, 4, "fixed_k", seed=1)
        g = NetworkGraph(
            nodes=(0, 1, 2, 3), edges=(Edge(0, 2), Edge(1, 2), Edge(2, 3)), sources=(0, 1), receivers=(3,)
        )
        outcomes = []

        # Act
        with self.assertLogs("csnet.multicast", level="WARNING"):
            for trial in range(100):
                active = select_active_sources(ens, 2, "bernoulli_gamma", seed=trial)
                outcomes.extend(sdcic_multicast_roundtrip(ens, g, active, trial, seed=trial, rip_samples=0))

        # Assert
        self.assertLessEqual(np.mean([report.success for report in outcomes]), 0.01)
        self.assertTrue(all(report.extras["min_cut"] == 1 for report in outcomes))
        self.assertTrue(all(report.extras["status"] == "rank_deficient" for report in outcomes))


if __name__ == "__main__":
    unittest.main()
