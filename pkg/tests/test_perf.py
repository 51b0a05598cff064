import math

import numpy as np
import pytest

from satdeploy.perf import (
    SPEED_OF_LIGHT_KM_PER_MS,
    DeploymentScheme,
    LatencyBreakdown,
    chain_latency,
    chain_latency_breakdown,
    cost_core,
    cost_light_deploy,
    cost_light_deploy_slot,
    cost_light_keep,
    cost_light_parallel,
    processing_latency,
    propagation_latency,
    transmission_latency,
)
from satdeploy.workload import AppGraph

from conftest import make_app, make_graph, make_light
from oracles import timeline_chain_latency


class TestDeploymentScheme:
    def test_rejects_negative_counts(self):
        with pytest.raises(ValueError):
            DeploymentScheme(core=np.array([[-1, 0]]),
                             light=np.zeros((1, 1, 2), dtype=int))

    def test_shapes_enforced(self):
        with pytest.raises(ValueError):
            DeploymentScheme(core=np.zeros(3, dtype=int),
                             light=np.zeros((1, 1, 2), dtype=int))


class TestLatencyBreakdown:
    def test_total_is_sum(self):
        parts = LatencyBreakdown(1.5, 2.5, 3.0)
        assert parts.total_ms == pytest.approx(7.0)


class TestPropagation:
    def test_same_satellite(self, graph):
        assert propagation_latency(graph, 2, 2, 0.0) == 0.0

    def test_first_in_chain_overrides_distance(self, graph):
        assert propagation_latency(graph, 0, 5, 0.0, first_in_chain=True) == 0.0

    def test_hand_division_by_light_speed(self):
        # 3000 km over one hop takes 3000/299792.458 s, about 10.007 ms.
        assert 3000.0 / SPEED_OF_LIGHT_KM_PER_MS == pytest.approx(10.00692, abs=1e-4)

    def test_uses_path_distance(self, graph):
        t = 250.0
        src, dst = 0, 5
        expected = graph.path_metrics(src, dst, t).distance_km / SPEED_OF_LIGHT_KM_PER_MS
        assert propagation_latency(graph, src, dst, t) == pytest.approx(expected)


class TestTransmission:
    def test_zero_output(self, graph):
        svc = make_light("m", output_bits=0.0)
        assert transmission_latency(graph, svc, 0, 1) == 0.0

    def test_direct_division(self, graph):
        svc = make_light("m", output_bits=1000.0)
        u, v = 0, graph.neighbors(0)[0]
        rate = graph.link_rate(u, v)
        assert transmission_latency(graph, svc, u, v) == pytest.approx(1000.0 / rate)

    def test_colocated_is_free(self, graph):
        svc = make_light("m", output_bits=1e9)
        assert transmission_latency(graph, svc, 3, 3) == 0.0

    def test_bottleneck_rate_on_path(self):
        graph = make_graph()
        slow = make_graph(link_rate=1000.0)
        # Replace one link on the 0->..->5 path with a slow link.
        from satdeploy.constellation import build_walker_star

        slow = build_walker_star(
            planes=2, per_plane=3, altitude_km=780.0, inclination_deg=86.4,
            angular_velocity_deg_per_ms=6e-5, capacities=(4.0,),
            compute_speed=1000.0, link_rate=1000.0,
            link_rate_overrides={tuple(slow.shortest_path(0, 5)[:2]): 100.0},
        )
        svc = make_light("m", output_bits=500.0)
        assert transmission_latency(slow, svc, 0, 5) == pytest.approx(5.0)


class TestProcessing:
    def test_direct_formula(self, graph):
        svc = make_light("m", compute_bits=100.0)
        assert processing_latency(svc, graph, 0) == pytest.approx(0.1)

    def test_random_values_match_recompute(self, graph):
        rng = np.random.default_rng(5)
        for _ in range(50):
            bits = float(rng.uniform(1, 1e6))
            svc = make_light("m", compute_bits=bits)
            host = int(rng.integers(0, graph.size))
            expected = bits / graph.nodes[host].compute_speed
            assert processing_latency(svc, graph, host) == pytest.approx(expected)


class TestChainLatency:
    def test_single_element_chain(self, graph, app):
        latency = chain_latency(graph, app, ["prepare"], [2], 0.0)
        assert latency == pytest.approx(
            processing_latency(app.services["prepare"], graph, 2))

    def test_colocated_pair_has_no_link_terms(self, graph, app):
        latency = chain_latency(graph, app, ["prepare", "encode"], [4, 4], 0.0)
        expected = (processing_latency(app.services["prepare"], graph, 4)
                    + processing_latency(app.services["encode"], graph, 4))
        assert latency == pytest.approx(expected)

    def test_matches_timeline_oracle(self, graph, app):
        rng = np.random.default_rng(6)
        chain = ["prepare", "encode", "backbone"]
        for _ in range(100):
            placement = [int(s) for s in rng.integers(0, graph.size, len(chain))]
            t = float(rng.uniform(0, 1e6))
            mine = chain_latency(graph, app, chain, placement, t)
            ref = timeline_chain_latency(graph, app, chain, placement, t)
            assert mine == pytest.approx(ref, rel=1e-12)

    def test_fan_in_takes_last_arrival(self, graph):
        # Two sources feed a sink; the sink's link terms follow the slower one.
        fast = make_light("fast", compute_bits=10.0, output_bits=100.0)
        slow = make_light("slow", compute_bits=5000.0, output_bits=900.0)
        sink = make_light("sink", compute_bits=10.0)
        app = AppGraph(
            [fast, slow, sink],
            [("fast", "sink"), ("slow", "sink")],
            {"main": [fast.name, sink.name]},
        )
        total, parts = chain_latency_breakdown(
            graph, app, ["fast", "slow", "sink"], [0, 5, 0], 0.0)
        # slow sits far away and finishes later, so the sink pays slow's link.
        expected_tr = transmission_latency(graph, slow, 5, 0)
        assert parts[2].transmission_ms == pytest.approx(expected_tr)
        assert total == pytest.approx(sum(p.total_ms for p in parts))

    def test_missing_placement_rejected(self, graph, app):
        with pytest.raises(ValueError):
            chain_latency(graph, app, ["prepare", "encode"], [0], 0.0)

    def test_monotone_in_compute_and_output(self, graph):
        def build(bits, out):
            a = make_light("a", compute_bits=bits, output_bits=out)
            b = make_light("b")
            return AppGraph([a, b], [("a", "b")], {"main": ["a", "b"]})

        base = build(100.0, 200.0)
        heavier = build(200.0, 400.0)
        placement = [0, 5]
        assert (chain_latency(graph, heavier, ["a", "b"], placement, 0.0)
                > chain_latency(graph, base, ["a", "b"], placement, 0.0))


class TestCosts:
    def make_services(self):
        return [make_light("a", prices=(2.0, 1.0, 0.5))]

    def test_all_zero_schedule(self):
        services = self.make_services()
        light = np.zeros((3, 1, 4), dtype=int)
        assert cost_light_deploy(light, services) == 0.0
        assert cost_light_keep(light, services) == 0.0
        assert cost_light_parallel(light, services) == 0.0

    def test_constant_schedule_has_no_deploy_cost(self):
        services = self.make_services()
        light = np.full((4, 1, 3), 2, dtype=int)
        assert cost_light_deploy(light, services) == 0.0

    def test_two_slot_hand_example(self):
        services = self.make_services()
        light = np.zeros((2, 1, 1), dtype=int)
        light[0, 0, 0] = 1
        light[1, 0, 0] = 3
        assert cost_light_deploy(light, services) == pytest.approx(4.0)
        assert cost_light_keep(light, services) == pytest.approx(4.0)
        assert cost_light_parallel(light, services) == pytest.approx(2.0)

    def test_slot_zero_not_charged_for_deploy(self):
        services = self.make_services()
        light = np.zeros((2, 1, 1), dtype=int)
        light[0, 0, 0] = 5
        assert cost_light_deploy_slot(light, services, 0) == 0.0

    def test_core_cost(self):
        from conftest import make_core

        services = [make_core("c", prices=(10.0, 2.0, 0.0))]
        core = np.zeros((1, 4), dtype=int)
        core[0, 1] = 1
        # deploy once plus upkeep across five slots
        assert cost_core(core, services, 5) == pytest.approx(10.0 + 5 * 2.0)

    def test_price_homogeneity(self):
        light = np.array([[[1, 2]], [[3, 0]]], dtype=int)
        base = [make_light("a", prices=(2.0, 1.0, 0.5))]
        scaled = [make_light("a", prices=(6.0, 3.0, 1.5))]
        for fn in (cost_light_deploy, cost_light_keep, cost_light_parallel):
            assert fn(light, scaled) == pytest.approx(3.0 * fn(light, base))

    def test_costs_nonnegative_random(self):
        rng = np.random.default_rng(13)
        services = [make_light("a"), make_light("b")]
        for _ in range(50):
            light = rng.integers(0, 5, (3, 2, 4))
            for fn in (cost_light_deploy, cost_light_keep, cost_light_parallel):
                assert fn(light, services) >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            cost_light_keep(np.zeros((2, 3, 4)), self.make_services())
