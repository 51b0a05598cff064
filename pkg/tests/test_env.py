import numpy as np
import pytest

from satdeploy.env import (
    CorePlacementEnv,
    DeploymentEnv,
    EnvConfig,
    InfeasibleSchemeError,
    ensure_completeness,
    evaluate_schedule,
    realize_scenario,
    realize_slot,
    scheme_feasible,
)
from satdeploy.perf import (
    cost_light_deploy_slot,
    cost_light_keep_slot,
    cost_light_parallel_slot,
)
from satdeploy.workload import RequestScenario

from conftest import make_app, make_graph


def stage2_env(graph, app, scenario, core, phi=2, realization="adversary",
               slots=None, **kwargs):
    config = EnvConfig(
        slots=slots or scenario.slots,
        qos_bound_ms=kwargs.pop("qos_bound_ms", 200.0),
        phi=phi,
        realization=realization,
        **kwargs,
    )
    return DeploymentEnv(graph, app, scenario, core, config)


class TestEnvConfig:
    def test_sign_constraints(self):
        with pytest.raises(ValueError):
            EnvConfig(slots=1, qos_bound_ms=10.0, step_violation_reward=1.0)
        with pytest.raises(ValueError):
            EnvConfig(slots=1, qos_bound_ms=10.0, qos_violation_weight=0.0)
        with pytest.raises(ValueError):
            EnvConfig(slots=1, qos_bound_ms=10.0, step_success_reward=-1.0)

    def test_bad_realization(self):
        with pytest.raises(ValueError):
            EnvConfig(slots=1, qos_bound_ms=10.0, realization="weird")


class TestSchemeFeasible:
    def test_empty_light_fails_completeness(self, app, graph, core_scheme):
        capacities = np.array([n.capacities for n in graph.nodes])
        report = scheme_feasible(core_scheme, np.zeros((2, 6), dtype=int), app,
                                 capacities)
        assert not report
        assert not report.light_complete
        assert report.core_complete

    def test_valid_scheme_passes(self, app, graph, core_scheme):
        capacities = np.array([n.capacities for n in graph.nodes])
        y = np.zeros((2, 6), dtype=int)
        y[0, 2] = 1
        y[1, 4] = 2
        report = scheme_feasible(core_scheme, y, app, capacities)
        assert report.ok

    def test_randomised_against_direct_inequalities(self, app, graph, core_scheme):
        rng = np.random.default_rng(14)
        capacities = np.array([n.capacities for n in graph.nodes])
        core_demands = np.array([m.demands for m in app.core])
        light_demands = np.array([m.demands for m in app.light])
        for _ in range(100):
            y = rng.integers(0, 12, (2, 6))
            core = np.zeros((2, 6), dtype=np.int64)
            for i in range(2):
                core[i, rng.integers(0, 6)] = rng.integers(0, 2)
            report = scheme_feasible(core, y, app, capacities)
            complete = ((core.sum(axis=1) >= 1).all(), (y.sum(axis=1) >= 1).all())
            core_ok = True
            both_ok = True
            for d in range(6):
                core_use = core_demands.T @ core[:, d]
                light_use = light_demands.T @ y[:, d]
                if (core_use > capacities[d]).any():
                    core_ok = False
                if (core_use + light_use > capacities[d]).any():
                    both_ok = False
            assert report.core_complete == complete[0]
            assert report.light_complete == complete[1]
            assert report.core_within_capacity == core_ok
            assert report.light_within_capacity == both_ok


class TestEnsureCompleteness:
    def test_adds_missing_instance(self, app, graph, core_scheme):
        capacities = np.array([n.capacities for n in graph.nodes])
        y = np.zeros((2, 6), dtype=np.int64)
        y[0, 3] = 2
        fixed = ensure_completeness(y, app, core_scheme, capacities)
        assert fixed[1].sum() == 1
        assert fixed[1, 0] == 1
        np.testing.assert_array_equal(fixed[0], y[0])

    def test_noop_when_complete(self, app, graph, core_scheme):
        capacities = np.array([n.capacities for n in graph.nodes])
        y = np.ones((2, 6), dtype=np.int64)
        np.testing.assert_array_equal(
            ensure_completeness(y, app, core_scheme, capacities), y)


class TestStage1:
    def test_episode_places_all_cores(self, app, graph):
        config = EnvConfig(slots=1, qos_bound_ms=200.0)
        env = CorePlacementEnv(graph, app, config)
        state = env.reset()
        assert state.shape == (app.num_core * graph.size + 1,)
        total_reward = 0.0
        state, reward, done, info = env.step(0)
        assert info["placed"]
        assert reward == config.place_success_reward
        state, reward, done, info = env.step(1)
        assert done
        assert info["placed"]
        assert "terminal_latency_ms" in info
        # Terminal reward folds the latency punishment into the last step.
        expected = (config.place_success_reward
                    - config.latency_weight * info["terminal_latency_ms"])
        assert reward == pytest.approx(expected)

    def test_overfull_satellite_rejected(self, graph):
        from conftest import make_core
        from satdeploy.workload import AppGraph

        heavy = make_core("heavy", demands=(3.0, 3.0, 3.0, 150.0))
        big = make_core("big", demands=(3.0, 3.0, 3.0, 150.0))
        app = AppGraph([heavy, big], [("heavy", "big")], {"main": ["heavy", "big"]})
        env = CorePlacementEnv(graph, app, EnvConfig(slots=1, qos_bound_ms=200.0))
        env.reset()
        _, reward, _, info = env.step(0)
        assert info["placed"]
        state, reward, done, info = env.step(0)
        assert not info["placed"]
        assert reward == env.config.place_violation_reward
        # The same microservice is retried, deployment count unchanged.
        assert env.placement[1].sum() == 0
        assert state[-1] == 1.0

    def test_colocated_beats_spread_placement(self, graph):
        from conftest import make_core
        from satdeploy.workload import AppGraph

        a = make_core("a", demands=(0.5, 0.5, 0.5, 10.0))
        b = make_core("b", demands=(0.5, 0.5, 0.5, 10.0))
        app = AppGraph([a, b], [("a", "b")], {"main": ["a", "b"]})
        env = CorePlacementEnv(graph, app, EnvConfig(slots=1, qos_bound_ms=200.0))
        together = np.zeros((2, graph.size), dtype=np.int64)
        together[0, 0] = 1
        together[1, 0] = 1
        apart = np.zeros((2, graph.size), dtype=np.int64)
        apart[0, 0] = 1
        apart[1, 5] = 1  # two hops away on the 2x3 grid
        assert (env.core_placement_latency(together)
                < env.core_placement_latency(apart))

    def test_truncation_after_budget(self, graph):
        from conftest import make_core
        from satdeploy.workload import AppGraph

        impossible = make_core("x", demands=(9.0, 9.0, 9.0, 999.0))
        app = AppGraph([impossible], [], {"main": ["x"]})
        env = CorePlacementEnv(graph, app,
                               EnvConfig(slots=1, qos_bound_ms=1.0,
                                         stage1_max_steps=5))
        env.reset()
        done = False
        steps = 0
        while not done:
            _, _, done, info = env.step(0)
            steps += 1
        assert steps == 5
        assert info["truncated"]


class TestStage2Reset:
    def test_zero_request_scenario(self, app, graph, core_scheme):
        scenario = RequestScenario.from_totals({"main": [0]}, 6)
        env = stage2_env(graph, app, scenario, core_scheme, phi=0)
        state = env.reset()
        marking = state[:-2].reshape(3, 6)
        assert marking.sum() == 0

    def test_row_zero_matches_nominal_totals(self, app, graph, core_scheme,
                                             scenario):
        env = stage2_env(graph, app, scenario, core_scheme)
        state = env.reset()
        row0 = state[:6]
        assert row0.sum() == 55

    def test_reset_deterministic(self, app, graph, core_scheme, scenario):
        env = stage2_env(graph, app, scenario, core_scheme, realization="sample")
        first = env.reset(seed=9)
        second = env.reset(seed=9)
        np.testing.assert_array_equal(first, second)

    def test_infeasible_core_rejected(self, app, graph, scenario):
        core = np.zeros((app.num_core, graph.size), dtype=np.int64)
        with pytest.raises(InfeasibleSchemeError):
            stage2_env(graph, app, scenario, core)

    def test_state_vector_lengths(self, app, graph, core_scheme, scenario):
        env = stage2_env(graph, app, scenario, core_scheme)
        state = env.reset()
        assert state.shape == ((1 + app.num_light) * graph.size + 2,)
        assert env.adversary_state().shape == ((1 + app.num_light) * graph.size + 1,)


class TestProtagonistStep:
    def test_zero_action_on_empty_satellites(self, app, graph, core_scheme,
                                             scenario):
        env = stage2_env(graph, app, scenario, core_scheme)
        env.reset()
        _, reward, _, info = env.protagonist_step(np.zeros(6, dtype=int))
        assert not info["violated"]
        assert info["step_reward"] == env.config.step_success_reward

    def test_action_bounds_enforced(self, app, graph, core_scheme, scenario):
        env = stage2_env(graph, app, scenario, core_scheme)
        env.reset()
        with pytest.raises(ValueError):
            env.protagonist_step(np.full(6, 4, dtype=int))
        with pytest.raises(ValueError):
            env.protagonist_step(np.zeros(5, dtype=int))

    def test_overfull_action_clipped_and_punished(self, graph, scenario):
        from conftest import make_core, make_light
        from satdeploy.workload import AppGraph

        # Light copies so heavy that two never fit beside the core load.
        bulky = make_light("bulky", demands=(3.0, 3.0, 0.0, 100.0))
        core = make_core("backbone", demands=(2.0, 2.0, 2.0, 80.0))
        app = AppGraph([bulky, core], [("bulky", "backbone")],
                       {"main": ["bulky", "backbone"]})
        core_scheme = np.zeros((1, 6), dtype=np.int64)
        core_scheme[0, 0] = 1
        env = stage2_env(graph, app, scenario, core_scheme)
        env.reset()
        action = np.zeros(6, dtype=int)
        action[0] = 3  # satellite 0 only has room for zero bulky copies
        state, reward, done, info = env.protagonist_step(action)
        assert info["violated"]
        assert info["step_reward"] == env.config.step_violation_reward
        assert info["applied"][0] == 0

    def test_slot_reward_uses_single_slot_costs(self, app, graph, core_scheme,
                                                scenario):
        env = stage2_env(graph, app, scenario, core_scheme)
        env.reset()
        action = np.ones(6, dtype=int)
        _, _, _, first = env.protagonist_step(action)
        assert first["slot_reward"] == 0.0
        _, _, _, second = env.protagonist_step(action)
        light = env.light_schedule
        expected = env.config.slot_cost_weight * (
            cost_light_deploy_slot(light, app.light, 0)
            + cost_light_keep_slot(light, app.light, 0)
            + cost_light_parallel_slot(light, app.light, 0)
        )
        assert second["slot_reward"] == pytest.approx(expected)

    def test_full_episode_terminal_reward_hand_check(self, app, graph,
                                                     core_scheme):
        scenario = RequestScenario.from_totals({"main": [6]}, 6)
        env = stage2_env(graph, app, scenario, core_scheme, phi=0, slots=1)
        env.reset()
        action = np.ones(6, dtype=int)
        env.protagonist_step(action)
        _, reward, done, info = env.protagonist_step(action)
        assert done
        light = env.light_schedule
        total_cost = (
            cost_light_deploy_slot(light, app.light, 0)
            + cost_light_keep_slot(light, app.light, 0)
            + cost_light_parallel_slot(light, app.light, 0)
        )
        # Six copies of each serve sixty requests; six realized tasks pass QoS.
        expected_terminal = env.config.total_cost_weight * total_cost
        assert info["terminal_reward"] == pytest.approx(expected_terminal)

    def test_reward_decomposition_exact(self, app, graph, core_scheme, scenario):
        rng = np.random.default_rng(20)
        env = stage2_env(graph, app, scenario, core_scheme)
        for _ in range(20):
            env.reset()
            done = False
            while not done:
                _, reward, done, info = env.protagonist_step(
                    rng.integers(0, 4, 6))
            for record in env.trajectory:
                assert record.reward == (record.step_reward + record.slot_reward
                                         + record.terminal_reward)


class TestAdversary:
    def test_zero_perturbation_keeps_nominal(self, app, graph, core_scheme,
                                             scenario):
        env = stage2_env(graph, app, scenario, core_scheme)
        env.reset()
        env.adversary_step(np.zeros(6, dtype=int))
        np.testing.assert_array_equal(env.realized_region_tasks(0),
                                      scenario.region_tasks(0))

    def test_bound_violation_rejected(self, app, graph, core_scheme, scenario):
        env = stage2_env(graph, app, scenario, core_scheme, phi=2)
        env.reset()
        action = np.zeros(6, dtype=int)
        action[3] = 3
        with pytest.raises(ValueError):
            env.adversary_step(action)

    def test_only_at_slot_boundary(self, app, graph, core_scheme, scenario):
        env = stage2_env(graph, app, scenario, core_scheme)
        env.reset()
        env.protagonist_step(np.zeros(6, dtype=int))
        with pytest.raises(RuntimeError):
            env.adversary_step(np.zeros(6, dtype=int))

    def test_clamps_at_zero(self, app, graph, core_scheme):
        scenario = RequestScenario.from_totals({"main": [1]}, 6)
        env = stage2_env(graph, app, scenario, core_scheme, slots=1)
        env.reset()
        env.adversary_step(np.full(6, -2, dtype=int))
        assert (env.realized_region_tasks(0) >= 0).all()
        assert env.realized_region_tasks(0).sum() == 0

    def test_slot_identity_exact(self, app, graph, core_scheme, scenario):
        rng = np.random.default_rng(21)
        env = stage2_env(graph, app, scenario, core_scheme)
        for _ in range(10):
            env.reset()
            done = False
            step = 0
            rewards_by_slot = {}
            while not done:
                if step % app.num_light == 0:
                    env.adversary_step(rng.integers(-2, 3, 6))
                _, reward, done, info = env.protagonist_step(rng.integers(0, 4, 6))
                rewards_by_slot.setdefault(info["slot"], []).append(reward)
                step += 1
            for slot, rewards in rewards_by_slot.items():
                assert env.adversary_reward(slot) == -sum(rewards)

    def test_adversary_reward_returned_on_next_call(self, app, graph,
                                                    core_scheme, scenario):
        rng = np.random.default_rng(22)
        env = stage2_env(graph, app, scenario, core_scheme)
        env.reset()
        _, first = env.adversary_step(np.zeros(6, dtype=int))
        assert first == 0.0
        rewards = []
        for _ in range(app.num_light):
            _, r, _, _ = env.protagonist_step(rng.integers(0, 4, 6))
            rewards.append(r)
        _, settled = env.adversary_step(np.zeros(6, dtype=int))
        assert settled == -sum(rewards)

    def test_adversary_sees_previous_round_marking(self, app, graph, core_scheme,
                                                   scenario):
        env = stage2_env(graph, app, scenario, core_scheme)
        env.reset()
        env.adversary_step(np.zeros(6, dtype=int))
        before = env.adversary_state()
        for _ in range(app.num_light):
            env.protagonist_step(np.full(6, 2, dtype=int))
        # The marking now holds slot-zero deployments the adversary must not see.
        state = env.adversary_state()
        deployment_rows = state[6:-1]
        assert deployment_rows.sum() == 0
        current = env.protagonist_state()[6:-2]
        assert current.sum() > 0


class TestRealization:
    def test_worst_case_adds_width_everywhere(self, scenario):
        realized = realize_slot(scenario, 0, "worst_case", 2)
        np.testing.assert_array_equal(
            realized["main"], scenario.chain_tasks["main"][0] + 2)

    def test_sample_stays_in_box(self, scenario):
        rng = np.random.default_rng(1)
        for t in range(scenario.slots):
            realized = realize_slot(scenario, t, "sample", 2, rng=rng)
            delta = realized["main"] - scenario.chain_tasks["main"][t]
            assert (delta <= 2).all()
            assert (realized["main"] >= 0).all()

    def test_nominal_identity(self, scenario):
        realized = realize_scenario(scenario, scenario.slots, "nominal", 2)
        for t in range(scenario.slots):
            np.testing.assert_array_equal(realized[t]["main"],
                                          scenario.chain_tasks["main"][t])


class TestEvaluateSchedule:
    def test_ample_capacity_processes_everything(self, app, graph, core_scheme,
                                                 scenario):
        light = np.full((5, 2, 6), 2, dtype=np.int64)
        realized = realize_scenario(scenario, 5, "worst_case", 2)
        report = evaluate_schedule(graph, app, core_scheme, light, realized,
                                   qos_bound_ms=200.0)
        for slot in report.slots:
            assert slot.processed == slot.realized_total
            assert slot.unserved == 0
        assert report.all_feasible

    def test_capacity_shortage_counts_unserved(self, app, graph, core_scheme):
        scenario = RequestScenario.from_totals({"main": [30]}, 6)
        light = np.zeros((1, 2, 6), dtype=np.int64)
        light[0, :, 0] = 1  # capacity ten per microservice
        realized = realize_scenario(scenario, 1, "nominal", 0)
        report = evaluate_schedule(graph, app, core_scheme, light, realized,
                                   qos_bound_ms=200.0)
        assert report.slots[0].processed == 10
        assert report.slots[0].unserved == 20
        assert report.slots[0].qos_violations >= 20

    def test_missing_instances_serve_nothing(self, app, graph, core_scheme):
        scenario = RequestScenario.from_totals({"main": [5]}, 6)
        light = np.zeros((1, 2, 6), dtype=np.int64)
        light[0, 0, 0] = 1  # second microservice absent
        realized = realize_scenario(scenario, 1, "nominal", 0)
        report = evaluate_schedule(graph, app, core_scheme, light, realized,
                                   qos_bound_ms=200.0)
        assert report.slots[0].processed == 0
        assert not report.slots[0].feasible
