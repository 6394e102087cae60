"""
Tests for the Cleanup engine: initial state, pollution and apple growth,
movement, clean/pick effects, observations and step-level invariants.
"""

import math
from dataclasses import fields

import numpy as np
import pytest

from app.core.cleanup_engine import cleanup_engine, geometry_for, validate_env_config
from app.core.errors import (
    AgentLookupError, ConfigurationError, LifecycleError, ProtocolError
)
from app.models.env_model import (
    BASE_ACTIONS, Action, ActionKind, EnvConfig, Identity, Observation, Region, TeamSizeBucket
)
from conftest import place, stay

C = Identity.RIVER_CLEANER
P = Identity.APPLE_PICKER
STAY_ACTION = Action(ActionKind.STAY)


def random_actions(rng: np.random.Generator, n: int, with_teams: bool = True):
    pool = list(BASE_ACTIONS)
    if with_teams:
        pool += [Action.choose_team(s) for s in range(n + 1)]
    return [pool[int(rng.integers(len(pool)))] for _ in range(n)]


class TestNewEnv:
    def test_initial_pollution_rounds_to_nearest_cell_count(self, default_config):
        state = cleanup_engine.new_env(default_config, 7)
        assert geometry_for(default_config).river_cells == 54
        assert int(state.waste.sum()) == round(0.4 * 54) == 22

    def test_zero_initial_pollution_means_clean_river(self):
        state = cleanup_engine.new_env(EnvConfig(initial_pollution=0.0), 3)
        assert state.waste_cells() == set()

    def test_initial_state_layout(self, default_config):
        state = cleanup_engine.new_env(default_config, 11)
        assert state.step == 0
        assert state.apple_cells() == set()
        positions = [a.position for a in state.agents]
        assert len(set(positions)) == len(positions)
        assert all(not default_config.is_river_row(r) and not default_config.is_orchard_row(r) for r, _ in positions)
        assert state.registry.slots == [0, 0, 0, 0]
        assert sorted(a.identity for a in state.agents).count(C) == 2

    def test_same_seed_gives_identical_state(self, default_config):
        a = cleanup_engine.new_env(default_config, 99)
        b = cleanup_engine.new_env(default_config, 99)
        assert a.fingerprint() == b.fingerprint()
        assert cleanup_engine.new_env(default_config, 100).fingerprint() != a.fingerprint()

    def test_seed_defaults_to_config_seed(self):
        config = EnvConfig(seed=42)
        assert cleanup_engine.new_env(config).fingerprint() == cleanup_engine.new_env(config, 42).fingerprint()

    def test_invalid_config_names_the_field(self):
        with pytest.raises(ConfigurationError) as exc:
            cleanup_engine.new_env(EnvConfig(orchard_rows=(3, 9)), 0)
        assert "orchardRows" in exc.value.fields

    def test_validation_lists_every_violation(self):
        config = EnvConfig(depletion_threshold=0.0, cleaner_clean_capacity=0, num_agents=500)
        names = {v.field for v in validate_env_config(config)}
        assert {"depletionThreshold", "cleanerCleanCapacity", "numAgents"} <= names

    def test_default_config_is_valid(self, default_config):
        assert validate_env_config(default_config) == []


class TestPollutionAndGrowth:
    @pytest.mark.parametrize("waste, expected", [(0, 0.0), (54, 1.0), (27, 0.5)])
    def test_pollution_level(self, default_config, waste, expected):
        state = cleanup_engine.new_env(default_config, 0)
        state.waste[:] = False
        river = state.waste[0:3]
        river.flat[:waste] = True
        assert cleanup_engine.pollution_level(state, default_config) == expected

    @pytest.mark.parametrize("pollution, expected", [(0.4, 0.0), (0.0, 0.05), (0.2, 0.025)])
    def test_apple_spawn_probability(self, default_config, pollution, expected):
        assert cleanup_engine.apple_spawn_probability(pollution, default_config) == pytest.approx(expected)

    def test_spawn_probability_monotone_and_zero_past_threshold(self, default_config):
        levels = np.linspace(0.0, 1.0, 101)
        probs = [cleanup_engine.apple_spawn_probability(float(d), default_config) for d in levels]
        assert all(a >= b for a, b in zip(probs, probs[1:]))
        assert all(p == 0.0 for d, p in zip(levels, probs) if d >= default_config.depletion_threshold)

    def test_no_apples_while_pollution_at_or_above_threshold(self):
        config = EnvConfig(episode_length=10_000)
        state = cleanup_engine.new_env(config, 5)
        spawned = 0
        for _ in range(10_000):
            state, outcome = cleanup_engine.step(state, config, stay(4))
            assert outcome.pollution_level >= config.depletion_threshold
            spawned += outcome.apples_spawned
        assert spawned == 0

    def test_spawn_rate_at_zero_pollution_matches_p_max(self, clean_config):
        config = clean_config.model_copy(update={"episode_length": 10_000})
        state = cleanup_engine.new_env(config, 21)
        orchard_cells = int(geometry_for(config).orchard_last - geometry_for(config).orchard_first + 1) * config.width
        spawned = 0
        for _ in range(10_000):
            state.apples[:] = False
            state, outcome = cleanup_engine.step(state, config, stay(4))
            spawned += outcome.apples_spawned

        trials = orchard_cells * 10_000
        p = config.apple_spawn_max
        standard_error = math.sqrt(p * (1 - p) / trials)
        assert abs(spawned / trials - p) <= 3 * standard_error

    def test_spawn_rate_at_partial_pollution_follows_linear_law(self, clean_config):
        config = clean_config.model_copy(update={"episode_length": 10_000})
        state = cleanup_engine.new_env(config, 34)
        state.waste[0, :11] = True
        geometry = geometry_for(config)
        pollution = 11 / geometry.river_cells
        orchard_cells = (geometry.orchard_last - geometry.orchard_first + 1) * config.width
        spawned = 0
        for _ in range(10_000):
            state.apples[:] = False
            state, outcome = cleanup_engine.step(state, config, stay(4))
            assert outcome.pollution_level == pytest.approx(pollution)
            spawned += outcome.apples_spawned

        trials = orchard_cells * 10_000
        p = cleanup_engine.apple_spawn_probability(pollution, config)
        assert 0.0 < p < config.apple_spawn_max
        standard_error = math.sqrt(p * (1 - p) / trials)
        assert abs(spawned / trials - p) <= 3 * standard_error

    def test_waste_spawns_one_cell_per_step_at_probability_one(self, clean_config):
        config = clean_config.model_copy(update={"waste_spawn_prob": 1.0})
        state = cleanup_engine.new_env(config, 2)
        for expected in range(1, 6):
            state, outcome = cleanup_engine.step(state, config, stay(4))
            assert outcome.waste_spawned == 1
            assert int(state.waste.sum()) == expected

    def test_river_current_moves_waste_toward_bank(self):
        config = EnvConfig(initial_pollution=0.0, waste_spawn_prob=0.0)
        state = place(config, [(4, 0), (4, 1), (4, 2), (4, 3)], [P, P, P, P], waste=[(0, 9)])
        state, _ = cleanup_engine.step(state, config, stay(4))
        assert state.waste_cells() == {(1, 9)}
        state, _ = cleanup_engine.step(state, config, stay(4))
        assert state.waste_cells() == {(2, 9)}
        state, _ = cleanup_engine.step(state, config, stay(4))
        assert state.waste_cells() == {(2, 9)}

    def test_river_current_waits_behind_waste(self):
        config = EnvConfig(initial_pollution=0.0, waste_spawn_prob=0.0)
        state = place(config, [(4, 0), (4, 1), (4, 2), (4, 3)], [P, P, P, P], waste=[(1, 5), (2, 5)])
        state, _ = cleanup_engine.step(state, config, stay(4))
        assert state.waste_cells() == {(1, 5), (2, 5)}


class TestStep:
    def test_single_apple_pick_pays_solo_agent(self, clean_config):
        state = place(clean_config, [(5, 3), (3, 10), (3, 12), (3, 14)], [C, P, P, P], apples=[(6, 3)])
        actions = [Action(ActionKind.PICK)] + stay(3)
        state, outcome = cleanup_engine.step(state, clean_config, actions)
        assert outcome.agents[0].apples_harvested == 1
        assert outcome.agents[0].material_reward == 1.0
        assert state.agents[0].material_total == 1.0

    def test_same_state_and_actions_give_identical_successor(self, default_config, rng):
        state = cleanup_engine.new_env(default_config, 4)
        for _ in range(20):
            state, _ = cleanup_engine.step(state, default_config, random_actions(rng, 4))
        twin = state.clone()
        actions = random_actions(rng, 4)
        a, outcome_a = cleanup_engine.step(state, default_config, actions)
        b, outcome_b = cleanup_engine.step(twin, default_config, actions)
        assert a.fingerprint() == b.fingerprint()
        assert outcome_a == outcome_b

    def test_action_count_must_match(self, default_config):
        state = cleanup_engine.new_env(default_config, 0)
        with pytest.raises(ProtocolError):
            cleanup_engine.step(state, default_config, stay(3))

    def test_team_slot_out_of_range(self, default_config):
        state = cleanup_engine.new_env(default_config, 0)
        with pytest.raises(ProtocolError):
            cleanup_engine.step(state, default_config, [Action.choose_team(5)] + stay(3))

    def test_stepping_finished_episode(self):
        config = EnvConfig(episode_length=2)
        state = cleanup_engine.new_env(config, 0)
        for _ in range(2):
            state, _ = cleanup_engine.step(state, config, stay(4))
        with pytest.raises(LifecycleError):
            cleanup_engine.step(state, config, stay(4))

    def test_moves_into_river_walls_and_agents_become_stay(self, clean_config):
        positions = [(3, 0), (4, 0), (4, 1), (3, 17)]
        state = place(clean_config, positions, [C, C, P, P])
        actions = [
            Action(ActionKind.MOVE_UP),     # river
            Action(ActionKind.MOVE_UP),     # occupied by agent 0
            Action(ActionKind.MOVE_LEFT),   # occupied by agent 1
            Action(ActionKind.MOVE_RIGHT),  # wall
        ]
        state, _ = cleanup_engine.step(state, clean_config, actions)
        assert [a.position for a in state.agents] == positions

    def test_team_change_applies_to_this_steps_sharing(self, clean_config):
        state = place(clean_config, [(5, 3), (3, 10), (3, 12), (3, 14)], [C, P, P, P], apples=[(6, 3)])
        state, _ = cleanup_engine.step(state, clean_config, [Action.choose_team(2)] + stay(3))
        actions = [Action(ActionKind.PICK), Action.choose_team(2), Action.choose_team(2), STAY_ACTION]
        state, outcome = cleanup_engine.step(state, clean_config, actions)
        assert [a.material_reward for a in outcome.agents] == pytest.approx([1 / 3, 1 / 3, 1 / 3, 0.0])
        assert [e.accepted for e in outcome.team_events] == [True, True]
        assert outcome.agents[1].team_change_accepted is True
        assert outcome.agents[3].team_change_accepted is None

    def test_mass_balance_and_region_confinement(self, default_config, rng):
        config = default_config.model_copy(update={"initial_pollution": 0.1})
        state = cleanup_engine.new_env(config, 8)
        for _ in range(400):
            waste_before = int(state.waste.sum())
            apples_before = int(state.apples.sum())
            state, outcome = cleanup_engine.step(state, config, random_actions(rng, 4))

            assert int(state.waste.sum()) - waste_before == outcome.waste_spawned - outcome.waste_cleaned
            assert int(state.apples.sum()) - apples_before == outcome.apples_spawned - outcome.apples_harvested
            assert all(config.is_river_row(r) for r, _ in state.waste_cells())
            assert all(config.is_orchard_row(r) for r, _ in state.apple_cells())
            positions = [a.position for a in state.agents]
            assert len(set(positions)) == 4
            assert not any(config.is_river_row(r) for r, _ in positions)
            for agent, effect in zip(state.agents, outcome.agents):
                cap = 3
                assert effect.waste_cleaned <= (cap if agent.identity is C else 1)
                assert effect.apples_harvested <= (cap if agent.identity is P else 1)

    def test_run_actions_reproduces_trajectory(self, default_config, rng):
        rows = [random_actions(rng, 4) for _ in range(50)]
        state_a, outcomes_a = cleanup_engine.run_actions(default_config, 17, rows)
        state_b, outcomes_b = cleanup_engine.run_actions(default_config, 17, rows)
        assert state_a.fingerprint() == state_b.fingerprint()
        assert outcomes_a == outcomes_b




class TestCleanAndPick:
    def test_cleaner_removes_three_nearest_of_five(self, wide_reach_config):
        waste = [(1, 3), (1, 4), (2, 4), (2, 5), (2, 6)]
        state = place(wide_reach_config, [(3, 5), (6, 0), (6, 1), (6, 2)], [C, P, P, P], waste=waste)
        removed = cleanup_engine.apply_clean(state.agents[0], state, wide_reach_config)
        assert removed == 3
        assert state.waste_cells() == {(1, 3), (1, 4)}

    def test_base_agent_removes_one_of_five(self, wide_reach_config):
        waste = [(1, 3), (1, 4), (2, 4), (2, 5), (2, 6)]
        state = place(wide_reach_config, [(3, 5), (6, 0), (6, 1), (6, 2)], [P, P, P, P], waste=waste)
        removed = cleanup_engine.apply_clean(state.agents[0], state, wide_reach_config)
        assert removed == 1
        assert (2, 4) not in state.waste_cells()

    def test_identity_asymmetry_through_step(self, wide_reach_config):
        waste = [(1, 3), (1, 4), (2, 4), (2, 5), (2, 6)]
        for identity, expected in ((C, 3), (P, 1)):
            state = place(wide_reach_config, [(3, 5), (6, 0), (6, 1), (6, 2)], [identity, P, P, P], waste=waste)
            _, outcome = cleanup_engine.step(
                state, wide_reach_config, [Action(ActionKind.CLEAN)] + stay(3)
            )
            assert outcome.agents[0].waste_cleaned == expected

    def test_picker_asymmetry_with_apples(self, wide_reach_config):
        apples = [(8, 5), (9, 4), (9, 6), (10, 5), (7, 3)]
        for identity, expected in ((P, 3), (C, 1)):
            state = place(wide_reach_config, [(9, 5), (4, 0), (4, 1), (4, 2)], [identity, P, P, P], apples=apples)
            _, outcome = cleanup_engine.step(
                state, wide_reach_config, [Action(ActionKind.PICK)] + stay(3)
            )
            assert outcome.agents[0].apples_harvested == expected

    def test_clean_from_orchard_is_a_noop(self, default_config):
        state = cleanup_engine.new_env(default_config, 0)
        state.waste[0:3] = True
        state.agents[0].row, state.agents[0].col = 6, 3
        state.agents[0].identity = C
        assert cleanup_engine.apply_clean(state.agents[0], state, default_config) == 0
        assert int(state.waste.sum()) == 54

    def test_picker_harvests_three_of_four_row_major(self, clean_config):
        apples = [(5, 2), (5, 3), (7, 4), (6, 4)]
        state = place(clean_config, [(6, 3), (3, 10), (3, 12), (3, 14)], [P, P, P, P], apples=apples)
        assert cleanup_engine.apply_pick(state.agents[0], state, clean_config) == 3
        assert state.apple_cells() == {(7, 4)}

    def test_pick_with_nothing_in_reach(self, clean_config):
        state = place(clean_config, [(6, 3), (3, 10), (3, 12), (3, 14)], [C, P, P, P], apples=[(9, 17)])
        assert cleanup_engine.apply_pick(state.agents[0], state, clean_config) == 0

    @pytest.mark.parametrize("seed", range(20))
    def test_contended_apple_goes_to_first_in_resolution_order(self, clean_config, seed):
        config = clean_config.model_copy(update={"apple_spawn_max": 0.0})
        state = place(config, [(5, 3), (5, 5), (3, 10), (3, 12)], [C, C, P, P], apples=[(6, 4)], seed=seed)
        actions = [Action(ActionKind.PICK), Action(ActionKind.PICK), STAY_ACTION, STAY_ACTION]
        state, outcome = cleanup_engine.step(state, config, actions)
        harvested = [a.apples_harvested for a in outcome.agents]
        assert sum(harvested) == 1
        assert state.apple_cells() == set()
        first = next(i for i in outcome.resolution_order if i in (0, 1))
        assert harvested[first] == 1


class TestObserve:
    def test_observation_carries_last_clean_effect(self, wide_reach_config):
        waste = [(1, 3), (1, 4), (2, 4), (2, 5), (2, 6)]
        state = place(wide_reach_config, [(3, 5), (6, 0), (6, 1), (6, 2)], [C, P, P, P], waste=waste)
        state, _ = cleanup_engine.step(state, wide_reach_config, [Action(ActionKind.CLEAN)] + stay(3))
        observation = cleanup_engine.observe(state, 0, wide_reach_config)
        assert observation.last_cleaned == 3
        assert observation.last_harvested == 0

    def test_solo_agent_and_clean_river(self, clean_config):
        state = cleanup_engine.new_env(clean_config, 1)
        observation = cleanup_engine.observe(state, 2, clean_config)
        assert observation.team_size_bucket is TeamSizeBucket.SOLO
        assert observation.pollution_bin == 0
        assert observation.switch_ready is True

    def test_full_pollution_is_top_bin(self):
        config = EnvConfig(initial_pollution=1.0)
        state = cleanup_engine.new_env(config, 1)
        assert cleanup_engine.observe(state, 0, config).pollution_bin == 4

    def test_unknown_agent(self, default_config):
        state = cleanup_engine.new_env(default_config, 0)
        with pytest.raises(AgentLookupError):
            cleanup_engine.observe(state, 4, default_config)

    def test_regions(self, clean_config):
        state = place(clean_config, [(3, 0), (4, 0), (6, 0), (9, 17)], [C, C, P, P])
        regions = [cleanup_engine.observe(state, i, clean_config).region for i in range(4)]
        assert regions == [Region.RIVER_BANK, Region.OPEN, Region.ORCHARD, Region.ORCHARD]

    def test_directions(self, clean_config):
        state = place(clean_config, [(3, 5), (4, 0), (4, 1), (4, 2)], [C, P, P, P], waste=[(0, 9)], apples=[(7, 5)])
        observation = cleanup_engine.observe(state, 0, clean_config)
        assert observation.waste_direction == (-1, 1)
        assert observation.apple_direction == (1, 0)
        state.waste[:] = False
        assert cleanup_engine.observe(state, 0, clean_config).waste_direction == (0, 0)

    def test_identity_never_observable(self, default_config):
        assert not any("identity" in f.name for f in fields(Observation))
        state = cleanup_engine.new_env(default_config, 6)
        before = [cleanup_engine.observe(state, i, default_config) for i in range(4)]
        for agent in state.agents:
            agent.identity = P if agent.identity is C else C
        after = [cleanup_engine.observe(state, i, default_config) for i in range(4)]
        assert before == after
