"""
Cleanup Engine

The gridworld state machine: geometry, waste and apple dynamics, movement and
the clean/pick action effects. One EnvState is mutated by one caller at a time;
separate states share nothing.

Grid layout (defaults): river rows on top, open ground in the middle, orchard
at the bottom. The river is impassable; agents clean it from bank cells within
reach. River and orchard are far enough apart that no cell reaches both.
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import (
    AgentLookupError, ConfigurationError, LifecycleError, ProtocolError, Violation
)
from app.core.identity import identity_economics
from app.core.teams import team_manager
from app.models.env_model import (
    MOVE_DELTAS, Action, ActionKind, AgentOutcome, AgentRecord, Cell, Direction,
    EnvConfig, EnvState, Observation, Region, StepOutcome, TeamEvent, TeamRegistry,
    TeamSizeBucket
)
from app.utils.rng_utils import make_generator

logger = logging.getLogger(__name__)

POLLUTION_BINS = 5


@dataclass(frozen=True)
class GridGeometry:
    """Precomputed region masks for one configuration."""
    height: int
    width: int
    reach: int
    river_first: int
    river_last: int
    orchard_first: int
    orchard_last: int
    bank_mask: np.ndarray
    open_cells: Tuple[Cell, ...]

    @property
    def river_cells(self) -> int:
        return (self.river_last - self.river_first + 1) * self.width

    def is_river(self, row: int) -> bool:
        return self.river_first <= row <= self.river_last

    def region_of(self, row: int, col: int) -> Region:
        if self.orchard_first <= row <= self.orchard_last:
            return Region.ORCHARD
        if self.bank_mask[row, col]:
            return Region.RIVER_BANK
        return Region.OPEN

    def window(self, row: int, col: int) -> Tuple[int, int, int, int]:
        """Row/col bounds of the Chebyshev reach square, clipped to the grid."""
        return (
            max(0, row - self.reach),
            min(self.height, row + self.reach + 1),
            max(0, col - self.reach),
            min(self.width, col + self.reach + 1),
        )


@lru_cache(maxsize=64)
def geometry_for(config: EnvConfig) -> GridGeometry:
    """Region masks for a (validated) configuration."""
    river = np.zeros((config.height, config.width), dtype=bool)
    river[config.river_rows[0]:config.river_rows[1] + 1, :] = True

    # Open cells with a river cell inside the reach square.
    bank = np.zeros_like(river)
    for r in range(config.height):
        if config.is_river_row(r) or config.is_orchard_row(r):
            continue
        if any(config.is_river_row(rr) for rr in range(r - config.reach_radius, r + config.reach_radius + 1)):
            bank[r, :] = True

    return GridGeometry(
        height=config.height,
        width=config.width,
        reach=config.reach_radius,
        river_first=config.river_rows[0],
        river_last=config.river_rows[1],
        orchard_first=config.orchard_rows[0],
        orchard_last=config.orchard_rows[1],
        bank_mask=bank,
        open_cells=tuple(config.open_cells()),
    )


def validate_env_config(config: EnvConfig) -> List[Violation]:
    """Every violated EnvConfig invariant, named by document key."""
    problems: List[Violation] = []

    def check(ok: bool, name: str, constraint: str) -> None:
        if not ok:
            problems.append(Violation(name, constraint))

    check(config.width >= 1, "width", "width ≥ 1")
    check(config.height >= 1, "height", "height ≥ 1")
    for name, (first, last) in (("riverRows", config.river_rows), ("orchardRows", config.orchard_rows)):
        check(0 <= first <= last < config.height, name, f"{name} must satisfy 0 ≤ first ≤ last < height")
    check(config.reach_radius >= 1, "reachRadius", "reachRadius ≥ 1")
    check(config.river_rows[1] < config.orchard_rows[0], "riverRows", "riverRows must lie above orchardRows")
    gap = config.orchard_rows[0] - config.river_rows[1] - 1
    check(
        gap >= 2 * config.reach_radius,
        "orchardRows",
        "riverRows and orchardRows must be separated by ≥ 2·reachRadius rows",
    )

    check(config.num_agents >= 1, "numAgents", "numAgents ≥ 1")
    spawnable = len(config.open_cells())
    check(
        config.num_agents <= spawnable,
        "numAgents",
        f"numAgents ≤ number of open-ground cells ({spawnable})",
    )
    check(config.episode_length >= 1, "episodeLength", "episodeLength ≥ 1")

    check(0.0 <= config.waste_spawn_prob <= 1.0, "wasteSpawnProb", "wasteSpawnProb ∈ [0,1]")
    check(0.0 <= config.apple_spawn_max <= 1.0, "appleSpawnMax", "appleSpawnMax ∈ [0,1]")
    check(0.0 < config.depletion_threshold <= 1.0, "depletionThreshold", "depletionThreshold ∈ (0,1]")
    check(0.0 <= config.initial_pollution <= 1.0, "initialPollution", "initialPollution ∈ [0,1]")
    check(config.apple_reward >= 0.0, "appleReward", "appleReward ≥ 0")

    check(config.base_clean_capacity >= 1, "baseCleanCapacity", "baseCleanCapacity ≥ 1")
    check(config.base_harvest_capacity >= 1, "baseHarvestCapacity", "baseHarvestCapacity ≥ 1")
    check(
        config.cleaner_clean_capacity >= config.base_clean_capacity,
        "cleanerCleanCapacity",
        "cleanerCleanCapacity ≥ baseCleanCapacity",
    )
    check(
        config.picker_harvest_capacity >= config.base_harvest_capacity,
        "pickerHarvestCapacity",
        "pickerHarvestCapacity ≥ baseHarvestCapacity",
    )

    check(0.0 <= config.identity_ratio <= 1.0, "identityRatio", "identityRatio ∈ [0,1]")
    check(config.identity_utility_bonus >= 0.0, "identityUtilityBonus", "identityUtilityBonus ≥ 0")
    check(config.identity_utility_cost >= 0.0, "identityUtilityCost", "identityUtilityCost ≥ 0")

    check(config.switch_interval >= 0, "switchInterval", "switchInterval ≥ 0")
    check(config.max_switches is None or config.max_switches >= 0, "maxSwitches", "maxSwitches ≥ 0")
    check(config.lock_step is None or config.lock_step >= 0, "lockStep", "lockStep ≥ 0")
    check(0 <= config.seed < 2 ** 64, "seed", "seed ∈ [0, 2^64)")
    return problems


class CleanupEngine:
    """Cleanup with hidden identities and dynamic teams."""

    def new_env(self, config: EnvConfig, seed: Optional[int] = None) -> EnvState:
        """
        Create the initial state of an episode.

        Args:
            config: Environment configuration; invariants are checked here
            seed: 64-bit seed, defaults to config.seed

        Returns:
            State at step 0: waste at the initial pollution level, no apples,
            agents on distinct open cells, identities assigned, everyone solo.
        """
        problems = validate_env_config(config)
        if problems:
            raise ConfigurationError(problems)

        geometry = geometry_for(config)
        rng = make_generator(config.seed if seed is None else seed)

        waste = np.zeros((config.height, config.width), dtype=bool)
        river_view = waste[geometry.river_first:geometry.river_last + 1]
        initial_waste = round(config.initial_pollution * geometry.river_cells)
        if initial_waste:
            flat = rng.choice(geometry.river_cells, size=initial_waste, replace=False)
            river_view.flat[np.sort(flat)] = True

        picks = rng.choice(len(geometry.open_cells), size=config.num_agents, replace=False)
        identities = identity_economics.assign_identities(config.num_agents, config.identity_ratio, rng)
        agents = [
            AgentRecord(agent_id=i, row=geometry.open_cells[int(p)][0], col=geometry.open_cells[int(p)][1],
                        identity=identities[i])
            for i, p in enumerate(picks)
        ]

        return EnvState(
            step=0,
            waste=waste,
            apples=np.zeros_like(waste),
            agents=agents,
            registry=TeamRegistry.all_solo(config.num_agents),
            rng=rng,
        )

    @staticmethod
    def pollution_level(state: EnvState, config: EnvConfig) -> float:
        """Fraction of river cells holding waste."""
        return int(state.waste.sum()) / geometry_for(config).river_cells

    @staticmethod
    def apple_spawn_probability(pollution: float, config: EnvConfig) -> float:
        """Per-cell apple spawn probability: p_max·(1 − d/θ), zero at or above θ."""
        if pollution >= config.depletion_threshold:
            return 0.0
        return config.apple_spawn_max * max(0.0, 1.0 - pollution / config.depletion_threshold)

    def step(self, state: EnvState, config: EnvConfig, actions: Sequence[Action]) -> Tuple[EnvState, StepOutcome]:
        """
        Advance one step. The state is updated in place and returned.

        Phases: team changes, movement (random order), clean/pick (same order),
        waste drift and spawn, apple spawn, reward sharing, identity shaping.
        """
        n = config.num_agents
        if len(actions) != n:
            raise ProtocolError(f"Expected {n} actions, got {len(actions)}")
        if state.step >= config.episode_length:
            raise LifecycleError(f"Episode finished at step {state.step}; create a new environment")
        for agent_id, action in enumerate(actions):
            if action.kind is ActionKind.CHOOSE_TEAM and not 0 <= action.slot <= n:
                raise ProtocolError(f"Agent {agent_id} chose team slot {action.slot} outside 0..{n}")

        geometry = geometry_for(config)

        # (1) team changes, agent-index order
        registry = state.registry
        events: List[TeamEvent] = []
        accepted: List[Optional[bool]] = [None] * n
        for agent_id, action in enumerate(actions):
            if action.kind is not ActionKind.CHOOSE_TEAM:
                continue
            from_slot = registry.slots[agent_id]
            ok, registry = team_manager.propose_team_change(agent_id, action.slot, state.step, registry, config)
            accepted[agent_id] = ok
            events.append(TeamEvent(state.step, agent_id, from_slot, action.slot, ok))
        state.registry = registry

        # (2) movement
        order = [int(i) for i in state.rng.permutation(n)]
        occupied = state.occupied()
        for agent_id in order:
            delta = MOVE_DELTAS.get(actions[agent_id].kind)
            if delta is None:
                continue
            agent = state.agents[agent_id]
            target = (agent.row + delta[0], agent.col + delta[1])
            if not (0 <= target[0] < geometry.height and 0 <= target[1] < geometry.width):
                continue
            if geometry.is_river(target[0]) or target in occupied:
                continue
            occupied.discard(agent.position)
            occupied.add(target)
            agent.row, agent.col = target

        # (3) clean / pick
        harvested = [0] * n
        cleaned = [0] * n
        for agent_id in order:
            kind = actions[agent_id].kind
            if kind is ActionKind.CLEAN:
                cleaned[agent_id] = self.apply_clean(state.agents[agent_id], state, config)
            elif kind is ActionKind.PICK:
                harvested[agent_id] = self.apply_pick(state.agents[agent_id], state, config)

        # (4) waste
        if config.waste_drift:
            self._drift_waste(state, geometry)
        waste_spawned = self._spawn_waste(state, config, geometry)

        # (5) apples
        pollution = self.pollution_level(state, config)
        apples_spawned = self._spawn_apples(state, config, geometry, pollution)

        # (6) material rewards, shared inside teams
        raw = [harvested[i] * config.apple_reward for i in range(n)]
        shared = team_manager.share_rewards(raw, registry)

        # (7) identity utility, private
        outcomes = []
        for agent_id, agent in enumerate(state.agents):
            outcome = AgentOutcome(
                raw_material_reward=raw[agent_id],
                material_reward=shared[agent_id],
                shaping_reward=0.0,
                apples_harvested=harvested[agent_id],
                waste_cleaned=cleaned[agent_id],
                team_change_accepted=accepted[agent_id],
            )
            shaping = identity_economics.identity_utility(agent.identity, outcome, config)
            if shaping:
                outcome = replace(outcome, shaping_reward=shaping)
            outcomes.append(outcome)

            agent.material_total += outcome.material_reward
            agent.shaping_total += outcome.shaping_reward
            agent.last_harvested = outcome.apples_harvested
            agent.last_cleaned = outcome.waste_cleaned

        state.step += 1
        return state, StepOutcome(
            agents=tuple(outcomes),
            pollution_level=pollution,
            apples_spawned=apples_spawned,
            waste_spawned=waste_spawned,
            team_events=tuple(events),
            resolution_order=tuple(order),
        )

    def apply_clean(self, agent: AgentRecord, state: EnvState, config: EnvConfig) -> int:
        """Remove up to the agent's clean capacity of waste in reach; returns count."""
        capacity = identity_economics.effect_magnitude(agent.identity, ActionKind.CLEAN, config)
        targets = self._nearest_in_reach(state.waste, agent, geometry_for(config), capacity)
        for row, col in targets:
            state.waste[row, col] = False
        return len(targets)

    def apply_pick(self, agent: AgentRecord, state: EnvState, config: EnvConfig) -> int:
        """Harvest up to the agent's harvest capacity of apples in reach; returns count."""
        capacity = identity_economics.effect_magnitude(agent.identity, ActionKind.PICK, config)
        targets = self._nearest_in_reach(state.apples, agent, geometry_for(config), capacity)
        for row, col in targets:
            state.apples[row, col] = False
        return len(targets)

    def observe(self, state: EnvState, agent_id: int, config: EnvConfig) -> Observation:
        """
        Ego-centric observation for one agent.

        Args:
            state: Current state
            agent_id: Observing agent
            config: Environment configuration

        Returns:
            Region, counts in reach, bucketed pollution and team size, switch
            readiness, last-step effects and nearest waste/apple directions.
            The identity of any agent is never included.
        """
        if not 0 <= agent_id < len(state.agents):
            raise AgentLookupError(f"Unknown agent id {agent_id}")

        geometry = geometry_for(config)
        agent = state.agents[agent_id]
        r0, r1, c0, c1 = geometry.window(agent.row, agent.col)
        pollution = self.pollution_level(state, config)
        wait = team_manager.steps_until_switch_allowed(agent_id, state.step, state.registry, config)

        return Observation(
            region=geometry.region_of(agent.row, agent.col),
            apples_in_reach=int(state.apples[r0:r1, c0:c1].sum()),
            waste_in_reach=int(state.waste[r0:r1, c0:c1].sum()),
            pollution_bin=min(int(pollution * POLLUTION_BINS), POLLUTION_BINS - 1),
            team_size_bucket=TeamSizeBucket.of(state.registry.team_size(agent_id)),
            switch_ready=wait == 0,
            last_harvested=agent.last_harvested,
            last_cleaned=agent.last_cleaned,
            waste_direction=self._nearest_direction(state.waste, agent),
            apple_direction=self._nearest_direction(state.apples, agent),
        )

    def run_actions(
        self, config: EnvConfig, seed: int, action_rows: Sequence[Sequence[Action]]
    ) -> Tuple[EnvState, List[StepOutcome]]:
        """Re-simulate an episode prefix from its seed and recorded actions."""
        state = self.new_env(config, seed)
        outcomes = []
        for actions in action_rows:
            state, outcome = self.step(state, config, actions)
            outcomes.append(outcome)
        return state, outcomes

    @staticmethod
    def _nearest_in_reach(grid: np.ndarray, agent: AgentRecord, geometry: GridGeometry, capacity: int) -> List[Cell]:
        """Up to `capacity` set cells in reach, nearest first, row-major ties."""
        r0, r1, c0, c1 = geometry.window(agent.row, agent.col)
        found = np.argwhere(grid[r0:r1, c0:c1])
        if not len(found):
            return []
        ranked = sorted(
            (max(abs(r0 + dr - agent.row), abs(c0 + dc - agent.col)), r0 + int(dr), c0 + int(dc))
            for dr, dc in found
        )
        return [(r, c) for _, r, c in ranked[:capacity]]

    @staticmethod
    def _nearest_direction(grid: np.ndarray, agent: AgentRecord) -> Direction:
        cells = np.argwhere(grid)
        if not len(cells):
            return (0, 0)
        distance = np.maximum(np.abs(cells[:, 0] - agent.row), np.abs(cells[:, 1] - agent.col))
        row, col = cells[int(np.argmin(distance))]
        return (int(np.sign(row - agent.row)), int(np.sign(col - agent.col)))

    @staticmethod
    def _drift_waste(state: EnvState, geometry: GridGeometry) -> None:
        """River current: waste moves one row toward the bank when that cell is clean."""
        for row in range(geometry.river_last - 1, geometry.river_first - 1, -1):
            moving = state.waste[row] & ~state.waste[row + 1]
            state.waste[row + 1] |= moving
            state.waste[row] &= ~moving

    @staticmethod
    def _spawn_waste(state: EnvState, config: EnvConfig, geometry: GridGeometry) -> int:
        """With wasteSpawnProb, one uniformly chosen clean river cell turns to waste."""
        roll = state.rng.random()
        if roll >= config.waste_spawn_prob:
            return 0
        river = state.waste[geometry.river_first:geometry.river_last + 1]
        clean = np.flatnonzero(~river)
        if not len(clean):
            return 0
        river.flat[clean[int(state.rng.integers(len(clean)))]] = True
        return 1

    def _spawn_apples(self, state: EnvState, config: EnvConfig, geometry: GridGeometry, pollution: float) -> int:
        """Each empty orchard cell independently grows an apple."""
        probability = self.apple_spawn_probability(pollution, config)
        orchard = state.apples[geometry.orchard_first:geometry.orchard_last + 1]
        rolls = state.rng.random(orchard.shape)
        grown = ~orchard & (rolls < probability)
        orchard |= grown
        return int(grown.sum())


# Global engine instance
cleanup_engine = CleanupEngine()
