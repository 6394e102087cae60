"""
Data Models for the Cleanup Environment

This module defines the configuration model, the mutable simulation state and
the value types exchanged between the engine, the policies and the harness.
EnvConfig is a pydantic model (it is parsed from user documents); the state
and per-step types are plain dataclasses because they sit on the hot path.
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from pydantic.alias_generators import to_camel

Cell = Tuple[int, int]
Direction = Tuple[int, int]


class ActionKind(str, Enum):
    """Kinds of agent actions."""
    MOVE_UP = "move_up"
    MOVE_DOWN = "move_down"
    MOVE_LEFT = "move_left"
    MOVE_RIGHT = "move_right"
    STAY = "stay"
    CLEAN = "clean"
    PICK = "pick"
    CHOOSE_TEAM = "choose_team"


MOVE_DELTAS: Dict[ActionKind, Tuple[int, int]] = {
    ActionKind.MOVE_UP: (-1, 0),
    ActionKind.MOVE_DOWN: (1, 0),
    ActionKind.MOVE_LEFT: (0, -1),
    ActionKind.MOVE_RIGHT: (0, 1),
}


@dataclass(frozen=True)
class Action:
    """One agent action. `slot` is only meaningful for CHOOSE_TEAM (0 = solo)."""
    kind: ActionKind
    slot: int = 0

    @property
    def label(self) -> str:
        if self.kind is ActionKind.CHOOSE_TEAM:
            return f"{self.kind.value}:{self.slot}"
        return self.kind.value

    @classmethod
    def parse(cls, label: str) -> "Action":
        kind, _, slot = label.partition(":")
        return cls(ActionKind(kind), int(slot) if slot else 0)

    @classmethod
    def choose_team(cls, slot: int) -> "Action":
        return cls(ActionKind.CHOOSE_TEAM, slot)


# Movement, Stay, Clean and Pick; the fixed order defines learner action indices.
BASE_ACTIONS: Tuple[Action, ...] = (
    Action(ActionKind.MOVE_UP),
    Action(ActionKind.MOVE_DOWN),
    Action(ActionKind.MOVE_LEFT),
    Action(ActionKind.MOVE_RIGHT),
    Action(ActionKind.STAY),
    Action(ActionKind.CLEAN),
    Action(ActionKind.PICK),
)


class Identity(str, Enum):
    """Hidden social categories."""
    RIVER_CLEANER = "river_cleaner"
    APPLE_PICKER = "apple_picker"

    @property
    def letter(self) -> str:
        return "C" if self is Identity.RIVER_CLEANER else "P"


@dataclass(frozen=True)
class IdentityProfile:
    """Action capacities and the norm-conforming action of one identity."""
    clean_capacity: int
    harvest_capacity: int
    conforming_action: ActionKind


class Region(str, Enum):
    """Where an agent stands, as reported in observations."""
    RIVER_BANK = "river_bank"
    OPEN = "open"
    ORCHARD = "orchard"


class TeamSizeBucket(str, Enum):
    """Coarse team size reported in observations."""
    SOLO = "1"
    SMALL = "2-3"
    LARGE = "4+"

    @classmethod
    def of(cls, size: int) -> "TeamSizeBucket":
        if size <= 1:
            return cls.SOLO
        if size <= 3:
            return cls.SMALL
        return cls.LARGE


class EnvConfig(BaseModel):
    """All tunable environment, identity, team and reward parameters."""

    model_config = ConfigDict(
        alias_generator=to_camel,
        populate_by_name=True,
        extra="forbid",
        frozen=True,
    )

    # Geometry
    width: int = 18
    height: int = 10
    river_rows: Tuple[int, int] = (0, 2)
    orchard_rows: Tuple[int, int] = (5, 9)
    num_agents: int = 4
    episode_length: int = 1000

    # Waste and apple dynamics
    waste_spawn_prob: float = 0.5
    waste_drift: bool = True
    apple_spawn_max: float = 0.05
    depletion_threshold: float = 0.4
    initial_pollution: float = 0.4
    apple_reward: float = 1.0

    # Action effects
    reach_radius: int = 1
    base_clean_capacity: int = 1
    cleaner_clean_capacity: int = 3
    base_harvest_capacity: int = 1
    picker_harvest_capacity: int = 3

    # Identity
    identity_ratio: float = 0.5
    identity_utility_bonus: float = 0.0
    identity_utility_cost: float = 0.0

    # Teams
    switch_interval: int = 25
    max_switches: Optional[int] = None
    lock_step: Optional[int] = None

    seed: int = 0

    @model_validator(mode="after")
    def _default_initial_pollution(self) -> "EnvConfig":
        """initialPollution defaults to the depletion threshold."""
        # Left out of model_fields_set, so copies rebuilt from set fields follow θ.
        if "initial_pollution" not in self.model_fields_set:
            object.__setattr__(self, "initial_pollution", self.depletion_threshold)
        return self

    def explicit_values(self) -> Dict[str, Any]:
        """Only the values a caller or document set, keyed by document names."""
        return self.model_dump(by_alias=True, exclude_unset=True)

    # Region helpers
    def is_river_row(self, row: int) -> bool:
        return self.river_rows[0] <= row <= self.river_rows[1]

    def is_orchard_row(self, row: int) -> bool:
        return self.orchard_rows[0] <= row <= self.orchard_rows[1]

    def open_cells(self) -> List[Cell]:
        """Open-ground cells in row-major order (the spawnable cells)."""
        return [
            (r, c)
            for r in range(self.height)
            if not self.is_river_row(r) and not self.is_orchard_row(r)
            for c in range(self.width)
        ]

    def echo(self) -> Dict[str, Any]:
        """Effective values keyed by their document names."""
        return self.model_dump(mode="json", by_alias=True)

    def config_hash(self) -> str:
        """Short stable hash of the effective configuration."""
        canonical = json.dumps(self.echo(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass
class AgentRecord:
    """
    One agent's position, hidden identity and running totals.

    Team membership and switch history live in the environment's TeamRegistry,
    indexed by agent_id.
    """
    agent_id: int
    row: int
    col: int
    identity: Identity
    material_total: float = 0.0
    shaping_total: float = 0.0
    last_harvested: int = 0
    last_cleaned: int = 0

    @property
    def position(self) -> Cell:
        return (self.row, self.col)


@dataclass
class TeamRegistry:
    """Team slot per agent (0 = solo) plus per-agent change counters."""
    slots: List[int]
    last_change_step: List[Optional[int]]
    change_count: List[int]

    @classmethod
    def all_solo(cls, num_agents: int) -> "TeamRegistry":
        return cls([0] * num_agents, [None] * num_agents, [0] * num_agents)

    @property
    def num_agents(self) -> int:
        return len(self.slots)

    def members(self, slot: int) -> List[int]:
        return [i for i, s in enumerate(self.slots) if s == slot]

    def team_size(self, agent_id: int) -> int:
        slot = self.slots[agent_id]
        if slot == 0:
            return 1
        return self.slots.count(slot)

    def copy(self) -> "TeamRegistry":
        return TeamRegistry(list(self.slots), list(self.last_change_step), list(self.change_count))


@dataclass
class EnvState:
    """Full simulation state: grids, agents, team registry and generator."""
    step: int
    waste: np.ndarray
    apples: np.ndarray
    agents: List[AgentRecord]
    registry: TeamRegistry
    rng: np.random.Generator

    def waste_cells(self) -> Set[Cell]:
        return {(int(r), int(c)) for r, c in np.argwhere(self.waste)}

    def apple_cells(self) -> Set[Cell]:
        return {(int(r), int(c)) for r, c in np.argwhere(self.apples)}

    def occupied(self) -> Set[Cell]:
        return {a.position for a in self.agents}

    def clone(self) -> "EnvState":
        return copy.deepcopy(self)

    def fingerprint(self) -> str:
        """SHA-256 over everything that determines future evolution."""
        digest = hashlib.sha256()
        digest.update(str(self.step).encode())
        digest.update(np.packbits(self.waste).tobytes())
        digest.update(np.packbits(self.apples).tobytes())
        for agent in self.agents:
            digest.update(
                f"{agent.agent_id},{agent.row},{agent.col},{agent.identity.value},"
                f"{agent.material_total!r},{agent.shaping_total!r},"
                f"{agent.last_harvested},{agent.last_cleaned};".encode()
            )
        digest.update(repr((self.registry.slots, self.registry.last_change_step, self.registry.change_count)).encode())
        digest.update(repr(self.rng.bit_generator.state).encode())
        return digest.hexdigest()


@dataclass(frozen=True)
class Observation:
    """
    Ego-centric feature bundle for one agent.

    Never carries an identity label. `key()` is the tabular learner state key.
    """
    region: Region
    apples_in_reach: int
    waste_in_reach: int
    pollution_bin: int
    team_size_bucket: TeamSizeBucket
    switch_ready: bool
    last_harvested: int
    last_cleaned: int
    waste_direction: Direction = (0, 0)
    apple_direction: Direction = (0, 0)

    def key(self) -> Tuple:
        return (
            self.region.value,
            self.apples_in_reach,
            self.waste_in_reach,
            self.pollution_bin,
            self.team_size_bucket.value,
            int(self.switch_ready),
            self.last_harvested,
            self.last_cleaned,
            self.waste_direction,
            self.apple_direction,
        )


@dataclass(frozen=True)
class AgentOutcome:
    """Per-agent slice of a StepOutcome."""
    raw_material_reward: float
    material_reward: float
    shaping_reward: float
    apples_harvested: int
    waste_cleaned: int
    team_change_accepted: Optional[bool] = None

    @property
    def total_reward(self) -> float:
        return self.material_reward + self.shaping_reward


@dataclass(frozen=True)
class TeamEvent:
    """One ChooseTeam proposal and its resolution."""
    step: int
    agent_id: int
    from_slot: int
    to_slot: int
    accepted: bool


@dataclass(frozen=True)
class StepOutcome:
    """Everything one step produced."""
    agents: Tuple[AgentOutcome, ...]
    pollution_level: float
    apples_spawned: int
    waste_spawned: int
    team_events: Tuple[TeamEvent, ...] = field(default_factory=tuple)
    resolution_order: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def apples_harvested(self) -> int:
        return sum(a.apples_harvested for a in self.agents)

    @property
    def waste_cleaned(self) -> int:
        return sum(a.waste_cleaned for a in self.agents)

    @property
    def material_reward(self) -> float:
        total = 0.0
        for a in self.agents:
            total += a.material_reward
        return total
