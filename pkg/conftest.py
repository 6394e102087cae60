"""
Shared pytest fixtures for the Identity Cleanup test suite.
"""

import os
import sys
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.core.cleanup_engine import cleanup_engine  # noqa: E402
from app.models.agent_model import LearnerParams, PolicyKind, PolicySpec  # noqa: E402
from app.models.env_model import (  # noqa: E402
    Action, ActionKind, Cell, EnvConfig, EnvState, Identity
)
from app.models.experiment_model import ExperimentSpec  # noqa: E402

STAY = Action(ActionKind.STAY)


def place(
    config: EnvConfig,
    positions: Sequence[Cell],
    identities: Sequence[Identity],
    waste: Iterable[Cell] = (),
    apples: Iterable[Cell] = (),
    seed: int = 0,
) -> EnvState:
    """A fresh state with agents, waste and apples put exactly where a test wants them."""
    state = cleanup_engine.new_env(config, seed)
    state.waste[:] = False
    state.apples[:] = False
    for cell in waste:
        state.waste[cell] = True
    for cell in apples:
        state.apples[cell] = True
    for agent, cell, identity in zip(state.agents, positions, identities):
        agent.row, agent.col = cell
        agent.identity = identity
    return state


def stay(n: int) -> List[Action]:
    return [STAY] * n


def scripted_spec(
    kinds: Sequence[str],
    team_slots: Optional[Sequence[Optional[int]]] = None,
    seeds: Sequence[int] = (0,),
    episodes: int = 1,
    **env_overrides,
) -> ExperimentSpec:
    slots = list(team_slots) if team_slots is not None else [None] * len(kinds)
    env = EnvConfig(num_agents=len(kinds), **env_overrides)
    return ExperimentSpec(
        env=env,
        policies=[PolicySpec(kind=PolicyKind(k), team_slot=s) for k, s in zip(kinds, slots)],
        episodes=episodes,
        seeds=list(seeds),
    )


@pytest.fixture
def default_config() -> EnvConfig:
    return EnvConfig()


@pytest.fixture
def clean_config() -> EnvConfig:
    """Defaults with a clean river that stays put and stays clean."""
    return EnvConfig(initial_pollution=0.0, waste_spawn_prob=0.0, waste_drift=False)


@pytest.fixture
def wide_reach_config() -> EnvConfig:
    """Reach 2, so a bank cell sees ten river cells and an orchard cell up to 25 orchard cells."""
    return EnvConfig(
        height=12,
        orchard_rows=(7, 11),
        reach_radius=2,
        initial_pollution=0.0,
        waste_spawn_prob=0.0,
        waste_drift=False,
        apple_spawn_max=0.0,
    )


@pytest.fixture
def micro_config() -> EnvConfig:
    """Pollution-free 5x5 orchard with one picker."""
    return EnvConfig(
        width=5,
        height=5,
        river_rows=(0, 0),
        orchard_rows=(3, 4),
        num_agents=1,
        episode_length=100,
        waste_spawn_prob=0.0,
        initial_pollution=0.0,
        apple_spawn_max=0.1,
        identity_ratio=0.0,
        picker_harvest_capacity=1,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def learner_params() -> LearnerParams:
    return LearnerParams()
