"""
Agent Policies

The per-agent policy interface, scripted baselines and an independent tabular
Q-learner. Policies only ever see Observation values, which carry no identity
labels; whatever they learn about their own specialization comes from the
last-step effect features.
"""

import json
import logging
from abc import ABC, abstractmethod
from typing import Dict, Iterable, List, Optional, TextIO, Tuple

import numpy as np

from app.core.errors import ProtocolError
from app.models.agent_model import LearnerParams, PolicyKind, PolicySpec, Transition
from app.models.env_model import BASE_ACTIONS, Action, ActionKind, Observation, Region

logger = logging.getLogger(__name__)

StateKey = Tuple


class Policy(ABC):
    """Behavior contract shared by scripted and learning agents."""

    kind: PolicyKind

    def begin_episode(self, episode: int, total_episodes: int) -> None:
        """Called before the first step of every episode."""

    def end_episode(self) -> None:
        """Called after the last step of every episode."""

    @abstractmethod
    def act(self, observation: Observation, rng: np.random.Generator) -> Action:
        """Choose a legal action."""

    def update(self, transition: Transition) -> None:
        """Learn from one transition; scripted policies ignore it."""

    @property
    def learns(self) -> bool:
        return False


class ScriptedPolicy(Policy):
    """
    Fixed rule, optionally joining a team slot at the start of each episode.

    Observations carry no positions, so a vertical move blocked by another
    agent is detected by repetition: after STUCK_AFTER identical vertical
    moves within one region the policy side-steps once (alternating sides).
    """

    STUCK_AFTER = 3

    def __init__(self, team_slot: Optional[int] = None):
        self.team_slot = team_slot
        self._join_pending = False
        self._reset_streak()
        self._sidestep = ActionKind.MOVE_LEFT

    def _reset_streak(self) -> None:
        self._last_vertical: Optional[Tuple[ActionKind, Region]] = None
        self._streak = 0

    def begin_episode(self, episode: int, total_episodes: int) -> None:
        self._join_pending = bool(self.team_slot)
        self._reset_streak()

    def act(self, observation: Observation, rng: np.random.Generator) -> Action:
        if self._join_pending:
            self._join_pending = False
            return Action.choose_team(self.team_slot or 0)
        action = self.rule(observation, rng)
        if action.kind not in (ActionKind.MOVE_UP, ActionKind.MOVE_DOWN):
            self._reset_streak()
            return action

        current = (action.kind, observation.region)
        self._streak = self._streak + 1 if current == self._last_vertical else 1
        self._last_vertical = current
        if self._streak > self.STUCK_AFTER:
            self._reset_streak()
            self._sidestep = (
                ActionKind.MOVE_RIGHT if self._sidestep is ActionKind.MOVE_LEFT else ActionKind.MOVE_LEFT
            )
            return Action(self._sidestep)
        return action

    @abstractmethod
    def rule(self, observation: Observation, rng: np.random.Generator) -> Action:
        """The scripted decision rule."""


class GreedyCleanerPolicy(ScriptedPolicy):
    """Clean whenever waste is in reach, otherwise head for the river and patrol the bank."""

    kind = PolicyKind.GREEDY_CLEANER

    def rule(self, observation: Observation, rng: np.random.Generator) -> Action:
        if observation.waste_in_reach > 0:
            return Action(ActionKind.CLEAN)
        if observation.region is not Region.RIVER_BANK:
            return Action(ActionKind.MOVE_UP)
        dx = observation.waste_direction[1]
        if dx < 0:
            return Action(ActionKind.MOVE_LEFT)
        if dx > 0:
            return Action(ActionKind.MOVE_RIGHT)
        return Action(ActionKind.STAY)


class GreedyPickerPolicy(ScriptedPolicy):
    """Pick whenever an apple is in reach, otherwise head for the orchard and chase apples."""

    kind = PolicyKind.GREEDY_PICKER

    def rule(self, observation: Observation, rng: np.random.Generator) -> Action:
        if observation.apples_in_reach > 0:
            return Action(ActionKind.PICK)
        if observation.region is not Region.ORCHARD:
            return Action(ActionKind.MOVE_DOWN)
        dy, dx = observation.apple_direction
        if dy > 0:
            return Action(ActionKind.MOVE_DOWN)
        if dy < 0:
            return Action(ActionKind.MOVE_UP)
        if dx < 0:
            return Action(ActionKind.MOVE_LEFT)
        if dx > 0:
            return Action(ActionKind.MOVE_RIGHT)
        return Action(ActionKind.STAY)


class RandomPolicy(ScriptedPolicy):
    """Uniform over movement, Stay, Clean and Pick. Never chooses a team."""

    kind = PolicyKind.RANDOM

    def act(self, observation: Observation, rng: np.random.Generator) -> Action:
        # team_slot is ignored
        return self.rule(observation, rng)

    def rule(self, observation: Observation, rng: np.random.Generator) -> Action:
        return BASE_ACTIONS[int(rng.integers(len(BASE_ACTIONS)))]


class QTable:
    """State-key × action-index value table; rows appear on first update."""

    def __init__(self, num_actions: int, learning_rate: float, discount: float):
        if not 0.0 < learning_rate <= 1.0:
            raise ValueError(f"learning rate must be in (0, 1], got {learning_rate}")
        if not 0.0 <= discount < 1.0:
            raise ValueError(f"discount must be in [0, 1), got {discount}")
        self.num_actions = num_actions
        self.learning_rate = learning_rate
        self.discount = discount
        self.rows: Dict[StateKey, np.ndarray] = {}
        self._unseen = np.zeros(num_actions)
        self._unseen.setflags(write=False)

    def __len__(self) -> int:
        return len(self.rows)

    def values(self, key: StateKey) -> np.ndarray:
        """Values for a state; zeros (not stored) when never visited."""
        return self.rows.get(key, self._unseen)

    def update(self, key: StateKey, action_index: int, reward: float, next_key: StateKey, terminal: bool) -> float:
        """One-step Q-learning backup; returns the new value."""
        row = self.rows.get(key)
        if row is None:
            row = self.rows[key] = np.zeros(self.num_actions)
        bootstrap = 0.0 if terminal else self.discount * float(self.values(next_key).max())
        row[action_index] += self.learning_rate * (reward + bootstrap - row[action_index])
        return float(row[action_index])


class QLearningPolicy(Policy):
    """Independent ε-greedy tabular Q-learner over the observation key."""

    kind = PolicyKind.Q_LEARNER

    def __init__(self, params: LearnerParams, num_agents: int):
        self.params = params
        self.actions: List[Action] = list(BASE_ACTIONS)
        if params.allow_team_choice:
            self.actions += [Action.choose_team(s) for s in params.team_choice_slots if 0 <= s <= num_agents]
        self._index = {action: i for i, action in enumerate(self.actions)}
        self.table = QTable(len(self.actions), params.learning_rate, params.discount)
        self.epsilon = params.epsilon_start

    @property
    def learns(self) -> bool:
        return True

    def begin_episode(self, episode: int, total_episodes: int) -> None:
        self.epsilon = self.params.epsilon_at(episode, total_episodes)

    def act(self, observation: Observation, rng: np.random.Generator) -> Action:
        if rng.random() < self.epsilon:
            return self.actions[int(rng.integers(len(self.actions)))]
        # np.argmax returns the first maximum: lowest action index wins ties.
        return self.actions[int(np.argmax(self.table.values(observation.key())))]

    def update(self, transition: Transition) -> None:
        index = self._index.get(transition.action)
        if index is None:
            raise ProtocolError(f"Action {transition.action.label} is not in this learner's action set")
        self.table.update(
            transition.observation.key(),
            index,
            transition.reward,
            transition.next_observation.key(),
            transition.terminal,
        )


def make_policy(spec: PolicySpec, num_agents: int) -> Policy:
    """Build a fresh policy instance from its spec."""
    if spec.kind is PolicyKind.Q_LEARNER:
        return QLearningPolicy(spec.learner, num_agents)
    scripted = {
        PolicyKind.GREEDY_CLEANER: GreedyCleanerPolicy,
        PolicyKind.GREEDY_PICKER: GreedyPickerPolicy,
        PolicyKind.RANDOM: RandomPolicy,
    }
    return scripted[spec.kind](team_slot=spec.team_slot)


def _encode_key(key: StateKey) -> str:
    return json.dumps(list(key), separators=(",", ":"))


def _decode_key(text: str) -> StateKey:
    return tuple(tuple(part) if isinstance(part, list) else part for part in json.loads(text))


def write_snapshot(policy: QLearningPolicy, sink: TextIO) -> int:
    """
    Write a Q-table as `state-key<TAB>action<TAB>value` lines.

    Args:
        policy: Learner to snapshot
        sink: Text stream

    Returns:
        Number of lines written.
    """
    lines = 0
    for key in sorted(policy.table.rows, key=_encode_key):
        encoded = _encode_key(key)
        for action, value in zip(policy.actions, policy.table.rows[key]):
            sink.write(f"{encoded}\t{action.label}\t{float(value)!r}\n")
            lines += 1
    return lines


def load_snapshot(policy: QLearningPolicy, source: Iterable[str]) -> int:
    """Load snapshot lines into a learner's table; returns rows restored."""
    restored = 0
    for number, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        try:
            encoded, label, value = line.split("\t")
            key = _decode_key(encoded)
            index = policy._index[Action.parse(label)]
        except (ValueError, KeyError) as e:
            raise ValueError(f"Bad snapshot line {number}: {e}") from e
        row = policy.table.rows.get(key)
        if row is None:
            row = policy.table.rows[key] = np.zeros(policy.table.num_actions)
            restored += 1
        row[index] = float(value)
    return restored
