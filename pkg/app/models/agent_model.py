"""
Data Models for Agents

Policy specifications as parsed from the [agents] section, learner
hyperparameters and the transition record fed to learners.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field
from pydantic.alias_generators import to_camel

from app.models.env_model import Action, Observation


class PolicyKind(str, Enum):
    """Available policy kinds."""
    GREEDY_CLEANER = "greedy_cleaner"
    GREEDY_PICKER = "greedy_picker"
    RANDOM = "random"
    Q_LEARNER = "q_learner"

    @property
    def scripted(self) -> bool:
        return self is not PolicyKind.Q_LEARNER


class LearnerParams(BaseModel):
    """Tabular Q-learning hyperparameters."""

    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True, extra="forbid", frozen=True)

    learning_rate: float = 0.1
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.8
    allow_team_choice: bool = False
    team_choice_slots: List[int] = Field(default_factory=lambda: [0, 1, 2])

    def epsilon_at(self, episode: int, total_episodes: int) -> float:
        """Linear decay from epsilon_start to epsilon_end over the decay window."""
        window = self.epsilon_decay_fraction * total_episodes
        if window <= 0:
            return self.epsilon_end
        progress = min(1.0, episode / window)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * progress


class PolicySpec(BaseModel):
    """Policy assignment for one agent."""

    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True, extra="forbid", frozen=True)

    kind: PolicyKind = PolicyKind.Q_LEARNER
    team_slot: Optional[int] = None  # scripted agents join this slot each episode
    learner: LearnerParams = Field(default_factory=LearnerParams)


@dataclass(frozen=True)
class Transition:
    """One learner experience tuple."""
    observation: Observation
    action: Action
    reward: float
    next_observation: Observation
    terminal: bool
