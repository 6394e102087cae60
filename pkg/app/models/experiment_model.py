"""
Data Models for Experiments

The experiment spec parsed from a configuration document, the per-episode log
and the metric rows and summaries produced by the harness.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field
from pydantic.alias_generators import to_camel

from app.models.agent_model import PolicySpec
from app.models.env_model import Action, EnvConfig, Identity, StepOutcome, TeamRegistry

# Bit-exact column order of results.csv.
RESULT_COLUMNS: Tuple[str, ...] = (
    "seed",
    "episode",
    "collective_return",
    "gini",
    "mean_pollution",
    "total_apples",
    "total_cleaned",
    "team_switches_accepted",
    "team_switches_rejected",
    "mean_team_size",
    "conformance_mean",
)

TIMESERIES_COLUMNS: Tuple[str, ...] = (
    "seed",
    "episode",
    "step",
    "pollution",
    "apples_spawned",
    "waste_spawned",
    "apples_harvested",
    "waste_cleaned",
    "material_reward",
    "team_changes_accepted",
)


class ExperimentSpec(BaseModel):
    """Everything needed to run a seed sweep."""

    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True, extra="forbid", frozen=True)

    env: EnvConfig = Field(default_factory=EnvConfig)
    policies: List[PolicySpec] = Field(default_factory=lambda: [PolicySpec() for _ in range(4)])
    episodes: int = 1
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: str = "results"
    write_replays: bool = False
    write_timeseries: bool = False
    snapshot_policies: bool = False
    workers: int = 1

    def echo(self) -> Dict[str, Any]:
        """Effective values, grouped like the configuration document."""
        env = self.env.echo()
        identity_keys = ("identityRatio", "identityUtilityBonus", "identityUtilityCost")
        team_keys = ("switchInterval", "maxSwitches", "lockStep")
        return {
            "env": {k: v for k, v in env.items() if k not in identity_keys + team_keys},
            "identity": {k: env[k] for k in identity_keys},
            "teams": {k: env[k] for k in team_keys},
            "agents": [p.model_dump(mode="json", by_alias=True) for p in self.policies],
            "experiment": self.model_dump(
                mode="json", by_alias=True, exclude={"env", "policies"}
            ),
            "configHash": self.env.config_hash(),
        }


@dataclass(frozen=True)
class StepRecord:
    """Actions and outcome of one step."""
    step: int
    actions: Tuple[Action, ...]
    outcome: StepOutcome


@dataclass
class EpisodeLog:
    """Everything needed to replay an episode and compute its metrics offline."""
    config: EnvConfig
    seed: int
    identities: List[Identity]
    records: List[StepRecord]
    final_registry: TeamRegistry
    root_seed: Optional[int] = None
    episode: int = 0

    @property
    def num_agents(self) -> int:
        return self.config.num_agents

    @property
    def complete(self) -> bool:
        return len(self.records) == self.config.episode_length


@dataclass(frozen=True)
class EpisodeMetrics:
    """One results.csv row."""
    seed: int
    episode: int
    collective_return: float
    gini: float
    mean_pollution: float
    total_apples: int
    total_cleaned: int
    team_switches_accepted: int
    team_switches_rejected: int
    mean_team_size: float
    conformance_mean: Optional[float]

    def row(self) -> Dict[str, Any]:
        return {column: getattr(self, column) for column in RESULT_COLUMNS}


@dataclass
class SeedResult:
    """All episode metrics of one seed plus optional per-step rows."""
    seed: int
    metrics: List[EpisodeMetrics]
    timeseries: List[Dict[str, Any]]

    @property
    def final_return(self) -> float:
        return self.metrics[-1].collective_return


class ExperimentSummary(BaseModel):
    """In-memory summary returned by run_experiment."""

    seeds: List[int]
    episodes: int
    final_returns: List[float]
    mean_collective_return: float
    std_collective_return: float
    mean_gini: float
    mean_team_size: float
    config_hash: str
    output_dir: str
    files: List[str]
