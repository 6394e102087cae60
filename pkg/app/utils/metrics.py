"""
Cooperation and Team Metrics

Pure functions over EpisodeLog values: collective return, inequality,
identity conformance and team dynamics. Everything is recomputable from a log
alone, and a log is recomputable from (config, seed, actions).
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.cleanup_engine import cleanup_engine
from app.core.teams import TeamCompositionStats, team_manager
from app.models.env_model import Identity, TeamRegistry
from app.models.experiment_model import EpisodeLog, EpisodeMetrics, StepRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TeamDynamicsSummary:
    """Switching activity and team structure over one episode."""
    accepted_changes: Tuple[int, ...]
    rejected_changes: Tuple[int, ...]
    size_histogram: Dict[int, float]
    mean_team_size: float
    final_composition: TeamCompositionStats
    mix_timeline: Tuple[Tuple[int, Dict[str, int]], ...] = field(default_factory=tuple)

    @property
    def total_accepted(self) -> int:
        return sum(self.accepted_changes)

    @property
    def total_rejected(self) -> int:
        return sum(self.rejected_changes)


class MetricsCalculator:
    """Episode-level metrics."""

    @staticmethod
    def collective_return(log: EpisodeLog) -> float:
        """Total material reward of all agents; identity shaping excluded."""
        total = 0.0
        for record in log.records:
            for outcome in record.outcome.agents:
                total += outcome.material_reward
        return total

    @staticmethod
    def per_agent_material(log: EpisodeLog) -> List[float]:
        """Material reward totals per agent, accumulated in step order."""
        totals = [0.0] * log.num_agents
        for record in log.records:
            for agent_id, outcome in enumerate(record.outcome.agents):
                totals[agent_id] += outcome.material_reward
        return totals

    @staticmethod
    def gini(values: Sequence[float]) -> float:
        """
        Gini coefficient Σᵢ Σⱼ |xᵢ − xⱼ| / (2n Σx).

        Args:
            values: Non-empty, non-negative totals

        Returns:
            Value in [0, 1); 0 when every value is zero.
        """
        x = np.asarray(values, dtype=float)
        if x.size == 0:
            raise ValueError("gini needs at least one value")
        if np.any(x < 0):
            raise ValueError("gini is defined for non-negative values only")
        total = x.sum()
        if total == 0:
            return 0.0
        return float(np.abs(x[:, None] - x[None, :]).sum() / (2 * x.size * total))

    @staticmethod
    def identity_conformance_rate(log: EpisodeLog) -> Dict[int, float]:
        """
        Share of each agent's productive steps spent on its conforming action.

        Agents that never cleaned or harvested anything are absent.
        """
        productive = [0] * log.num_agents
        conforming = [0] * log.num_agents
        for record in log.records:
            for agent_id, outcome in enumerate(record.outcome.agents):
                if outcome.waste_cleaned == 0 and outcome.apples_harvested == 0:
                    continue
                productive[agent_id] += 1
                if log.identities[agent_id] is Identity.RIVER_CLEANER:
                    conforming[agent_id] += outcome.waste_cleaned > 0
                else:
                    conforming[agent_id] += outcome.apples_harvested > 0
        return {
            agent_id: conforming[agent_id] / productive[agent_id]
            for agent_id in range(log.num_agents)
            if productive[agent_id]
        }

    @staticmethod
    def registry_timeline(log: EpisodeLog) -> List[List[int]]:
        """Team slots in force during each step (after that step's team changes)."""
        slots = [0] * log.num_agents
        timeline = []
        for record in log.records:
            for event in record.outcome.team_events:
                if event.accepted:
                    slots[event.agent_id] = event.to_slot
            timeline.append(list(slots))
        return timeline

    def team_dynamics_summary(self, log: EpisodeLog) -> TeamDynamicsSummary:
        """
        Switch counts, time-weighted team sizes and identity mix over time.

        Args:
            log: Complete episode log

        Returns:
            Per-agent accepted and rejected change counts, the fraction of
            agent-steps spent in teams of each size, the time-averaged mean
            team size (solo agents are teams of one), the final composition and
            the identity mix at step 0 and after every accepted change.
        """
        n = log.num_agents
        accepted = [0] * n
        rejected = [0] * n
        for record in log.records:
            for event in record.outcome.team_events:
                if event.accepted:
                    accepted[event.agent_id] += 1
                else:
                    rejected[event.agent_id] += 1

        size_counts: Counter = Counter()
        mean_sizes = 0.0
        timeline = []
        previous: Optional[List[int]] = None
        for step, slots in enumerate(self.registry_timeline(log)):
            registry = TeamRegistry(slots, [None] * n, [0] * n)
            for agent_id in range(n):
                size_counts[registry.team_size(agent_id)] += 1
            teams = sum(1 for s in slots if s == 0) + len(set(s for s in slots if s > 0))
            mean_sizes += n / teams
            if slots != previous:
                stats = team_manager.team_composition_stats(registry, log.identities)
                timeline.append((step, stats.identity_mix_histogram))
                previous = slots

        steps = len(log.records)
        histogram = {size: count / (steps * n) for size, count in sorted(size_counts.items())} if steps else {1: 1.0}
        return TeamDynamicsSummary(
            accepted_changes=tuple(accepted),
            rejected_changes=tuple(rejected),
            size_histogram=histogram,
            mean_team_size=mean_sizes / steps if steps else 1.0,
            final_composition=team_manager.team_composition_stats(log.final_registry, log.identities),
            mix_timeline=tuple(timeline),
        )

    def episode_metrics(self, log: EpisodeLog, seed: int, episode: int) -> EpisodeMetrics:
        """The results.csv row for one episode."""
        dynamics = self.team_dynamics_summary(log)
        conformance = self.identity_conformance_rate(log)
        steps = len(log.records)
        pollution = 0.0
        for record in log.records:
            pollution += record.outcome.pollution_level
        return EpisodeMetrics(
            seed=seed,
            episode=episode,
            collective_return=self.collective_return(log),
            gini=self.gini(self.per_agent_material(log)),
            mean_pollution=pollution / steps if steps else 0.0,
            total_apples=sum(r.outcome.apples_harvested for r in log.records),
            total_cleaned=sum(r.outcome.waste_cleaned for r in log.records),
            team_switches_accepted=dynamics.total_accepted,
            team_switches_rejected=dynamics.total_rejected,
            mean_team_size=dynamics.mean_team_size,
            conformance_mean=sum(conformance.values()) / len(conformance) if conformance else None,
        )

    @staticmethod
    def replay_episode(log: EpisodeLog) -> EpisodeLog:
        """Re-simulate a log from its seed and actions."""
        state, outcomes = cleanup_engine.run_actions(log.config, log.seed, [r.actions for r in log.records])
        records = [
            StepRecord(step=r.step, actions=r.actions, outcome=outcome)
            for r, outcome in zip(log.records, outcomes)
        ]
        return EpisodeLog(
            config=log.config,
            seed=log.seed,
            identities=[a.identity for a in state.agents],
            records=records,
            final_registry=state.registry.copy(),
            root_seed=log.root_seed,
            episode=log.episode,
        )


# Global metrics calculator instance
metrics_calculator = MetricsCalculator()
