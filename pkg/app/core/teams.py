"""
Dynamic Teams

Team membership, switching rules (intervals and locks), equal reward sharing
and team composition statistics.

Slots 1..n form a fixed team namespace; slot 0 means "no team". Creating a team
is choosing an empty slot. Joining is unilateral.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from app.core.errors import AgentLookupError
from app.models.env_model import EnvConfig, Identity, TeamRegistry

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TeamEntry:
    """One occupied team (or one solo agent) and its identity mix."""
    slot: int
    size: int
    cleaners: int
    pickers: int
    members: Tuple[int, ...]

    @property
    def mix(self) -> str:
        return f"{self.cleaners}C/{self.pickers}P"


@dataclass(frozen=True)
class TeamCompositionStats:
    """Per-team entries plus population summary."""
    entries: Tuple[TeamEntry, ...]
    mean_team_size: float
    identity_mix_histogram: Dict[str, int] = field(default_factory=dict)

    @property
    def sizes(self) -> List[int]:
        return [e.size for e in self.entries]


class TeamManager:
    """Switching rules and reward sharing over a TeamRegistry."""

    @staticmethod
    def can_change(agent_id: int, target_slot: int, step: int, registry: TeamRegistry, config: EnvConfig) -> bool:
        """True iff a proposal would be accepted; does not touch the registry."""
        if target_slot == registry.slots[agent_id]:
            return False
        last = registry.last_change_step[agent_id]
        if last is not None and step - last < config.switch_interval:
            return False
        if config.max_switches is not None and registry.change_count[agent_id] >= config.max_switches:
            return False
        if config.lock_step is not None and step >= config.lock_step:
            return False
        return True

    @staticmethod
    def is_locked(agent_id: int, step: int, registry: TeamRegistry, config: EnvConfig) -> bool:
        """True when no future change can ever be accepted for this agent."""
        if config.max_switches is not None and registry.change_count[agent_id] >= config.max_switches:
            return True
        return config.lock_step is not None and step >= config.lock_step

    def steps_until_switch_allowed(self, agent_id: int, step: int, registry: TeamRegistry, config: EnvConfig) -> int:
        """0 when a change could be accepted now; -1 when locked for good."""
        if self.is_locked(agent_id, step, registry, config):
            return -1
        last = registry.last_change_step[agent_id]
        if last is None:
            return 0
        return max(0, config.switch_interval - (step - last))

    def propose_team_change(
        self,
        agent_id: int,
        target_slot: int,
        step: int,
        registry: TeamRegistry,
        config: EnvConfig,
    ) -> Tuple[bool, TeamRegistry]:
        """
        Resolve one ChooseTeam proposal.

        Args:
            agent_id: Proposing agent
            target_slot: Requested slot, 0 = leave team
            step: Current step index
            registry: Current registry (never mutated)
            config: Switching rules

        Returns:
            (accepted, registry). On rejection the same registry object is
            returned unchanged; on acceptance a new registry.
        """
        if not 0 <= agent_id < registry.num_agents:
            raise AgentLookupError(f"Unknown agent id {agent_id}")
        if not 0 <= target_slot <= registry.num_agents:
            raise ValueError(f"target slot {target_slot} outside 0..{registry.num_agents}")

        if not self.can_change(agent_id, target_slot, step, registry, config):
            logger.debug(f"Team change rejected: agent {agent_id} -> slot {target_slot} at step {step}")
            return False, registry

        updated = registry.copy()
        updated.slots[agent_id] = target_slot
        updated.last_change_step[agent_id] = step
        updated.change_count[agent_id] += 1
        return True, updated

    @staticmethod
    def share_rewards(raw_rewards: Sequence[float], registry: TeamRegistry) -> List[float]:
        """
        Share material rewards equally inside every team.

        Solo agents keep their own reward. Sums run in agent-index order so the
        result is reproducible bit for bit.
        """
        if len(raw_rewards) != registry.num_agents:
            raise ValueError(f"expected {registry.num_agents} rewards, got {len(raw_rewards)}")

        totals: Dict[int, float] = {}
        sizes: Dict[int, int] = {}
        for agent_id, slot in enumerate(registry.slots):
            if slot == 0:
                continue
            totals[slot] = totals.get(slot, 0.0) + raw_rewards[agent_id]
            sizes[slot] = sizes.get(slot, 0) + 1

        shared = []
        for agent_id, slot in enumerate(registry.slots):
            if slot == 0:
                shared.append(float(raw_rewards[agent_id]))
            else:
                shared.append(totals[slot] / sizes[slot])
        return shared

    @staticmethod
    def team_composition_stats(registry: TeamRegistry, identities: Sequence[Identity]) -> TeamCompositionStats:
        """
        Sizes and identity mix of every occupied team.

        Solo agents are reported as size-1 entries with slot 0; empty slots are
        never reported. Entries are ordered by slot, solos by agent id first.
        """
        entries: List[TeamEntry] = []
        for agent_id, slot in enumerate(registry.slots):
            if slot == 0:
                cleaner = identities[agent_id] is Identity.RIVER_CLEANER
                entries.append(TeamEntry(0, 1, int(cleaner), int(not cleaner), (agent_id,)))

        for slot in sorted(set(s for s in registry.slots if s > 0)):
            members = tuple(registry.members(slot))
            cleaners = sum(1 for m in members if identities[m] is Identity.RIVER_CLEANER)
            entries.append(TeamEntry(slot, len(members), cleaners, len(members) - cleaners, members))

        mean_size = sum(e.size for e in entries) / len(entries) if entries else 0.0
        histogram = dict(sorted(Counter(e.mix for e in entries).items()))
        return TeamCompositionStats(tuple(entries), mean_size, histogram)


# Global team manager instance
team_manager = TeamManager()
