"""
Identity Economics

Hidden identity assignment, identity-to-capacity mapping and the identity
utility shaping term. Everything here is a pure function of its arguments.
"""

import logging
from typing import List

import numpy as np

from app.core.errors import ProtocolError
from app.models.env_model import (
    ActionKind, AgentOutcome, EnvConfig, Identity, IdentityProfile
)

logger = logging.getLogger(__name__)


class IdentityEconomics:
    """Identity assignment and identity-aligned incentives."""

    @staticmethod
    def assign_identities(n: int, identity_ratio: float, rng: np.random.Generator) -> List[Identity]:
        """
        Assign hidden identities with an exact population composition.

        Args:
            n: Number of agents
            identity_ratio: Fraction of river cleaners, in [0, 1]
            rng: Generator that picks which agents are cleaners

        Returns:
            One Identity per agent; exactly round(identity_ratio * n) cleaners
            (round half to even).
        """
        if not 0.0 <= identity_ratio <= 1.0:
            raise ValueError(f"identity_ratio must be in [0, 1], got {identity_ratio}")

        cleaners = round(identity_ratio * n)
        identities = [Identity.APPLE_PICKER] * n
        if cleaners:
            for index in rng.choice(n, size=cleaners, replace=False):
                identities[int(index)] = Identity.RIVER_CLEANER
        return identities

    @staticmethod
    def profile(identity: Identity, config: EnvConfig) -> IdentityProfile:
        """Capacities and conforming action for an identity."""
        if identity is Identity.RIVER_CLEANER:
            return IdentityProfile(
                clean_capacity=config.cleaner_clean_capacity,
                harvest_capacity=config.base_harvest_capacity,
                conforming_action=ActionKind.CLEAN,
            )
        return IdentityProfile(
            clean_capacity=config.base_clean_capacity,
            harvest_capacity=config.picker_harvest_capacity,
            conforming_action=ActionKind.PICK,
        )

    def effect_magnitude(self, identity: Identity, action: ActionKind, config: EnvConfig) -> int:
        """
        Per-action capacity of an agent with the given identity.

        Args:
            identity: Agent identity
            action: CLEAN or PICK
            config: Environment configuration

        Returns:
            Cells removable by one CLEAN or apples harvestable by one PICK.
        """
        profile = self.profile(identity, config)
        if action is ActionKind.CLEAN:
            return profile.clean_capacity
        if action is ActionKind.PICK:
            return profile.harvest_capacity
        raise ProtocolError(f"effect_magnitude is only defined for clean and pick, got {action.value}")

    @staticmethod
    def identity_utility(identity: Identity, outcome: AgentOutcome, config: EnvConfig) -> float:
        """
        Identity utility for one agent's step.

        Conformance is judged by realized effect: a cleaner that cleaned or a
        picker that harvested gains the bonus; the opposite productive effect
        costs the penalty. Everything else is neutral.
        """
        if identity is Identity.RIVER_CLEANER:
            conforming, deviating = outcome.waste_cleaned, outcome.apples_harvested
        else:
            conforming, deviating = outcome.apples_harvested, outcome.waste_cleaned

        if conforming > 0:
            return config.identity_utility_bonus
        if deviating > 0:
            return -config.identity_utility_cost
        return 0.0


# Global identity economics instance
identity_economics = IdentityEconomics()
