"""
Experiment Configuration Parsing

Parses the TOML experiment document ([env], [identity], [teams], [agents],
[experiment]) into a fully resolved ExperimentSpec. Parsing is strict: unknown
or misplaced keys are errors, and validation reports every violation at once.
"""

import logging
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError
from pydantic.alias_generators import to_camel

from app.core.cleanup_engine import validate_env_config
from app.core.config import settings
from app.core.errors import (
    ConfigParseError, SpecValidationError, UnknownKeyError, Violation
)
from app.models.agent_model import LearnerParams, PolicySpec
from app.models.env_model import EnvConfig
from app.models.experiment_model import ExperimentSpec

logger = logging.getLogger(__name__)

IDENTITY_KEYS = frozenset({"identityRatio", "identityUtilityBonus", "identityUtilityCost"})
TEAM_KEYS = frozenset({"switchInterval", "maxSwitches", "lockStep"})
ENV_KEYS = frozenset(
    to_camel(name) for name in EnvConfig.model_fields
) - IDENTITY_KEYS - TEAM_KEYS
LEARNER_KEYS = frozenset(to_camel(name) for name in LearnerParams.model_fields)
AGENT_KEYS = frozenset({"policies", "teamSlots"}) | LEARNER_KEYS
EXPERIMENT_KEYS = frozenset(
    {"episodes", "seeds", "outputDir", "writeReplays", "writeTimeseries", "snapshotPolicies", "workers"}
)

SECTIONS: Dict[str, frozenset] = {
    "env": ENV_KEYS,
    "identity": IDENTITY_KEYS,
    "teams": TEAM_KEYS,
    "agents": AGENT_KEYS,
    "experiment": EXPERIMENT_KEYS,
}

_LINE_PATTERN = re.compile(r"line (\d+)")


def _normalize(key: str) -> str:
    return to_camel(key) if "_" in key else key


def _pydantic_violations(error: ValidationError, prefix: str = "") -> List[Violation]:
    violations = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "document"
        violations.append(Violation(f"{prefix}{location}", item["msg"]))
    return violations


def validate_experiment_spec(spec: ExperimentSpec) -> List[Violation]:
    """Every violated constraint of an experiment spec, environment included."""
    problems = list(validate_env_config(spec.env))
    n = spec.env.num_agents

    def check(ok: bool, name: str, constraint: str) -> None:
        if not ok:
            problems.append(Violation(name, constraint))

    check(spec.episodes >= 1, "episodes", "episodes ≥ 1")
    check(len(spec.seeds) >= 1, "seeds", "at least one seed")
    check(all(0 <= s < 2 ** 64 for s in spec.seeds), "seeds", "seeds ∈ [0, 2^64)")
    check(len(set(spec.seeds)) == len(spec.seeds), "seeds", "seeds must be distinct")
    check(spec.workers >= 1, "workers", "workers ≥ 1")
    check(len(spec.policies) == n, "policies", f"one policy per agent (numAgents = {n})")

    for index, policy in enumerate(spec.policies):
        if policy.team_slot is not None:
            check(0 <= policy.team_slot <= n, f"teamSlots[{index}]", f"teamSlots[{index}] ∈ [0,{n}]")
        params = policy.learner
        check(0.0 < params.learning_rate <= 1.0, "learningRate", "learningRate ∈ (0,1]")
        check(0.0 <= params.discount < 1.0, "discount", "discount ∈ [0,1)")
        check(0.0 <= params.epsilon_start <= 1.0, "epsilonStart", "epsilonStart ∈ [0,1]")
        check(0.0 <= params.epsilon_end <= params.epsilon_start, "epsilonEnd", "epsilonEnd ∈ [0, epsilonStart]")
        check(0.0 <= params.epsilon_decay_fraction <= 1.0, "epsilonDecayFraction", "epsilonDecayFraction ∈ [0,1]")
        check(
            all(0 <= s <= n for s in params.team_choice_slots),
            "teamChoiceSlots",
            f"teamChoiceSlots ⊆ [0,{n}]",
        )

    # Shared learner settings repeat per agent; report each constraint once.
    unique: List[Violation] = []
    for violation in problems:
        if violation not in unique:
            unique.append(violation)
    return unique


def _split_sections(document: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    unknown: List[Violation] = []
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}

    for section, body in document.items():
        if section not in SECTIONS or not isinstance(body, dict):
            unknown.append(Violation(section, "unknown section"))
            continue
        for raw_key, value in body.items():
            key = _normalize(raw_key)
            if key not in SECTIONS[section]:
                unknown.append(Violation(f"{section}.{raw_key}", "unknown key"))
                continue
            sections[section][key] = value

    if unknown:
        raise UnknownKeyError(unknown)
    return sections


def _build_policies(agents: Dict[str, Any], num_agents: int) -> List[PolicySpec]:
    learner = LearnerParams.model_validate({k: v for k, v in agents.items() if k in LEARNER_KEYS})

    kinds = agents.get("policies", "q_learner")
    if isinstance(kinds, str):
        kinds = [kinds] * num_agents
    slots: List[Optional[int]] = list(agents.get("teamSlots", [None] * len(kinds)))
    if len(slots) != len(kinds):
        raise SpecValidationError([Violation("teamSlots", "teamSlots must have one entry per policy")])

    return [PolicySpec(kind=kind, team_slot=slot, learner=learner) for kind, slot in zip(kinds, slots)]


def parse_config(text: str) -> ExperimentSpec:
    """
    Parse an experiment document into a validated ExperimentSpec.

    Args:
        text: TOML document; an empty document yields all defaults

    Returns:
        Fully resolved spec. `spec.echo()` lists every effective value.

    Raises:
        ConfigParseError: TOML syntax error (with line number)
        UnknownKeyError: unknown section or key
        SpecValidationError: any domain constraint violated (all listed)
    """
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None)
        if line is None:
            match = _LINE_PATTERN.search(str(e))
            line = int(match.group(1)) if match else None
        raise ConfigParseError(str(e), line) from e

    sections = _split_sections(document)
    env_values = {**sections["env"], **sections["identity"], **sections["teams"]}

    try:
        env = EnvConfig.model_validate(env_values)
    except ValidationError as e:
        raise SpecValidationError(_pydantic_violations(e)) from e

    experiment = {
        "outputDir": settings.DEFAULT_OUTPUT_DIR,
        "workers": settings.MAX_WORKERS,
        **sections["experiment"],
    }
    try:
        policies = _build_policies(sections["agents"], env.num_agents)
        spec = ExperimentSpec.model_validate({"env": env, "policies": policies, **experiment})
    except ValidationError as e:
        raise SpecValidationError(_pydantic_violations(e)) from e

    problems = validate_experiment_spec(spec)
    if problems:
        raise SpecValidationError(problems)

    logger.debug(f"Parsed experiment spec with config hash {env.config_hash()}")
    return spec


def load_config(path: str | Path) -> ExperimentSpec:
    """Read and parse an experiment document from disk."""
    return parse_config(Path(path).read_text(encoding="utf-8"))


def with_overrides(spec: ExperimentSpec, **overrides: Any) -> ExperimentSpec:
    """Copy of a spec with experiment-level fields replaced (None values ignored)."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    updated = ExperimentSpec.model_validate({**spec.model_dump(exclude={"env"}), "env": spec.env, **updates})
    problems = validate_experiment_spec(updated)
    if problems:
        raise SpecValidationError(problems)
    return updated


def _resize_policies(policies: List[PolicySpec], num_agents: int) -> List[PolicySpec]:
    """Uniform policy lists follow the agent count; mixed lists are kept as written."""
    if policies and len(policies) != num_agents and all(p == policies[0] for p in policies):
        return [policies[0]] * num_agents
    return policies


def with_env_value(spec: ExperimentSpec, key: str, value: Any) -> ExperimentSpec:
    """
    Copy of a spec with one environment, identity or team key replaced.

    The environment is rebuilt from the values that were set explicitly, so
    derived defaults (initialPollution follows depletionThreshold) track the
    new value. A uniform policy list is resized when numAgents changes.
    """
    key = _normalize(key)
    if key not in ENV_KEYS | IDENTITY_KEYS | TEAM_KEYS:
        raise UnknownKeyError([Violation(key, "not an [env], [identity] or [teams] key")])
    try:
        env = EnvConfig.model_validate({**spec.env.explicit_values(), key: value})
    except ValidationError as e:
        raise SpecValidationError(_pydantic_violations(e)) from e
    policies = _resize_policies(spec.policies, env.num_agents)
    updated = spec.model_copy(update={"env": env, "policies": policies})
    problems = validate_experiment_spec(updated)
    if problems:
        raise SpecValidationError(problems)
    return updated


def parse_value(text: str) -> Any:
    """Parse a single TOML scalar such as `0.25`, `true` or `50` (bare words stay strings)."""
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text
