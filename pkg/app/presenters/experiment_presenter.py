"""
Experiment Presenter - Orchestration Layer

Runs seed sweeps of training/evaluation episodes: builds environments and
policies, drives the observe/act/step/update loop, computes per-episode metrics
and writes the result files. Each seed's pipeline is fully isolated, so seeds
may run in worker processes; results are merged in the order seeds are listed.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.cleanup_engine import cleanup_engine
from app.core.errors import OutputDirectoryError, SpecValidationError
from app.core.policies import Policy, QLearningPolicy, make_policy, write_snapshot
from app.models.agent_model import Transition
from app.models.env_model import EnvConfig
from app.models.experiment_model import (
    RESULT_COLUMNS, TIMESERIES_COLUMNS, EpisodeLog, ExperimentSpec, ExperimentSummary,
    SeedResult, StepRecord
)
from app.utils.config_parser import validate_experiment_spec, with_env_value, with_overrides
from app.utils.metrics import metrics_calculator
from app.utils.replay_writer import write_replay
from app.utils.rng_utils import episode_seed, policy_generators

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "parameter",
    "value",
    "mean_collective_return",
    "std_collective_return",
    "mean_gini",
    "mean_team_size",
)


def _seed_pipeline(spec: ExperimentSpec, seed: int, output_dir: Optional[str]) -> SeedResult:
    """Worker entry point; module level so it pickles."""
    return experiment_presenter.run_seed(spec, seed, Path(output_dir) if output_dir else None)


class ExperimentPresenter:
    """Presenter for experiment runs and parameter sweeps."""

    def run_episode(
        self,
        config: EnvConfig,
        policies: Sequence[Policy],
        generators: Sequence[np.random.Generator],
        root_seed: int,
        episode: int,
        total_episodes: int,
        timeseries: Optional[List[Dict[str, Any]]] = None,
    ) -> EpisodeLog:
        """
        Play one full episode, updating learners after every step.

        Args:
            config: Environment configuration
            policies: One policy per agent, in agent-index order
            generators: One action-selection stream per policy
            root_seed: Experiment seed the episode belongs to
            episode: Episode index within the seed
            total_episodes: Episodes planned for the seed (drives ε decay)
            timeseries: When given, one row per step is appended

        Returns:
            The complete episode log.
        """
        seed = episode_seed(root_seed, episode)
        state = cleanup_engine.new_env(config, seed)
        n = config.num_agents
        for policy in policies:
            policy.begin_episode(episode, total_episodes)

        observations = [cleanup_engine.observe(state, i, config) for i in range(n)]
        records: List[StepRecord] = []
        while state.step < config.episode_length:
            step = state.step
            actions = tuple(
                policy.act(observation, rng)
                for policy, observation, rng in zip(policies, observations, generators)
            )
            state, outcome = cleanup_engine.step(state, config, actions)
            next_observations = [cleanup_engine.observe(state, i, config) for i in range(n)]
            terminal = state.step >= config.episode_length

            for agent_id, policy in enumerate(policies):
                if policy.learns:
                    policy.update(Transition(
                        observation=observations[agent_id],
                        action=actions[agent_id],
                        reward=outcome.agents[agent_id].total_reward,
                        next_observation=next_observations[agent_id],
                        terminal=terminal,
                    ))

            records.append(StepRecord(step=step, actions=actions, outcome=outcome))
            if timeseries is not None:
                timeseries.append({
                    "seed": root_seed,
                    "episode": episode,
                    "step": step,
                    "pollution": outcome.pollution_level,
                    "apples_spawned": outcome.apples_spawned,
                    "waste_spawned": outcome.waste_spawned,
                    "apples_harvested": outcome.apples_harvested,
                    "waste_cleaned": outcome.waste_cleaned,
                    "material_reward": outcome.material_reward,
                    "team_changes_accepted": sum(1 for e in outcome.team_events if e.accepted),
                })
            observations = next_observations

        for policy in policies:
            policy.end_episode()

        logger.debug(f"Seed {root_seed} episode {episode} finished after {state.step} steps")
        return EpisodeLog(
            config=config,
            seed=seed,
            identities=[agent.identity for agent in state.agents],
            records=records,
            final_registry=state.registry.copy(),
            root_seed=root_seed,
            episode=episode,
        )

    def run_seed(self, spec: ExperimentSpec, seed: int, output_dir: Optional[Path] = None) -> SeedResult:
        """
        Train fresh policies for every episode of one seed.

        Args:
            spec: Validated experiment spec
            seed: Root seed of this pipeline
            output_dir: Where replays and policy snapshots go; None writes nothing

        Returns:
            Metrics for every episode plus timeseries rows when enabled.
        """
        config = spec.env
        n = config.num_agents
        policies = [make_policy(policy_spec, n) for policy_spec in spec.policies]
        generators = policy_generators(seed, n)
        metrics = []
        timeseries: Optional[List[Dict[str, Any]]] = [] if spec.write_timeseries else None

        logger.info(f"Seed {seed}: starting {spec.episodes} episode(s)")
        for episode in range(spec.episodes):
            log = self.run_episode(config, policies, generators, seed, episode, spec.episodes, timeseries)
            metrics.append(metrics_calculator.episode_metrics(log, seed, episode))

            if spec.write_replays and output_dir is not None:
                path = output_dir / "replays" / f"seed{seed}_episode{episode}.txt"
                with path.open("wb") as sink:
                    write_replay(log, sink)

        if spec.snapshot_policies and output_dir is not None:
            for agent_id, policy in enumerate(policies):
                if isinstance(policy, QLearningPolicy):
                    path = output_dir / "policies" / f"seed{seed}_agent{agent_id}.qtable"
                    with path.open("w", encoding="utf-8", newline="\n") as sink:
                        write_snapshot(policy, sink)

        logger.info(f"Seed {seed}: final collective return {metrics[-1].collective_return}")
        return SeedResult(seed=seed, metrics=metrics, timeseries=timeseries or [])

    def run_experiment(self, spec: ExperimentSpec) -> ExperimentSummary:
        """
        Run every seed of an experiment and write its result files.

        Args:
            spec: Experiment spec; validated again here

        Returns:
            Summary with per-seed final-episode collective returns and their
            mean and population standard deviation.

        Raises:
            SpecValidationError: Spec violates any constraint
            OutputDirectoryError: Output directory cannot be written (raised
                before any simulation)
        """
        problems = validate_experiment_spec(spec)
        if problems:
            logger.error(f"Experiment spec rejected: {'; '.join(str(p) for p in problems)}")
            raise SpecValidationError(problems)

        out = self._prepare_output_dir(Path(spec.output_dir), spec)
        logger.info(f"Running {len(spec.seeds)} seed(s) x {spec.episodes} episode(s) into {out}")

        try:
            if spec.workers > 1 and len(spec.seeds) > 1:
                with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                    results = list(pool.map(
                        _seed_pipeline,
                        [spec] * len(spec.seeds),
                        spec.seeds,
                        [str(out)] * len(spec.seeds),
                    ))
            else:
                results = [self.run_seed(spec, seed, out) for seed in spec.seeds]
        except Exception as e:
            logger.error(f"Experiment failed: {str(e)}")
            raise

        files = self._write_results(out, spec, results)
        summary = self._summarize(spec, results, out, files)
        (out / "summary.json").write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")

        logger.info(
            f"Collective return over {len(spec.seeds)} seed(s): "
            f"{summary.mean_collective_return:.3f} ± {summary.std_collective_return:.3f}"
        )
        return summary

    def run_sweep(self, spec: ExperimentSpec, key: str, values: Sequence[Any], output_dir: str) -> pd.DataFrame:
        """
        Run one experiment per value of an environment, identity or team key.

        Each run writes into `<output_dir>/<key>=<value>/`; the aggregated
        table is written to `<output_dir>/sweep_summary.csv` and returned.
        """
        root = Path(output_dir)
        rows = []
        for value in values:
            variant = with_env_value(spec, key, value)
            variant = with_overrides(variant, output_dir=str(root / f"{key}={value}"))
            logger.info(f"Sweep {key}={value}")
            summary = self.run_experiment(variant)
            rows.append({
                "parameter": key,
                "value": value,
                "mean_collective_return": summary.mean_collective_return,
                "std_collective_return": summary.std_collective_return,
                "mean_gini": summary.mean_gini,
                "mean_team_size": summary.mean_team_size,
            })

        table = pd.DataFrame(rows, columns=list(SWEEP_COLUMNS))
        table.to_csv(root / "sweep_summary.csv", index=False, lineterminator="\n")
        logger.info(f"Sweep summary written to {root / 'sweep_summary.csv'}")
        return table

    @staticmethod
    def _prepare_output_dir(out: Path, spec: ExperimentSpec) -> Path:
        try:
            out.mkdir(parents=True, exist_ok=True)
            if spec.write_replays:
                (out / "replays").mkdir(exist_ok=True)
            if spec.snapshot_policies:
                (out / "policies").mkdir(exist_ok=True)
        except OSError as e:
            logger.error(f"Cannot create output directory {out}: {str(e)}")
            raise OutputDirectoryError(f"Output directory {out} is not writable: {e}") from e
        if not os.access(out, os.W_OK | os.X_OK):
            logger.error(f"Output directory {out} is not writable")
            raise OutputDirectoryError(f"Output directory {out} is not writable")
        return out

    @staticmethod
    def _write_results(out: Path, spec: ExperimentSpec, results: List[SeedResult]) -> List[str]:
        files = ["results.csv", "effective_config.json", "summary.json"]

        rows = [m.row() for result in results for m in result.metrics]
        pd.DataFrame(rows, columns=list(RESULT_COLUMNS)).to_csv(
            out / "results.csv", index=False, lineterminator="\n"
        )

        echo = json.dumps(spec.echo(), indent=2, ensure_ascii=False)
        (out / "effective_config.json").write_text(echo + "\n", encoding="utf-8")

        if spec.write_timeseries:
            series = [row for result in results for row in result.timeseries]
            pd.DataFrame(series, columns=list(TIMESERIES_COLUMNS)).to_csv(
                out / "timeseries.csv", index=False, lineterminator="\n"
            )
            files.append("timeseries.csv")
        if spec.write_replays:
            files.extend(
                f"replays/seed{seed}_episode{episode}.txt"
                for seed in spec.seeds for episode in range(spec.episodes)
            )
        if spec.snapshot_policies:
            files.extend(sorted(f"policies/{p.name}" for p in (out / "policies").glob("*.qtable")))
        return files

    @staticmethod
    def _summarize(spec: ExperimentSpec, results: List[SeedResult], out: Path, files: List[str]) -> ExperimentSummary:
        finals = [result.metrics[-1] for result in results]
        returns = np.array([m.collective_return for m in finals], dtype=float)
        return ExperimentSummary(
            seeds=list(spec.seeds),
            episodes=spec.episodes,
            final_returns=returns.tolist(),
            mean_collective_return=float(returns.mean()),
            std_collective_return=float(returns.std()),
            mean_gini=float(np.mean([m.gini for m in finals])),
            mean_team_size=float(np.mean([m.mean_team_size for m in finals])),
            config_hash=spec.env.config_hash(),
            output_dir=str(out),
            files=files,
        )


# Global presenter instance
experiment_presenter = ExperimentPresenter()
