"""
Replay Files

Line-oriented text replays. A replay starts with a header (config hash, seed),
then one frame per step: a legend line with team slots and identities
(experimenter-visible) followed by the grid render.

Grid characters: '~' clean river, 'W' waste, '.' ground, 'A' apple,
digits agent ids (id modulo 10).
"""

import logging
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, List

from app.core.cleanup_engine import cleanup_engine
from app.models.env_model import EnvConfig, EnvState
from app.models.experiment_model import EpisodeLog

logger = logging.getLogger(__name__)

MAGIC = "# cleanup-replay v1"
FRAME_PREFIX = "@step "


@dataclass
class ReplayFrame:
    """One rendered step."""
    step: int
    legend: str
    grid: List[str]

    def count(self, char: str) -> int:
        return sum(row.count(char) for row in self.grid)


@dataclass
class ReplayFile:
    """Parsed replay."""
    header: Dict[str, str]
    frames: List[ReplayFrame] = field(default_factory=list)


def render_grid(state: EnvState, config: EnvConfig) -> List[str]:
    """Render the grid as one string per row."""
    rows = []
    for r in range(config.height):
        if config.is_river_row(r):
            rows.append("".join("W" if state.waste[r, c] else "~" for c in range(config.width)))
        else:
            rows.append("".join("A" if state.apples[r, c] else "." for c in range(config.width)))
    for agent in state.agents:
        line = rows[agent.row]
        rows[agent.row] = line[:agent.col] + str(agent.agent_id % 10) + line[agent.col + 1:]
    return rows


def legend_line(state: EnvState) -> str:
    teams = ",".join(f"{i}:{slot}" for i, slot in enumerate(state.registry.slots))
    identities = ",".join(f"{a.agent_id}:{a.identity.letter}" for a in state.agents)
    return f"teams={teams} identities={identities}"


def build_replay(log: EpisodeLog) -> ReplayFile:
    """Re-simulate a log and capture one frame per step, step 0 included."""
    config = log.config
    state = cleanup_engine.new_env(config, log.seed)
    frames = [ReplayFrame(0, legend_line(state), render_grid(state, config))]
    for record in log.records:
        state, _ = cleanup_engine.step(state, config, record.actions)
        frames.append(ReplayFrame(state.step, legend_line(state), render_grid(state, config)))

    header = {
        "config_hash": config.config_hash(),
        "seed": str(log.seed),
        "width": str(config.width),
        "height": str(config.height),
        "agents": str(config.num_agents),
        "steps": str(len(log.records)),
    }
    return ReplayFile(header, frames)


def format_replay(replay: ReplayFile) -> str:
    """Serialize a replay to its text form."""
    lines = [MAGIC, "# " + " ".join(f"{k}={v}" for k, v in replay.header.items())]
    for frame in replay.frames:
        lines.append(f"{FRAME_PREFIX}{frame.step} {frame.legend}")
        lines.extend(frame.grid)
    return "\n".join(lines) + "\n"


def write_replay(log: EpisodeLog, sink: BinaryIO) -> None:
    """
    Write the replay of an episode.

    Args:
        log: Complete episode log
        sink: Binary stream; I/O errors propagate
    """
    sink.write(format_replay(build_replay(log)).encode("utf-8"))


def parse_replay(text: str) -> ReplayFile:
    """Parse replay text back into frames."""
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError("Not a cleanup replay file")
    if len(lines) < 2 or not lines[1].startswith("# "):
        raise ValueError("Replay header missing")

    header = dict(item.split("=", 1) for item in lines[1][2:].split())
    height = int(header["height"])
    replay = ReplayFile(header)

    index = 2
    while index < len(lines):
        line = lines[index]
        if not line.startswith(FRAME_PREFIX):
            raise ValueError(f"Expected frame line at line {index + 1}, got {line!r}")
        step_text, _, legend = line[len(FRAME_PREFIX):].partition(" ")
        grid = lines[index + 1:index + 1 + height]
        if len(grid) != height:
            raise ValueError(f"Truncated frame for step {step_text}")
        replay.frames.append(ReplayFrame(int(step_text), legend, grid))
        index += 1 + height
    return replay


def pretty_frames(replay: ReplayFile) -> str:
    """Human-oriented rendering for the terminal."""
    blocks = [f"Replay seed={replay.header.get('seed')} config_hash={replay.header.get('config_hash')}"]
    for frame in replay.frames:
        blocks.append(
            f"\n--- Step {frame.step} ---  waste={frame.count('W')} apples={frame.count('A')}\n"
            f"{frame.legend}\n" + "\n".join(frame.grid)
        )
    return "\n".join(blocks)
