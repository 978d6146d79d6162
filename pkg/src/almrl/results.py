"""Result containers shared by the learner, the baselines and the harness."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class RunResult:
    """Per-episode rewards and final parameters of one method on one scenario."""

    method: str
    rewards: np.ndarray
    final_params: dict
    scenario_index: int = -1
    diverged_episodes: int = 0
    flags: list[str] = field(default_factory=list)

    def with_scenario(self, scenario_index: int) -> "RunResult":
        return replace(self, scenario_index=scenario_index)
