"""
Random sampling masks with the same number of sampled nodes at every time step.

Randomness comes from numpy's PCG64 generator seeded through SeedSequence.
A master seed is split into independent streams by (stream, trial) spawn
keys, so trial t of an experiment can be regenerated on its own.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from TVGS.errors import InvalidParameterError
from TVGS.tv_signal import SamplingMask, TvSignal

# seed streams
SEARCH_STREAM = 0
FINAL_STREAM = 1


def per_step_count(density: float, n_nodes: int) -> int:
    """round-half-away-from-zero of density * N"""
    return int(math.floor(density * n_nodes + 0.5))


def trial_seed(master_seed: int, stream: int, trial: int) -> int:
    """64-bit seed for one trial of one stream"""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(stream, trial))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SamplingPlan:
    """Uniform-per-step sampling at a fixed density"""
    density: float
    seed: int
    strategy: str = "uniform-per-step"

    def __post_init__(self):
        if not 0.0 < self.density <= 1.0:
            raise InvalidParameterError(f"density must lie in (0, 1], got {self.density}")
        if self.strategy != "uniform-per-step":
            raise InvalidParameterError(f"unknown sampling strategy {self.strategy!r}")

    def count(self, n_nodes: int) -> int:
        return per_step_count(self.density, n_nodes)

    @classmethod
    def for_trial(cls, density: float, master_seed: int, stream: int, trial: int) -> "SamplingPlan":
        return cls(density=density, seed=trial_seed(master_seed, stream, trial))


def draw_mask(plan: SamplingPlan, n_nodes: int, n_steps: int) -> np.ndarray:
    """
    Binary N x M matrix with exactly round(density * N) ones per column.

    Columns are drawn independently, without replacement, from a PCG64
    generator seeded with plan.seed.
    """
    s = plan.count(n_nodes)
    if s < 1:
        raise InvalidParameterError(
            f"density {plan.density} samples no node out of {n_nodes}"
        )
    rng = np.random.Generator(np.random.PCG64(plan.seed))
    J = np.zeros((n_nodes, n_steps))
    for t in range(n_steps):
        J[rng.choice(n_nodes, size=s, replace=False), t] = 1.0
    return J


def observe(J: np.ndarray, X_true: Union[TvSignal, np.ndarray]) -> SamplingMask:
    """Y = J o X_true"""
    values = X_true.values if isinstance(X_true, TvSignal) else np.asarray(X_true, dtype=float)
    J = np.asarray(J, dtype=float)
    if J.shape != values.shape:
        raise InvalidParameterError(f"mask shape {J.shape} != signal shape {values.shape}")
    return SamplingMask(mask=J, observed=J * values)


def write_mask(J: np.ndarray, path: Union[str, Path]) -> None:
    """Sparse audit listing: one 't i' line per sampled entry, ordered by time then node"""
    steps, nodes = np.nonzero(np.asarray(J).T == 1.0)
    with open(path, "w", encoding="utf-8") as f:
        for t, i in zip(steps, nodes):
            f.write(f"{t} {i}\n")


def read_mask(path: Union[str, Path], n_nodes: int, n_steps: int) -> np.ndarray:
    J = np.zeros((n_nodes, n_steps))
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                t, i = line.split()
                J[int(i), int(t)] = 1.0
    return J
