"""Seeded end-to-end runs: task -> K members per seed -> pooled predictions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..predstore import IN_DOMAIN, SHIFTED, EvalDataset
from .mlp import MlpArchitecture
from .predict import DEFAULT_MC_SAMPLES, pool_ensemble, predict_mc
from .tasks import SyntheticShiftTask, gen_task
from .training import TrainConfig, TrainedModel, train

DEFAULT_ARCH = MlpArchitecture((2, 32, 32, 1), "relu")
DEFAULT_SEEDS = 6


@dataclass
class SeedRun:
    seed_index: int
    members: list[TrainedModel]
    in_domain: EvalDataset
    shifted: EvalDataset


def member_seed(base_seed: int, seed_index: int, member: int) -> int:
    return int(np.random.SeedSequence([base_seed, seed_index, member]).generate_state(1)[0])


def run_seed(
    method: str,
    task: SyntheticShiftTask,
    seed_index: int,
    base_seed: int = 0,
    n_members: int = 1,
    n_samples: int = DEFAULT_MC_SAMPLES,
    arch: MlpArchitecture = DEFAULT_ARCH,
    config: TrainConfig = TrainConfig(),
) -> SeedRun:
    """Train ``n_members`` independent models and pool their MC samples."""
    members, ins, shs = [], [], []
    for m in range(n_members):
        cfg = replace(config, seed=member_seed(base_seed, seed_index, m))
        model = train(method, arch, task.train.x, task.train.binary, cfg)
        rng = np.random.default_rng([base_seed, seed_index, m, 1])
        ins.append(predict_mc(model, task.in_domain_eval, n_samples, rng, IN_DOMAIN, "in_domain"))
        shs.append(predict_mc(model, task.shifted_eval, n_samples, rng, SHIFTED, "shifted"))
        members.append(model)
    return SeedRun(seed_index, members, pool_ensemble(ins), pool_ensemble(shs))


def run_toy(
    method: str,
    shift_kind: str,
    n_seeds: int = DEFAULT_SEEDS,
    n_samples: int = DEFAULT_MC_SAMPLES,
    n_members: int = 1,
    base_seed: int = 0,
    arch: MlpArchitecture = DEFAULT_ARCH,
    config: TrainConfig = TrainConfig(),
    max_workers: int = 1,
) -> tuple[SyntheticShiftTask, list[SeedRun]]:
    """One task from ``base_seed``; ``n_seeds`` independent replicate runs.

    Results do not depend on ``max_workers``: every run owns its RNGs.
    """
    task = gen_task(shift_kind, base_seed)

    def job(i: int) -> SeedRun:
        return run_seed(method, task, i, base_seed, n_members, n_samples, arch, config)

    if max_workers <= 1:
        runs = [job(i) for i in range(n_seeds)]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            runs = list(pool.map(job, range(n_seeds)))
    return task, runs
