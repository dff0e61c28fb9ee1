"""Seeded batch schedule of (commit, repetition) tasks."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from ..model import CommitRef
from ..rng import Xoshiro256

Task = tuple[str, int]


@dataclass(frozen=True)
class CampaignPlan:
    """Ordered task list; ``batch_boundaries`` holds each batch's first task index."""

    tasks: tuple[Task, ...]
    rng_seed: int
    batch_boundaries: tuple[int, ...]

    def batches(self) -> list[tuple[Task, ...]]:
        bounds = list(self.batch_boundaries) + [len(self.tasks)]
        return [self.tasks[a:b] for a, b in zip(bounds, bounds[1:])]

    def digest(self) -> str:
        h = hashlib.sha256()
        for cid, run in self.tasks:
            h.update(f"{cid}:{run}\n".encode())
        h.update(repr(self.batch_boundaries).encode())
        return h.hexdigest()


def plan_batches(commits: Sequence[CommitRef], cfg) -> CampaignPlan:
    """Partition commits into consecutive batches and shuffle each batch's tasks.

    Each batch's tasks start commit-major, ``[(c, 0), (c, 1), ..., (d, 0), ...]``,
    and are then Fisher-Yates shuffled. One generator seeded with
    ``cfg.rng_seed`` is shared by all batches in order.
    """
    if not commits:
        raise ValueError("cannot plan an empty commit list")
    rng = Xoshiro256(cfg.rng_seed)
    tasks: list[Task] = []
    bounds: list[int] = []
    for start in range(0, len(commits), cfg.batch_size):
        batch = [(c.id, r) for c in commits[start:start + cfg.batch_size]
                 for r in range(cfg.repetitions)]
        rng.shuffle(batch)
        bounds.append(len(tasks))
        tasks.extend(batch)
    return CampaignPlan(tuple(tasks), cfg.rng_seed, tuple(bounds))
