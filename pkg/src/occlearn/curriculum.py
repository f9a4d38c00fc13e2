"""Difficulty scoring, dataset ordering, level expansion, and staged schedules.

The curriculum contract is about membership: stage t of a schedule over n
ordered samples is the prefix of length ceil(t*n/T), so stages are nested
and difficulty never decreases along the ordering. Minibatch order within a
stage is the trainer's business, not the curriculum's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .occlusion import (
    Mask,
    apply_mask,
    generate_areal_mask,
    generate_border_mask_for_fraction,
    occlusion_level,
)
from .tensor import Rng, as_dense

__all__ = [
    "CurriculumSchedule",
    "Sample",
    "difficulty",
    "expand_levels",
    "make_schedule",
    "order_dataset",
    "stage_sizes",
    "stage_subset",
]


@dataclass(frozen=True)
class Sample:
    """One labeled (possibly occluded) image.

    ``level`` is the occlusion fraction of the mask that produced the image
    (0 for the clean original), ``origin_index`` points back into the source
    dataset, and ``level_index`` is the expansion slot j (0 = original).
    """

    image: np.ndarray
    label: int
    level: float = 0.0
    origin_index: int = 0
    level_index: int = 0
    mask: Mask | None = None

    def __post_init__(self):
        object.__setattr__(self, "image", as_dense(self.image))
        if not 0.0 <= self.level <= 1.0:
            raise ValueError(f"occlusion level must be in [0, 1], got {self.level}")


def difficulty(sample: Sample) -> float:
    """Difficulty score of a sample: its occlusion level."""
    return sample.level


def order_dataset(samples: Sequence[Sample]) -> list[Sample]:
    """Sort ascending by difficulty, ties broken by (origin_index, level_index)."""
    if len(samples) == 0:
        raise ValueError("cannot order an empty sample list")
    return sorted(
        samples, key=lambda s: (difficulty(s), s.origin_index, s.level_index)
    )


def expand_levels(
    base: Sequence[Sample],
    delta: int,
    level_of: Callable[[int], float],
    strategy: str,
    rng: Rng,
    border_width: int = 3,
) -> list[Sample]:
    """Expand each sample into delta+1 occlusion levels.

    Slot j = 0 keeps the originals untouched; slot j >= 1 occludes every base
    image with a fresh mask targeting ``level_of(j)``. ``level_of`` must be
    non-decreasing with ``level_of(0) == 0``. The recorded per-sample level
    is the achieved zero fraction of the generated mask, not the request.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    targets = [level_of(j) for j in range(delta + 1)]
    if targets and targets[0] != 0.0:
        raise ValueError(f"level_of(0) must be 0, got {targets[0]}")
    if any(b < a for a, b in zip(targets, targets[1:])):
        raise ValueError(f"level_of must be non-decreasing, got {targets}")
    if strategy not in ("areal", "border"):
        raise ValueError(f"unknown occlusion strategy {strategy!r}")

    out: list[Sample] = []
    for i, s in enumerate(base):
        out.append(replace(s, origin_index=i, level_index=0, level=0.0, mask=None))
    for j in range(1, delta + 1):
        for i, s in enumerate(base):
            mask = make_mask(
                s.image.shape[0],
                s.image.shape[1],
                targets[j],
                strategy,
                rng,
                border_width=border_width,
            )
            out.append(
                Sample(
                    image=apply_mask(s.image, mask),
                    label=s.label,
                    level=occlusion_level(mask),
                    origin_index=i,
                    level_index=j,
                    mask=mask,
                )
            )
    return out


def make_mask(
    h: int, w: int, target: float, strategy: str, rng: Rng, border_width: int = 3
) -> Mask:
    if strategy == "areal":
        return generate_areal_mask(h, w, target, rng)
    if strategy == "border":
        return generate_border_mask_for_fraction(
            h, w, target, rng, border_width=border_width
        )
    raise ValueError(f"unknown occlusion strategy {strategy!r}")


def stage_sizes(n: int, T: int) -> list[int]:
    """n_t = ceil(t*n/T) for t = 1..T."""
    if n < 1 or T < 1:
        raise ValueError(f"need n >= 1 and T >= 1, got n={n}, T={T}")
    return [math.ceil(t * n / T) for t in range(1, T + 1)]


@dataclass(frozen=True)
class CurriculumSchedule:
    """Difficulty-ordered samples partitioned into T nested prefix stages."""

    ordered: list[Sample]
    T: int
    sizes: list[int]

    def __post_init__(self):
        n = len(self.ordered)
        if self.sizes != stage_sizes(n, self.T):
            raise ValueError("stage sizes do not follow ceil(t*n/T)")
        levels = [difficulty(s) for s in self.ordered]
        if any(b < a for a, b in zip(levels, levels[1:])):
            raise ValueError("schedule samples are not sorted by difficulty")

    @property
    def n(self) -> int:
        return len(self.ordered)

    def level_range(self, t: int) -> tuple[float, float]:
        stage = stage_subset(self, t)
        levels = [s.level for s in stage]
        return (min(levels), max(levels))

    def summary(self) -> dict:
        return {
            "n": self.n,
            "T": self.T,
            "stage_sizes": list(self.sizes),
            "stage_level_ranges": [self.level_range(t) for t in range(1, self.T + 1)],
        }


def make_schedule(samples: Sequence[Sample], T: int) -> CurriculumSchedule:
    """Order the samples and cut them into T nested stages."""
    ordered = order_dataset(samples)
    return CurriculumSchedule(ordered=ordered, T=T, sizes=stage_sizes(len(ordered), T))


def stage_subset(schedule: CurriculumSchedule, t: int) -> list[Sample]:
    """Samples of stage t (1-indexed): the prefix of length ceil(t*n/T)."""
    if not 1 <= t <= schedule.T:
        raise ValueError(f"stage index must be in [1, {schedule.T}], got {t}")
    return schedule.ordered[: schedule.sizes[t - 1]]


def stage_levels(schedule: CurriculumSchedule, t: int) -> np.ndarray:
    """Occlusion levels of stage t as an array (for histograms)."""
    return np.array([s.level for s in stage_subset(schedule, t)], dtype=np.float64)
