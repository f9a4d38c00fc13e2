"""Shannon entropy, plug-in mutual information, and adaptive level selection.

Mutual information is estimated from a contingency table of true labels
against argmax-hardened predictions, which is the one estimator the discrete
definitions support without extra assumptions. Everything is measured in
bits. Level selection is the operative half of the information-adaptive
strategy: at each stage boundary the candidate occlusion level with the most
informative predictions (capped by the occlusion budget alpha) wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curriculum import Sample, make_mask
from .nn import ModelState, num_classes, predict_labels
from .occlusion import apply_mask
from .tensor import Rng

__all__ = [
    "IalConfig",
    "JointCounts",
    "conditional_entropy",
    "entropy",
    "joint_from_predictions",
    "mutual_information",
    "select_occlusion_level",
]


def entropy(masses) -> float:
    """Shannon entropy in bits, with 0*log(0) = 0.

    ``masses`` must be non-negative and sum to 1 within 1e-9.
    """
    p = np.asarray(masses, dtype=np.float64).ravel()
    if np.any(p < 0):
        raise ValueError("entropy requires non-negative masses")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"masses must sum to 1 within 1e-9, got {p.sum()!r}")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


@dataclass(frozen=True)
class JointCounts:
    """Contingency table of counts; rows = true class, columns = predicted."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table)
        if t.ndim != 2:
            raise ValueError(f"joint table must be 2-D, got shape {t.shape}")
        if np.any(t < 0) or not np.all(t == np.floor(t)):
            raise ValueError("joint table must hold non-negative integer counts")
        t = np.ascontiguousarray(t, dtype=np.float64)
        if t.sum() < 1:
            raise ValueError("joint table must contain at least one observation")
        object.__setattr__(self, "table", t)

    @property
    def total(self) -> int:
        return int(self.table.sum())

    def transpose(self) -> "JointCounts":
        return JointCounts(self.table.T)

    def merge_columns(self, a: int, b: int) -> "JointCounts":
        """Coarsen the prediction variable by merging two predicted classes."""
        if a == b:
            raise ValueError("cannot merge a column with itself")
        t = self.table.copy()
        t[:, min(a, b)] += t[:, max(a, b)]
        return JointCounts(np.delete(t, max(a, b), axis=1))


def joint_from_predictions(y_true, y_pred, k: int) -> JointCounts:
    """Tally a k-by-k contingency table from label/prediction pairs."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("need equal-length, nonempty label arrays")
    if y_true.min() < 0 or y_true.max() >= k or y_pred.min() < 0 or y_pred.max() >= k:
        raise ValueError(f"labels out of range [0, {k})")
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (y_true, y_pred), 1)
    return JointCounts(table)


def _sorted_sum(terms: np.ndarray) -> float:
    # Sum in value order so the result is invariant to the table layout;
    # this is what makes MI exactly symmetric under transposition.
    return float(np.sort(terms, kind="stable").sum())


def mutual_information(j: JointCounts) -> float:
    """Plug-in mutual information I(Y; Yhat) in bits; zero cells contribute 0."""
    p = j.table / j.table.sum()
    pr = p.sum(axis=1)
    pc = p.sum(axis=0)
    outer = pr[:, None] * pc[None, :]
    nz = p > 0
    terms = np.zeros_like(p)
    terms[nz] = p[nz] * np.log2(p[nz] / outer[nz])
    return _sorted_sum(terms.ravel())


def conditional_entropy(j: JointCounts) -> float:
    """H(Y | Yhat) in bits, from the joint table."""
    p = j.table / j.table.sum()
    pc = np.broadcast_to(p.sum(axis=0)[None, :], p.shape)
    terms = np.zeros_like(p)
    nz = p > 0
    # p(y, yhat) * log2(p(yhat) / p(y, yhat)), columnwise conditional
    terms[nz] = p[nz] * np.log2(pc[nz] / p[nz])
    return _sorted_sum(terms.ravel())


@dataclass(frozen=True)
class IalConfig:
    """Budgeted occlusion-level search: candidates, cap alpha, probe size."""

    alpha: float = 0.5
    candidate_levels: tuple = ()
    probe_size: int = 64

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        levels = tuple(float(v) for v in self.candidate_levels)
        if not levels:
            levels = tuple(np.linspace(0.0, self.alpha, 6))
        if any(v < 0 or v > self.alpha + 1e-12 for v in levels):
            raise ValueError(
                f"candidate levels {levels} must lie within [0, alpha={self.alpha}]"
            )
        if self.probe_size < 1:
            raise ValueError("probe_size must be >= 1")
        object.__setattr__(self, "candidate_levels", levels)


def select_occlusion_level(
    model: ModelState,
    probe: Sequence[Sample],
    cfg: IalConfig,
    rng: Rng,
    strategy: str = "areal",
) -> tuple[float, float]:
    """Pick the candidate occlusion level maximizing probe mutual information.

    Each candidate occludes the probe set at that level (fresh masks from a
    forked stream per candidate, so candidates are order-independent), runs
    the model, and scores I(Y; argmax) from the contingency table. Ties go
    to the larger level. Returns (level, mi).
    """
    if len(probe) == 0:
        raise ValueError("probe set must be nonempty")
    if not cfg.candidate_levels:
        raise ValueError("candidate level grid must be nonempty")
    probe = list(probe)[: cfg.probe_size]
    y_true = np.array([s.label for s in probe], dtype=int)
    k = max(num_classes(model), int(y_true.max()) + 1)

    best_level, best_mi = None, None
    for ci, level in enumerate(cfg.candidate_levels):
        crng = rng.fork(ci)
        images = []
        for s in probe:
            if level == 0.0:
                images.append(s.image.ravel())
            else:
                h, w = s.image.shape[0], s.image.shape[1]
                mask = make_mask(h, w, level, strategy, crng)
                images.append(apply_mask(s.image, mask).ravel())
        X = np.stack(images)
        y_pred = predict_labels(model, X)
        mi = mutual_information(joint_from_predictions(y_true, y_pred, k))
        if best_mi is None or mi > best_mi or (mi == best_mi and level > best_level):
            best_level, best_mi = level, mi
    return float(best_level), float(best_mi)
