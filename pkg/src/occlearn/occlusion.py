"""Binary occlusion masks: generation, application, and level histograms.

A mask is a binary grid with 1 = visible and 0 = occluded. The occlusion
level of a mask is the fraction of zeroed pixels, which doubles as the
difficulty score of the sample it produces. Two generators are provided:
filled rectangles ("areal", the PROS strategy) and hollow rectangular rings
("border", the PBOS strategy).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Rng, as_dense, elementwise_mul

__all__ = [
    "Histogram",
    "Mask",
    "apply_mask",
    "generate_areal_mask",
    "generate_border_mask",
    "generate_border_mask_for_fraction",
    "occlusion_histogram",
    "occlusion_level",
]

# Achieved-vs-target tolerance for fraction-driven generators. Holds for
# images of at least ~24x24; smaller grids are granularity-limited.
AREAL_TOLERANCE = 0.02

_ASPECT_LO = 0.5
_ASPECT_HI = 2.0
_MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class Mask:
    """Binary visibility grid; 1 = visible, 0 = occluded."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.float64)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        if not np.all((bits == 0.0) | (bits == 1.0)):
            raise ValueError("mask entries must all be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def zero_coordinates(self) -> list[tuple[int, int]]:
        """(row, col) positions of occluded pixels, row-major order.

        This is the serialization used when masks are written into run logs.
        """
        rows, cols = np.nonzero(self.bits == 0.0)
        return [(int(r), int(c)) for r, c in zip(rows, cols)]


@dataclass(frozen=True)
class Histogram:
    """Discrete probability distribution over occlusion-level bins on [0, 1]."""

    masses: np.ndarray
    bin_edges: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        if masses.ndim != 1 or masses.size < 1:
            raise ValueError("histogram needs a 1-D, nonempty mass vector")
        if np.any(masses < 0):
            raise ValueError("histogram masses must be non-negative")
        if abs(float(masses.sum()) - 1.0) > 1e-12:
            raise ValueError(
                f"histogram masses must sum to 1 within 1e-12, got {masses.sum()!r}"
            )
        edges = self.bin_edges
        if edges is None:
            edges = np.linspace(0.0, 1.0, masses.size + 1)
        edges = np.ascontiguousarray(edges, dtype=np.float64)
        if edges.size != masses.size + 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin_edges must be strictly increasing with b+1 entries")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "bin_edges", edges)

    @property
    def bins(self) -> int:
        return self.masses.size


def occlusion_level(mask: Mask) -> float:
    """Fraction of occluded (zero) pixels, in [0, 1]."""
    return float(np.count_nonzero(mask.bits == 0.0)) / mask.bits.size


def apply_mask(image, mask: Mask) -> np.ndarray:
    """Zero out the occluded pixels of an image, across all channels.

    The image may be (h, w) or (h, w, c); its spatial dims must match the
    mask. Idempotent: re-applying the same mask changes nothing.
    """
    image = as_dense(image)
    if image.shape[:2] != (mask.height, mask.width):
        raise ValueError(
            f"image spatial dims {image.shape[:2]} do not match "
            f"mask dims {(mask.height, mask.width)}"
        )
    return elementwise_mul(image, mask.bits)


def _rect_mask(h: int, w: int, top: int, left: int, rh: int, rw: int) -> Mask:
    bits = np.ones((h, w))
    bits[top : top + rh, left : left + rw] = 0.0
    return Mask(bits)


def _best_dims_for_area(area: int, h: int, w: int) -> tuple[int, int]:
    """Integer rectangle dims inside (h, w) whose area is closest to ``area``."""
    best = (1, 1)
    best_err = abs(1 - area)
    for rh in range(1, h + 1):
        rw = min(max(1, round(area / rh)), w)
        err = abs(rh * rw - area)
        if err < best_err:
            best, best_err = (rh, rw), err
    return best


def generate_areal_mask(h: int, w: int, target_fraction: float, rng: Rng) -> Mask:
    """Occlude a single filled axis-aligned rectangle of ~``target_fraction`` area.

    The rectangle's aspect ratio is drawn uniformly from [0.5, 2] and its
    position uniformly among in-bounds placements; dimensions that overflow
    the image are clipped. Sampling retries up to 100 times for an achieved
    fraction within +/-0.02 of the target, then falls back to the closest
    integer rectangle. Targets 0 and 1 short-circuit to the all-ones and
    all-zeros masks.
    """
    if h <= 0 or w <= 0:
        raise ValueError(f"mask dims must be positive, got ({h}, {w})")
    if not 0.0 <= target_fraction <= 1.0:
        raise ValueError(f"target_fraction must be in [0, 1], got {target_fraction}")
    if target_fraction == 0.0:
        return Mask(np.ones((h, w)))
    if target_fraction == 1.0:
        return Mask(np.zeros((h, w)))

    area = target_fraction * h * w
    best: tuple[float, int, int, int, int] | None = None
    for _ in range(_MAX_ATTEMPTS):
        aspect = rng.uniform(_ASPECT_LO, _ASPECT_HI)
        rh = min(max(1, round(np.sqrt(area * aspect))), h)
        rw = min(max(1, round(np.sqrt(area / aspect))), w)
        top = rng.integer(0, h - rh + 1)
        left = rng.integer(0, w - rw + 1)
        err = abs(rh * rw / (h * w) - target_fraction)
        if best is None or err < best[0]:
            best = (err, top, left, rh, rw)
        if err <= AREAL_TOLERANCE:
            return _rect_mask(h, w, top, left, rh, rw)

    # Aspect sampling could not hit the tolerance (small grids, extreme
    # targets): take the granularity-optimal rectangle at the best position.
    _, top, left, rh, rw = best
    rh2, rw2 = _best_dims_for_area(round(area), h, w)
    if abs(rh2 * rw2 / (h * w) - target_fraction) < abs(
        rh * rw / (h * w) - target_fraction
    ):
        rh, rw = rh2, rw2
        top = rng.integer(0, h - rh + 1)
        left = rng.integer(0, w - rw + 1)
    return _rect_mask(h, w, top, left, rh, rw)


def generate_border_mask(
    h: int, w: int, rect: tuple[int, int, int, int], border_width: int
) -> Mask:
    """Occlude a hollow rectangular ring.

    ``rect`` is (top, left, bottom, right) with inclusive corners inside the
    grid. The ring includes the rectangle boundary and grows inward by
    ``border_width`` pixels; a width of at least half the rectangle extent
    degenerates to a filled rectangle.
    """
    if h <= 0 or w <= 0:
        raise ValueError(f"mask dims must be positive, got ({h}, {w})")
    top, left, bottom, right = rect
    if not (0 <= top <= bottom < h and 0 <= left <= right < w):
        raise ValueError(f"rect {rect} out of bounds for ({h}, {w}) grid")
    if border_width < 1:
        raise ValueError(f"border_width must be >= 1, got {border_width}")

    bits = np.ones((h, w))
    bits[top : bottom + 1, left : right + 1] = 0.0
    inner_top = top + border_width
    inner_bottom = bottom - border_width
    inner_left = left + border_width
    inner_right = right - border_width
    if inner_top <= inner_bottom and inner_left <= inner_right:
        bits[inner_top : inner_bottom + 1, inner_left : inner_right + 1] = 1.0
    return Mask(bits)


def generate_border_mask_for_fraction(
    h: int,
    w: int,
    target_fraction: float,
    rng: Rng,
    border_width: int = 3,
) -> Mask:
    """Place a square ring of the given width whose area is ~``target_fraction``.

    Border occlusion caps out at the largest ring that fits the image, so
    high targets saturate; callers should read the achieved level back with
    :func:`occlusion_level`. Target 0 short-circuits to all-ones.
    """
    if h <= 0 or w <= 0:
        raise ValueError(f"mask dims must be positive, got ({h}, {w})")
    if not 0.0 <= target_fraction <= 1.0:
        raise ValueError(f"target_fraction must be in [0, 1], got {target_fraction}")
    if border_width < 1:
        raise ValueError(f"border_width must be >= 1, got {border_width}")
    if target_fraction == 0.0:
        return Mask(np.ones((h, w)))

    # Ring area of an s-by-s square with width v: 4*v*(s - v) for s >= 2v.
    area = target_fraction * h * w
    side_max = min(h, w)
    best_side = 2 * border_width
    best_err = None
    for side in range(1, side_max + 1):
        v = min(border_width, (side + 1) // 2)
        ring = side * side - max(side - 2 * v, 0) ** 2
        err = abs(ring - area)
        if best_err is None or err < best_err:
            best_side, best_err = side, err
    side = best_side
    top = rng.integer(0, h - side + 1)
    left = rng.integer(0, w - side + 1)
    return generate_border_mask(
        h, w, (top, left, top + side - 1, left + side - 1), border_width
    )


def occlusion_histogram(levels, b: int) -> Histogram:
    """Normalized histogram of occlusion levels over ``b`` uniform bins on [0, 1].

    Bins are right-open except the last, so a level of exactly 1.0 lands in
    bin b-1. Mass order is invariant to permutations of the input.
    """
    levels = np.asarray(levels, dtype=np.float64)
    if levels.size == 0:
        raise ValueError("cannot build a histogram from an empty level list")
    if b < 1:
        raise ValueError(f"bin count must be >= 1, got {b}")
    if np.any(levels < 0) or np.any(levels > 1):
        raise ValueError("occlusion levels must lie in [0, 1]")
    idx = np.minimum(np.floor(levels * b).astype(int), b - 1)
    counts = np.bincount(idx, minlength=b).astype(np.float64)
    return Histogram(counts / levels.size, np.linspace(0.0, 1.0, b + 1))
