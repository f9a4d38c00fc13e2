"""Synthetic glyph classification tasks and PGM directory datasets.

The synthetic task renders one glyph per class (disc, square, triangle,
cross; intensity tiers extend the palette up to 10 classes) at a random
position and scale over a noisy background. It is deliberately easy enough
for a small dense network yet position-jittered enough that occlusion
actually hurts, which is what the curriculum experiments need.

External data uses the simplest portable container: one subdirectory per
class holding binary (P5) PGM files, plus an optional JSON manifest naming
the split of each file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curriculum import Sample
from .tensor import Rng

__all__ = [
    "LabeledDataset",
    "NormParams",
    "TaskSpec",
    "generate_synthetic",
    "load_directory",
    "load_manifest",
    "normalize",
    "read_pgm",
    "save_directory",
    "split",
    "write_pgm",
]

GLYPHS = ("disc", "square", "triangle", "cross")
_TIER_INTENSITY = (0.9, 0.6, 0.45)
_BACKGROUND = 0.15
MIN_IMAGE_SIDE = 8


@dataclass(frozen=True)
class TaskSpec:
    """Synthetic task description; the default is the 4-class desk-scale task."""

    image_size: tuple = (32, 32)
    channels: int = 1
    k: int = 4
    noise_sigma: float = 0.05
    n: int = 400
    name: str = "synthetic"

    def __post_init__(self):
        h, w = self.image_size
        if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
            raise ValueError(
                f"image size {self.image_size} too small for glyphs "
                f"(need at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE})"
            )
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if not 2 <= self.k <= 10:
            raise ValueError(f"class count must be in [2, 10], got {self.k}")
        if self.n < self.k:
            raise ValueError(f"need at least one sample per class: n={self.n}, k={self.k}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def class_names(self) -> list[str]:
        names = []
        for c in range(self.k):
            tier = c // len(GLYPHS)
            base = GLYPHS[c % len(GLYPHS)]
            names.append(base if tier == 0 else f"{base}{tier + 1}")
        return names


@dataclass(frozen=True)
class LabeledDataset:
    samples: list
    class_names: list
    split_tag: str = "all"

    def __post_init__(self):
        k = len(self.class_names)
        for s in self.samples:
            if not 0 <= s.label < k:
                raise ValueError(f"label {s.label} out of range [0, {k})")

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def k(self) -> int:
        return len(self.class_names)

    def images(self) -> np.ndarray:
        return np.stack([s.image for s in self.samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    def flat_images(self) -> np.ndarray:
        return self.images().reshape(self.n, -1)


def _draw_glyph(img: np.ndarray, glyph: str, cy: int, cx: int, s: int, value: float):
    h, w = img.shape
    half = s // 2
    ii, jj = np.mgrid[0:h, 0:w]
    if glyph == "disc":
        mask = (ii - cy) ** 2 + (jj - cx) ** 2 <= half**2
    elif glyph == "square":
        mask = (np.abs(ii - cy) <= half) & (np.abs(jj - cx) <= half)
    elif glyph == "triangle":
        row = ii - (cy - half)
        mask = (row >= 0) & (row <= s) & (np.abs(jj - cx) * 2 <= row)
    elif glyph == "cross":
        t = max(1, s // 6)
        mask = ((np.abs(ii - cy) <= half) & (np.abs(jj - cx) <= t)) | (
            (np.abs(jj - cx) <= half) & (np.abs(ii - cy) <= t)
        )
    else:
        raise ValueError(f"unknown glyph {glyph!r}")
    img[mask] = value


def generate_synthetic(spec: TaskSpec, rng: Rng) -> LabeledDataset:
    """Render a balanced labeled dataset; bit-identical for a given seed."""
    h, w = spec.image_size
    samples = []
    for i in range(spec.n):
        label = i % spec.k
        glyph = GLYPHS[label % len(GLYPHS)]
        tier = label // len(GLYPHS)
        value = _TIER_INTENSITY[min(tier, len(_TIER_INTENSITY) - 1)]

        img = np.full((h, w), _BACKGROUND)
        if spec.noise_sigma > 0:
            img = img + rng.normal(0.0, spec.noise_sigma, (h, w))
        s = round(min(h, w) * rng.uniform(0.45, 0.7))
        half = s // 2
        cy = rng.integer(half + 1, h - half)
        cx = rng.integer(half + 1, w - half)
        _draw_glyph(img, glyph, cy, cx, s, value)
        img = np.clip(img, 0.0, 1.0)
        if spec.channels == 3:
            img = np.repeat(img[:, :, None], 3, axis=2)
        samples.append(Sample(image=img, label=label, origin_index=i))
    return LabeledDataset(samples=samples, class_names=spec.class_names, split_tag="all")


# pixel values are stored as maxval-scaled integers; P5 is binary grayscale
def write_pgm(path: Path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=2)
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path: Path) -> np.ndarray:
    """Decode a binary PGM (P5) file to floats in [0, 1]."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ValueError(f"unreadable PGM file {path}: {exc}") from exc
    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n)*\s*(\S+)").match(raw, pos)
        if not m:
            raise ValueError(f"corrupt PGM header in {path}")
        tokens.append(m.group(2))
        pos = m.end()
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM (P5) file: {path}")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise ValueError(f"corrupt PGM header in {path}")
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ValueError(f"corrupt PGM header in {path}")
    pos += 1  # single whitespace byte after maxval
    bytes_per = 1 if maxval < 256 else 2
    need = w * h * bytes_per
    body = raw[pos : pos + need]
    if len(body) != need:
        raise ValueError(f"truncated PGM data in {path}")
    dtype = np.uint8 if bytes_per == 1 else ">u2"
    data = np.frombuffer(body, dtype=dtype).reshape(h, w)
    return data.astype(np.float64) / maxval


def _resize_nearest(img: np.ndarray, size: tuple) -> np.ndarray:
    h, w = img.shape
    H, W = size
    if (h, w) == (H, W):
        return img
    ri = np.minimum((np.arange(H) + 0.5) * h / H, h - 1).astype(int)
    ci = np.minimum((np.arange(W) + 0.5) * w / W, w - 1).astype(int)
    return img[np.ix_(ri, ci)]


def load_directory(root, image_size: tuple = (32, 32)) -> LabeledDataset:
    """Load root/<class_name>/*.pgm; class index follows sorted subdir order."""
    root = Path(root)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"no class subdirectories under {root}")
    samples = []
    names = []
    index = 0
    for ci, cdir in enumerate(class_dirs):
        names.append(cdir.name)
        files = sorted(cdir.glob("*.pgm"))
        if not files:
            raise ValueError(f"class directory {cdir} holds no PGM files")
        for f in files:
            img = _resize_nearest(read_pgm(f), image_size)
            samples.append(Sample(image=img, label=ci, origin_index=index))
            index += 1
    return LabeledDataset(samples=samples, class_names=names, split_tag="all")


def save_directory(ds: LabeledDataset, root, splits: dict | None = None) -> Path:
    """Write the dataset as a PGM tree plus a JSON manifest.

    ``splits`` maps split tag -> list of dataset indices; the manifest lists
    (path, label, split) per file in dataset order. Rewriting the same
    dataset to a fresh directory is byte-identical.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    split_of = {}
    if splits:
        for tag, idxs in splits.items():
            for i in idxs:
                split_of[int(i)] = tag
    manifest = []
    for i, s in enumerate(ds.samples):
        cname = ds.class_names[s.label]
        cdir = root / cname
        cdir.mkdir(exist_ok=True)
        rel = f"{cname}/img_{i:04d}.pgm"
        write_pgm(root / rel, s.image)
        manifest.append(
            {"path": rel, "label": int(s.label), "split": split_of.get(i, "train")}
        )
    with open(root / "manifest.json", "w") as fh:
        json.dump({"class_names": list(ds.class_names), "files": manifest}, fh, indent=1)
    return root


def load_manifest(root, image_size: tuple = (32, 32)) -> dict:
    """Load a manifest-described PGM tree into per-split LabeledDatasets."""
    root = Path(root)
    with open(root / "manifest.json") as fh:
        meta = json.load(fh)
    names = list(meta["class_names"])
    buckets: dict[str, list] = {}
    for index, entry in enumerate(meta["files"]):
        img = _resize_nearest(read_pgm(root / entry["path"]), image_size)
        s = Sample(image=img, label=int(entry["label"]), origin_index=index)
        buckets.setdefault(entry["split"], []).append(s)
    return {
        tag: LabeledDataset(samples=ss, class_names=names, split_tag=tag)
        for tag, ss in buckets.items()
    }


def _largest_remainder(n: int, fractions) -> list[int]:
    raw = [n * f for f in fractions]
    counts = [int(np.floor(r)) for r in raw]
    rem = n - sum(counts)
    order = np.argsort([-(r - np.floor(r)) for r in raw], kind="stable")
    for j in range(rem):
        counts[order[j]] += 1
    return counts


def split(ds: LabeledDataset, fractions: tuple, rng: Rng):
    """Stratified (train, val, test) split; deterministic per seed.

    Every split must receive at least one sample of every class, otherwise
    the request is rejected.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError(f"need three positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1 within 1e-9, got {sum(fractions)}")
    tags = ("train", "val", "test")
    buckets: dict[str, list] = {t: [] for t in tags}
    labels = ds.labels()
    for c in range(ds.k):
        idx = np.flatnonzero(labels == c)
        counts = _largest_remainder(idx.size, fractions)
        if any(cnt == 0 for cnt in counts):
            raise ValueError(
                f"class {ds.class_names[c]} would leave a split empty "
                f"(class size {idx.size}, fractions {fractions})"
            )
        perm = idx[rng.permutation(idx.size)]
        start = 0
        for tag, cnt in zip(tags, counts):
            buckets[tag].extend(int(i) for i in perm[start : start + cnt])
            start += cnt
    out = []
    for tag in tags:
        chosen = sorted(buckets[tag])
        out.append(
            LabeledDataset(
                samples=[ds.samples[i] for i in chosen],
                class_names=list(ds.class_names),
                split_tag=tag,
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class NormParams:
    """Min-max normalization parameters, reusable on held-out data."""

    lo: float
    hi: float
    degenerate: bool = False

    def apply(self, image: np.ndarray) -> np.ndarray:
        if self.degenerate:
            return np.zeros_like(image)
        return np.clip((image - self.lo) / (self.hi - self.lo), 0.0, 1.0)


def normalize(ds: LabeledDataset, params: NormParams | None = None):
    """Min-max normalize pixel intensities to [0, 1]; returns (dataset, params).

    Data already inside the unit interval passes through untouched. When
    ``params`` is provided (test-set reuse) the recorded training range is
    applied instead of refitting. A constant dataset maps to zeros and is
    flagged.
    """
    if params is None:
        pixels = ds.images()
        lo, hi = float(pixels.min()), float(pixels.max())
        if hi == lo:
            params = NormParams(lo=lo, hi=hi, degenerate=True)
        elif lo >= 0.0 and hi <= 1.0:
            params = NormParams(lo=0.0, hi=1.0)
        else:
            params = NormParams(lo=lo, hi=hi)
    if not params.degenerate and (params.lo, params.hi) == (0.0, 1.0):
        return ds, params
    out = [
        Sample(
            image=params.apply(s.image),
            label=s.label,
            level=s.level,
            origin_index=s.origin_index,
            level_index=s.level_index,
            mask=s.mask,
        )
        for s in ds.samples
    ]
    return (
        LabeledDataset(samples=out, class_names=list(ds.class_names), split_tag=ds.split_tag),
        params,
    )
