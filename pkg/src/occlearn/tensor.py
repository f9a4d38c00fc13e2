"""Dense float64 arrays and deterministic seeded random streams.

Every stochastic component in the package draws from an :class:`Rng`. An
``Rng`` is single-owner: concurrent work must ``fork`` independent child
streams instead of sharing one. Identical seeds give bit-identical draw
sequences, which is the backbone of the run-replay guarantee.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "Rng",
    "as_dense",
    "check_finite",
    "elementwise_mul",
    "rng_uniform",
]

_UINT64_MASK = (1 << 64) - 1


def as_dense(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Coerce ``data`` to a C-contiguous float64 array and validate it.

    All public array values in the package are float64 and row-major. Raises
    ``ValueError`` on non-finite entries or a shape mismatch.
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if shape is not None and tuple(arr.shape) != tuple(shape):
        raise ValueError(f"expected shape {tuple(shape)}, got {tuple(arr.shape)}")
    check_finite(arr)
    return arr


def check_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def elementwise_mul(a, b) -> np.ndarray:
    """Elementwise product of two arrays.

    ``b`` may either match ``a``'s shape exactly or match its leading spatial
    axes, in which case it is broadcast over the trailing channel axis (the
    mask-over-multichannel-image case). Any other combination is an error
    naming both shapes.
    """
    a = as_dense(a)
    b = as_dense(b)
    if a.shape == b.shape:
        return a * b
    if a.ndim == b.ndim + 1 and a.shape[: b.ndim] == b.shape:
        return a * b[..., np.newaxis]
    raise ValueError(
        f"shape mismatch in elementwise_mul: a has shape {a.shape}, "
        f"b has shape {b.shape}"
    )


class Rng:
    """Seeded random stream wrapping numpy's PCG64 generator.

    The full generator state is exposed for run logs so that a run can be
    replayed bit-exactly. Child streams derived with :meth:`fork` are
    statistically independent and fully determined by (seed, key).
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _UINT64_MASK
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        if not lo < hi:
            raise ValueError(f"uniform bounds require lo < hi, got [{lo}, {hi})")
        return float(self._gen.uniform(lo, hi))

    def uniforms(self, lo: float, hi: float, size) -> np.ndarray:
        if not lo < hi:
            raise ValueError(f"uniform bounds require lo < hi, got [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size=size)

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        if not lo < hi:
            raise ValueError(f"integer bounds require lo < hi, got [{lo}, {hi})")
        return int(self._gen.integers(lo, hi))

    def normal(self, mu: float = 0.0, sigma: float = 1.0, size=None) -> np.ndarray:
        return self._gen.normal(mu, sigma, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def fork(self, key: int) -> "Rng":
        """Derive an independent child stream keyed by an integer.

        The child seed is a stable function of (parent seed, key) only, so
        forks taken in any order or in parallel reproduce exactly.
        """
        child_seed = np.random.SeedSequence([self.seed, int(key)]).generate_state(
            1, np.uint64
        )[0]
        return Rng(int(child_seed))

    @property
    def state(self) -> dict:
        """JSON-serializable snapshot: seed plus the PCG64 internal state."""
        raw = self._gen.bit_generator.state
        return {
            "seed": self.seed,
            "pcg64": {
                "state": int(raw["state"]["state"]),
                "inc": int(raw["state"]["inc"]),
                "has_uint32": int(raw["has_uint32"]),
                "uinteger": int(raw["uinteger"]),
            },
        }

    def restore(self, state: dict) -> "Rng":
        self.seed = int(state["seed"])
        raw = self._gen.bit_generator.state
        raw["state"]["state"] = state["pcg64"]["state"]
        raw["state"]["inc"] = state["pcg64"]["inc"]
        raw["has_uint32"] = state["pcg64"]["has_uint32"]
        raw["uinteger"] = state["pcg64"]["uinteger"]
        self._gen.bit_generator.state = raw
        return self

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"


def rng_uniform(rng: Rng, lo: float, hi: float) -> float:
    """Draw one uniform float in [lo, hi), advancing the stream."""
    return rng.uniform(lo, hi)
