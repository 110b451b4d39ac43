"""
Deterministic random substreams.

Every stochastic operation draws from a numpy Generator handed out by a
StreamFactory. A substream is fully determined by (master seed, label, index),
so work split into indexed chunks gives identical results whatever order or
process the chunks run in.
"""

import hashlib
import secrets
from dataclasses import dataclass
from typing import Tuple

import numpy as np

MAX_SEED = (1 << 64) - 1


def label_key(label: str) -> int:
    """Stable 64-bit key for a text label (blake2b digest)."""
    digest = hashlib.blake2b(label.encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little')


def auto_seed() -> int:
    """Fresh 63-bit master seed for runs that did not configure one."""
    return secrets.randbits(63)


@dataclass(frozen=True)
class StreamFactory:
    """Source of independent, replicable random substreams.

    Attributes:
        seed (int): Master seed in [0, 2^64)
        label (str): Experiment or operation label mixed into every substream
    """
    seed: int
    label: str = "lab"

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValueError(f"seed must lie in [0, 2^64), got {self.seed}")

    def _spawn_key(self, index: int) -> Tuple[int, int]:
        return (label_key(self.label), int(index))

    def substream(self, index: int) -> np.random.Generator:
        """Counter-based generator for substream `index`.

        Args:
            index: Non-negative substream index (trial, chunk, ...)

        Returns:
            numpy Generator backed by Philox, seeded from (seed, label, index)
        """
        if index < 0:
            raise ValueError(f"substream index must be non-negative, got {index}")
        sequence = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self._spawn_key(index))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, name: str) -> "StreamFactory":
        """Factory for a named sub-experiment, independent of the parent's substreams."""
        return StreamFactory(seed=self.seed, label=f"{self.label}/{name}")
