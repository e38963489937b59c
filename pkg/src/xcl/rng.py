"""Deterministic randomness with named substreams.

Every source of randomness in the package hangs off an `Rng`, which is just a
64-bit seed plus a derivation path. Substreams are derived by purpose name
("init", "shuffle", "sampling", ...) so that unrelated consumers never share
a stream and adding a new consumer never perturbs existing ones.

The underlying generator is numpy's PCG64 seeded through SeedSequence with
the purpose path as spawn key: the same (seed, path) always reproduces the
same bit stream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def _purpose_key(purpose: str) -> int:
    # Stable across platforms and interpreter runs (unlike hash()).
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class Rng:
    """A seed plus derivation path; cheap to pass around and to split."""

    seed: int
    path: tuple[int, ...] = ()

    def child(self, purpose: str) -> "Rng":
        """Derive a named child; children with distinct purposes are independent."""
        return Rng(self.seed, self.path + (_purpose_key(purpose),))

    def generator(self) -> np.random.Generator:
        """Fresh generator for this node. Repeated calls restart the stream."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, purpose: str) -> np.random.Generator:
        """Shorthand for child(purpose).generator()."""
        return self.child(purpose).generator()
