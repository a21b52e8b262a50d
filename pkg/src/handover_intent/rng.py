"""Deterministic random-stream derivation.

Every random decision in the pipeline draws from a substream derived from a
single master seed plus a tuple of context labels, e.g.::

    substream(seed, "splits", participant_id)
    substream(seed, "lstm-init", participant_id, window_index, split_index)

Substreams are independent of scheduling: a task gets the same generator
whether it runs in the main thread or a worker, so parallel sweeps reproduce
serial results bit for bit.

Label tuples are hashed with SHA-256, so any hashable mix of ints and strings
is a valid context and collisions are not a practical concern.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(labels: tuple) -> list[int]:
    h = hashlib.sha256()
    for label in labels:
        h.update(repr(label).encode("utf-8"))
        h.update(b"\x1f")
    d = h.digest()
    return [int.from_bytes(d[i : i + 8], "little") for i in range(0, 32, 8)]


def substream(seed: int, *labels) -> np.random.Generator:
    """Return a generator for the substream named by ``labels``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + _digest(labels)))


def derive_seed(seed: int, *labels) -> int:
    """A plain integer seed for code that wants one (e.g. nested model inits)."""
    return int(substream(seed, *labels).integers(2**62))
