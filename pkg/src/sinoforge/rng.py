"""Seed derivation and the package-wide random generator.

Every random draw comes from numpy's ``PCG64`` bit generator (PCG-XSL-RR
128/64, O'Neill 2014), whose output stream is fixed across platforms and
numpy releases. Sub-seeds are derived from a run seed plus a purpose string
and optional integers by hashing them with BLAKE2b (8-byte digest)::

    derive_seed(7, "patch", 96, 192)
      = int.from_bytes(blake2b(b"7|patch|96|192", digest_size=8), "little")

so two components never share a stream, and a patch's stream depends only on
its anchor and the run seed, not on processing order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, purpose: str, *parts: int) -> int:
    key = "|".join([str(int(seed)), purpose, *(str(int(p)) for p in parts)])
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
