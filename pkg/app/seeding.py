# app/seeding.py
"""
Seed derivation for reproducible, traversal-independent randomness.

Every random stream in the toolkit comes from one master seed. Streams for
episodes, trees and trials are derived by hashing the master with a salt
path; node-level randomness inside decision trees uses a splitmix64 hash
chain over the action path, so a node's action set never depends on the
order in which nodes were visited.
"""
from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / float(1 << 53)


def derive_seed(master: int, *salt: object) -> int:
    """
    Derives a 63-bit child seed from a master seed and a salt path.

    Args:
        master: The experiment's master seed.
        *salt: Any printable path components (purpose labels, indices).

    Returns:
        A non-negative integer below 2**63.
    """
    material = "-".join([str(int(master))] + [str(s) for s in salt])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def generator(master: int, *salt: object) -> np.random.Generator:
    """Returns a PCG64 generator seeded from `derive_seed(master, *salt)`."""
    return np.random.default_rng(derive_seed(master, *salt))


def splitmix64(x: int) -> int:
    """Scalar splitmix64 finaliser on a 64-bit unsigned integer."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorised splitmix64 over a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = x.astype(np.uint64) + np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def root_key(seed: int, stage: int) -> int:
    """Key of the root node of a tree sampled from `stage` under `seed`."""
    return splitmix64((splitmix64(int(seed) & MASK64) + (int(stage) & MASK64)) & MASK64)


def child_key(parent: int, action: int) -> int:
    """Key of the child reached from `parent` by `action`."""
    return splitmix64((parent + ((int(action) + 1) & MASK64) * GOLDEN_GAMMA) & MASK64)


def child_keys(parent: int, actions: np.ndarray) -> np.ndarray:
    """Vectorised `child_key` for many actions of the same parent."""
    with np.errstate(over="ignore"):
        offsets = (actions.astype(np.uint64) + np.uint64(1)) * np.uint64(GOLDEN_GAMMA)
        return splitmix64_array(np.uint64(parent) + offsets)


def key_uniform(key: int) -> float:
    """Maps a node key to a uniform in [0, 1) with 53 bits of precision."""
    return (splitmix64(key) >> 11) * _INV_2_53


def key_uniforms(keys: np.ndarray) -> np.ndarray:
    """Vectorised `key_uniform`."""
    return (splitmix64_array(keys) >> np.uint64(11)).astype(np.float64) * _INV_2_53
