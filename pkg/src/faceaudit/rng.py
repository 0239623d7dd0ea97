"""Toolkit-wide deterministic random number generation.

Every stochastic choice goes through :func:`make_rng`, which wraps numpy's
PCG64 bit generator seeded directly with the user's 64-bit seed. Sub-streams
(e.g. one per evaluation segment) are derived with :func:`derive_seed`, which
XORs the parent seed with the SplitMix64 hash of the sub-stream index.
"""

from __future__ import annotations

import numpy as np

from .errors import AuditError

SEED_MAX = 2**64 - 1
_MASK64 = 2**64 - 1


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise AuditError("bad-seed", f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise AuditError("bad-seed", f"seed must lie in [0, 2**64), got {seed}")
    return seed


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def splitmix64(x: int) -> int:
    """One SplitMix64 output step for state ``x`` (pure integer arithmetic)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    return check_seed(seed) ^ splitmix64(index)
