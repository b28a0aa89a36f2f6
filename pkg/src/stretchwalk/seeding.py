"""Deterministic seed derivation for replicated runs.

Replication ``r`` of a run with root seed ``s`` uses ``derive_seed(s, r)``,
a splitmix-style counter hash.  The scheme is append-only: growing the
replication count leaves the seeds (hence the draws) of earlier
replications untouched, so results can be merged deterministically no
matter how the replications were scheduled.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(root: int, index: int) -> int:
    """Return the 64-bit seed for replication ``index`` under ``root``."""
    if index < 0:
        raise ValueError("replication index must be >= 0")
    return _mix((int(root) + (index + 1) * _GOLDEN) & _MASK)
