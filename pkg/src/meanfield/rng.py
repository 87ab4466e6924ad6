"""Counter-based random streams built on the SplitMix64 finaliser.

Draw ``i`` of replica ``r`` under master seed ``s`` is a pure function::

    key_r = mix64(mix64(s) ^ (r * GOLDEN))
    u_i   = (mix64(key_r + (i + 1) * GOLDEN) >> 11) * 2**-53

so a replica produces the same numbers whichever batch or thread runs it.
All arithmetic is modulo 2**64. The constants below are pinned; changing
any of them changes every simulation result.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX_A = np.uint64(0xBF58476D1CE4E5B9)
MIX_B = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(v) for v in (30, 27, 31, 11))
_TWO_M53 = 2.0 ** -53

MAX_SEED = 2 ** 64 - 1


def mix64(z):
    """SplitMix64 finaliser on a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * MIX_A
    z = (z ^ (z >> _S27)) * MIX_B
    return z ^ (z >> _S31)


def replica_keys(master: int, replicas) -> np.ndarray:
    """Stream keys for the given replica indices."""
    if not 0 <= int(master) <= MAX_SEED:
        raise ValueError("seed must be an unsigned 64-bit integer")
    base = mix64(np.array([master], dtype=np.uint64))[0]
    idx = np.asarray(replicas, dtype=np.uint64)
    return mix64(base ^ (idx * GOLDEN))


def uniforms(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniform doubles in [0, 1) for each (key, counter) pair."""
    z = mix64(keys + (np.asarray(counters, dtype=np.uint64) + np.uint64(1)) * GOLDEN)
    return (z >> _S11).astype(np.float64) * _TWO_M53
