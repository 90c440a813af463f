"""Deterministic seed splitting.

Every random stream in the package is obtained from ``derive_rng(seed, *keys)``
so that results depend only on the master seed and the logical position of
the stream (step size, path index, grid point, ...), never on execution order.
"""
import struct
import zlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    if isinstance(key, (float, np.floating)):
        return struct.unpack("<Q", struct.pack("<d", float(key)))[0]
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    raise TypeError(f"unsupported seed key {key!r}")


def derive_seed_sequence(seed, *keys):
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_to_int(k) for k in keys))


def derive_rng(seed, *keys):
    """Return an independent generator for the stream labelled by ``keys``."""
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, *keys)))
