"""Counter-based random streams.

Every random quantity is addressed by a key (master seed, stream index)
and a position inside the stream, so results do not depend on the order
in which realizations are computed or on the number of workers.
"""

from __future__ import annotations

import numpy as np

Seed = int | tuple[int, ...]

_TWO_PI = 2 * np.pi


def philox_key(seed: Seed) -> np.ndarray:
    """Hash a seed (int or tuple of ints) into a 128-bit Philox key."""
    if isinstance(seed, (int, np.integer)):
        words = [int(seed)]
    else:
        words = [int(s) for s in seed]
    if any(w < 0 for w in words):
        raise ValueError(f"seed components must be non-negative, got {seed!r}")
    ss = np.random.SeedSequence(entropy=words[0], spawn_key=tuple(words[1:]))
    return ss.generate_state(2, dtype=np.uint64)


def derive_seed(master: int, *path: int) -> tuple[int, ...]:
    """Child seed for realization/stream ``path`` under ``master``."""
    return (int(master), *map(int, path))


def child(seed: Seed, *path: int) -> tuple[int, ...]:
    """Seed of a sub-stream of ``seed``."""
    base = (int(seed),) if isinstance(seed, (int, np.integer)) else tuple(int(s) for s in seed)
    return (*base, *map(int, path))


def uniforms(seed: Seed, n: int) -> np.ndarray:
    """First ``n`` open-interval uniforms of the stream keyed by ``seed``."""
    bg = np.random.Philox(key=philox_key(seed))
    raw = bg.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normal_pairs(seed: Seed, n_pairs: int) -> tuple[np.ndarray, np.ndarray]:
    """Pairs of independent standard normals; pair ``i`` depends only on (seed, i).

    Box-Muller on consecutive uniforms, so a longer request returns the
    shorter one as a prefix.
    """
    u = uniforms(seed, 2 * n_pairs).reshape(n_pairs, 2)
    rad = np.sqrt(-2.0 * np.log(u[:, 0]))
    ang = _TWO_PI * u[:, 1]
    return rad * np.cos(ang), rad * np.sin(ang)


def normals(seed: Seed, n: int) -> np.ndarray:
    """``n`` standard normals, prefix-stable in ``n``."""
    a, b = normal_pairs(seed, (n + 1) // 2)
    return np.column_stack([a, b]).ravel()[:n]


def generator(seed: Seed) -> np.random.Generator:
    """A numpy Generator on the Philox stream for ``seed`` (bootstrap etc.)."""
    return np.random.Generator(np.random.Philox(key=philox_key(seed)))
