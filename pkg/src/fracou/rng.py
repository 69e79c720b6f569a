"""Counter-based random streams keyed by (master seed, stream tag, replicate).

Every replicate gets its own ``Philox`` generator whose key is a pure
function of the master seed, a tag naming the stream and the replicate
index.  Results therefore do not depend on how replicates are scheduled.
"""

from dataclasses import dataclass
import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 finalizer (a bijection on 64-bit words)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def tag_hash(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


def check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= int(seed) <= MASK64:
        raise ValueError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return int(seed)


@dataclass(frozen=True)
class SeedPlan:
    """Derives independent replicate seeds from one master seed.

    ``derive(i) = splitmix64(base + i)`` with ``base`` mixed from the master
    seed and the tag.  Since ``splitmix64`` is a bijection and ``base + i``
    is distinct modulo 2^64 for distinct ``i``, so are the derived seeds.
    """

    master: int
    tag: str = "default"

    def __post_init__(self):
        object.__setattr__(self, "master", check_seed(self.master))

    @property
    def base(self) -> int:
        return splitmix64(self.master ^ tag_hash(self.tag))

    def derive(self, index: int) -> int:
        if index < 0:
            raise ValueError("replicate index must be >= 0")
        return splitmix64((self.base + int(index)) & MASK64)

    def generator(self, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.derive(index)))

    def child(self, tag: str) -> "SeedPlan":
        return SeedPlan(self.master, f"{self.tag}/{tag}")

    def normals(self, start: int, stop: int, size: int) -> np.ndarray:
        """Rows ``start..stop-1`` of standard normals, one row per replicate."""
        out = np.empty((stop - start, size))
        for r, i in enumerate(range(start, stop)):
            out[r] = self.generator(i).standard_normal(size)
        return out
