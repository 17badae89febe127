"""Deterministic counter-based random streams.

Every random quantity in this package is a pure function of
``(master_seed, stream tag, stream index, draw counter)``.  That buys three
things at once:

* lazy infinite geometry — cell randomness is addressed by cell index, no
  sequential generator state to fast-forward;
* reproducible, platform-independent experiment streams — particle ``i`` of
  experiment ``"gas:left"`` always sees the same numbers, regardless of
  execution order or worker count;
* exact agreement between the compiled kernel and the pure-Python kernel,
  which re-implement the same integer mixing expression for expression.

The mixer is the standard splitmix64 finalizer.  A stream with root ``s0``
produces draw ``k`` (0-based) as ``mix64(s0 + (k + 1) * GOLD)`` — a closed
form in ``k``, so whole draw ranges can be materialised with vectorised
integer ops (`Stream.unit_array`).

Uniform doubles use the usual 53-bit construction ``(x >> 11) * 2**-53``,
giving values in ``[0, 1)``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "GOLD",
    "MASK64",
    "mix64",
    "hash2",
    "tag64",
    "u01",
    "Stream",
]

MASK64 = (1 << 64) - 1
GOLD = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SEED_TWEAK = 0xA0761D6478BD642F
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

_NP_GOLD = np.uint64(GOLD)
_NP_M1 = np.uint64(_M1)
_NP_M2 = np.uint64(_M2)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def hash2(seed: int, a: int, b: int) -> int:
    """Hash a (seed, word, word) triple to a 64-bit value.

    Negative words (e.g. cell indices) are taken modulo 2**64, matching C's
    signed-to-unsigned conversion in the compiled kernel.
    """
    h = mix64((seed ^ _SEED_TWEAK) & MASK64)
    h = mix64((h + ((a & MASK64) * GOLD)) & MASK64)
    h = mix64((h + ((b & MASK64) * GOLD)) & MASK64)
    return h


def tag64(label: str) -> int:
    """FNV-1a 64 of an ASCII label; used to name experiment streams."""
    h = 0xCBF29CE484222325
    for byte in label.encode("ascii"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def u01(x: int) -> float:
    """Map a 64-bit word to a double in [0, 1)."""
    return (x >> 11) * _INV53


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _NP_M1
    z = (z ^ (z >> np.uint64(27))) * _NP_M2
    return z ^ (z >> np.uint64(31))


class Stream:
    """A named, counter-addressed stream of uniform variates.

    ``Stream.derive(seed, label, index)`` is the only constructor used by the
    simulation code; the (label, index) pair keys the stream, the internal
    counter ``k`` advances as draws are consumed.  Kernel entry points receive
    ``(s0, k)`` and report back the final counter, so a particle's Python-side
    draws (entry position, entry angle) and kernel-side draws (collision
    angles) share one stream without double counting.
    """

    __slots__ = ("s0", "k")

    def __init__(self, s0: int, k: int = 0):
        self.s0 = s0 & MASK64
        self.k = k

    @classmethod
    def derive(cls, master_seed: int, label: str | int, index: int = 0) -> "Stream":
        tag = tag64(label) if isinstance(label, str) else label
        return cls(hash2(master_seed, tag, index))

    def spawn(self, label: str | int, index: int = 0) -> "Stream":
        """Child stream keyed off this stream's root (not its counter)."""
        tag = tag64(label) if isinstance(label, str) else label
        return Stream(hash2(self.s0, tag, index))

    # -- scalar draws -------------------------------------------------------

    def next_u64(self) -> int:
        self.k += 1
        return mix64((self.s0 + self.k * GOLD) & MASK64)

    def unit(self) -> float:
        """Uniform double in [0, 1)."""
        return u01(self.next_u64())

    def symmetric(self) -> float:
        """Uniform double in [-1, 1)."""
        return 2.0 * self.unit() - 1.0

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.unit()

    def exponential(self, rate: float) -> float:
        # 1 - u in (0, 1], so the log is finite.
        return -float(np.log1p(-self.unit())) / rate

    # -- vectorised draws ---------------------------------------------------

    def unit_array(self, n: int) -> np.ndarray:
        """The next ``n`` uniform draws, bit-identical to ``n`` calls of unit()."""
        ks = np.arange(self.k + 1, self.k + n + 1, dtype=np.uint64)
        words = _mix64_np(np.uint64(self.s0) + ks * _NP_GOLD)
        self.k += n
        return (words >> np.uint64(11)) * _INV53

    # -- interop ------------------------------------------------------------

    def state(self) -> tuple[int, int]:
        return self.s0, self.k

    def numpy_rng(self, label: str = "numpy") -> np.random.Generator:
        """A numpy Generator seeded from this stream; used only for resampling
        (bootstrap indices), never for physics draws."""
        return np.random.Generator(np.random.PCG64(self.spawn(label).s0))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Stream(s0=0x{self.s0:016x}, k={self.k})"
