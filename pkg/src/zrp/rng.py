"""xoshiro256++ with counter-mode seed derivation.

The same generator is implemented in the compiled kernel; both sides must
produce identical streams bit for bit, so replica output depends only on
(master seed, replica index) and never on the backend or scheduling.
"""

import hashlib
import math
import struct

_M64 = 0xFFFFFFFFFFFFFFFF
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


def derive_state(master_seed, replica, tag=b"dyn"):
    """blake2b(master_seed || replica || tag) -> 4 x u64 generator state."""
    msg = struct.pack("<QQ", master_seed & _M64, replica & _M64) + bytes(tag)
    digest = hashlib.blake2b(msg, digest_size=32).digest()
    s = struct.unpack("<4Q", digest)
    if not any(s):  # all-zero state is the one forbidden point
        s = (0x9E3779B97F4A7C15, 1, 2, 3)
    return s


class Xoshiro256PP:
    """Reference implementation; the compiled kernel mirrors it exactly."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, state):
        self.s0, self.s1, self.s2, self.s3 = (v & _M64 for v in state)

    @property
    def state(self):
        return (self.s0, self.s1, self.s2, self.s3)

    def next_u64(self):
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        tmp = (s0 + s3) & _M64
        result = ((tmp << 23) | (tmp >> 41)) & _M64
        result = (result + s0) & _M64
        t = (s1 << 17) & _M64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _M64
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def next_double(self):
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV53

    def next_exponential(self):
        return -math.log(1.0 - self.next_double())

    def uniforms(self, n):
        return [self.next_double() for _ in range(n)]
