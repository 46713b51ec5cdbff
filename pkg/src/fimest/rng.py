"""Deterministic counter-based random streams.

Every randomized operation in this package draws from a named, versioned
scheme so that an implementation in any language can reproduce the exact
byte stream. Scheme ``philox4x64-boxmuller-v1``:

* Stream: the Philox-4x64 counter-based generator (Salmon et al. 2011),
  keyed by the 128-bit pair ``(seed, stream)`` (two unsigned 64-bit words,
  seed first), counter starting at zero. This is numpy's ``Philox`` bit
  generator with ``key=[seed, stream]``.
* Uniform doubles: successive 64-bit outputs ``w`` are mapped to ``[0, 1)``
  by ``(w >> 11) * 2**-53`` (numpy's standard conversion).
* Gaussian variates: Box-Muller on consecutive uniform pairs. With pairs
  ``(u1, u2)`` drawn in stream order,

      r  = sqrt(-2 * log1p(-u1))        # log1p(-u1) == log(1 - u1)
      z0 = r * cos(2 * pi * u2)
      z1 = r * sin(2 * pi * u2)

  and variates are emitted interleaved ``z0, z1, z0, z1, ...``. A request
  for an odd count consumes a full final pair and discards its ``z1``.
* Matrices are filled row-major from the flat variate sequence.

Child seeds are derived from a master seed and an integer path with
chained splitmix64 finalizers (see ``derive_seed``), so independent
substreams never depend on scheduling or worker count.
"""

from __future__ import annotations

import numpy as np

RNG_SCHEME = "philox4x64-boxmuller-v1"

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """splitmix64 finalizer (Steele et al.), a 64-bit bijection."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, *path: int) -> int:
    """Derive a child seed from ``master`` and an integer path.

    Defined as ``x0 = mix64(master)``, then for each path component ``p``:
    ``x = mix64(x + GOLDEN + p mod 2**64)`` with ``GOLDEN = 0x9E3779B97F4A7C15``.
    Deterministic, order-sensitive, and cheap; distinct paths give
    independent-looking seeds.
    """
    x = _mix64(master & _MASK64)
    for part in path:
        x = _mix64((x + _GOLDEN + (int(part) & _MASK64)) & _MASK64)
    return x


class CounterRng:
    """One deterministic stream of scheme ``philox4x64-boxmuller-v1``.

    Instances are cheap; create one per (seed, stream) job rather than
    sharing a generator across jobs.
    """

    def __init__(self, seed: int, stream: int = 0):
        seed = int(seed)
        stream = int(stream)
        if not (0 <= seed <= _MASK64 and 0 <= stream <= _MASK64):
            raise ValueError("seed and stream must be unsigned 64-bit integers")
        self.seed = seed
        self.stream = stream
        key = np.array([seed, stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, count: int) -> np.ndarray:
        """Next ``count`` doubles, uniform on [0, 1)."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        return self._gen.random(count)

    def normals(self, count: int) -> np.ndarray:
        """Next ``count`` standard normal variates via Box-Muller."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs)
        u1 = u[0::2]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        ang = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(ang)
        out[1::2] = r * np.sin(ang)
        return out[:count]

    def normal_matrix(self, n: int, k: int) -> np.ndarray:
        """``n x k`` standard normal matrix, filled row-major."""
        return self.normals(n * k).reshape(n, k)
