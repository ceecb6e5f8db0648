"""Scrambled Sobol sequence generator.

Direction numbers come from the bundled Joe-Kuo table (``data/
joe-kuo-d1111.txt``, one line per dimension: ``d s a m_i...``), which
supports up to 1111 dimensions.  Points are produced in Gray-code order
with 32 fractional bits; optional Owen-style scrambling applies nested
digit flips driven by a per-dimension hash keyed on ``scramble_seed``.

Index 0 of the raw sequence is the all-zeros point, so generators start
at index 1 by default and every emitted coordinate is strictly inside
(0, 1).
"""

from __future__ import annotations

from importlib import resources

import numpy as np

__all__ = ["SobolEngine", "MAX_SOBOL_DIM"]

MAX_SOBOL_DIM = 1111
_NBITS = 32
_U64 = np.uint64

_direction_cache = None


def _load_direction_table():
    """Parse the bundled Joe-Kuo file into {dim: (s, a, [m_i...])}."""
    global _direction_cache
    if _direction_cache is None:
        table = {}
        text = resources.files("chainbo").joinpath("data/joe-kuo-d1111.txt").read_text()
        for line in text.splitlines()[1:]:
            parts = line.split()
            if not parts:
                continue
            d, s, a = int(parts[0]), int(parts[1]), int(parts[2])
            table[d] = (s, a, [int(v) for v in parts[3 : 3 + s]])
        _direction_cache = table
    return _direction_cache


def _direction_vectors(dim):
    """Direction integers V of shape (_NBITS, dim); V[j] encodes m_j / 2^j."""
    table = _load_direction_table()
    V = np.zeros((_NBITS, dim), dtype=_U64)
    # First coordinate: m_j = 1 for all j.
    for j in range(_NBITS):
        V[j, 0] = _U64(1) << _U64(_NBITS - 1 - j)
    for col in range(1, dim):
        s, a, m_init = table[col + 1]
        m = list(m_init)
        for j in range(s, _NBITS):
            new = m[j - s] ^ (m[j - s] << s)
            for k in range(1, s):
                if (a >> (s - 1 - k)) & 1:
                    new ^= m[j - k] << k
            m.append(new)
        for j in range(_NBITS):
            V[j, col] = _U64(m[j]) << _U64(_NBITS - 1 - j)
    return V


def _mix64(z):
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    z = (z + _U64(0x9E3779B97F4A7C15)) & _U64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def _owen_scramble(X, keys):
    """Nested digit scramble of integer points (n, dim) with 32-bit values.

    The flip of each bit is a hash of the (already scrambled) more
    significant bits, the per-dimension key and the bit depth, so equal
    prefixes scramble identically: dyadic intervals map onto dyadic
    intervals of the same size.
    """
    X = X.copy()
    keys = keys[None, :]
    for t in range(_NBITS):
        prefix = X >> _U64(_NBITS - t)
        salt = _U64(((t + 1) * 0xD1B54A32D192ED03) & 0xFFFFFFFFFFFFFFFF)
        h = _mix64(prefix ^ keys ^ salt)
        X ^= (h & _U64(1)) << _U64(_NBITS - 1 - t)
    return X


class SobolEngine:
    """Stateful Sobol point generator over [0, 1]^dim.

    Parameters
    ----------
    dim : int
        Number of coordinates, at most 1111 (direction-table bound).
    scramble_seed : int or None
        None disables scrambling; any integer selects one Owen scramble.
    start_index : int
        First sequence index to emit.  The default of 1 skips the
        all-zeros point.
    """

    def __init__(self, dim, scramble_seed=None, start_index=1):
        if dim < 1 or dim > MAX_SOBOL_DIM:
            raise ValueError(
                f"dim must be in [1, {MAX_SOBOL_DIM}], got {dim}"
            )
        self.dim = int(dim)
        self.scramble_seed = None if scramble_seed is None else int(scramble_seed)
        self.next_index = int(start_index)
        self._V = _direction_vectors(self.dim)
        if self.scramble_seed is None:
            self._keys = None
        else:
            base = _mix64(np.full(self.dim, self.scramble_seed, dtype=_U64))
            self._keys = _mix64(base + np.arange(1, self.dim + 1, dtype=_U64))

    def _raw(self, i0, n):
        """Integer points for sequence indices [i0, i0 + n) in Gray order."""
        idx = np.arange(i0, i0 + n, dtype=_U64)
        gray = idx ^ (idx >> _U64(1))
        X = np.zeros((n, self.dim), dtype=_U64)
        for b in range(_NBITS):
            mask = ((gray >> _U64(b)) & _U64(1)).astype(bool)
            if mask.any():
                X[mask] ^= self._V[b]
        return X

    def draw(self, n):
        """Next ``n`` points, advancing the sequence index."""
        n = int(n)
        if n < 0:
            raise ValueError("n must be non-negative")
        X = self._raw(self.next_index, n)
        self.next_index += n
        if self._keys is None:
            return X.astype(np.float64) * 2.0**-_NBITS
        X = _owen_scramble(X, self._keys)
        return (X.astype(np.float64) + 0.5) * 2.0**-_NBITS

    def fast_forward(self, n):
        """Skip ``n`` points without generating them."""
        self.next_index += int(n)
        return self
