"""Non-reflected CRC with zero final XOR, operating on bit vectors (MSB first)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# x^12 + x^11 + x^3 + x^2 + x + 1
CRC12_POLY = 0x80F


@dataclass(frozen=True)
class CrcSpec:
    width: int = 12
    poly: int = CRC12_POLY
    init: int = 0

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("CRC width must be non-negative")
        if self.width and self.poly >> self.width:
            raise ValueError("polynomial must fit in `width` bits (implicit leading term)")

    def remainder(self, bits) -> np.ndarray:
        """Shift-register CRC of `bits`; returns `width` bits, MSB first."""
        w = self.width
        if w == 0:
            return np.zeros(0, dtype=np.uint8)
        top = 1 << (w - 1)
        mask = (1 << w) - 1
        reg = self.init & mask
        for b in np.asarray(bits, dtype=np.uint8):
            fb = ((reg & top) != 0) ^ bool(b)
            reg = (reg << 1) & mask
            if fb:
                reg ^= self.poly
        return np.array([(reg >> (w - 1 - i)) & 1 for i in range(w)], dtype=np.uint8)

    def generator(self, k: int) -> np.ndarray:
        """k x width matrix M with crc(m) = m @ M (mod 2) for zero init."""
        return _generator(self, k)


_GEN_CACHE: dict = {}


def _generator(spec: CrcSpec, k: int) -> np.ndarray:
    key = (spec, k)
    g = _GEN_CACHE.get(key)
    if g is None:
        if spec.init:
            raise ValueError("batched CRC needs a zero initial value")
        g = np.zeros((k, spec.width), dtype=np.uint8)
        unit = np.zeros(k, dtype=np.uint8)
        for i in range(k):
            unit[i] = 1
            g[i] = spec.remainder(unit)
            unit[i] = 0
        _GEN_CACHE[key] = g
    return g


DEFAULT_CRC = CrcSpec()


def crc_append(message, spec: CrcSpec = DEFAULT_CRC) -> np.ndarray:
    message = np.asarray(message, dtype=np.uint8)
    return np.concatenate([message, spec.remainder(message)])


def crc_check(bits, spec: CrcSpec = DEFAULT_CRC) -> bool:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size < spec.width:
        raise ValueError("input shorter than the CRC")
    k = bits.size - spec.width
    return bool(np.array_equal(spec.remainder(bits[:k]), bits[k:]))


def crc_check_batch(bits, spec: CrcSpec = DEFAULT_CRC) -> np.ndarray:
    """Vectorised crc_check over the rows of a 2-D bit array."""
    bits = np.asarray(bits, dtype=np.uint8)
    k = bits.shape[1] - spec.width
    if spec.width == 0:
        return np.ones(bits.shape[0], dtype=bool)
    if spec.init:
        return np.array([crc_check(row, spec) for row in bits])
    g = spec.generator(k).astype(np.int64)
    parity = (bits[:, :k].astype(np.int64) @ g) & 1
    return np.all(parity == bits[:, k:], axis=1)
