"""Encoding, puncturing and SC / CA-SCL decoding for a single polar code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ._kernels import polar_transform, scl_decode_kernel
from .construction import CodeConstruction, bit_reversal
from .crc import DEFAULT_CRC, CrcSpec, crc_append, crc_check_batch


@lru_cache(maxsize=None)
def _bitrev(n: int) -> np.ndarray:
    rev = bit_reversal(n)
    rev.setflags(write=False)
    return rev


def generator_matrix(n: int) -> np.ndarray:
    """Dense G_N = B_N F^{(x)n}; intended for small n (tests, brute force)."""
    f = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    g = np.ones((1, 1), dtype=np.uint8)
    for _ in range(n):
        g = np.kron(g, f)
    return g[_bitrev(n)]


def polar_encode(info_bits, construction: CodeConstruction) -> np.ndarray:
    """Codeword bits of length ``construction.length`` (punctured positions removed).

    ``info_bits`` may be 1-D or a 2-D batch (one message per row); frozen
    inputs are zero.
    """
    bits = np.asarray(info_bits, dtype=np.uint8)
    single = bits.ndim == 1
    bits = np.atleast_2d(bits)
    if bits.shape[1] != construction.k:
        raise ValueError(f"expected {construction.k} info bits, got {bits.shape[1]}")
    u = np.zeros((bits.shape[0], construction.mother_length), dtype=np.uint8)
    u[:, list(construction.info_set)] = bits
    v = polar_transform(u)
    x = v[:, _bitrev(construction.mother_exponent)][:, construction.puncture_count :]
    return x[0] if single else x


def encode_message(message, construction: CodeConstruction, crc: CrcSpec = DEFAULT_CRC):
    """Append the CRC to a payload and polar-encode it."""
    return polar_encode(crc_append(message, crc), construction)


def bpsk(bits, amplitude=1.0) -> np.ndarray:
    """Bit b -> (1 - 2b) * amplitude."""
    return amplitude * (1.0 - 2.0 * np.asarray(bits, dtype=np.float64))


def expand_punctured(llrs, construction: CodeConstruction) -> np.ndarray:
    """Mother-length LLR vector in codeword order, zeros on punctured positions."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size != construction.length:
        raise ValueError(f"expected {construction.length} LLRs, got {llrs.size}")
    full = np.zeros(construction.mother_length)
    full[construction.puncture_count :] = llrs
    return full


def _transform_order(llrs, construction):
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size == construction.length and construction.puncture_count:
        llrs = expand_punctured(llrs, construction)
    if llrs.size != construction.mother_length:
        raise ValueError("LLR length matches neither the code nor the mother code")
    return np.ascontiguousarray(llrs[_bitrev(construction.mother_exponent)])


@lru_cache(maxsize=256)
def _frozen_mask(construction: CodeConstruction) -> np.ndarray:
    m = construction.frozen_mask
    m.setflags(write=False)
    return m


def scl_list(llrs, construction: CodeConstruction, list_size: int):
    """Run the list decoder; return (info-bit rows, metrics) sorted best first.

    Equal metrics keep the lower list slot first.
    """
    if list_size < 1:
        raise ValueError("list size must be >= 1")
    v_llr = _transform_order(llrs, construction)
    u, pm = scl_decode_kernel(v_llr, _frozen_mask(construction), int(list_size))
    alive = np.isfinite(pm)
    order = np.argsort(pm, kind="stable")
    order = order[alive[order]]
    return u[order], pm[order]


def sc_decode(llrs, construction: CodeConstruction) -> np.ndarray:
    """Successive cancellation decision of the |I| information bits."""
    u, _ = scl_list(llrs, construction, 1)
    return u[0]


def ca_scl_decode(llrs, construction: CodeConstruction, list_size: int,
                  crc: CrcSpec = DEFAULT_CRC):
    """Payload bits of the most probable CRC-passing path, or None."""
    if construction.crc_bits != crc.width:
        raise ValueError("construction and CRC disagree on the CRC width")
    u, _ = scl_list(llrs, construction, list_size)
    ok = np.flatnonzero(crc_check_batch(u, crc))
    if ok.size == 0:
        return None
    return u[ok[0], : construction.payload_bits].copy()
