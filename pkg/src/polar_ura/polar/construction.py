"""Polar code construction by Gaussian-approximation density evolution.

Index conventions (0-based throughout):

* ``u`` positions index the polar transform input; ``info_set`` holds u indices.
* codeword positions index ``x = u @ G_N`` with ``G_N = B_N F^{(x)n}``; the
  first ``mother_length - N_c`` codeword positions are punctured.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import expit

_M_LO, _M_HI, _GRID = 1e-12, 400.0, 800


def bit_reversal(n: int) -> np.ndarray:
    """Permutation i -> bit-reversed i on n bits."""
    idx = np.arange(1 << n)
    rev = np.zeros_like(idx)
    for k in range(n):
        rev |= ((idx >> k) & 1) << (n - 1 - k)
    return rev


def _log_phi_exact(m: float) -> float:
    """log phi(m), phi(m) = E[1 - tanh(L/2)] = E[2 sigmoid(-L)], L ~ N(m, 2m)."""
    s = np.sqrt(2.0 * m)
    f = lambda z: 2.0 * expit(-(m + s * z)) * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    c = -m / s
    v = quad(f, -np.inf, c, epsabs=0, epsrel=1e-11, limit=200)[0]
    v += quad(f, c, np.inf, epsabs=0, epsrel=1e-11, limit=200)[0]
    return float(np.log(v))


def _log_phi_asym(m):
    return 0.5 * np.log(np.pi / m) - m / 4.0 + np.log1p(-10.0 / (7.0 * m))


@lru_cache(maxsize=1)
def _phi_table():
    log_m = np.linspace(np.log(_M_LO), np.log(_M_HI), _GRID)
    log_phi = np.array([_log_phi_exact(float(np.exp(x))) for x in log_m])
    # residual of the asymptotic series at the table edge, decays like 1/m
    tail_fix = log_phi[-1] - _log_phi_asym(_M_HI)
    return log_m, log_phi, tail_fix


def _log_phi(m):
    m = np.asarray(m, dtype=float)
    log_m, log_phi, tail_fix = _phi_table()
    out = -0.5 * m  # small-mean limit, phi ~ 1 - m/2
    mid = (m >= _M_LO) & (m <= _M_HI)
    out[mid] = np.interp(np.log(m[mid]), log_m, log_phi)
    big = m > _M_HI
    mb = m[big]
    out[big] = _log_phi_asym(mb) + tail_fix * _M_HI / mb
    return out


def _log_phi_inv(t):
    t = np.asarray(t, dtype=float)
    log_m, log_phi, _ = _phi_table()
    out = -2.0 * t
    mid = (t <= log_phi[0]) & (t >= log_phi[-1])
    # log_phi is decreasing in m
    out[mid] = np.exp(np.interp(t[mid], log_phi[::-1], log_m[::-1]))
    big = t < log_phi[-1]
    if np.any(big):
        tb = t[big]
        lo = np.full_like(tb, _M_HI)
        hi = np.maximum(2 * _M_HI, -8.0 * tb)
        for _ in range(100):
            mid_m = 0.5 * (lo + hi)
            go_up = _log_phi(mid_m) > tb
            lo = np.where(go_up, mid_m, lo)
            hi = np.where(go_up, hi, mid_m)
        out[big] = 0.5 * (lo + hi)
    return np.maximum(out, 0.0)


def _check_node_mean(a, b):
    """Mean LLR of the XOR of two bits with independent consistent-Gaussian LLRs."""
    la, lb = _log_phi(a), _log_phi(b)
    hi = np.maximum(la, lb)
    lo = np.minimum(la, lb)
    # log(phi_a + phi_b - phi_a phi_b) with hi >= lo
    t = hi + np.log1p(np.exp(lo - hi) * -np.expm1(hi))
    return _log_phi_inv(np.minimum(t, 0.0))


def ga_subchannel_means(channel_means) -> np.ndarray:
    """Propagate per-position channel LLR means (polar-transform order) to u indices."""
    m = np.asarray(channel_means, dtype=float)[None, :]
    while m.shape[1] > 1:
        h = m.shape[1] // 2
        a, b = m[:, :h], m[:, h:]
        m = np.stack([_check_node_mean(a, b), a + b], axis=1).reshape(-1, h)
    return m[:, 0]


@dataclass(frozen=True)
class CodeConstruction:
    mother_exponent: int
    length: int
    payload_bits: int
    crc_bits: int
    design_snr_db: float
    info_set: tuple = field(repr=False)

    @property
    def mother_length(self) -> int:
        return 1 << self.mother_exponent

    @property
    def puncture_count(self) -> int:
        return self.mother_length - self.length

    @property
    def k(self) -> int:
        return self.payload_bits + self.crc_bits

    @property
    def frozen_set(self) -> tuple:
        info = set(self.info_set)
        return tuple(i for i in range(self.mother_length) if i not in info)

    @property
    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.mother_length, dtype=np.bool_)
        mask[list(self.info_set)] = False
        return mask

    @property
    def punctured_positions(self) -> np.ndarray:
        return np.arange(self.puncture_count)

    def to_dict(self) -> dict:
        return {
            "mother_exponent": self.mother_exponent,
            "length": self.length,
            "payload_bits": self.payload_bits,
            "crc_bits": self.crc_bits,
            "design_snr_db": self.design_snr_db,
            "info_set": list(self.info_set),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CodeConstruction":
        return cls(
            mother_exponent=int(d["mother_exponent"]),
            length=int(d["length"]),
            payload_bits=int(d["payload_bits"]),
            crc_bits=int(d["crc_bits"]),
            design_snr_db=float(d["design_snr_db"]),
            info_set=tuple(sorted(int(i) for i in d["info_set"])),
        )


def mother_exponent_for(length: int) -> int:
    """Smallest n with 2**n >= length."""
    if length < 1:
        raise ValueError("code length must be positive")
    return max(int(length - 1).bit_length(), 1)


def construct_code(mother_exponent, length, payload_bits, crc_bits, design_snr_db):
    """Choose the information set of a (possibly punctured) polar code.

    Subchannel reliabilities come from GA density evolution with the channel
    LLR mean ``2 * snr`` on transmitted positions and 0 on punctured ones.
    The ``payload_bits + crc_bits`` largest means form the information set;
    ties go to the higher index.
    """
    n = int(mother_exponent)
    if n < 1:
        raise ValueError(f"invalid mother exponent {mother_exponent}")
    big = 1 << n
    if not (big // 2 < length <= big):
        raise ValueError(f"length {length} not in (2^{n - 1}, 2^{n}]")
    k = payload_bits + crc_bits
    if k > length or (k == length and length != big):
        raise ValueError(f"{k} bits do not fit a length-{length} code")
    return _construct(n, int(length), int(payload_bits), int(crc_bits), float(design_snr_db))


@lru_cache(maxsize=128)
def _construct(n, length, payload_bits, crc_bits, design_snr_db):
    big = 1 << n
    means = subchannel_means(n, length, design_snr_db)
    k = payload_bits + crc_bits
    # stable sort on (-mean, -index): most reliable first, higher index on ties
    order = np.lexsort((-np.arange(big), -means))
    info = tuple(sorted(int(i) for i in order[:k]))
    return CodeConstruction(n, length, payload_bits, crc_bits, design_snr_db, info)


def subchannel_means(n: int, length: int, design_snr_db: float) -> np.ndarray:
    big = 1 << n
    snr = 10.0 ** (design_snr_db / 10.0)
    channel = np.full(big, 2.0 * snr)
    # codeword position i holds transform output bit_reversal(i)
    channel[bit_reversal(n)[: big - length]] = 0.0
    return ga_subchannel_means(channel)
