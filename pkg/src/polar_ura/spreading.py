"""Sparse spreading: zero-pad + interleave, and multi-user interference statistics.

Interleavers are Fisher-Yates shuffles driven by SplitMix64, so a seed yields
the same permutation on every platform and numpy version.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.special import gammaln
from scipy.stats import norm

_MASK64 = (1 << 64) - 1


@njit(cache=True)
def _splitmix_shuffle(seed, n):
    state = np.uint64(seed)
    perm = np.arange(n)
    golden = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)
    all_ones = np.uint64(0xFFFFFFFFFFFFFFFF)
    one = np.uint64(1)
    for i in range(n - 1, 0, -1):
        bound = np.uint64(i + 1)
        # rejection threshold removes modulo bias: 2^64 mod bound
        threshold = (all_ones % bound + one) % bound
        while True:
            state = state + golden
            z = state
            z = (z ^ (z >> np.uint64(30))) * m1
            z = (z ^ (z >> np.uint64(27))) * m2
            z = z ^ (z >> np.uint64(31))
            if z >= threshold:
                break
        j = np.int64(z % bound)
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return perm


@dataclass(frozen=True)
class Interleaver:
    seed: int
    block_length: int

    @property
    def permutation(self) -> np.ndarray:
        return _permutation(self.seed, self.block_length)


@lru_cache(maxsize=256)
def _permutation(seed: int, n: int) -> np.ndarray:
    seed &= _MASK64
    # numba takes the seed as int64; the kernel reinterprets the bits as uint64
    signed = seed - (1 << 64) if seed >= 1 << 63 else seed
    perm = _splitmix_shuffle(np.int64(signed), n).astype(np.int32)
    perm.setflags(write=False)
    return perm


def make_interleaver(seed: int, block_length: int) -> Interleaver:
    if block_length < 1:
        raise ValueError("block length must be >= 1")
    return Interleaver(int(seed) & _MASK64, int(block_length))


def positions(interleaver: Interleaver, n_c: int) -> np.ndarray:
    """Block positions occupied by codeword symbols 0..n_c-1."""
    if n_c > interleaver.block_length:
        raise ValueError("codeword longer than the block")
    return interleaver.permutation[:n_c]


def spread(codeword, interleaver: Interleaver, block_length: int | None = None) -> np.ndarray:
    """Zero-pad ``codeword`` to the block and place symbol i at ``perm[i]``."""
    codeword = np.asarray(codeword, dtype=np.float64)
    n = interleaver.block_length if block_length is None else block_length
    if n != interleaver.block_length:
        raise ValueError("interleaver built for a different block length")
    out = np.zeros(n)
    out[positions(interleaver, codeword.size)] = codeword
    return out


def despread_llrs(block_values, interleaver: Interleaver, n_c: int) -> np.ndarray:
    """Pull the ``n_c`` owned positions back into codeword order."""
    block_values = np.asarray(block_values)
    if block_values.size != interleaver.block_length:
        raise ValueError("block length mismatch")
    return block_values[positions(interleaver, n_c)]


@dataclass(frozen=True)
class InterferencePmf:
    k: int
    ratio: float
    probabilities: np.ndarray  # index m + k for m in -k..k

    @property
    def support(self) -> np.ndarray:
        return np.arange(-self.k, self.k + 1)

    @property
    def variance(self) -> float:
        m = self.support
        return float(np.sum(m * m * self.probabilities))

    def __getitem__(self, m: int) -> float:
        if abs(m) > self.k:
            return 0.0
        return float(self.probabilities[m + self.k])


def interference_pmf(k: int, n_c: int, n: int) -> InterferencePmf:
    """Distribution of the sum of unit-amplitude BPSK symbols at one block position.

    ``k`` users each occupy a position with probability ``n_c / n`` and send
    +-1 with equal probability.  With j of the ``o`` occupants sending +1 the
    sum is ``2j - o``.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if not 0 < n_c <= n:
        raise ValueError("need 0 < n_c <= n")
    rho = n_c / n
    probs = np.zeros(2 * k + 1)
    occ = np.arange(k + 1)
    log_binom_k = gammaln(k + 1) - gammaln(occ + 1) - gammaln(k - occ + 1)
    if rho == 1.0:
        log_occ = np.where(occ == k, 0.0, -np.inf)
    else:
        log_occ = log_binom_k + occ * np.log(rho) + (k - occ) * np.log1p(-rho)
    for o in range(k + 1):
        if not np.isfinite(log_occ[o]):
            continue
        j = np.arange(o + 1)
        log_sign = gammaln(o + 1) - gammaln(j + 1) - gammaln(o - j + 1) - o * np.log(2.0)
        np.add.at(probs, 2 * j - o + k, np.exp(log_occ[o] + log_sign))
    # the law is symmetric; averaging with the mirror removes rounding asymmetry
    probs = 0.5 * (probs + probs[::-1])
    return InterferencePmf(k, rho, probs)


def gaussian_approx_distance(pmf: InterferencePmf) -> dict:
    """Total-variation and Kolmogorov-Smirnov distance to N(0, k * rho).

    The Gaussian is binned onto the integer lattice with cells (m - 1/2, m + 1/2].
    """
    var = pmf.k * pmf.ratio
    if var == 0:
        return {"total_variation": 0.0, "kolmogorov_smirnov": 0.0}
    sd = np.sqrt(var)
    m = pmf.support
    upper = norm.cdf((m + 0.5) / sd)
    lower = norm.cdf((m - 0.5) / sd)
    mass = upper - lower
    outside = lower[0] + (1.0 - upper[-1])
    tv = 0.5 * (np.sum(np.abs(pmf.probabilities - mass)) + outside)
    ks = np.max(np.abs(np.cumsum(pmf.probabilities) - upper))
    ks = max(ks, lower[0])
    return {"total_variation": float(tv), "kolmogorov_smirnov": float(ks)}


def gaussian_masses(pmf: InterferencePmf) -> np.ndarray:
    var = pmf.k * pmf.ratio
    m = pmf.support
    if var == 0:
        return (m == 0).astype(float)
    sd = np.sqrt(var)
    return norm.cdf((m + 0.5) / sd) - norm.cdf((m - 0.5) / sd)
