"""Gaussian random-access channel: active users, class choice, spreading, superposition.

Amplitudes and noise samples are rounded to a dyadic grid (multiples of
2**-32).  Every sum of such values that stays below 2**20 in magnitude is
exact in float64, so the receiver can subtract and re-add codewords without
rounding drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .codebook import CodebookConfig
from .polar import DEFAULT_CRC, CodeConstruction, construct_code, encode_message, mother_exponent_for
from .spreading import make_interleaver, positions

GRID = 2.0**-32


def quantize(x):
    return np.round(np.asarray(x, dtype=np.float64) / GRID) * GRID


def amplitude(power: float) -> float:
    return float(quantize(math.sqrt(power)))


@dataclass(frozen=True)
class SystemParams:
    k_a: int
    total_length: int = 30000
    block_length: int = 28000
    preamble_length: int = 2000
    payload_bits: int = 85
    preamble_bits: int = 15
    target_bler: float = 0.05

    def __post_init__(self):
        if self.total_length != self.block_length + self.preamble_length:
            raise ValueError("total length must equal block length + preamble length")

    @property
    def message_bits(self) -> int:
        return self.payload_bits + self.preamble_bits


def class_construction(config: CodebookConfig, class_index: int) -> CodeConstruction:
    """Polar code of a class, designed at its required SINR."""
    c = config.classes[class_index]
    return construct_code(mother_exponent_for(c.length), c.length, config.payload_bits,
                          config.crc_bits, config.snr_db[c.length])


@dataclass
class UserTx:
    user_id: int
    message: np.ndarray
    class_index: int
    seed: int
    codeword: np.ndarray  # code bits, length N_c
    amplitude: float
    block_length: int

    @property
    def positions(self) -> np.ndarray:
        return positions(make_interleaver(self.seed, self.block_length), self.codeword.size)

    @property
    def symbols(self) -> np.ndarray:
        return self.amplitude * (1.0 - 2.0 * self.codeword)

    @property
    def x(self) -> np.ndarray:
        """Transmitted block: +-amplitude on N_c positions, zero elsewhere."""
        out = np.zeros(self.block_length)
        out[self.positions] = self.symbols
        return out


@dataclass(frozen=True)
class SideInfo:
    """What the preamble decoder hands the receiver for one active user."""

    class_index: int
    seed: int


def sample_users(config: CodebookConfig, k_a: int, mode: str, rng) -> list:
    """Draw K_a active users.

    ``mode='fixed'`` puts exactly ``users`` users in every class (requires the
    counts to add up to K_a); ``'multinomial'`` draws each user's class
    independently with p = k / K_a.  Preamble indices, which double as
    interleaver seeds, are drawn without replacement from ``2**preamble_bits``.
    """
    if k_a == 0:
        return []
    counts = np.array([c.users for c in config.classes])
    if mode == "fixed":
        if counts.sum() != k_a:
            raise ValueError(f"fixed mode needs class counts summing to {k_a}")
        cls = np.repeat(np.arange(len(counts)), counts)
    elif mode == "multinomial":
        p = counts / counts.sum()
        cls = np.repeat(np.arange(len(counts)), rng.multinomial(k_a, p))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    space = 1 << config.preamble_bits
    if k_a > space:
        raise ValueError(f"{k_a} users exceed the {space} distinct preambles")
    messages = rng.integers(0, 2, size=(k_a, config.payload_bits), dtype=np.uint8)
    seeds = rng.choice(space, size=k_a, replace=False)
    users = []
    for uid in range(k_a):
        ci = int(cls[uid])
        con = class_construction(config, ci)
        users.append(UserTx(
            user_id=uid,
            message=messages[uid],
            class_index=ci,
            seed=int(seeds[uid]),
            codeword=encode_message(messages[uid], con, DEFAULT_CRC),
            amplitude=amplitude(config.classes[ci].power),
            block_length=config.block_length,
        ))
    return users


def superpose(users, block_length: int) -> np.ndarray:
    y = np.zeros(block_length)
    for u in users:
        y[u.positions] += u.symbols
    return y


def transmit(users, block_length: int, rng, noiseless: bool = False) -> np.ndarray:
    """Received block y = sum_i x_i + z with z ~ N(0, I)."""
    z = np.zeros(block_length) if noiseless else quantize(rng.standard_normal(block_length))
    return z + superpose(users, block_length)


def genie_preambles(users, p_miss: float = 0.0, rng=None) -> list:
    """Side information of the active users, each erased with probability p_miss.

    Returned in preamble order, so the receiver learns nothing about user ids.
    """
    info = [SideInfo(u.class_index, u.seed) for u in users]
    if p_miss > 0:
        keep = rng.random(len(info)) >= p_miss
        info = [s for s, k in zip(info, keep) if k]
    return sorted(info, key=lambda s: s.seed)


def preamble_collision_probability(k_a: int, preamble_bits: int) -> float:
    """Chance that two of K_a independent uniform preamble choices coincide."""
    space = 2**preamble_bits
    return 1.0 - math.prod(1.0 - i / space for i in range(k_a))


# --------------------------------------------------------------------------
# trial traces


@dataclass
class Trace:
    config: dict
    users: list = field(default_factory=list)  # (class_index, seed, message hex)
    side_info: list = field(default_factory=list)
    y: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "users": self.users,
                           "side_info": self.side_info, "y": self.y})

    @classmethod
    def from_json(cls, text: str) -> "Trace":
        return cls(**json.loads(text))


def message_key(message) -> str:
    return np.packbits(np.asarray(message, dtype=np.uint8)).tobytes().hex()


def make_trace(config: CodebookConfig, users, side_info, y) -> Trace:
    return Trace(
        config=config.to_dict(),
        users=[[u.class_index, u.seed, message_key(u.message)] for u in users],
        side_info=[[s.class_index, s.seed] for s in side_info],
        y=[float(v) for v in y],
    )
